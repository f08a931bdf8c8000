#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "popaudit/core.hpp"
#include "popaudit/ingest.hpp"
#include "popaudit/synth.hpp"

namespace popaudit {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Algorithm { UserKnn, Nmf, Both };
enum class DataMode { Synth, File };
enum class PopularityScope { Train, Full };

struct RunConfig {
    DataMode mode = DataMode::Synth;
    std::string ratings_path;
    std::string genres_path;
    double range_min = 1.0;
    double range_max = 5.0;
    bool range_min_set = false; // file mode demands an explicit range
    bool range_max_set = false;
    ColumnLayout columns;
    SynthConfig synth;
    Algorithm algorithm = Algorithm::Both;
    int k = 40;
    int factors = 15;
    int iterations = 200;
    int n = 10;
    double test_fraction = 0.2;
    double alpha = 0.01;
    std::uint64_t seed = 42;
    PopularityScope popularity_scope = PopularityScope::Train;
    std::string out_dir = "audit-out";
};

// Parses `key = value` text ('#' comments, blank lines allowed), then applies
// the AUDIT_OUT_DIR environment override and finally the given CLI overrides
// (same key names). Throws ConfigError listing every violation at once.
RunConfig validate_config(const std::string& config_text,
                          const std::vector<std::pair<std::string, std::string>>& overrides);

// The accepted config keys with their default values, for --help output.
std::string config_key_help();

// Full pipeline: ingest/generate, split, stratify, fit, recommend, evaluate,
// report, manifest. Artifacts land in config.out_dir; on a stage failure all
// files written so far are renamed to *.incomplete and the error is rethrown
// prefixed with the stage name.
void run_audit(const RunConfig& config);

} // namespace popaudit
