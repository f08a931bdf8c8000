#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "popaudit/ingest.hpp"
#include "popaudit/pipeline.hpp"
#include "popaudit/synth.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitRuntime = 4;

// Optional string-valued flags; each provided flag becomes a config override
// so file values and flags share one validation path.
struct OverrideFlags {
    std::vector<std::pair<std::string, std::string>> values;

    void add(CLI::App* cmd, const std::string& flag, const std::string& key,
             const std::string& description) {
        cmd->add_option_function<std::string>(
            flag,
            [this, key](const std::string& value) { values.emplace_back(key, value); },
            description);
    }
};

int run_command(const std::string& config_path, const OverrideFlags& overrides) {
    std::string config_text;
    if (!config_path.empty()) {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) {
            std::cerr << "config error: cannot open config file: " << config_path << "\n";
            return kExitConfig;
        }
        std::ostringstream buffer;
        buffer << in.rdbuf();
        config_text = buffer.str();
    }
    popaudit::RunConfig config = popaudit::validate_config(config_text, overrides.values);
    popaudit::run_audit(config);
    std::cout << "audit complete: " << config.out_dir << "\n";
    return 0;
}

int stats_command(const std::string& ratings, const std::string& genres,
                  double range_min, double range_max,
                  const popaudit::ColumnLayout& layout) {
    if (!(range_min < range_max)) {
        throw popaudit::ConfigError("range_min must be below range_max");
    }
    popaudit::LoadReport report;
    popaudit::InteractionDataset dataset =
        popaudit::load_dataset(ratings, genres, range_min, range_max, layout, &report);
    if (report.unknown_genre_items > 0) {
        std::cerr << "warning: " << report.unknown_genre_items
                  << " genre line(s) referenced items absent from the ratings file\n";
    }
    std::cout << popaudit::format_statistics(popaudit::compute_statistics(dataset));
    return 0;
}

int synth_command(const popaudit::SynthConfig& config, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + out_dir + ": " +
                                 ec.message());
    }
    popaudit::InteractionDataset dataset;
    try {
        dataset = popaudit::generate(config);
    } catch (const std::invalid_argument& e) {
        throw popaudit::ConfigError(e.what());
    }
    std::string ratings_path = out_dir + "/ratings.tsv";
    std::string genres_path = out_dir + "/genres.tsv";
    popaudit::write_dataset(dataset, ratings_path, genres_path);
    std::cout << "wrote " << dataset.ratings.size() << " ratings for " << dataset.users
              << " users x " << dataset.items << " items to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Popularity-bias audit for collaborative-filtering recommenders"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run the full audit pipeline");
    std::string config_path;
    run->add_option("--config", config_path, "key = value config file");
    OverrideFlags overrides;
    overrides.add(run, "--mode", "mode", "synth | file (synth)");
    overrides.add(run, "--ratings", "ratings", "ratings TSV path (file mode)");
    overrides.add(run, "--genres", "genres", "genre TSV path");
    overrides.add(run, "--range-min", "range_min", "rating range lower bound (1)");
    overrides.add(run, "--range-max", "range_max", "rating range upper bound (5)");
    overrides.add(run, "--user-col", "user_col", "ratings user column (0)");
    overrides.add(run, "--item-col", "item_col", "ratings item column (1)");
    overrides.add(run, "--value-col", "value_col", "ratings value column (2)");
    overrides.add(run, "--genre-item-col", "genre_item_col", "genre file item column (0)");
    overrides.add(run, "--genre-list-col", "genre_list_col", "genre file list column (1)");
    overrides.add(run, "--algorithm", "algorithm", "userknn | nmf | both (both)");
    overrides.add(run, "--k", "k", "KNN neighborhood size (40)");
    overrides.add(run, "--factors", "factors", "NMF factor count (15)");
    overrides.add(run, "--iterations", "iterations", "NMF iterations (200)");
    overrides.add(run, "--n", "n", "recommendation list length (10)");
    overrides.add(run, "--test-fraction", "test_fraction", "per-user holdout share (0.2)");
    overrides.add(run, "--alpha", "alpha", "KL smoothing weight (0.01)");
    overrides.add(run, "--seed", "seed", "RNG seed (42)");
    overrides.add(run, "--popularity-scope", "popularity_scope", "train | full (train)");
    overrides.add(run, "--out", "out", "output directory (audit-out; env AUDIT_OUT_DIR overrides)");
    overrides.add(run, "--synth-users", "synth_users", "synthetic user count (300)");
    overrides.add(run, "--synth-items", "synth_items", "synthetic item count (500)");
    overrides.add(run, "--synth-genres", "synth_genres", "synthetic genre count (10)");
    overrides.add(run, "--synth-zipf-exponent", "synth_zipf_exponent", "item skew (1)");
    overrides.add(run, "--synth-mean-profile", "synth_mean_profile", "mean profile size (30)");
    overrides.add(run, "--synth-affinity-min", "synth_affinity_min", "affinity lower bound (0)");
    overrides.add(run, "--synth-affinity-max", "synth_affinity_max", "affinity upper bound (1)");
    run->footer("Config file keys (flags override the file):\n" + popaudit::config_key_help());

    auto* stats = app.add_subcommand("stats", "Print dataset statistics");
    std::string stats_ratings;
    std::string stats_genres;
    double stats_range_min = 0.0;
    double stats_range_max = 0.0;
    popaudit::ColumnLayout stats_layout;
    stats->add_option("--ratings", stats_ratings, "ratings TSV path")->required();
    stats->add_option("--genres", stats_genres, "genre TSV path");
    stats->add_option("--range-min", stats_range_min, "rating range lower bound")->required();
    stats->add_option("--range-max", stats_range_max, "rating range upper bound")->required();
    stats->add_option("--user-col", stats_layout.user_col, "ratings user column (0)");
    stats->add_option("--item-col", stats_layout.item_col, "ratings item column (1)");
    stats->add_option("--value-col", stats_layout.value_col, "ratings value column (2)");
    stats->add_option("--genre-item-col", stats_layout.genre_item_col, "genre item column (0)");
    stats->add_option("--genre-list-col", stats_layout.genre_list_col, "genre list column (1)");

    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
    popaudit::SynthConfig synth_config;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--users", synth_config.users, "user count (300)");
    synth->add_option("--items", synth_config.items, "item count (500)");
    synth->add_option("--genres", synth_config.genres, "genre count (10)");
    synth->add_option("--zipf-exponent", synth_config.zipf_exponent, "item skew (1)");
    synth->add_option("--mean-profile", synth_config.mean_profile_size,
                      "mean ratings per user (30)");
    synth->add_option("--range-min", synth_config.range_min, "rating range lower bound (1)");
    synth->add_option("--range-max", synth_config.range_max, "rating range upper bound (5)");
    synth->add_option("--affinity-min", synth_config.affinity_min, "affinity lower bound (0)");
    synth->add_option("--affinity-max", synth_config.affinity_max, "affinity upper bound (1)");
    synth->add_option("--seed", synth_config.seed, "RNG seed (42)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (run->parsed()) {
            return run_command(config_path, overrides);
        }
        if (stats->parsed()) {
            return stats_command(stats_ratings, stats_genres, stats_range_min,
                                 stats_range_max, stats_layout);
        }
        return synth_command(synth_config, synth_out);
    } catch (const popaudit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const popaudit::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
