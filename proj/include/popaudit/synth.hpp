#pragma once

#include <cstdint>
#include <vector>

#include "popaudit/core.hpp"

namespace popaudit {

struct SynthConfig {
    int users = 300;
    int items = 500;
    int genres = 10;
    double zipf_exponent = 1.0; // 0 gives a uniform item law
    int mean_profile_size = 30;
    double range_min = 1.0;
    double range_max = 5.0;
    // Per-user popularity affinity is drawn uniformly from this interval;
    // collapse it (min = max) to force a fixed affinity.
    double affinity_min = 0.0;
    double affinity_max = 1.0;
    std::uint64_t seed = 42;
};

// Popularity-skewed interaction data: per user, each profile item comes from
// the Zipf law with probability affinity and from the uniform law otherwise.
// Item 0 is the most popular by construction. Optionally reports the drawn
// per-user affinities for diagnostics.
InteractionDataset generate(const SynthConfig& config,
                            std::vector<double>* affinities_out = nullptr);

} // namespace popaudit
