#include "popaudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "popaudit/rng.hpp"

namespace popaudit {

namespace {

void check_config(const SynthConfig& c) {
    std::string problems;
    auto bad = [&problems](const std::string& msg) {
        if (!problems.empty()) {
            problems += "; ";
        }
        problems += msg;
    };
    if (c.users < 1) bad("users must be positive");
    if (c.items < 1) bad("items must be positive");
    if (c.genres < 1) bad("genres must be positive");
    if (c.mean_profile_size < 1) bad("mean_profile_size must be positive");
    if (c.mean_profile_size > c.items) bad("mean_profile_size must not exceed items");
    if (!(c.zipf_exponent >= 0.0)) bad("zipf_exponent must be >= 0");
    if (!(c.range_min < c.range_max)) bad("range_min must be below range_max");
    if (!(0.0 <= c.affinity_min && c.affinity_min <= c.affinity_max && c.affinity_max <= 1.0)) {
        bad("affinity interval must satisfy 0 <= min <= max <= 1");
    }
    if (!problems.empty()) {
        throw std::invalid_argument(problems);
    }
}

} // namespace

InteractionDataset generate(const SynthConfig& config,
                            std::vector<double>* affinities_out) {
    check_config(config);

    InteractionDataset dataset;
    dataset.range_min = config.range_min;
    dataset.range_max = config.range_max;
    for (int u = 0; u < config.users; ++u) {
        dataset.user_ids.intern("u" + std::to_string(u + 1));
    }
    for (int i = 0; i < config.items; ++i) {
        dataset.item_ids.intern("i" + std::to_string(i + 1));
    }
    for (int g = 0; g < config.genres; ++g) {
        dataset.genre_ids.intern("g" + std::to_string(g + 1));
    }
    dataset.users = config.users;
    dataset.items = config.items;

    rng::Engine gen(config.seed);

    // Inverse-CDF table: weight of item i is (i+1)^-s, so item 0 is the head.
    std::vector<double> cdf(static_cast<std::size_t>(config.items));
    double total = 0.0;
    for (int i = 0; i < config.items; ++i) {
        total += std::pow(static_cast<double>(i + 1), -config.zipf_exponent);
        cdf[static_cast<std::size_t>(i)] = total;
    }
    for (double& c : cdf) {
        c /= total;
    }
    auto draw_zipf = [&cdf, &gen]() {
        double u = rng::uniform01(gen);
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) {
            --it;
        }
        return static_cast<ItemId>(it - cdf.begin());
    };

    dataset.genres_of.assign(static_cast<std::size_t>(config.items), {});
    for (int i = 0; i < config.items; ++i) {
        dataset.genres_of[static_cast<std::size_t>(i)].push_back(
            static_cast<GenreId>(rng::below(gen, static_cast<std::uint64_t>(config.genres))));
    }

    if (affinities_out) {
        affinities_out->clear();
        affinities_out->reserve(static_cast<std::size_t>(config.users));
    }
    // Fixed draw order per user: affinity, profile size, then for each
    // accepted item its rating value. Duplicate item draws are re-sampled.
    for (int u = 0; u < config.users; ++u) {
        double affinity = rng::uniform(gen, config.affinity_min, config.affinity_max);
        if (affinities_out) {
            affinities_out->push_back(affinity);
        }
        int size = std::clamp(rng::poisson(gen, static_cast<double>(config.mean_profile_size)),
                              5, config.items);
        std::unordered_set<ItemId> picked;
        while (static_cast<int>(picked.size()) < size) {
            ItemId item = rng::uniform01(gen) < affinity
                              ? draw_zipf()
                              : static_cast<ItemId>(rng::below(
                                    gen, static_cast<std::uint64_t>(config.items)));
            if (!picked.insert(item).second) {
                continue;
            }
            double value = rng::uniform(gen, config.range_min, config.range_max);
            dataset.ratings.push_back({u, item, value});
        }
    }
    return dataset;
}

} // namespace popaudit
