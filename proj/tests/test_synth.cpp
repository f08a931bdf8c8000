#include <doctest.h>

#include <popaudit/stats.hpp>
#include <popaudit/stratify.hpp>
#include <popaudit/synth.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

using namespace popaudit;

namespace {

std::vector<long> item_counts(const InteractionDataset& ds) {
    std::vector<long> counts(static_cast<std::size_t>(ds.items), 0);
    for (const auto& r : ds.ratings) {
        counts[static_cast<std::size_t>(r.item)]++;
    }
    return counts;
}

} // namespace

TEST_CASE("generate is deterministic per seed") {
    SynthConfig cfg;
    cfg.users = 50;
    cfg.items = 60;
    cfg.mean_profile_size = 8;
    auto a = generate(cfg);
    auto b = generate(cfg);
    CHECK(a.ratings == b.ratings);
    CHECK(a.genres_of == b.genres_of);

    cfg.seed = 43;
    auto c = generate(cfg);
    CHECK(a.ratings != c.ratings);
}

TEST_CASE("generate output satisfies the dataset invariants") {
    SynthConfig cfg;
    cfg.users = 80;
    cfg.items = 100;
    cfg.mean_profile_size = 10;
    auto ds = generate(cfg);
    CHECK(ds.users == 80);
    CHECK(ds.items == 100);

    std::set<std::pair<UserId, ItemId>> seen;
    std::vector<int> profile(static_cast<std::size_t>(ds.users), 0);
    for (const auto& r : ds.ratings) {
        CHECK(seen.insert({r.user, r.item}).second); // no duplicate pair
        CHECK(r.value >= ds.range_min);
        CHECK(r.value <= ds.range_max);
        profile[static_cast<std::size_t>(r.user)]++;
    }
    // Poisson profile sizes are clamped to keep every user split-eligible.
    CHECK(*std::min_element(profile.begin(), profile.end()) >= 5);

    for (ItemId i = 0; i < ds.items; ++i) {
        CHECK(ds.genres(i).size() == 1);
    }
    CHECK(ds.genre_ids.size() == cfg.genres);
}

TEST_CASE("zipf exponent zero with full affinity gives uniform frequencies") {
    SynthConfig cfg;
    cfg.zipf_exponent = 0.0;
    cfg.affinity_min = 1.0;
    cfg.affinity_max = 1.0;
    auto ds = generate(cfg);
    auto counts = item_counts(ds);

    double n = static_cast<double>(ds.ratings.size());
    double p = 1.0 / static_cast<double>(ds.items);
    double mean = n * p;
    double sd = std::sqrt(n * p * (1.0 - p));
    int outside = 0;
    double max_z = 0.0;
    for (long c : counts) {
        double z = std::abs((static_cast<double>(c) - mean) / sd);
        max_z = std::max(max_z, z);
        if (z > 3.0) {
            ++outside;
        }
    }
    // A handful of 3-sigma excursions is expected over 500 items.
    CHECK(outside <= static_cast<int>(counts.size()) / 100);
    CHECK(max_z < 4.0);
}

TEST_CASE("default generator concentrates interactions on the head") {
    auto ds = generate(SynthConfig{});
    auto counts = item_counts(ds);

    SUBCASE("top-decile share matches the reference run") {
        std::vector<long> sorted = counts;
        std::sort(sorted.rbegin(), sorted.rend());
        long total = 0, top = 0;
        std::size_t decile = sorted.size() / 10;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            total += sorted[i];
            if (i < decile) {
                top += sorted[i];
            }
        }
        double share = static_cast<double>(top) / static_cast<double>(total);
        CHECK(std::abs(share - 0.3245) <= 0.05);
        CHECK(share > 3.0 * 0.1); // far above the uniform baseline
    }
    SUBCASE("rank curve is non-increasing and follows item order") {
        std::vector<long> sorted = counts;
        std::sort(sorted.rbegin(), sorted.rend());
        CHECK(std::is_sorted(sorted.begin(), sorted.end(), std::greater<>()));

        // Item ids are assigned in Zipf rank order, so counts trend down in id.
        std::vector<double> ids, freq;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            ids.push_back(static_cast<double>(i));
            freq.push_back(static_cast<double>(counts[i]));
        }
        auto rho = spearman(ids, freq);
        REQUIRE(rho.has_value());
        CHECK(*rho < -0.5);
    }
}

TEST_CASE("affinity drives profile popularity") {
    SynthConfig cfg;
    std::vector<double> affinities;
    auto ds = generate(cfg, &affinities);
    REQUIRE(affinities.size() == static_cast<std::size_t>(cfg.users));

    auto profile = popularity_profile(ds);
    std::vector<double> inclination;
    for (UserId u = 0; u < cfg.users; ++u) {
        REQUIRE(profile.has_inclination(u));
        inclination.push_back(profile.user_inclination[static_cast<std::size_t>(u)]);
    }
    auto rho = spearman(affinities, inclination);
    REQUIRE(rho.has_value());
    CHECK(*rho > 0.8);
}

TEST_CASE("generate rejects invalid configs listing every violation") {
    SynthConfig cfg;
    cfg.users = 0;
    cfg.zipf_exponent = -1.0;
    cfg.mean_profile_size = 1000; // exceeds items
    try {
        generate(cfg);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("users") != std::string::npos);
        CHECK(msg.find("zipf_exponent") != std::string::npos);
        CHECK(msg.find("mean_profile_size") != std::string::npos);
    }
}

TEST_CASE("generated keys follow the uN/iN/gN scheme") {
    SynthConfig cfg;
    cfg.users = 10;
    cfg.items = 20;
    cfg.genres = 3;
    cfg.mean_profile_size = 6;
    auto ds = generate(cfg);
    CHECK(ds.user_ids.key(0) == "u1");
    CHECK(ds.user_ids.key(9) == "u10");
    CHECK(ds.item_ids.key(7) == "i8");
    CHECK(ds.genre_ids.key(2) == "g3");
}
