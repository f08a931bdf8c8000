// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit when any
// blocking criterion fails. Criterion 5 needs the external full-scale datasets
// and reports SKIP when they are not mounted; it never blocks.
#include <popaudit/ingest.hpp>
#include <popaudit/metrics.hpp>
#include <popaudit/pipeline.hpp>
#include <popaudit/recommenders.hpp>
#include <popaudit/rng.hpp>
#include <popaudit/stats.hpp>
#include <popaudit/synth.hpp>

#include "knn_oracle.hpp"
#include "welch_reference.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace popaudit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> problems;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            problems.push_back(what);
        }
    }
};

fs::path work_dir() {
    static fs::path dir = [] {
        auto p = fs::temp_directory_path() /
                 ("popaudit-acceptance-" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// group -> (mc, pl) out of a group_report_*.csv
std::map<std::string, std::pair<double, double>> read_group_mc_pl(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line); // header: group,users,mae,mc,pl,...
    std::map<std::string, std::pair<double, double>> result;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (start <= line.size()) {
            auto comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (fields.size() >= 5) {
            result[fields[0]] = {std::stod(fields[3]), std::stod(fields[4])};
        }
    }
    return result;
}

std::map<std::string, double> read_group_mae(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::map<std::string, double> result;
    while (std::getline(in, line)) {
        auto first = line.find(',');
        auto second = line.find(',', first + 1);
        auto third = line.find(',', second + 1);
        result[line.substr(0, first)] =
            std::stod(line.substr(second + 1, third - second - 1));
    }
    return result;
}

GenreDistribution random_distribution(rng::Engine& gen, int genres) {
    std::vector<std::pair<GenreId, double>> weights;
    for (GenreId g = 0; g < genres; ++g) {
        weights.push_back({g, rng::uniform01(gen) + 1e-6});
    }
    return GenreDistribution(std::move(weights));
}

RunConfig desk_config(const fs::path& out, std::uint64_t seed) {
    RunConfig config = validate_config("", {});
    // Reference desk-scale setup: 300 users x 500 items, Zipf 1.0, sparse
    // 5-item mean profiles, 50-item lists. Pinned together with the seeds.
    config.synth.mean_profile_size = 5;
    config.n = 50;
    config.seed = seed;
    config.synth.seed = seed;
    config.out_dir = out.string();
    return config;
}

Outcome criterion_metrics() {
    Outcome o;
    rng::Engine gen(1);
    for (int trial = 0; trial < 1000; ++trial) {
        int genres = 2 + static_cast<int>(rng::below(gen, 7));
        auto p = random_distribution(gen, genres);
        auto q = random_distribution(gen, genres);
        double kl = kl_miscalibration(p, q, 0.01);
        o.require(kl >= -1e-12, "KL negative on random pair");
        o.require(kl_miscalibration(p, p, 0.01) <= 1e-12, "KL(p,p) above 1e-12");
    }
    GenreDistribution p({{0, 0.8}, {1, 0.2}});
    GenreDistribution q({{0, 0.5}, {1, 0.5}});
    o.require(std::abs(kl_miscalibration(p, q, 1e-9) - 0.1927448) <= 1e-6,
              "KL worked value off in the alpha->0 limit");

    o.require(std::abs(popularity_lift(0.2, 0.3) - 0.5) <= 1e-12, "PL(0.2, 0.3) != 0.5");
    o.require(popularity_lift(0.7, 0.7) == 0.0, "PL at gap_q = gap_p != 0");
    o.require(popularity_lift(0.3, 0.0) == -1.0, "PL at gap_q = 0 != -1");

    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<double, double>> pairs, shifted;
        int size = 1 + static_cast<int>(rng::below(gen, 15));
        double shift = rng::uniform(gen, -20.0, 20.0);
        for (int j = 0; j < size; ++j) {
            double a = rng::uniform(gen, -5.0, 5.0);
            double b = rng::uniform(gen, -5.0, 5.0);
            pairs.push_back({a, b});
            shifted.push_back({a + shift, b + shift});
        }
        o.require(std::abs(mae(pairs) - mae(shifted)) <= 1e-9,
                  "MAE not translation-invariant");
    }
    return o;
}

Outcome criterion_recommenders() {
    Outcome o;
    rng::Engine gen(2);
    for (int instance = 0; instance < 50; ++instance) {
        int k = 1 + static_cast<int>(rng::below(gen, 6));
        std::vector<Rating> ratings;
        for (UserId u = 0; u < 20; ++u) {
            for (ItemId i = 0; i < 15; ++i) {
                if (rng::uniform01(gen) < 0.35) {
                    ratings.push_back({u, i, 1.0 + static_cast<double>(rng::below(gen, 5))});
                }
            }
        }
        SparseMatrix m(20, 15, ratings, 1.0, 5.0);
        auto model = knn_fit(m, k);
        for (UserId u = 0; u < 20 && o.pass; ++u) {
            for (ItemId i = 0; i < 15; ++i) {
                if (model.predict(u, i) != oracle_predict(m, k, u, i)) {
                    o.require(false, "KNN differs from the brute-force oracle");
                    break;
                }
            }
        }
    }

    for (int instance = 0; instance < 10; ++instance) {
        std::vector<Rating> ratings;
        for (UserId u = 0; u < 50; ++u) {
            for (ItemId i = 0; i < 40; ++i) {
                if (rng::uniform01(gen) < 0.25) {
                    ratings.push_back({u, i, rng::uniform(gen, 1.0, 5.0)});
                }
            }
        }
        SparseMatrix m(50, 40, ratings, 1.0, 5.0);
        auto model = nmf_fit(m, 6, 200, 1000 + static_cast<std::uint64_t>(instance));
        const auto& loss = model.loss_history();
        for (std::size_t t = 1; t < loss.size(); ++t) {
            o.require(loss[t] <= loss[t - 1] * (1.0 + 1e-9) + 1e-15,
                      "NMF loss increased at step " + std::to_string(t));
        }
        for (UserId u = 0; u < 50; ++u) {
            for (double w : model.user_factors(u)) {
                o.require(w >= 0.0, "negative W factor");
            }
        }
        for (ItemId i = 0; i < 40; ++i) {
            for (double h : model.item_factors(i)) {
                o.require(h >= 0.0, "negative H factor");
            }
        }
    }

    std::vector<Rating> rank1 = {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 4.0}};
    SparseMatrix m(2, 2, rank1, 1.0, 4.0);
    auto model = nmf_fit(m, 1, 500, 42);
    o.require(model.loss_history().back() < 1e-6, "rank-1 NMF loss not below 1e-6");
    return o;
}

Outcome criterion_statistics() {
    Outcome o;
    std::vector<double> a = {1, 2, 3, 4, 5};
    std::vector<double> b = {2, 3, 4, 5, 6};
    auto r = welch_t_test(a, b);
    o.require(std::abs(r.t - (-1.0)) <= 1e-12, "worked Welch t is not -1");
    o.require(std::abs(r.p - 0.3466) <= 1e-4, "worked Welch p is not 0.3466");

    for (const auto& c : welch_reference_cases()) {
        auto got = welch_t_test(c.a, c.b);
        o.require(std::abs(got.t - c.t) <= 1e-6 * std::max(1.0, std::abs(c.t)),
                  "Welch t off reference by more than 1e-6");
        o.require(std::abs(got.p - c.p) <= 1e-6, "Welch p off reference by more than 1e-6");
    }

    std::vector<double> low = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
    std::vector<double> high = {10, 10, 10, 10, 10, 10, 10, 10, 10, 11};
    o.require(welch_t_test(low, high).p < 1e-6, "distant samples not separated");
    return o;
}

Outcome criterion_desk_scale() {
    Outcome o;
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::map<std::string, int> mc_holds, pl_holds;
    for (std::uint64_t seed : seeds) {
        auto out = work_dir() / ("desk-seed" + std::to_string(seed));
        run_audit(desk_config(out, seed));
        for (const std::string algo : {"userknn", "nmf"}) {
            auto groups = read_group_mc_pl(out / ("group_report_" + algo + ".csv"));
            if (groups.size() != 3) {
                o.require(false, "group report incomplete for " + algo);
                continue;
            }
            if (groups["LowPop"].first >= groups["HighPop"].first) {
                mc_holds[algo]++;
            }
            if (groups["LowPop"].second >= groups["HighPop"].second) {
                pl_holds[algo]++;
            }
        }
    }
    for (const std::string algo : {"userknn", "nmf"}) {
        o.require(mc_holds[algo] >= 4, "MC(LowPop) >= MC(HighPop) held only " +
                                           std::to_string(mc_holds[algo]) + "/5 for " + algo);
        o.require(pl_holds[algo] >= 4, "PL(LowPop) >= PL(HighPop) held only " +
                                           std::to_string(pl_holds[algo]) + "/5 for " + algo);
    }

    // reference run: seed 42 pins the UserKNN popularity correlation
    auto ref = work_dir() / "desk-ref";
    run_audit(desk_config(ref, 42));
    auto manifest = nlohmann::json::parse(slurp(ref / "manifest.json"));
    auto rho_json = manifest["notes"]["popfreq_correlation"]["userknn"]["spearman"];
    o.require(!rho_json.is_null(), "UserKNN Spearman missing from the manifest");
    if (!rho_json.is_null()) {
        double rho = rho_json.get<double>();
        o.require(rho > 0.5, "UserKNN popularity-frequency Spearman not above 0.5");
        o.require(std::abs(rho - 0.6836008572599577) <= 0.1,
                  "UserKNN Spearman drifted from the pinned reference");
    }

    // 300 users stratify into equal thirds
    std::ifstream inclination(ref / "inclination.csv");
    std::string line;
    std::getline(inclination, line);
    std::map<std::string, int> group_sizes;
    while (std::getline(inclination, line)) {
        group_sizes[line.substr(line.rfind(',') + 1)]++;
    }
    o.require(group_sizes["LowPop"] == 100 && group_sizes["MedPop"] == 100 &&
                  group_sizes["HighPop"] == 100,
              "group sizes are not 100/100/100");
    return o;
}

Outcome criterion_full_scale(bool& skipped) {
    Outcome o;
    const char* root = std::getenv("AUDIT_ZENODO_DIR");
    if (root == nullptr) {
        skipped = true;
        return o;
    }
    skipped = false;
    auto ratings = fs::path(root) / "movielens_ratings.tsv";
    auto genres = fs::path(root) / "movielens_genres.tsv";
    o.require(fs::exists(ratings), "missing " + ratings.string());
    if (!o.pass) {
        return o;
    }
    RunConfig config = validate_config("", {});
    config.mode = DataMode::File;
    config.ratings_path = ratings.string();
    config.genres_path = fs::exists(genres) ? genres.string() : "";
    config.range_min = 1.0;
    config.range_max = 5.0;
    config.range_min_set = true;
    config.range_max_set = true;
    config.algorithm = Algorithm::UserKnn;
    config.out_dir = (work_dir() / "full-movielens").string();
    run_audit(config);

    auto mae_by_group =
        read_group_mae(fs::path(config.out_dir) / "group_report_userknn.csv");
    const std::map<std::string, double> reference = {
        {"LowPop", 0.80}, {"MedPop", 0.75}, {"HighPop", 0.72}};
    for (const auto& [group, expected] : reference) {
        double got = mae_by_group[group];
        std::cerr << "  full-scale MAE " << group << " = " << got << "\n";
        o.require(std::abs(got - expected) <= 0.07,
                  group + " MAE outside expected +-0.07 window");
    }
    o.require(mae_by_group["LowPop"] >= mae_by_group["MedPop"] &&
                  mae_by_group["LowPop"] >= mae_by_group["HighPop"],
              "LowPop is not the worst MAE group");

    auto report = slurp(fs::path(config.out_dir) / "group_report_userknn.csv");
    std::istringstream in(report);
    std::string line;
    std::getline(in, line);
    bool significant = true;
    while (std::getline(in, line)) {
        if (line.rfind("MedPop", 0) == 0 || line.rfind("HighPop", 0) == 0) {
            // mae_significant column follows mae_p
            std::vector<std::string> fields;
            std::size_t start = 0;
            while (start <= line.size()) {
                auto comma = line.find(',', start);
                if (comma == std::string::npos) {
                    fields.push_back(line.substr(start));
                    break;
                }
                fields.push_back(line.substr(start, comma - start));
                start = comma + 1;
            }
            significant = significant && fields.size() > 8 && fields[8] == "1";
        }
    }
    o.require(significant, "LowPop MAE difference not significant at 0.05");
    return o;
}

Outcome criterion_determinism() {
    Outcome o;
    auto first = work_dir() / "det-a";
    auto second = work_dir() / "det-b";
    run_audit(desk_config(first, 42));
    run_audit(desk_config(second, 42));
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(first)) {
        auto name = entry.path().filename();
        o.require(fs::exists(second / name), "missing rerun artifact " + name.string());
        o.require(slurp(entry.path()) == slurp(second / name),
                  "artifact differs across reruns: " + name.string());
        ++compared;
    }
    o.require(compared == 13, "unexpected artifact count");
    return o;
}

int report(int index, const std::string& name, const Outcome& o, double seconds) {
    std::ostringstream line;
    line << "criterion " << index << " (" << name << "): "
         << (o.pass ? "PASS" : "FAIL") << " [" << std::fixed << std::setprecision(1)
         << seconds << "s]";
    std::cout << line.str() << "\n";
    for (const auto& problem : o.problems) {
        std::cout << "  - " << problem << "\n";
    }
    return o.pass ? 0 : 1;
}

} // namespace

int main() {
    using clock = std::chrono::steady_clock;
    int failures = 0;

    auto timed = [&](int index, const std::string& name, double budget, auto&& fn) {
        auto start = clock::now();
        Outcome o = fn();
        auto seconds = std::chrono::duration<double>(clock::now() - start).count();
        if (budget > 0.0 && seconds >= budget) {
            o.require(false, "runtime budget of " + std::to_string(budget) + "s exceeded");
        }
        failures += report(index, name, o, seconds);
    };

    timed(1, "metric correctness", 5.0, criterion_metrics);
    timed(2, "recommender correctness", 30.0, criterion_recommenders);
    timed(3, "statistics", 5.0, criterion_statistics);
    timed(4, "desk-scale reproduction", 120.0, criterion_desk_scale);

    {
        auto start = clock::now();
        bool skipped = false;
        Outcome o = criterion_full_scale(skipped);
        auto seconds = std::chrono::duration<double>(clock::now() - start).count();
        if (skipped) {
            std::cout << "criterion 5 (full-scale best-effort): SKIP "
                         "(AUDIT_ZENODO_DIR not set; not CI-blocking)\n";
        } else {
            // best-effort: report but never block
            report(5, "full-scale best-effort", o, seconds);
        }
    }

    timed(6, "determinism", 0.0, criterion_determinism);

    fs::remove_all(work_dir());
    return failures == 0 ? 0 : 1;
}
