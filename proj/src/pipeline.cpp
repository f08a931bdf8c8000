#include "popaudit/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "popaudit/metrics.hpp"
#include "popaudit/recommenders.hpp"
#include "popaudit/stats.hpp"
#include "popaudit/stratify.hpp"
#include "popaudit/textio.hpp"

namespace popaudit {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    return text;
}

struct ConfigParser {
    RunConfig config;
    std::vector<std::string> violations;

    void fail(const std::string& message) { violations.push_back(message); }

    void set_int(const std::string& key, const std::string& value, int& target,
                 int min_value, const char* constraint) {
        auto parsed = textio::parse_int(value);
        if (!parsed) {
            fail(key + ": not an integer: '" + value + "'");
        } else if (*parsed < min_value || *parsed > 1000000000) {
            fail(key + ": " + constraint + ", got " + value);
        } else {
            target = static_cast<int>(*parsed);
        }
    }

    void set_real(const std::string& key, const std::string& value, double& target) {
        auto parsed = textio::parse_double(value);
        if (!parsed) {
            fail(key + ": not a number: '" + value + "'");
        } else {
            target = *parsed;
        }
    }

    void apply(const std::string& key, const std::string& value) {
        if (key == "mode") {
            if (value == "synth") {
                config.mode = DataMode::Synth;
            } else if (value == "file") {
                config.mode = DataMode::File;
            } else {
                fail("mode: expected 'synth' or 'file', got '" + value + "'");
            }
        } else if (key == "ratings") {
            config.ratings_path = value;
        } else if (key == "genres") {
            config.genres_path = value;
        } else if (key == "range_min") {
            set_real(key, value, config.range_min);
            config.range_min_set = true;
        } else if (key == "range_max") {
            set_real(key, value, config.range_max);
            config.range_max_set = true;
        } else if (key == "user_col") {
            set_int(key, value, config.columns.user_col, 0, "must be >= 0");
        } else if (key == "item_col") {
            set_int(key, value, config.columns.item_col, 0, "must be >= 0");
        } else if (key == "value_col") {
            set_int(key, value, config.columns.value_col, 0, "must be >= 0");
        } else if (key == "genre_item_col") {
            set_int(key, value, config.columns.genre_item_col, 0, "must be >= 0");
        } else if (key == "genre_list_col") {
            set_int(key, value, config.columns.genre_list_col, 0, "must be >= 0");
        } else if (key == "algorithm") {
            if (value == "userknn") {
                config.algorithm = Algorithm::UserKnn;
            } else if (value == "nmf") {
                config.algorithm = Algorithm::Nmf;
            } else if (value == "both") {
                config.algorithm = Algorithm::Both;
            } else {
                fail("algorithm: expected 'userknn', 'nmf' or 'both', got '" + value + "'");
            }
        } else if (key == "k") {
            set_int(key, value, config.k, 1, "must be >= 1");
        } else if (key == "factors") {
            set_int(key, value, config.factors, 1, "must be >= 1");
        } else if (key == "iterations") {
            set_int(key, value, config.iterations, 1, "must be >= 1");
        } else if (key == "n") {
            set_int(key, value, config.n, 1, "must be >= 1");
        } else if (key == "test_fraction") {
            set_real(key, value, config.test_fraction);
        } else if (key == "alpha") {
            set_real(key, value, config.alpha);
        } else if (key == "seed") {
            auto parsed = textio::parse_int(value);
            if (!parsed || *parsed < 0) {
                fail("seed: expected a nonnegative integer, got '" + value + "'");
            } else {
                config.seed = static_cast<std::uint64_t>(*parsed);
            }
        } else if (key == "popularity_scope") {
            if (value == "train") {
                config.popularity_scope = PopularityScope::Train;
            } else if (value == "full") {
                config.popularity_scope = PopularityScope::Full;
            } else {
                fail("popularity_scope: expected 'train' or 'full', got '" + value + "'");
            }
        } else if (key == "out") {
            config.out_dir = value;
        } else if (key == "synth_users") {
            set_int(key, value, config.synth.users, 1, "must be >= 1");
        } else if (key == "synth_items") {
            set_int(key, value, config.synth.items, 1, "must be >= 1");
        } else if (key == "synth_genres") {
            set_int(key, value, config.synth.genres, 1, "must be >= 1");
        } else if (key == "synth_zipf_exponent") {
            set_real(key, value, config.synth.zipf_exponent);
        } else if (key == "synth_mean_profile") {
            set_int(key, value, config.synth.mean_profile_size, 1, "must be >= 1");
        } else if (key == "synth_affinity_min") {
            set_real(key, value, config.synth.affinity_min);
        } else if (key == "synth_affinity_max") {
            set_real(key, value, config.synth.affinity_max);
        } else {
            fail("unknown key '" + key + "'");
        }
    }

    void finish() {
        if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
            fail("test_fraction: must lie in (0, 1)");
        }
        if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
            fail("alpha: must lie in (0, 1)");
        }
        if (!(config.range_min < config.range_max)) {
            fail("range_min must be below range_max");
        }
        if (config.out_dir.empty()) {
            fail("out: output directory must not be empty");
        }
        if (config.mode == DataMode::File) {
            if (config.ratings_path.empty()) {
                fail("file mode requires a ratings path");
            }
            if (!config.range_min_set || !config.range_max_set) {
                fail("file mode requires explicit range_min and range_max");
            }
        } else {
            if (config.synth.mean_profile_size > config.synth.items) {
                fail("synth_mean_profile must not exceed synth_items");
            }
            if (!(config.synth.zipf_exponent >= 0.0)) {
                fail("synth_zipf_exponent must be >= 0");
            }
            if (!(0.0 <= config.synth.affinity_min &&
                  config.synth.affinity_min <= config.synth.affinity_max &&
                  config.synth.affinity_max <= 1.0)) {
                fail("synth affinity interval must satisfy 0 <= min <= max <= 1");
            }
        }
        // The synthetic generator shares the run-level range and seed.
        config.synth.range_min = config.range_min;
        config.synth.range_max = config.range_max;
        config.synth.seed = config.seed;
    }
};

class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        fs::path path = dir_ / name;
        {
            std::ofstream out(path, std::ios::binary);
            if (!out) {
                throw std::runtime_error("cannot write output file: " + path.string());
            }
            out << content;
            if (!out.flush()) {
                throw std::runtime_error("failed writing output file: " + path.string());
            }
        }
        checksums_.emplace_back(name, textio::to_hex(textio::fnv1a64(content)));
        written_.push_back(std::move(path));
    }

    void mark_incomplete() noexcept {
        for (const fs::path& path : written_) {
            std::error_code ec;
            fs::rename(path, fs::path(path.string() + ".incomplete"), ec);
        }
    }

    const std::vector<std::pair<std::string, std::string>>& checksums() const {
        return checksums_;
    }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> checksums_;
    std::vector<fs::path> written_;
};

template <typename Fn>
void stage(const std::string& name, OutputSet& outputs, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        outputs.mark_incomplete();
        throw ConfigError("stage " + name + ": " + e.what());
    } catch (const InputError& e) {
        outputs.mark_incomplete();
        throw InputError("stage " + name + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        // the config is validated before any stage runs, so argument
        // violations here can only come from the data
        outputs.mark_incomplete();
        throw InputError("stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
        outputs.mark_incomplete();
        throw std::runtime_error("stage " + name + ": " + e.what());
    }
}

void parallel_chunks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    if (workers <= 1 || count < 2 * workers) {
        body(0, count);
        return;
    }
    std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (std::size_t begin = 0; begin < count; begin += chunk) {
        pool.emplace_back(body, begin, std::min(count, begin + chunk));
    }
    for (std::thread& t : pool) {
        t.join();
    }
}

struct AlgoResult {
    std::vector<RecommendationList> lists;
    std::vector<UserMetricRow> rows;
    GroupReport report;
    PopFreqSeries popfreq;
    int users_without_candidates = 0;
};

std::string dataset_stats_csv(const DatasetStatistics& stats) {
    std::ostringstream out;
    out << "users,items,ratings,genres,ratings_per_user,ratings_per_item,"
           "sparsity,range_min,range_max\n";
    out << stats.users << ',' << stats.items << ',' << stats.ratings << ','
        << stats.genres << ',' << textio::format_double(stats.ratings_per_user) << ','
        << textio::format_double(stats.ratings_per_item) << ','
        << textio::format_double(stats.sparsity) << ','
        << textio::format_double(stats.range_min) << ','
        << textio::format_double(stats.range_max) << '\n';
    return out.str();
}

} // namespace

RunConfig validate_config(const std::string& config_text,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
    ConfigParser parser;
    std::size_t line_no = 0;
    for (std::string_view line : textio::split(config_text, '\n')) {
        ++line_no;
        std::string_view content = trim(line);
        if (content.empty() || content.front() == '#') {
            continue;
        }
        std::size_t eq = content.find('=');
        if (eq == std::string_view::npos) {
            parser.fail("line " + std::to_string(line_no) + ": expected key = value");
            continue;
        }
        parser.apply(std::string(trim(content.substr(0, eq))),
                     std::string(trim(content.substr(eq + 1))));
    }
    if (const char* env_out = std::getenv("AUDIT_OUT_DIR"); env_out && *env_out) {
        parser.apply("out", env_out);
    }
    for (const auto& [key, value] : overrides) {
        parser.apply(key, value);
    }
    parser.finish();
    if (!parser.violations.empty()) {
        std::string message = "invalid configuration: ";
        for (std::size_t i = 0; i < parser.violations.size(); ++i) {
            if (i > 0) {
                message += "; ";
            }
            message += parser.violations[i];
        }
        throw ConfigError(message);
    }
    return parser.config;
}

std::string config_key_help() {
    return "mode = synth | file             (synth)\n"
           "ratings = PATH                  ratings TSV, file mode\n"
           "genres = PATH                   genre TSV, optional\n"
           "range_min = REAL                rating range lower bound (1; required in file mode)\n"
           "range_max = REAL                rating range upper bound (5; required in file mode)\n"
           "user_col / item_col / value_col          ratings columns (0/1/2)\n"
           "genre_item_col / genre_list_col          genre columns (0/1)\n"
           "algorithm = userknn | nmf | both         (both)\n"
           "k = INT                         KNN neighborhood size (40)\n"
           "factors = INT                   NMF factor count (15)\n"
           "iterations = INT                NMF iterations (200)\n"
           "n = INT                         recommendation list length (10)\n"
           "test_fraction = REAL            per-user holdout share (0.2)\n"
           "alpha = REAL                    KL smoothing weight (0.01)\n"
           "seed = INT                      RNG seed (42)\n"
           "popularity_scope = train | full          popularity source (train)\n"
           "out = DIR                       output directory (audit-out)\n"
           "synth_users / synth_items / synth_genres (300/500/10)\n"
           "synth_zipf_exponent = REAL      item skew (1)\n"
           "synth_mean_profile = INT        mean ratings per user (30)\n"
           "synth_affinity_min / synth_affinity_max  (0/1)\n";
}

namespace {

AlgoResult evaluate_algorithm(const RatingPredictor& model, const SparseMatrix& matrix,
                              const InteractionDataset& train,
                              const std::vector<std::vector<std::pair<ItemId, double>>>& test_by_user,
                              const PopularityProfile& profile, const UserGroups& groups,
                              const std::vector<UserId>& grouped, const RunConfig& config) {
    AlgoResult result;
    result.lists.resize(grouped.size());
    parallel_chunks(grouped.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            result.lists[j] = top_n(model, grouped[j], config.n, matrix);
        }
    });

    result.rows.reserve(grouped.size());
    for (std::size_t j = 0; j < grouped.size(); ++j) {
        UserId u = grouped[j];
        const RecommendationList& list = result.lists[j];
        if (list.entries.empty()) {
            ++result.users_without_candidates;
            continue;
        }
        UserMetricRow row;
        row.user = u;
        row.group = *groups.group_of(u);

        const auto& held_out = test_by_user[static_cast<std::size_t>(u)];
        if (!held_out.empty()) {
            std::vector<std::pair<double, double>> pairs;
            pairs.reserve(held_out.size());
            for (const auto& [item, actual] : held_out) {
                pairs.push_back({model.predict(u, item), actual});
            }
            row.mae = mae(pairs);
        }

        std::vector<ItemId> profile_items;
        profile_items.reserve(matrix.row(u).size());
        for (const RowEntry& e : matrix.row(u)) {
            profile_items.push_back(e.item);
        }
        GenreDistribution p = genre_distribution(profile_items, train);
        std::vector<ItemId> list_items;
        list_items.reserve(list.entries.size());
        for (const ScoredItem& entry : list.entries) {
            list_items.push_back(entry.item);
        }
        GenreDistribution q = genre_distribution(list_items, train);
        if (!p.empty() && !q.empty()) {
            row.mc = kl_miscalibration(p, q, config.alpha);
        }

        row.gap_p = profile.user_inclination[static_cast<std::size_t>(u)];
        double q_pop = 0.0;
        for (ItemId item : list_items) {
            q_pop += profile.item_popularity[static_cast<std::size_t>(item)];
        }
        row.gap_q = q_pop / static_cast<double>(list_items.size());
        result.rows.push_back(std::move(row));
    }

    std::array<GroupGap, 3> gaps{};
    std::array<int, 3> counts{};
    for (const UserMetricRow& row : result.rows) {
        auto g = static_cast<std::size_t>(row.group);
        gaps[g].gap_p += row.gap_p;
        gaps[g].gap_q += row.gap_q;
        ++counts[g];
    }
    for (std::size_t g = 0; g < 3; ++g) {
        if (counts[g] > 0) {
            gaps[g].gap_p /= counts[g];
            gaps[g].gap_q /= counts[g];
        }
    }
    result.report = build_group_report(result.rows, gaps);
    result.popfreq = pop_freq_correlation(result.lists, train);
    return result;
}

std::string user_lift_csv(const std::vector<UserMetricRow>& rows, const IdMap& user_ids) {
    std::ostringstream out;
    out << "user,group,lift\n";
    for (const UserMetricRow& row : rows) {
        out << textio::csv_field(user_ids.key(row.user)) << ','
            << group_label(row.group) << ','
            << textio::format_double(popularity_lift(row.gap_p, row.gap_q)) << '\n';
    }
    return out.str();
}

} // namespace

void run_audit(const RunConfig& config) {
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + config.out_dir +
                                 ": " + ec.message());
    }
    OutputSet outputs(config.out_dir);

    InteractionDataset dataset;
    LoadReport load_report;
    stage("ingest", outputs, [&] {
        if (config.mode == DataMode::File) {
            dataset = load_dataset(config.ratings_path, config.genres_path,
                                   config.range_min, config.range_max,
                                   config.columns, &load_report);
        } else {
            dataset = generate(config.synth);
        }
        outputs.write("dataset_stats.csv", dataset_stats_csv(compute_statistics(dataset)));
    });

    SplitResult split;
    stage("split", outputs, [&] {
        split = train_test_split(dataset, config.test_fraction, config.seed);
    });

    PopularityProfile profile;
    UserGroups groups;
    stage("stratify", outputs, [&] {
        profile = popularity_profile(config.popularity_scope == PopularityScope::Train
                                         ? split.train
                                         : dataset);
        groups = split_groups(profile);
        std::ostringstream inclination;
        write_inclination_csv(inclination, profile, groups, dataset.user_ids);
        outputs.write("inclination.csv", inclination.str());
    });

    std::vector<UserId> grouped;
    for (std::size_t u = 0; u < groups.assignment.size(); ++u) {
        if (groups.assignment[u] >= 0) {
            grouped.push_back(static_cast<UserId>(u));
        }
    }
    std::vector<std::vector<std::pair<ItemId, double>>> test_by_user(
        static_cast<std::size_t>(dataset.users));
    for (const Rating& r : split.test.ratings) {
        test_by_user[static_cast<std::size_t>(r.user)].push_back({r.item, r.value});
    }

    SparseMatrix matrix;
    stage("train-matrix", outputs, [&] { matrix = build_matrix(split.train); });

    struct AlgoNote {
        std::string algo;
        int users_without_candidates = 0;
        std::optional<double> pearson;
        std::optional<double> spearman;
    };
    std::vector<AlgoNote> algo_notes;
    std::vector<std::string> algo_names;
    if (config.algorithm != Algorithm::Nmf) {
        algo_names.push_back("userknn");
    }
    if (config.algorithm != Algorithm::UserKnn) {
        algo_names.push_back("nmf");
    }
    for (const std::string& algo : algo_names) {
        std::optional<KnnModel> knn;
        std::optional<NmfModel> nmf;
        const RatingPredictor* model = nullptr;
        stage("train:" + algo, outputs, [&] {
            if (algo == "userknn") {
                knn.emplace(knn_fit(matrix, config.k));
                model = &*knn;
            } else {
                nmf.emplace(nmf_fit(matrix, config.factors, config.iterations, config.seed));
                model = &*nmf;
            }
        });

        AlgoResult result;
        stage("evaluate:" + algo, outputs, [&] {
            result = evaluate_algorithm(*model, matrix, split.train, test_by_user,
                                        profile, groups, grouped, config);
        });

        stage("report:" + algo, outputs, [&] {
            std::ostringstream metrics_csv;
            write_user_metrics_csv(metrics_csv, result.rows, dataset.user_ids);
            outputs.write("user_metrics_" + algo + ".csv", metrics_csv.str());
            outputs.write("user_lift_" + algo + ".csv",
                          user_lift_csv(result.rows, dataset.user_ids));
            std::ostringstream report_csv;
            write_group_report_csv(report_csv, result.report);
            outputs.write("group_report_" + algo + ".csv", report_csv.str());
            outputs.write("group_report_" + algo + ".md",
                          group_report_markdown(result.report));
            std::ostringstream popfreq_csv;
            write_popfreq_csv(popfreq_csv, result.popfreq, dataset.item_ids);
            outputs.write("popfreq_" + algo + ".csv", popfreq_csv.str());
        });
        algo_notes.push_back({algo, result.users_without_candidates,
                              result.popfreq.pearson, result.popfreq.spearman});
    }

    stage("manifest", outputs, [&] {
        nlohmann::ordered_json manifest;
        manifest["tool"] = {{"name", "audit"}, {"version", kToolVersion}};
        nlohmann::ordered_json cfg;
        cfg["mode"] = config.mode == DataMode::File ? "file" : "synth";
        if (config.mode == DataMode::File) {
            cfg["ratings"] = config.ratings_path;
            cfg["genres"] = config.genres_path;
            cfg["user_col"] = config.columns.user_col;
            cfg["item_col"] = config.columns.item_col;
            cfg["value_col"] = config.columns.value_col;
            cfg["genre_item_col"] = config.columns.genre_item_col;
            cfg["genre_list_col"] = config.columns.genre_list_col;
        } else {
            cfg["synth_users"] = config.synth.users;
            cfg["synth_items"] = config.synth.items;
            cfg["synth_genres"] = config.synth.genres;
            cfg["synth_zipf_exponent"] = config.synth.zipf_exponent;
            cfg["synth_mean_profile"] = config.synth.mean_profile_size;
            cfg["synth_affinity_min"] = config.synth.affinity_min;
            cfg["synth_affinity_max"] = config.synth.affinity_max;
        }
        cfg["range_min"] = config.range_min;
        cfg["range_max"] = config.range_max;
        cfg["algorithm"] = config.algorithm == Algorithm::Both
                               ? "both"
                               : (config.algorithm == Algorithm::UserKnn ? "userknn" : "nmf");
        cfg["k"] = config.k;
        cfg["factors"] = config.factors;
        cfg["iterations"] = config.iterations;
        cfg["n"] = config.n;
        cfg["test_fraction"] = config.test_fraction;
        cfg["alpha"] = config.alpha;
        cfg["seed"] = config.seed;
        cfg["popularity_scope"] =
            config.popularity_scope == PopularityScope::Train ? "train" : "full";
        // The output directory is deliberately not echoed: it does not affect
        // results, and equal manifests must mean comparable runs.
        manifest["config"] = cfg;
        if (config.mode == DataMode::File) {
            auto hash_file = [](const std::string& path) {
                std::ifstream in(path, std::ios::binary);
                std::ostringstream buffer;
                buffer << in.rdbuf();
                return textio::to_hex(textio::fnv1a64(buffer.str()));
            };
            nlohmann::ordered_json inputs;
            inputs["ratings"] = {{"path", config.ratings_path},
                                 {"fnv1a64", hash_file(config.ratings_path)}};
            if (!config.genres_path.empty()) {
                inputs["genres"] = {{"path", config.genres_path},
                                    {"fnv1a64", hash_file(config.genres_path)}};
            }
            manifest["inputs"] = inputs;
        }
        nlohmann::ordered_json output_hashes;
        for (const auto& [name, hash] : outputs.checksums()) {
            output_hashes[name] = hash;
        }
        manifest["outputs"] = output_hashes;
        nlohmann::ordered_json notes;
        notes["unknown_genre_items"] = load_report.unknown_genre_items;
        nlohmann::ordered_json skipped;
        nlohmann::ordered_json correlations;
        for (const AlgoNote& note : algo_notes) {
            skipped[note.algo] = note.users_without_candidates;
            nlohmann::ordered_json pair;
            pair["pearson"] = note.pearson ? nlohmann::ordered_json(*note.pearson)
                                           : nlohmann::ordered_json(nullptr);
            pair["spearman"] = note.spearman ? nlohmann::ordered_json(*note.spearman)
                                             : nlohmann::ordered_json(nullptr);
            correlations[note.algo] = pair;
        }
        notes["users_without_candidates"] = skipped;
        notes["popfreq_correlation"] = correlations;
        manifest["notes"] = notes;
        outputs.write("manifest.json", manifest.dump(2) + "\n");
    });
}

} // namespace popaudit
