#include "popaudit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include "popaudit/rng.hpp"
#include "popaudit/textio.hpp"

namespace popaudit {

namespace {

std::string location(const std::string& path, std::size_t line_no) {
    return path + ":" + std::to_string(line_no);
}

// Returns false for lines the parser skips: blank lines and '#' comments.
bool content_line(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    return !line.empty() && line[0] != '#';
}

void check_field_count(const std::string& path, std::size_t line_no,
                       std::size_t got, std::size_t exact_expected,
                       std::size_t min_needed, bool canonical) {
    if (canonical) {
        if (got != exact_expected) {
            throw InputError(location(path, line_no) + ": expected " +
                             std::to_string(exact_expected) +
                             " tab-separated fields, got " + std::to_string(got));
        }
    } else if (got < min_needed) {
        throw InputError(location(path, line_no) + ": expected at least " +
                         std::to_string(min_needed) +
                         " tab-separated fields, got " + std::to_string(got));
    }
}

} // namespace

InteractionDataset load_dataset(const std::string& ratings_path,
                                const std::string& genres_path,
                                double range_min, double range_max,
                                const ColumnLayout& layout,
                                LoadReport* report) {
    if (!(range_min < range_max)) {
        throw std::invalid_argument("rating range must satisfy range_min < range_max");
    }
    std::ifstream ratings_file(ratings_path);
    if (!ratings_file) {
        throw InputError("cannot open ratings file: " + ratings_path);
    }

    InteractionDataset dataset;
    dataset.range_min = range_min;
    dataset.range_max = range_max;

    const bool canonical = layout.is_canonical();
    const std::size_t rating_fields_needed = static_cast<std::size_t>(
        std::max({layout.user_col, layout.item_col, layout.value_col})) + 1;

    std::unordered_set<std::uint64_t> seen_pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ratings_file, line)) {
        ++line_no;
        if (!content_line(line)) {
            continue;
        }
        auto fields = textio::split(line, '\t');
        check_field_count(ratings_path, line_no, fields.size(), 3,
                          rating_fields_needed, canonical);
        UserId user = dataset.user_ids.intern(
            std::string(fields[static_cast<std::size_t>(layout.user_col)]));
        ItemId item = dataset.item_ids.intern(
            std::string(fields[static_cast<std::size_t>(layout.item_col)]));
        std::string_view raw = fields[static_cast<std::size_t>(layout.value_col)];
        std::optional<double> value = textio::parse_double(raw);
        if (!value) {
            throw InputError(location(ratings_path, line_no) +
                             ": invalid rating value '" + std::string(raw) + "'");
        }
        if (!(*value >= range_min && *value <= range_max)) {
            throw InputError(location(ratings_path, line_no) + ": rating " +
                             std::string(raw) + " outside range [" +
                             textio::format_double(range_min) + ", " +
                             textio::format_double(range_max) + "]");
        }
        std::uint64_t pair_key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(user)) << 32) |
                                 static_cast<std::uint32_t>(item);
        if (!seen_pairs.insert(pair_key).second) {
            throw InputError(location(ratings_path, line_no) +
                             ": duplicate rating for (" + dataset.user_ids.key(user) +
                             ", " + dataset.item_ids.key(item) + ")");
        }
        dataset.ratings.push_back({user, item, *value});
    }
    dataset.users = dataset.user_ids.size();
    dataset.items = dataset.item_ids.size();
    dataset.genres_of.assign(static_cast<std::size_t>(dataset.items), {});

    if (!genres_path.empty()) {
        std::ifstream genres_file(genres_path);
        if (!genres_file) {
            throw InputError("cannot open genre file: " + genres_path);
        }
        const std::size_t genre_fields_needed = static_cast<std::size_t>(
            std::max(layout.genre_item_col, layout.genre_list_col)) + 1;
        std::vector<std::set<GenreId>> tags(static_cast<std::size_t>(dataset.items));
        line_no = 0;
        while (std::getline(genres_file, line)) {
            ++line_no;
            if (!content_line(line)) {
                continue;
            }
            auto fields = textio::split(line, '\t');
            check_field_count(genres_path, line_no, fields.size(), 2,
                              genre_fields_needed, canonical);
            std::string item_key(fields[static_cast<std::size_t>(layout.genre_item_col)]);
            std::optional<int> item = dataset.item_ids.find(item_key);
            if (!item) {
                if (report) {
                    ++report->unknown_genre_items;
                }
                continue;
            }
            std::string_view list = fields[static_cast<std::size_t>(layout.genre_list_col)];
            if (list.empty()) {
                continue;
            }
            for (std::string_view token : textio::split(list, ',')) {
                if (token.empty()) {
                    throw InputError(location(genres_path, line_no) + ": empty genre name");
                }
                tags[static_cast<std::size_t>(*item)].insert(
                    dataset.genre_ids.intern(std::string(token)));
            }
        }
        for (int i = 0; i < dataset.items; ++i) {
            auto& s = tags[static_cast<std::size_t>(i)];
            dataset.genres_of[static_cast<std::size_t>(i)].assign(s.begin(), s.end());
        }
    }
    return dataset;
}

void write_dataset(const InteractionDataset& dataset,
                   const std::string& ratings_path,
                   const std::string& genres_path) {
    std::ofstream ratings_file(ratings_path, std::ios::binary);
    if (!ratings_file) {
        throw InputError("cannot write ratings file: " + ratings_path);
    }
    for (const Rating& r : dataset.ratings) {
        ratings_file << dataset.user_ids.key(r.user) << '\t'
                     << dataset.item_ids.key(r.item) << '\t'
                     << textio::format_double(r.value) << '\n';
    }
    if (!ratings_file.flush()) {
        throw InputError("failed writing ratings file: " + ratings_path);
    }

    std::ofstream genres_file(genres_path, std::ios::binary);
    if (!genres_file) {
        throw InputError("cannot write genre file: " + genres_path);
    }
    for (int i = 0; i < dataset.items; ++i) {
        std::span<const GenreId> tags = dataset.genres(i);
        if (tags.empty()) {
            continue;
        }
        genres_file << dataset.item_ids.key(i) << '\t';
        for (std::size_t t = 0; t < tags.size(); ++t) {
            if (t > 0) {
                genres_file << ',';
            }
            genres_file << dataset.genre_ids.key(tags[t]);
        }
        genres_file << '\n';
    }
    if (!genres_file.flush()) {
        throw InputError("failed writing genre file: " + genres_path);
    }
}

DatasetStatistics compute_statistics(const InteractionDataset& dataset) {
    if (dataset.users == 0 || dataset.items == 0) {
        throw InputError("empty dataset");
    }
    DatasetStatistics stats;
    stats.users = dataset.users;
    stats.items = dataset.items;
    stats.ratings = static_cast<std::int64_t>(dataset.ratings.size());
    stats.genres = dataset.genre_ids.size();
    stats.ratings_per_user = static_cast<double>(stats.ratings) / static_cast<double>(stats.users);
    stats.ratings_per_item = static_cast<double>(stats.ratings) / static_cast<double>(stats.items);
    stats.sparsity = 1.0 - static_cast<double>(stats.ratings) /
                               (static_cast<double>(stats.users) * static_cast<double>(stats.items));
    stats.range_min = dataset.range_min;
    stats.range_max = dataset.range_max;
    return stats;
}

std::string format_statistics(const DatasetStatistics& stats) {
    char sparsity[32];
    std::snprintf(sparsity, sizeof(sparsity), "%.3f", stats.sparsity);
    std::string out;
    auto row = [&out](const std::string& label, const std::string& value) {
        out += label;
        out.append(14 - label.size(), ' ');
        out += value;
        out += '\n';
    };
    row("users", std::to_string(stats.users));
    row("items", std::to_string(stats.items));
    row("ratings", std::to_string(stats.ratings));
    row("genres", std::to_string(stats.genres));
    row("ratings/user", std::to_string(static_cast<std::int64_t>(stats.ratings_per_user)));
    row("ratings/item", std::to_string(static_cast<std::int64_t>(stats.ratings_per_item)));
    row("sparsity", sparsity);
    row("rating range", "[" + textio::format_double(stats.range_min) + ", " +
                            textio::format_double(stats.range_max) + "]");
    return out;
}

SplitResult train_test_split(const InteractionDataset& dataset,
                             double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test_fraction must lie in (0, 1)");
    }
    std::vector<std::vector<std::uint32_t>> by_user(static_cast<std::size_t>(dataset.users));
    for (std::size_t idx = 0; idx < dataset.ratings.size(); ++idx) {
        by_user[static_cast<std::size_t>(dataset.ratings[idx].user)].push_back(
            static_cast<std::uint32_t>(idx));
    }

    // One engine for the whole split, users visited in ascending id order.
    rng::Engine gen(seed);
    std::vector<char> to_test(dataset.ratings.size(), 0);
    for (int u = 0; u < dataset.users; ++u) {
        auto& indices = by_user[static_cast<std::size_t>(u)];
        std::size_t n = indices.size();
        if (n < 5) {
            continue;
        }
        auto m = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(n)));
        if (m == 0) {
            continue;
        }
        rng::shuffle(indices, gen);
        for (std::size_t j = 0; j < m; ++j) {
            to_test[indices[j]] = 1;
        }
    }

    SplitResult result;
    auto init_side = [&dataset](InteractionDataset& side) {
        side.users = dataset.users;
        side.items = dataset.items;
        side.genres_of = dataset.genres_of;
        side.range_min = dataset.range_min;
        side.range_max = dataset.range_max;
        side.user_ids = dataset.user_ids;
        side.item_ids = dataset.item_ids;
        side.genre_ids = dataset.genre_ids;
    };
    init_side(result.train);
    init_side(result.test);
    for (std::size_t idx = 0; idx < dataset.ratings.size(); ++idx) {
        (to_test[idx] ? result.test : result.train).ratings.push_back(dataset.ratings[idx]);
    }
    return result;
}

} // namespace popaudit
