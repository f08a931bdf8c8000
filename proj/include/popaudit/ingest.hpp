#pragma once

#include <cstdint>
#include <string>

#include "popaudit/core.hpp"

namespace popaudit {

struct DatasetStatistics {
    std::int64_t users = 0;
    std::int64_t items = 0;
    std::int64_t ratings = 0;
    std::int64_t genres = 0;
    double ratings_per_user = 0.0;
    double ratings_per_item = 0.0;
    double sparsity = 0.0;
    double range_min = 0.0;
    double range_max = 0.0;
};

// 0-based column indices, overridable for externally exported layouts whose
// files carry extra columns. The canonical format is user/item/value at
// 0/1/2 and item/genre-list at 0/1.
struct ColumnLayout {
    int user_col = 0;
    int item_col = 1;
    int value_col = 2;
    int genre_item_col = 0;
    int genre_list_col = 1;

    bool is_canonical() const {
        return user_col == 0 && item_col == 1 && value_col == 2 &&
               genre_item_col == 0 && genre_list_col == 1;
    }
};

struct LoadReport {
    // Genre-file lines referencing items absent from the ratings file.
    int unknown_genre_items = 0;
};

// Parses the tab-separated ratings file and optional genre file
// (genres_path empty = no genre data). Lines starting with '#' and blank
// lines are skipped; error messages carry the path and 1-based line number.
InteractionDataset load_dataset(const std::string& ratings_path,
                                const std::string& genres_path,
                                double range_min, double range_max,
                                const ColumnLayout& layout = {},
                                LoadReport* report = nullptr);

// Canonical writer: reloading its output reproduces the dataset, including
// id assignment order.
void write_dataset(const InteractionDataset& dataset,
                   const std::string& ratings_path,
                   const std::string& genres_path);

DatasetStatistics compute_statistics(const InteractionDataset& dataset);

// Two-column table for terminal display. Per-user and per-item averages are
// shown truncated to whole interactions; sparsity with three decimals.
std::string format_statistics(const DatasetStatistics& stats);

struct SplitResult {
    InteractionDataset train;
    InteractionDataset test;
};

// Per-user holdout: round(test_fraction * profile_size) ratings per user move
// to test; users with fewer than 5 ratings stay entirely in train. Both sides
// share the source id maps and keep the source rating order.
SplitResult train_test_split(const InteractionDataset& dataset,
                             double test_fraction, std::uint64_t seed);

} // namespace popaudit
