#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace popaudit {

using UserId = std::int32_t;
using ItemId = std::int32_t;
using GenreId = std::int32_t;

// Malformed or unreadable input data (CLI exit code 3).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Rating {
    UserId user = 0;
    ItemId item = 0;
    double value = 0.0;

    friend bool operator==(const Rating&, const Rating&) = default;
};

// Bidirectional map between external string keys and dense ids 0..size-1,
// assigned in order of first appearance.
class IdMap {
public:
    int intern(const std::string& key);
    std::optional<int> find(const std::string& key) const;
    const std::string& key(int id) const;
    int size() const { return static_cast<int>(keys_.size()); }

private:
    std::vector<std::string> keys_;
    std::unordered_map<std::string, int> index_;
};

struct InteractionDataset {
    int users = 0;
    int items = 0;
    std::vector<Rating> ratings;                 // at most one per (user, item)
    std::vector<std::vector<GenreId>> genres_of; // indexed by item, sorted ascending
    double range_min = 0.0;
    double range_max = 0.0;
    IdMap user_ids;
    IdMap item_ids;
    IdMap genre_ids;

    std::span<const GenreId> genres(ItemId item) const;
};

struct RowEntry {
    ItemId item = 0;
    double value = 0.0;
};

struct ColEntry {
    UserId user = 0;
    double value = 0.0;
};

// Users-by-items rating matrix with both row-major and column-major views.
// Entries within a row are sorted by item, within a column by user.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(int rows, int cols, std::span<const Rating> ratings,
                 double value_min, double value_max);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t entry_count() const { return row_entries_.size(); }
    double value_min() const { return value_min_; }
    double value_max() const { return value_max_; }

    std::span<const RowEntry> row(UserId user) const;
    std::span<const ColEntry> col(ItemId item) const;
    int row_size(UserId user) const;
    int col_size(ItemId item) const;

    std::vector<Rating> flatten() const; // row-major, items ascending per row

private:
    int rows_ = 0;
    int cols_ = 0;
    double value_min_ = 0.0;
    double value_max_ = 0.0;
    std::vector<RowEntry> row_entries_;
    std::vector<std::size_t> row_offsets_;
    std::vector<ColEntry> col_entries_;
    std::vector<std::size_t> col_offsets_;
};

SparseMatrix build_matrix(const InteractionDataset& dataset);

// Probability mass over genres; entries are strictly positive and sum to 1
// unless the distribution is explicitly empty.
class GenreDistribution {
public:
    GenreDistribution() = default;

    // Normalizes the given nonnegative weights, dropping zero entries.
    // All-zero or no weights produce the empty distribution.
    explicit GenreDistribution(std::vector<std::pair<GenreId, double>> weights);

    bool empty() const { return mass_.empty(); }
    double mass_of(GenreId genre) const;
    const std::vector<std::pair<GenreId, double>>& masses() const { return mass_; }

private:
    std::vector<std::pair<GenreId, double>> mass_; // sorted by genre id
};

// Distribution over the genres of the given items, each item contributing
// total weight 1 split evenly across its genres. Items without genre tags
// contribute nothing; if no item has tags the result is empty.
GenreDistribution genre_distribution(std::span<const ItemId> items,
                                     const InteractionDataset& dataset);

} // namespace popaudit
