#include "popaudit/core.hpp"

#include <algorithm>
#include <cmath>

namespace popaudit {

int IdMap::intern(const std::string& key) {
    auto it = index_.find(key);
    if (it != index_.end()) {
        return it->second;
    }
    int id = static_cast<int>(keys_.size());
    keys_.push_back(key);
    index_.emplace(key, id);
    return id;
}

std::optional<int> IdMap::find(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

const std::string& IdMap::key(int id) const {
    if (id < 0 || id >= size()) {
        throw std::invalid_argument("id out of range: " + std::to_string(id));
    }
    return keys_[static_cast<std::size_t>(id)];
}

std::span<const GenreId> InteractionDataset::genres(ItemId item) const {
    if (item < 0 || item >= items) {
        throw std::invalid_argument("unknown item id: " + std::to_string(item));
    }
    return genres_of[static_cast<std::size_t>(item)];
}

SparseMatrix::SparseMatrix(int rows, int cols, std::span<const Rating> ratings,
                           double value_min, double value_max)
    : rows_(rows), cols_(cols), value_min_(value_min), value_max_(value_max) {
    if (rows < 0 || cols < 0) {
        throw std::invalid_argument("negative matrix dimensions");
    }
    row_offsets_.assign(static_cast<std::size_t>(rows_) + 1, 0);
    col_offsets_.assign(static_cast<std::size_t>(cols_) + 1, 0);
    for (const Rating& r : ratings) {
        if (r.user < 0 || r.user >= rows_ || r.item < 0 || r.item >= cols_) {
            throw std::invalid_argument("rating outside matrix dimensions");
        }
        ++row_offsets_[static_cast<std::size_t>(r.user) + 1];
        ++col_offsets_[static_cast<std::size_t>(r.item) + 1];
    }
    for (std::size_t i = 1; i < row_offsets_.size(); ++i) {
        row_offsets_[i] += row_offsets_[i - 1];
    }
    for (std::size_t i = 1; i < col_offsets_.size(); ++i) {
        col_offsets_[i] += col_offsets_[i - 1];
    }

    row_entries_.resize(ratings.size());
    col_entries_.resize(ratings.size());
    std::vector<std::size_t> row_fill(row_offsets_.begin(), row_offsets_.end() - 1);
    std::vector<std::size_t> col_fill(col_offsets_.begin(), col_offsets_.end() - 1);
    for (const Rating& r : ratings) {
        row_entries_[row_fill[static_cast<std::size_t>(r.user)]++] = {r.item, r.value};
        col_entries_[col_fill[static_cast<std::size_t>(r.item)]++] = {r.user, r.value};
    }
    for (int u = 0; u < rows_; ++u) {
        auto begin = row_entries_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[static_cast<std::size_t>(u)]);
        auto end = row_entries_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[static_cast<std::size_t>(u) + 1]);
        std::sort(begin, end, [](const RowEntry& a, const RowEntry& b) { return a.item < b.item; });
        for (auto it = begin; it != end; ++it) {
            if (it != begin && it->item == (it - 1)->item) {
                throw std::invalid_argument("duplicate rating for user " + std::to_string(u));
            }
        }
    }
    for (int i = 0; i < cols_; ++i) {
        auto begin = col_entries_.begin() + static_cast<std::ptrdiff_t>(col_offsets_[static_cast<std::size_t>(i)]);
        auto end = col_entries_.begin() + static_cast<std::ptrdiff_t>(col_offsets_[static_cast<std::size_t>(i) + 1]);
        std::sort(begin, end, [](const ColEntry& a, const ColEntry& b) { return a.user < b.user; });
    }
}

std::span<const RowEntry> SparseMatrix::row(UserId user) const {
    if (user < 0 || user >= rows_) {
        throw std::invalid_argument("unknown user id: " + std::to_string(user));
    }
    std::size_t begin = row_offsets_[static_cast<std::size_t>(user)];
    std::size_t end = row_offsets_[static_cast<std::size_t>(user) + 1];
    return {row_entries_.data() + begin, end - begin};
}

std::span<const ColEntry> SparseMatrix::col(ItemId item) const {
    if (item < 0 || item >= cols_) {
        throw std::invalid_argument("unknown item id: " + std::to_string(item));
    }
    std::size_t begin = col_offsets_[static_cast<std::size_t>(item)];
    std::size_t end = col_offsets_[static_cast<std::size_t>(item) + 1];
    return {col_entries_.data() + begin, end - begin};
}

int SparseMatrix::row_size(UserId user) const {
    return static_cast<int>(row(user).size());
}

int SparseMatrix::col_size(ItemId item) const {
    return static_cast<int>(col(item).size());
}

std::vector<Rating> SparseMatrix::flatten() const {
    std::vector<Rating> out;
    out.reserve(row_entries_.size());
    for (int u = 0; u < rows_; ++u) {
        for (const RowEntry& e : row(u)) {
            out.push_back({u, e.item, e.value});
        }
    }
    return out;
}

SparseMatrix build_matrix(const InteractionDataset& dataset) {
    return SparseMatrix(dataset.users, dataset.items, dataset.ratings,
                        dataset.range_min, dataset.range_max);
}

GenreDistribution::GenreDistribution(std::vector<std::pair<GenreId, double>> weights) {
    double total = 0.0;
    for (const auto& [genre, w] : weights) {
        if (w < 0.0 || !std::isfinite(w)) {
            throw std::invalid_argument("genre weights must be finite and nonnegative");
        }
        total += w;
    }
    if (total <= 0.0) {
        return;
    }
    std::sort(weights.begin(), weights.end());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (i > 0 && weights[i].first == weights[i - 1].first) {
            throw std::invalid_argument("duplicate genre in distribution");
        }
        if (weights[i].second > 0.0) {
            mass_.emplace_back(weights[i].first, weights[i].second / total);
        }
    }
}

double GenreDistribution::mass_of(GenreId genre) const {
    auto it = std::lower_bound(mass_.begin(), mass_.end(), genre,
                               [](const auto& entry, GenreId g) { return entry.first < g; });
    if (it == mass_.end() || it->first != genre) {
        return 0.0;
    }
    return it->second;
}

GenreDistribution genre_distribution(std::span<const ItemId> items,
                                     const InteractionDataset& dataset) {
    if (items.empty()) {
        throw std::invalid_argument("empty item set");
    }
    std::unordered_map<GenreId, double> acc;
    for (ItemId item : items) {
        std::span<const GenreId> tags = dataset.genres(item);
        if (tags.empty()) {
            continue; // untagged items carry no genre evidence
        }
        double share = 1.0 / static_cast<double>(tags.size());
        for (GenreId g : tags) {
            acc[g] += share;
        }
    }
    std::vector<std::pair<GenreId, double>> weights(acc.begin(), acc.end());
    return GenreDistribution(std::move(weights));
}

} // namespace popaudit
