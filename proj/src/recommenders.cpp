#include "popaudit/recommenders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "popaudit/rng.hpp"
#include "popaudit/textio.hpp"

namespace popaudit {

namespace {

double clip(double value, double lo, double hi) {
    return std::min(std::max(value, lo), hi);
}

} // namespace

KnnModel::KnnModel(const SparseMatrix& train, int k)
    : train_(&train), k_(k), users_(train.rows()) {
    means_.assign(static_cast<std::size_t>(users_), 0.0);
    for (int u = 0; u < users_; ++u) {
        std::span<const RowEntry> profile = train.row(u);
        double sum = 0.0;
        for (const RowEntry& e : profile) {
            sum += e.value;
        }
        means_[static_cast<std::size_t>(u)] =
            profile.empty() ? 0.0 : sum / static_cast<double>(profile.size());
    }

    sims_.assign(static_cast<std::size_t>(users_) * static_cast<std::size_t>(users_), 0.0);
    // Row u accumulates over the rater lists of u's items, so each pair
    // (u, v) receives its co-rated contributions in ascending item order;
    // the brute-force test oracle sums in the same order and matches bitwise.
    auto fill_rows = [this, &train](int begin, int end) {
        std::vector<double> dot(static_cast<std::size_t>(users_), 0.0);
        std::vector<double> norm_u(static_cast<std::size_t>(users_), 0.0);
        std::vector<double> norm_v(static_cast<std::size_t>(users_), 0.0);
        std::vector<UserId> touched;
        for (int u = begin; u < end; ++u) {
            touched.clear();
            for (const RowEntry& e : train.row(u)) {
                for (const ColEntry& c : train.col(e.item)) {
                    if (c.user == u) {
                        continue;
                    }
                    std::size_t v = static_cast<std::size_t>(c.user);
                    if (dot[v] == 0.0 && norm_u[v] == 0.0 && norm_v[v] == 0.0) {
                        touched.push_back(c.user);
                    }
                    dot[v] += e.value * c.value;
                    norm_u[v] += e.value * e.value;
                    norm_v[v] += c.value * c.value;
                }
            }
            double* row = sims_.data() + static_cast<std::size_t>(u) * static_cast<std::size_t>(users_);
            for (UserId v : touched) {
                std::size_t vi = static_cast<std::size_t>(v);
                if (norm_u[vi] > 0.0 && norm_v[vi] > 0.0) {
                    row[vi] = dot[vi] / (std::sqrt(norm_u[vi]) * std::sqrt(norm_v[vi]));
                }
                dot[vi] = 0.0;
                norm_u[vi] = 0.0;
                norm_v[vi] = 0.0;
            }
        }
    };

    unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(),
                                          static_cast<unsigned>(users_));
    if (workers <= 1) {
        fill_rows(0, users_);
        return;
    }
    std::vector<std::thread> pool;
    int chunk = (users_ + static_cast<int>(workers) - 1) / static_cast<int>(workers);
    for (unsigned w = 0; w < workers; ++w) {
        int begin = static_cast<int>(w) * chunk;
        int end = std::min(users_, begin + chunk);
        if (begin >= end) {
            break;
        }
        pool.emplace_back(fill_rows, begin, end);
    }
    for (std::thread& t : pool) {
        t.join();
    }
}

KnnModel knn_fit(const SparseMatrix& train, int k) {
    if (k < 1) {
        throw std::invalid_argument("k must be at least 1");
    }
    if (train.entry_count() == 0) {
        throw std::invalid_argument("empty matrix");
    }
    return KnnModel(train, k);
}

double KnnModel::similarity(UserId a, UserId b) const {
    if (a < 0 || a >= users_ || b < 0 || b >= users_) {
        throw std::invalid_argument("unknown user id");
    }
    return sims_[static_cast<std::size_t>(a) * static_cast<std::size_t>(users_) +
                 static_cast<std::size_t>(b)];
}

double KnnModel::user_mean(UserId user) const {
    if (user < 0 || user >= users_) {
        throw std::invalid_argument("unknown user id");
    }
    return means_[static_cast<std::size_t>(user)];
}

double KnnModel::predict(UserId user, ItemId item) const {
    if (user < 0 || user >= users_) {
        throw std::invalid_argument("unknown user id: " + std::to_string(user));
    }
    std::span<const ColEntry> raters = train_->col(item); // validates the item id
    const double* row = sims_.data() + static_cast<std::size_t>(user) * static_cast<std::size_t>(users_);

    struct Neighbor {
        double sim;
        UserId user;
        double rating;
    };
    std::vector<Neighbor> neighbors;
    for (const ColEntry& c : raters) {
        if (c.user == user) {
            continue;
        }
        double sim = row[static_cast<std::size_t>(c.user)];
        if (sim > 0.0) {
            neighbors.push_back({sim, c.user, c.value});
        }
    }
    double mean = means_[static_cast<std::size_t>(user)];
    if (neighbors.empty()) {
        return clip(mean, train_->value_min(), train_->value_max());
    }
    auto by_rank = [](const Neighbor& a, const Neighbor& b) {
        if (a.sim != b.sim) {
            return a.sim > b.sim;
        }
        return a.user < b.user;
    };
    std::size_t keep = std::min(neighbors.size(), static_cast<std::size_t>(k_));
    std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(keep),
                      neighbors.end(), by_rank);
    double numer = 0.0;
    double denom = 0.0;
    for (std::size_t j = 0; j < keep; ++j) {
        numer += neighbors[j].sim * (neighbors[j].rating - means_[static_cast<std::size_t>(neighbors[j].user)]);
        denom += std::abs(neighbors[j].sim);
    }
    return clip(mean + numer / denom, train_->value_min(), train_->value_max());
}

NmfModel::NmfModel(int users, int items, int factors, double value_min, double value_max,
                   std::vector<double> w, std::vector<double> h)
    : users_(users), items_(items), factors_(factors),
      value_min_(value_min), value_max_(value_max),
      w_(std::move(w)), h_(std::move(h)) {
    if (users_ < 0 || items_ < 0 || factors_ < 1) {
        throw std::invalid_argument("invalid factor model dimensions");
    }
    if (w_.size() != static_cast<std::size_t>(users_) * static_cast<std::size_t>(factors_) ||
        h_.size() != static_cast<std::size_t>(items_) * static_cast<std::size_t>(factors_)) {
        throw std::invalid_argument("factor matrix sizes do not match dimensions");
    }
}

double NmfModel::predict(UserId user, ItemId item) const {
    std::span<const double> wu = user_factors(user);
    std::span<const double> hi = item_factors(item);
    double dot = 0.0;
    for (int f = 0; f < factors_; ++f) {
        dot += wu[static_cast<std::size_t>(f)] * hi[static_cast<std::size_t>(f)];
    }
    return clip(dot, value_min_, value_max_);
}

std::span<const double> NmfModel::user_factors(UserId user) const {
    if (user < 0 || user >= users_) {
        throw std::invalid_argument("unknown user id: " + std::to_string(user));
    }
    return {w_.data() + static_cast<std::size_t>(user) * static_cast<std::size_t>(factors_),
            static_cast<std::size_t>(factors_)};
}

std::span<const double> NmfModel::item_factors(ItemId item) const {
    if (item < 0 || item >= items_) {
        throw std::invalid_argument("unknown item id: " + std::to_string(item));
    }
    return {h_.data() + static_cast<std::size_t>(item) * static_cast<std::size_t>(factors_),
            static_cast<std::size_t>(factors_)};
}

NmfModel nmf_fit(const SparseMatrix& train, int factors, int iterations,
                 std::uint64_t seed) {
    if (factors < 1) {
        throw std::invalid_argument("factors must be at least 1");
    }
    if (iterations < 1) {
        throw std::invalid_argument("iterations must be at least 1");
    }
    if (train.entry_count() == 0) {
        throw std::invalid_argument("empty matrix");
    }
    const int users = train.rows();
    const int items = train.cols();
    const std::size_t f = static_cast<std::size_t>(factors);
    const double eps = 1e-12;

    // Init in (0, 1]: W row-major first, then the per-item factor vectors.
    rng::Engine gen(seed);
    std::vector<double> w(static_cast<std::size_t>(users) * f);
    std::vector<double> h(static_cast<std::size_t>(items) * f);
    for (double& x : w) {
        x = 1.0 - rng::uniform01(gen);
    }
    for (double& x : h) {
        x = 1.0 - rng::uniform01(gen);
    }

    // Observed entries in row-major order plus a column-grouped view of the
    // same entry indices for the H sweep.
    std::vector<Rating> entries = train.flatten();
    const std::size_t nnz = entries.size();
    std::vector<std::size_t> col_offsets(static_cast<std::size_t>(items) + 1, 0);
    for (const Rating& r : entries) {
        ++col_offsets[static_cast<std::size_t>(r.item) + 1];
    }
    for (std::size_t i = 1; i < col_offsets.size(); ++i) {
        col_offsets[i] += col_offsets[i - 1];
    }
    std::vector<std::uint32_t> col_entry(nnz);
    {
        std::vector<std::size_t> fill(col_offsets.begin(), col_offsets.end() - 1);
        for (std::size_t e = 0; e < nnz; ++e) {
            col_entry[fill[static_cast<std::size_t>(entries[e].item)]++] =
                static_cast<std::uint32_t>(e);
        }
    }

    std::vector<double> pred(nnz, 0.0);
    auto recompute_pred = [&]() {
        for (std::size_t e = 0; e < nnz; ++e) {
            const double* wu = w.data() + static_cast<std::size_t>(entries[e].user) * f;
            const double* hi = h.data() + static_cast<std::size_t>(entries[e].item) * f;
            double dot = 0.0;
            for (std::size_t k = 0; k < f; ++k) {
                dot += wu[k] * hi[k];
            }
            pred[e] = dot;
        }
    };

    std::vector<double> numer(f);
    std::vector<double> denom(f);
    std::vector<double> loss_history;
    loss_history.reserve(static_cast<std::size_t>(iterations));
    recompute_pred();
    for (int it = 0; it < iterations; ++it) {
        // W sweep: rows are independent given the current H.
        std::size_t e = 0;
        for (int u = 0; u < users; ++u) {
            std::size_t row_begin = e;
            std::fill(numer.begin(), numer.end(), 0.0);
            std::fill(denom.begin(), denom.end(), 0.0);
            for (; e < nnz && entries[e].user == u; ++e) {
                const double* hi = h.data() + static_cast<std::size_t>(entries[e].item) * f;
                for (std::size_t k = 0; k < f; ++k) {
                    numer[k] += entries[e].value * hi[k];
                    denom[k] += pred[e] * hi[k];
                }
            }
            if (e == row_begin) {
                continue;
            }
            double* wu = w.data() + static_cast<std::size_t>(u) * f;
            for (std::size_t k = 0; k < f; ++k) {
                wu[k] *= numer[k] / (denom[k] + eps);
            }
        }
        recompute_pred();

        // H sweep with the updated W.
        for (int i = 0; i < items; ++i) {
            std::size_t begin = col_offsets[static_cast<std::size_t>(i)];
            std::size_t end = col_offsets[static_cast<std::size_t>(i) + 1];
            if (begin == end) {
                continue;
            }
            std::fill(numer.begin(), numer.end(), 0.0);
            std::fill(denom.begin(), denom.end(), 0.0);
            for (std::size_t j = begin; j < end; ++j) {
                std::size_t entry = col_entry[j];
                const double* wu = w.data() + static_cast<std::size_t>(entries[entry].user) * f;
                for (std::size_t k = 0; k < f; ++k) {
                    numer[k] += entries[entry].value * wu[k];
                    denom[k] += pred[entry] * wu[k];
                }
            }
            double* hi = h.data() + static_cast<std::size_t>(i) * f;
            for (std::size_t k = 0; k < f; ++k) {
                hi[k] *= numer[k] / (denom[k] + eps);
            }
        }
        recompute_pred();

        double loss = 0.0;
        for (std::size_t j = 0; j < nnz; ++j) {
            double diff = entries[j].value - pred[j];
            loss += diff * diff;
        }
        loss_history.push_back(loss);
    }

    NmfModel model(users, items, factors, train.value_min(), train.value_max(),
                   std::move(w), std::move(h));
    model.loss_history_ = std::move(loss_history);
    return model;
}

void save_nmf(const NmfModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write model file: " + path);
    }
    out << "popaudit-nmf 1\n";
    out << model.users() << ' ' << model.items() << ' ' << model.factors() << '\n';
    out << textio::format_double(model.value_min()) << ' '
        << textio::format_double(model.value_max()) << '\n';
    auto dump = [&out](std::span<const double> row) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k > 0) {
                out << ' ';
            }
            out << textio::format_double(row[k]);
        }
        out << '\n';
    };
    for (int u = 0; u < model.users(); ++u) {
        dump(model.user_factors(u));
    }
    for (int i = 0; i < model.items(); ++i) {
        dump(model.item_factors(i));
    }
    if (!out.flush()) {
        throw InputError("failed writing model file: " + path);
    }
}

NmfModel load_nmf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open model file: " + path);
    }
    std::string header;
    std::getline(in, header);
    if (header != "popaudit-nmf 1") {
        throw InputError(path + ": unsupported model header '" + header + "'");
    }
    int users = 0, items = 0, factors = 0;
    double vmin = 0.0, vmax = 0.0;
    if (!(in >> users >> items >> factors >> vmin >> vmax) ||
        users < 0 || items < 0 || factors < 1) {
        throw InputError(path + ": malformed model dimensions");
    }
    std::size_t f = static_cast<std::size_t>(factors);
    std::vector<double> w(static_cast<std::size_t>(users) * f);
    std::vector<double> h(static_cast<std::size_t>(items) * f);
    for (double& x : w) {
        if (!(in >> x)) {
            throw InputError(path + ": truncated user factors");
        }
    }
    for (double& x : h) {
        if (!(in >> x)) {
            throw InputError(path + ": truncated item factors");
        }
    }
    return NmfModel(users, items, factors, vmin, vmax, std::move(w), std::move(h));
}

RecommendationList top_n(const RatingPredictor& model, UserId user, int n,
                         const SparseMatrix& train) {
    if (n < 1) {
        throw std::invalid_argument("n must be at least 1");
    }
    std::span<const RowEntry> profile = train.row(user);

    struct Candidate {
        double score;
        int popularity;
        ItemId item;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(static_cast<std::size_t>(train.cols()) - profile.size());
    std::size_t next = 0;
    for (int i = 0; i < train.cols(); ++i) {
        if (next < profile.size() && profile[next].item == i) {
            ++next;
            continue;
        }
        candidates.push_back({model.predict(user, i), train.col_size(i), i});
    }
    RecommendationList list;
    list.user = user;
    if (candidates.empty()) {
        return list;
    }
    auto by_rank = [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.popularity != b.popularity) {
            return a.popularity > b.popularity;
        }
        return a.item < b.item;
    };
    std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(n));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), by_rank);
    list.entries.reserve(keep);
    for (std::size_t j = 0; j < keep; ++j) {
        list.entries.push_back({candidates[j].item, candidates[j].score});
    }
    return list;
}

} // namespace popaudit
