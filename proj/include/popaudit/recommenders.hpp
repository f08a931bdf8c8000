#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "popaudit/core.hpp"

namespace popaudit {

class RatingPredictor {
public:
    virtual ~RatingPredictor() = default;
    virtual double predict(UserId user, ItemId item) const = 0;
};

// User-based KNN with cosine similarity over co-rated items. The similarity
// matrix is materialized at fit time (|U|^2 doubles), and the model keeps a
// reference to the train matrix, which must outlive it.
class KnnModel : public RatingPredictor {
public:
    double predict(UserId user, ItemId item) const override;
    double similarity(UserId a, UserId b) const;
    double user_mean(UserId user) const;
    int k() const { return k_; }
    int users() const { return users_; }

private:
    friend KnnModel knn_fit(const SparseMatrix& train, int k);
    KnnModel(const SparseMatrix& train, int k);

    const SparseMatrix* train_;
    int k_;
    int users_;
    std::vector<double> means_;
    std::vector<double> sims_; // row-major users x users
};

KnnModel knn_fit(const SparseMatrix& train, int k);

inline double knn_predict(const KnnModel& model, UserId user, ItemId item) {
    return model.predict(user, item);
}

class NmfModel : public RatingPredictor {
public:
    // w is users x factors row-major; h holds one factor vector per item
    // (the columns of the factor-item matrix), items x factors row-major.
    NmfModel(int users, int items, int factors, double value_min, double value_max,
             std::vector<double> w, std::vector<double> h);

    double predict(UserId user, ItemId item) const override;
    int users() const { return users_; }
    int items() const { return items_; }
    int factors() const { return factors_; }
    double value_min() const { return value_min_; }
    double value_max() const { return value_max_; }
    std::span<const double> user_factors(UserId user) const;
    std::span<const double> item_factors(ItemId item) const;
    const std::vector<double>& loss_history() const { return loss_history_; }

private:
    friend NmfModel nmf_fit(const SparseMatrix& train, int factors, int iterations,
                            std::uint64_t seed);

    int users_;
    int items_;
    int factors_;
    double value_min_;
    double value_max_;
    std::vector<double> w_;
    std::vector<double> h_;
    std::vector<double> loss_history_; // masked squared error per iteration
};

// Masked Frobenius NMF via multiplicative updates over observed entries only.
NmfModel nmf_fit(const SparseMatrix& train, int factors, int iterations,
                 std::uint64_t seed);

inline double nmf_predict(const NmfModel& model, UserId user, ItemId item) {
    return model.predict(user, item);
}

void save_nmf(const NmfModel& model, const std::string& path);
NmfModel load_nmf(const std::string& path);

struct ScoredItem {
    ItemId item = 0;
    double score = 0.0;
};

struct RecommendationList {
    UserId user = 0;
    std::vector<ScoredItem> entries; // scores non-increasing
};

// Scores every item outside the user's train profile and keeps the best n,
// ranked by (score desc, train popularity desc, ItemId asc).
RecommendationList top_n(const RatingPredictor& model, UserId user, int n,
                         const SparseMatrix& train);

} // namespace popaudit
