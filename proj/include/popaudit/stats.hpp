#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popaudit/core.hpp"
#include "popaudit/metrics.hpp"
#include "popaudit/recommenders.hpp"

namespace popaudit {

struct WelchResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
};

// Welch's unequal-variance two-sided t-test; p from the Student-t CDF
// evaluated via the regularized incomplete beta function.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

// I_x(a, b) with absolute error well below 1e-10 (continued fraction).
double regularized_incomplete_beta(double a, double b, double x);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Average ranks for ties; 1-based.
std::vector<double> average_ranks(std::span<const double> values);

std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct PopFreqSeries {
    std::vector<std::int64_t> popularity; // per item: train interaction count
    std::vector<std::int64_t> frequency;  // per item: top-n list appearances
    std::optional<double> pearson;        // absent when a variable is constant
    std::optional<double> spearman;
};

PopFreqSeries pop_freq_correlation(std::span<const RecommendationList> lists,
                                   const InteractionDataset& train);

// CSV schema: item,popularity,frequency over the full catalog.
void write_popfreq_csv(std::ostream& out, const PopFreqSeries& series,
                       const IdMap& item_ids);

struct GroupGap {
    double gap_p = 0.0;
    double gap_q = 0.0;
};

struct GroupReport {
    std::array<int, 3> users{};       // metric rows per group
    std::array<int, 3> mae_count{};   // rows with an MAE value
    std::array<int, 3> mc_count{};
    std::array<double, 3> mean_mae{}; // NaN when no value in the group
    std::array<double, 3> mean_mc{};
    std::array<double, 3> gap_p{};
    std::array<double, 3> gap_q{};
    std::array<double, 3> pl{};
    // LowPop vs MedPop and LowPop vs HighPop; absent when a side has fewer
    // than 2 values.
    std::array<std::optional<double>, 2> mae_p{};
    std::array<std::optional<double>, 2> mc_p{};
    std::array<bool, 2> mae_significant{};
    std::array<bool, 2> mc_significant{};
    int worst_mae = 0; // group index of the highest mean
    int worst_mc = 0;
    int worst_pl = 0;
};

// Group means plus LowPop-vs-others Welch tests on the per-user MAE and MC
// distributions. PL is a group-level quantity, so it carries no test.
GroupReport build_group_report(std::span<const UserMetricRow> rows,
                               const std::array<GroupGap, 3>& gaps);

void write_group_report_csv(std::ostream& out, const GroupReport& report);

// Aligned three-row table; '*' marks significance vs LowPop at 0.05 and the
// worst (highest) group mean per metric is wrapped in '**'.
std::string group_report_markdown(const GroupReport& report);

} // namespace popaudit
