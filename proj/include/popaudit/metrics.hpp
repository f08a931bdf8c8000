#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "popaudit/core.hpp"
#include "popaudit/stratify.hpp"

namespace popaudit {

double mae(std::span<const std::pair<double, double>> predicted_actual);

// KL(p || q~) with q~ = (1-alpha) q + alpha p and natural log. The smoothing
// keeps every genre with p(c) > 0 inside q~'s support.
double kl_miscalibration(const GenreDistribution& p, const GenreDistribution& q,
                         double alpha = 0.01);

// Macro-average: mean item popularity per list, then mean over lists.
double gap(std::span<const std::vector<ItemId>> item_lists,
           const PopularityProfile& profile);

double popularity_lift(double gap_p, double gap_q);

struct UserMetricRow {
    UserId user = 0;
    Group group = Group::LowPop;
    std::optional<double> mae;  // absent: no test ratings
    std::optional<double> mc;   // absent: profile or list has no genre mass
    double gap_p = 0.0;
    double gap_q = 0.0;
};

// CSV schema: user,group,mae,mc,gap_p,gap_q with absent values as empty fields.
void write_user_metrics_csv(std::ostream& out, std::span<const UserMetricRow> rows,
                            const IdMap& user_ids);

} // namespace popaudit
