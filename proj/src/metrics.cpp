#include "popaudit/metrics.hpp"

#include <cmath>
#include <ostream>

#include "popaudit/textio.hpp"

namespace popaudit {

double mae(std::span<const std::pair<double, double>> predicted_actual) {
    if (predicted_actual.empty()) {
        throw std::invalid_argument("no test ratings");
    }
    double sum = 0.0;
    for (const auto& [predicted, actual] : predicted_actual) {
        sum += std::abs(predicted - actual);
    }
    return sum / static_cast<double>(predicted_actual.size());
}

double kl_miscalibration(const GenreDistribution& p, const GenreDistribution& q,
                         double alpha) {
    if (p.empty()) {
        throw std::invalid_argument("user has no genre-tagged profile");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }
    double kl = 0.0;
    for (const auto& [genre, pc] : p.masses()) {
        double smoothed = (1.0 - alpha) * q.mass_of(genre) + alpha * pc;
        kl += pc * std::log(pc / smoothed);
    }
    return kl;
}

double gap(std::span<const std::vector<ItemId>> item_lists,
           const PopularityProfile& profile) {
    if (item_lists.empty()) {
        throw std::invalid_argument("no item lists");
    }
    double total = 0.0;
    for (std::size_t u = 0; u < item_lists.size(); ++u) {
        if (item_lists[u].empty()) {
            throw std::invalid_argument("empty item list for user at index " +
                                        std::to_string(u));
        }
        double sum = 0.0;
        for (ItemId item : item_lists[u]) {
            sum += profile.item_popularity.at(static_cast<std::size_t>(item));
        }
        total += sum / static_cast<double>(item_lists[u].size());
    }
    return total / static_cast<double>(item_lists.size());
}

double popularity_lift(double gap_p, double gap_q) {
    if (!(gap_p > 0.0)) {
        throw std::invalid_argument("undefined lift for zero profile popularity");
    }
    return (gap_q - gap_p) / gap_p;
}

void write_user_metrics_csv(std::ostream& out, std::span<const UserMetricRow> rows,
                            const IdMap& user_ids) {
    out << "user,group,mae,mc,gap_p,gap_q\n";
    for (const UserMetricRow& row : rows) {
        out << textio::csv_field(user_ids.key(row.user)) << ','
            << group_label(row.group) << ','
            << (row.mae ? textio::format_double(*row.mae) : "") << ','
            << (row.mc ? textio::format_double(*row.mc) : "") << ','
            << textio::format_double(row.gap_p) << ','
            << textio::format_double(row.gap_q) << '\n';
    }
}

} // namespace popaudit
