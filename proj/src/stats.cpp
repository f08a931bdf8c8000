#include "popaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "popaudit/textio.hpp"

namespace popaudit {

namespace {

constexpr double kSignificance = 0.05;

double mean_of(std::span<const double> values) {
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

// Unbiased sample variance.
double variance_of(std::span<const double> values, double mean) {
    double sum = 0.0;
    for (double v : values) {
        sum += (v - mean) * (v - mean);
    }
    return sum / static_cast<double>(values.size() - 1);
}

// Continued fraction for the incomplete beta, evaluated with the modified
// Lentz method. Converges fast for x < (a+1)/(a+b+2).
double incbeta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double eps = 1e-15;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) {
        d = tiny;
    }
    d = 1.0 / d;
    double result = d;
    for (int m = 1; m <= 300; ++m) {
        double dm = static_cast<double>(m);
        // Even step.
        double numer = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
        d = 1.0 + numer * d;
        if (std::abs(d) < tiny) {
            d = tiny;
        }
        d = 1.0 / d;
        c = 1.0 + numer / c;
        if (std::abs(c) < tiny) {
            c = tiny;
        }
        result *= c * d;
        // Odd step.
        numer = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
        d = 1.0 + numer * d;
        if (std::abs(d) < tiny) {
            d = tiny;
        }
        d = 1.0 / d;
        c = 1.0 + numer / c;
        if (std::abs(c) < tiny) {
            c = tiny;
        }
        double delta = c * d;
        result *= delta;
        if (std::abs(delta - 1.0) < eps) {
            break;
        }
    }
    return result;
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::invalid_argument("incomplete beta needs positive shape parameters");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    double log_front = a * std::log(x) + b * std::log1p(-x) -
                       (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * incbeta_cf(a, b, x) / a;
    }
    return 1.0 - front * incbeta_cf(b, a, 1.0 - x) / b;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw std::invalid_argument("each sample needs at least 2 values");
    }
    double mean_a = mean_of(a);
    double mean_b = mean_of(b);
    double var_a = variance_of(a, mean_a);
    double var_b = variance_of(b, mean_b);
    if (var_a == 0.0 && var_b == 0.0) {
        throw std::invalid_argument("zero variance in both samples");
    }
    double na = static_cast<double>(a.size());
    double nb = static_cast<double>(b.size());
    double sa = var_a / na;
    double sb = var_b / nb;
    WelchResult result;
    result.t = (mean_a - mean_b) / std::sqrt(sa + sb);
    result.df = (sa + sb) * (sa + sb) /
                (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    double x = result.df / (result.df + result.t * result.t);
    result.p = regularized_incomplete_beta(result.df / 2.0, 0.5, x);
    return result;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("correlation needs two equal-length samples of size >= 2");
    }
    double mx = mean_of(x);
    double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx;
        double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nullopt;
    }
    return sxy / (std::sqrt(sxx) * std::sqrt(syy));
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&values](std::size_t i, std::size_t j) {
        if (values[i] != values[j]) {
            return values[i] < values[j];
        }
        return i < j;
    });
    std::vector<double> ranks(values.size(), 0.0);
    std::size_t pos = 0;
    while (pos < order.size()) {
        std::size_t run_end = pos;
        while (run_end + 1 < order.size() && values[order[run_end + 1]] == values[order[pos]]) {
            ++run_end;
        }
        double rank = (static_cast<double>(pos + 1) + static_cast<double>(run_end + 1)) / 2.0;
        for (std::size_t j = pos; j <= run_end; ++j) {
            ranks[order[j]] = rank;
        }
        pos = run_end + 1;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("correlation needs two equal-length samples of size >= 2");
    }
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

PopFreqSeries pop_freq_correlation(std::span<const RecommendationList> lists,
                                   const InteractionDataset& train) {
    PopFreqSeries series;
    series.popularity.assign(static_cast<std::size_t>(train.items), 0);
    series.frequency.assign(static_cast<std::size_t>(train.items), 0);
    for (const Rating& r : train.ratings) {
        ++series.popularity[static_cast<std::size_t>(r.item)];
    }
    for (const RecommendationList& list : lists) {
        for (const ScoredItem& entry : list.entries) {
            if (entry.item < 0 || entry.item >= train.items) {
                throw std::invalid_argument("recommended item outside catalog: " +
                                            std::to_string(entry.item));
            }
            ++series.frequency[static_cast<std::size_t>(entry.item)];
        }
    }
    std::int64_t nonzero = std::count_if(series.frequency.begin(), series.frequency.end(),
                                         [](std::int64_t f) { return f > 0; });
    if (nonzero == 0) {
        throw std::invalid_argument("all recommendation frequencies are zero");
    }
    if (nonzero < 2) {
        throw std::invalid_argument("fewer than 2 items with nonzero recommendation frequency");
    }
    std::vector<double> pop(series.popularity.begin(), series.popularity.end());
    std::vector<double> freq(series.frequency.begin(), series.frequency.end());
    series.pearson = pearson(pop, freq);
    series.spearman = spearman(pop, freq);
    return series;
}

void write_popfreq_csv(std::ostream& out, const PopFreqSeries& series,
                       const IdMap& item_ids) {
    out << "item,popularity,frequency\n";
    for (std::size_t i = 0; i < series.popularity.size(); ++i) {
        out << textio::csv_field(item_ids.key(static_cast<int>(i))) << ','
            << series.popularity[i] << ',' << series.frequency[i] << '\n';
    }
}

namespace {

// LowPop-vs-other test on per-user metric values. The all-constant case is
// decided directly: equal constants are a perfect tie, unequal a sure
// separation; welch_t_test itself refuses such degenerate samples.
std::optional<double> metric_p(const std::vector<double>& low,
                               const std::vector<double>& other) {
    if (low.size() < 2 || other.size() < 2) {
        return std::nullopt;
    }
    double ml = mean_of(low);
    double mo = mean_of(other);
    if (variance_of(low, ml) == 0.0 && variance_of(other, mo) == 0.0) {
        return ml == mo ? 1.0 : 0.0;
    }
    return welch_t_test(low, other).p;
}

int argmax_mean(const std::array<double, 3>& means) {
    int best = 0;
    for (int g = 1; g < 3; ++g) {
        bool best_valid = !std::isnan(means[static_cast<std::size_t>(best)]);
        bool g_valid = !std::isnan(means[static_cast<std::size_t>(g)]);
        if (g_valid && (!best_valid ||
                        means[static_cast<std::size_t>(g)] > means[static_cast<std::size_t>(best)])) {
            best = g;
        }
    }
    return best;
}

std::string optional_field(const std::optional<double>& value) {
    return value ? textio::format_double(*value) : "";
}

} // namespace

GroupReport build_group_report(std::span<const UserMetricRow> rows,
                               const std::array<GroupGap, 3>& gaps) {
    std::array<std::vector<double>, 3> mae_values;
    std::array<std::vector<double>, 3> mc_values;
    GroupReport report;
    for (const UserMetricRow& row : rows) {
        auto g = static_cast<std::size_t>(row.group);
        ++report.users[g];
        if (row.mae) {
            mae_values[g].push_back(*row.mae);
        }
        if (row.mc) {
            mc_values[g].push_back(*row.mc);
        }
    }
    for (int g = 0; g < 3; ++g) {
        if (report.users[static_cast<std::size_t>(g)] == 0) {
            throw std::invalid_argument(std::string("missing group ") +
                                        group_label(static_cast<Group>(g)));
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t g = 0; g < 3; ++g) {
        report.mae_count[g] = static_cast<int>(mae_values[g].size());
        report.mc_count[g] = static_cast<int>(mc_values[g].size());
        report.mean_mae[g] = mae_values[g].empty() ? nan : mean_of(mae_values[g]);
        report.mean_mc[g] = mc_values[g].empty() ? nan : mean_of(mc_values[g]);
        report.gap_p[g] = gaps[g].gap_p;
        report.gap_q[g] = gaps[g].gap_q;
        report.pl[g] = popularity_lift(gaps[g].gap_p, gaps[g].gap_q);
    }
    for (std::size_t other = 1; other <= 2; ++other) {
        report.mae_p[other - 1] = metric_p(mae_values[0], mae_values[other]);
        report.mc_p[other - 1] = metric_p(mc_values[0], mc_values[other]);
        report.mae_significant[other - 1] =
            report.mae_p[other - 1] && *report.mae_p[other - 1] < kSignificance;
        report.mc_significant[other - 1] =
            report.mc_p[other - 1] && *report.mc_p[other - 1] < kSignificance;
    }
    report.worst_mae = argmax_mean(report.mean_mae);
    report.worst_mc = argmax_mean(report.mean_mc);
    report.worst_pl = argmax_mean(report.pl);
    return report;
}

void write_group_report_csv(std::ostream& out, const GroupReport& report) {
    out << "group,users,mae,mc,pl,gap_p,gap_q,"
           "mae_p,mae_significant,mc_p,mc_significant,pl_p,"
           "worst_mae,worst_mc,worst_pl\n";
    for (int g = 0; g < 3; ++g) {
        auto gi = static_cast<std::size_t>(g);
        out << group_label(static_cast<Group>(g)) << ',' << report.users[gi] << ',';
        out << (report.mae_count[gi] > 0 ? textio::format_double(report.mean_mae[gi]) : "") << ',';
        out << (report.mc_count[gi] > 0 ? textio::format_double(report.mean_mc[gi]) : "") << ',';
        out << textio::format_double(report.pl[gi]) << ','
            << textio::format_double(report.gap_p[gi]) << ','
            << textio::format_double(report.gap_q[gi]) << ',';
        if (g == 0) {
            // Reference group: no test against itself, and PL carries no
            // per-user distribution to test at all.
            out << ",,,,NA,";
        } else {
            out << optional_field(report.mae_p[gi - 1]) << ','
                << (report.mae_significant[gi - 1] ? "1" : "0") << ','
                << optional_field(report.mc_p[gi - 1]) << ','
                << (report.mc_significant[gi - 1] ? "1" : "0") << ",NA,";
        }
        out << (report.worst_mae == g ? "1" : "0") << ','
            << (report.worst_mc == g ? "1" : "0") << ','
            << (report.worst_pl == g ? "1" : "0") << '\n';
    }
}

std::string group_report_markdown(const GroupReport& report) {
    auto cell = [](double value, bool worst, bool significant) {
        if (std::isnan(value)) {
            return std::string("-");
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", value);
        std::string text = buf;
        if (significant) {
            text += '*';
        }
        if (worst) {
            text = "**" + text + "**";
        }
        return text;
    };
    std::array<std::array<std::string, 3>, 3> cells; // [metric][group]
    for (int g = 0; g < 3; ++g) {
        auto gi = static_cast<std::size_t>(g);
        bool mae_sig = g > 0 && report.mae_significant[gi - 1];
        bool mc_sig = g > 0 && report.mc_significant[gi - 1];
        cells[0][gi] = cell(report.mean_mae[gi], report.worst_mae == g, mae_sig);
        cells[1][gi] = cell(report.mean_mc[gi], report.worst_mc == g, mc_sig);
        cells[2][gi] = cell(report.pl[gi], report.worst_pl == g, false);
    }
    std::array<std::string, 3> headers = {"MAE", "MC", "PL"};
    std::array<std::size_t, 3> widths;
    for (std::size_t m = 0; m < 3; ++m) {
        widths[m] = headers[m].size();
        for (const std::string& c : cells[m]) {
            widths[m] = std::max(widths[m], c.size());
        }
    }
    std::array<std::string, 3> row_labels = {"LowPop", "MedPop", "HighPop"};
    std::size_t label_width = 7; // longest group label
    std::string out;
    auto pad_left = [](const std::string& s, std::size_t width) {
        return std::string(width - s.size(), ' ') + s;
    };
    auto pad_right = [](const std::string& s, std::size_t width) {
        return s + std::string(width - s.size(), ' ');
    };
    out += "| " + pad_right("group", label_width);
    for (std::size_t m = 0; m < 3; ++m) {
        out += " | " + pad_left(headers[m], widths[m]);
    }
    out += " |\n";
    out += "|" + std::string(label_width + 2, '-');
    for (std::size_t m = 0; m < 3; ++m) {
        out += "|" + std::string(widths[m] + 1, '-') + ":";
    }
    out += "|\n";
    for (std::size_t g = 0; g < 3; ++g) {
        out += "| " + pad_right(row_labels[g], label_width);
        for (std::size_t m = 0; m < 3; ++m) {
            out += " | " + pad_left(cells[m][g], widths[m]);
        }
        out += " |\n";
    }
    return out;
}

} // namespace popaudit
