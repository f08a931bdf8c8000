#include "popaudit/stratify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "popaudit/textio.hpp"

namespace popaudit {

PopularityProfile popularity_profile(const InteractionDataset& train) {
    if (train.users == 0 || train.items == 0 || train.ratings.empty()) {
        throw std::invalid_argument("empty dataset");
    }
    PopularityProfile profile;
    std::vector<int> raters(static_cast<std::size_t>(train.items), 0);
    profile.profile_size.assign(static_cast<std::size_t>(train.users), 0);
    // At most one rating per (user, item), so rating count = distinct raters.
    for (const Rating& r : train.ratings) {
        ++raters[static_cast<std::size_t>(r.item)];
        ++profile.profile_size[static_cast<std::size_t>(r.user)];
    }
    profile.item_popularity.resize(static_cast<std::size_t>(train.items));
    for (int i = 0; i < train.items; ++i) {
        profile.item_popularity[static_cast<std::size_t>(i)] =
            static_cast<double>(raters[static_cast<std::size_t>(i)]) /
            static_cast<double>(train.users);
    }
    std::vector<double> sums(static_cast<std::size_t>(train.users), 0.0);
    for (const Rating& r : train.ratings) {
        sums[static_cast<std::size_t>(r.user)] +=
            profile.item_popularity[static_cast<std::size_t>(r.item)];
    }
    profile.user_inclination.assign(static_cast<std::size_t>(train.users),
                                    std::numeric_limits<double>::quiet_NaN());
    for (int u = 0; u < train.users; ++u) {
        int n = profile.profile_size[static_cast<std::size_t>(u)];
        if (n > 0) {
            profile.user_inclination[static_cast<std::size_t>(u)] =
                sums[static_cast<std::size_t>(u)] / static_cast<double>(n);
        }
    }
    return profile;
}

const char* group_label(Group group) {
    switch (group) {
        case Group::LowPop: return "LowPop";
        case Group::MedPop: return "MedPop";
        case Group::HighPop: return "HighPop";
    }
    throw std::invalid_argument("invalid group");
}

UserGroups split_groups(const PopularityProfile& profile) {
    std::vector<UserId> order;
    for (std::size_t u = 0; u < profile.user_inclination.size(); ++u) {
        if (profile.profile_size[u] > 0) {
            order.push_back(static_cast<UserId>(u));
        }
    }
    if (order.size() < 3) {
        throw std::invalid_argument("need at least 3 users with defined inclination, got " +
                                    std::to_string(order.size()));
    }
    std::sort(order.begin(), order.end(), [&profile](UserId a, UserId b) {
        double ia = profile.user_inclination[static_cast<std::size_t>(a)];
        double ib = profile.user_inclination[static_cast<std::size_t>(b)];
        if (ia != ib) {
            return ia < ib;
        }
        return a < b;
    });

    UserGroups groups;
    groups.assignment.assign(profile.user_inclination.size(), -1);
    std::size_t n = order.size();
    std::size_t first_cut = n / 3;
    std::size_t second_cut = 2 * n / 3;
    for (std::size_t pos = 0; pos < n; ++pos) {
        int g = pos < first_cut ? 0 : (pos < second_cut ? 1 : 2);
        groups.members[static_cast<std::size_t>(g)].push_back(order[pos]);
        groups.assignment[static_cast<std::size_t>(order[pos])] = static_cast<std::int8_t>(g);
    }
    for (auto& members : groups.members) {
        std::sort(members.begin(), members.end());
    }
    return groups;
}

void write_inclination_csv(std::ostream& out, const PopularityProfile& profile,
                           const UserGroups& groups, const IdMap& user_ids) {
    out << "user,inclination,group\n";
    for (std::size_t u = 0; u < profile.user_inclination.size(); ++u) {
        auto group = groups.group_of(static_cast<UserId>(u));
        if (!group) {
            continue;
        }
        out << textio::csv_field(user_ids.key(static_cast<int>(u))) << ','
            << textio::format_double(profile.user_inclination[u]) << ','
            << group_label(*group) << '\n';
    }
}

} // namespace popaudit
