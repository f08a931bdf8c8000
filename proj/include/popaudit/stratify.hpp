#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "popaudit/core.hpp"

namespace popaudit {

struct PopularityProfile {
    std::vector<double> item_popularity; // per item: distinct raters / |U|
    std::vector<double> user_inclination; // per user: mean popularity over profile; NaN if empty
    std::vector<int> profile_size;       // per user: number of rated items

    bool has_inclination(UserId user) const {
        return profile_size[static_cast<std::size_t>(user)] > 0;
    }
};

PopularityProfile popularity_profile(const InteractionDataset& train);

enum class Group : int { LowPop = 0, MedPop = 1, HighPop = 2 };

const char* group_label(Group group);

struct UserGroups {
    // Members per group, ascending by user id.
    std::array<std::vector<UserId>, 3> members;
    // Per user: group index, or -1 for users without a profile.
    std::vector<std::int8_t> assignment;

    std::optional<Group> group_of(UserId user) const {
        std::int8_t g = assignment[static_cast<std::size_t>(user)];
        if (g < 0) {
            return std::nullopt;
        }
        return static_cast<Group>(g);
    }
};

// Thirds of the users ordered ascending by (inclination, UserId); boundaries
// at floor(n/3) and floor(2n/3). Users with empty profiles are left out.
UserGroups split_groups(const PopularityProfile& profile);

void write_inclination_csv(std::ostream& out, const PopularityProfile& profile,
                           const UserGroups& groups, const IdMap& user_ids);

} // namespace popaudit
