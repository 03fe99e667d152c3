#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "detreg/inference.hpp"

namespace detreg {

struct InstanceTooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct OracleResult {
    Assignment best_assignment;
    double best_value = -std::numeric_limits<double>::infinity();
    std::uint64_t enumerated_count = 0;
};

struct OracleOptions {
    bool allow_background = true;     // the relaxed single-assignment constraint
    bool enforce_box_constraint = true;
};

inline constexpr int kOracleMaxPoints = 10;

namespace detail {

/// Enumerates every hard assignment satisfying the constraint system, in a
/// fixed order: exemplar sets as ascending bitmasks (sets violating the
/// per-box limit are skipped during generation), then for each set a
/// mixed-radix sweep over the non-exemplars' choices, each cycling through
/// [background, exemplars ascending].
template <typename Visitor>
void for_each_valid_assignment(int n, const std::vector<int>& box_ids,
                               const OracleOptions& opts, Visitor&& visit) {
    if (n < 0 || n > kOracleMaxPoints)
        throw InstanceTooLarge("oracle enumeration supports at most " +
                               std::to_string(kOracleMaxPoints) + " points, got " +
                               std::to_string(n));
    if (static_cast<int>(box_ids.size()) != n)
        throw DimensionMismatch("box_ids length does not match point count");
    if (n == 0) {
        Assignment a;
        visit(a);
        return;
    }

    const int option_base = opts.allow_background ? 1 : 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (opts.enforce_box_constraint) {
            bool clash = false;
            for (int i = 0; i < n && !clash; ++i) {
                if (!(mask & (1u << i))) continue;
                for (int j = i + 1; j < n && !clash; ++j)
                    if ((mask & (1u << j)) && box_ids[i] == box_ids[j]) clash = true;
            }
            if (clash) continue;
        }
        std::vector<int> exemplars;
        std::vector<int> members;
        for (int i = 0; i < n; ++i)
            (mask & (1u << i)) ? exemplars.push_back(i) : members.push_back(i);
        const int options = option_base + static_cast<int>(exemplars.size());
        if (options == 0 && !members.empty()) continue;  // nothing to assign members to

        Assignment a;
        a.exemplar_of.assign(static_cast<std::size_t>(n), kBackground);
        for (int e : exemplars) a.exemplar_of[static_cast<std::size_t>(e)] = e;

        std::vector<int> digit(members.size(), 0);
        while (true) {
            for (std::size_t d = 0; d < members.size(); ++d) {
                const int choice = digit[d];
                a.exemplar_of[static_cast<std::size_t>(members[d])] =
                    (opts.allow_background && choice == 0)
                        ? kBackground
                        : exemplars[static_cast<std::size_t>(choice - option_base)];
            }
            visit(a);
            std::size_t d = 0;
            while (d < members.size() && ++digit[d] == options) digit[d++] = 0;
            if (d == members.size()) break;
        }
    }
}

}  // namespace detail

inline std::vector<Assignment> enumerate_valid_assignments(int n, const std::vector<int>& box_ids,
                                                           const OracleOptions& opts = {}) {
    std::vector<Assignment> out;
    detail::for_each_valid_assignment(n, box_ids, opts,
                                      [&](const Assignment& a) { out.push_back(a); });
    return out;
}

/// Exhaustive maximiser of the weighted clustering objective; ground truth
/// for the message-passing path on small instances. Ties keep the first
/// assignment in enumeration order.
inline OracleResult brute_force_regularize(const CandidateSet& cands, const SimilarityModel& m,
                                           const ObjectiveWeights& w) {
    if (cands.size() != m.size())
        throw DimensionMismatch("candidate set does not match similarity model");
    OracleResult best;
    detail::for_each_valid_assignment(
        static_cast<int>(m.size()), m.box_ids(), OracleOptions{}, [&](const Assignment& a) {
            ++best.enumerated_count;
            const double v = objective_value(a, m, w);
            if (v > best.best_value) {
                best.best_value = v;
                best.best_assignment = a;
            }
        });
    return best;
}

/// Exhaustive maximiser of the classic objective (every point assigned,
/// no background, no box constraint); ground truth for apc_cluster.
inline OracleResult brute_force_apc(const SimilarityModel& m) {
    OracleOptions opts;
    opts.allow_background = false;
    opts.enforce_box_constraint = false;
    OracleResult best;
    detail::for_each_valid_assignment(
        static_cast<int>(m.size()), m.box_ids(), opts, [&](const Assignment& a) {
            ++best.enumerated_count;
            const double v = apc_objective_value(a, m);
            if (v > best.best_value) {
                best.best_value = v;
                best.best_assignment = a;
            }
        });
    return best;
}

}  // namespace detreg
