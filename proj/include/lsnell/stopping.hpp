#pragma once
#include "lsnell/payoff.hpp"
#include "lsnell/scenario_tree.hpp"

#include <cstdint>

namespace lsnell {

// A stopping time on the tree, stored pathwise with the adaptedness witness:
// {tau = k} is a union of level-k nodes for every k.
struct StoppingTime {
    std::vector<int> stop_level;      // [path] -> level in [0, depth]
    std::vector<std::vector<char>> stop_flag; // [level][node] -> 1 iff the node stops there

    bool stops_at_root() const { return !stop_level.empty() && stop_flag[0][0] != 0; }
};

// Validates adaptedness of per-path stop levels. Throws PolicyError.
StoppingTime make_stopping_time(const ScenarioTree& tree, std::vector<int> stop_level);

// The constant stopping time tau == level.
StoppingTime constant_policy(const ScenarioTree& tree, int level);

// Pathwise minimum (always again a stopping time).
StoppingTime min_policy(const ScenarioTree& tree, const StoppingTime& a, const StoppingTime& b);

bool same_policy(const StoppingTime& a, const StoppingTime& b);

// Y_tau per path.
template <class T>
std::vector<T> stopped_values(const ScenarioTree& tree, const Levels<T>& payoff,
                              const StoppingTime& tau) {
    std::vector<T> out(tree.n_paths(), T(0));
    for (int w = 0; w < tree.n_paths(); ++w) {
        int k = tau.stop_level[w];
        out[w] = payoff[k][tree.node_of[k][w]];
    }
    return out;
}

// Atoms of the stopped information field: each stopped node, as a path set,
// listed in (level, node) order.
std::vector<std::vector<int>> policy_atoms(const ScenarioTree& tree, const StoppingTime& tau);

// Number of first-hit policies on the tree (every path must stop by the horizon).
// Grows as 1 + prod over children at each interior node; guarded against overflow.
std::uint64_t count_policies(const ScenarioTree& tree, std::uint64_t cap);

// All first-hit policies, stop-first ordering (a policy that stops at a node
// precedes every policy that continues through it). Throws PolicyError when the
// count exceeds the cap.
std::vector<StoppingTime> enumerate_policies(const ScenarioTree& tree, std::uint64_t cap);

} // namespace lsnell
