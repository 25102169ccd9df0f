#pragma once
#include "lsnell/errors.hpp"
#include "lsnell/rational.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lsnell {

// Values per (time level, node); the carrier for adapted processes,
// conditional expectations and envelopes.
template <class T>
using Levels = std::vector<std::vector<T>>;

// A finite filtered probability space encoded as a scenario tree: refining
// partitions of a fixed path set, level 0 a single node, the last level all
// singletons, and strictly positive reference weights summing to one.
struct ScenarioTree {
    std::vector<double> times;                            // t_0 < ... < t_K
    std::vector<std::string> paths;                       // path identifiers
    std::vector<std::vector<std::vector<int>>> partitions; // [level][node] -> path indices
    std::vector<double> p_weights;                        // P(path), > 0
    std::optional<std::vector<Rational>> p_exact;         // set when inputs were exact

    // derived by make_tree
    std::vector<std::vector<int>> node_of;                 // [level][path] -> node
    std::vector<std::vector<std::vector<int>>> child_nodes; // [level][node] -> nodes at level+1
    std::vector<std::vector<int>> parent_node;             // [level][node] -> node at level-1

    int depth() const { return static_cast<int>(times.size()) - 1; }
    int n_paths() const { return static_cast<int>(paths.size()); }
    int n_nodes(int level) const { return static_cast<int>(partitions[level].size()); }
};

// Validates the invariants and fills the derived indexes. Throws TreeError.
ScenarioTree make_tree(std::vector<double> times,
                       std::vector<std::string> paths,
                       std::vector<std::vector<std::vector<int>>> partitions,
                       std::vector<double> p_weights,
                       std::optional<std::vector<Rational>> p_exact = std::nullopt);

// Non-recombining binary lattice of the given depth; every node branches with
// probability branch_prob on its first child. Exact weights always recorded.
ScenarioTree binary_lattice(int depth, const Rational& branch_prob);

// Reference weights in the requested scalar type.
template <class T> std::vector<T> weights_of(const ScenarioTree& tree);
template <> inline std::vector<double> weights_of<double>(const ScenarioTree& tree) {
    return tree.p_weights;
}
template <> inline std::vector<Rational> weights_of<Rational>(const ScenarioTree& tree) {
    if (tree.p_exact) return *tree.p_exact;
    return rationals_from_doubles(tree.p_weights);
}

enum class NullNodePolicy {
    Throw,       // raise NullNodeError carrying the node id
    ZeroAndFlag, // value 0 on Q-null nodes, flag recorded
};

template <class T>
struct CondExp {
    std::vector<T> node_values;  // one per node at the level
    std::vector<char> null_node; // 1 where the measure mass vanished
    bool any_null = false;
};

// E_Q[x | F_k] per node: sum(x * density * P) / sum(density * P) over the node.
template <class T>
CondExp<T> conditional_expectation(const ScenarioTree& tree,
                                   const std::vector<T>& density,
                                   const std::vector<T>& x,
                                   int level,
                                   NullNodePolicy null_policy = NullNodePolicy::Throw) {
    if (level < 0 || level > tree.depth()) throw TreeError("conditional_expectation: bad level");
    const auto pw = weights_of<T>(tree);
    const auto& nodes = tree.partitions[level];
    CondExp<T> out;
    out.node_values.assign(nodes.size(), T(0));
    out.null_node.assign(nodes.size(), 0);
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        T num(0), den(0);
        for (int w : nodes[n]) {
            T qp = density[w] * pw[w];
            num += x[w] * qp;
            den += qp;
        }
        if (den == T(0)) {
            if (null_policy == NullNodePolicy::Throw)
                throw NullNodeError(level, static_cast<int>(n));
            out.null_node[n] = 1;
            out.any_null = true;
            out.node_values[n] = T(0);
        } else {
            out.node_values[n] = num / den;
        }
    }
    return out;
}

// E_Q[x] = sum(x * density * P).
template <class T>
T expectation(const ScenarioTree& tree, const std::vector<T>& density, const std::vector<T>& x) {
    const auto pw = weights_of<T>(tree);
    T acc(0);
    for (int w = 0; w < tree.n_paths(); ++w) acc += x[w] * density[w] * pw[w];
    return acc;
}

// Spreads node values back onto paths (the node's value at each member path).
template <class T>
std::vector<T> expand_to_paths(const ScenarioTree& tree, int level, const std::vector<T>& node_values) {
    std::vector<T> out(tree.n_paths(), T(0));
    for (int w = 0; w < tree.n_paths(); ++w) out[w] = node_values[tree.node_of[level][w]];
    return out;
}

} // namespace lsnell
