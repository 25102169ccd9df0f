#pragma once
#include "lsnell/scenario_tree.hpp"

namespace lsnell {

// An adapted real process: one value per node per time level. Adaptedness is
// structural (values attach to nodes, not paths).
struct AdaptedProcess {
    Levels<double> values;                 // [level][node]
    std::optional<Levels<Rational>> exact; // set when inputs were exact

    int depth() const { return static_cast<int>(values.size()) - 1; }
};

// Validates the shape against the tree. Throws TreeError on mismatch.
AdaptedProcess make_process(const ScenarioTree& tree, Levels<double> values,
                            std::optional<Levels<Rational>> exact = std::nullopt);

// Node values in the requested scalar type.
template <class T> Levels<T> process_levels(const AdaptedProcess& proc);
template <> inline Levels<double> process_levels<double>(const AdaptedProcess& proc) {
    return proc.values;
}
template <> inline Levels<Rational> process_levels<Rational>(const AdaptedProcess& proc) {
    if (proc.exact) return *proc.exact;
    Levels<Rational> out(proc.values.size());
    for (std::size_t k = 0; k < proc.values.size(); ++k)
        out[k] = rationals_from_doubles(proc.values[k]);
    return out;
}

// The process evaluated pathwise at one level: value of the node owning each path.
template <class T>
std::vector<T> level_on_paths(const ScenarioTree& tree, const Levels<T>& levels, int level) {
    std::vector<T> out(tree.n_paths(), T(0));
    for (int w = 0; w < tree.n_paths(); ++w) out[w] = levels[level][tree.node_of[level][w]];
    return out;
}

// Pathwise running supremum of |Y|: y_star(w) = max over levels of |Y_level| on
// the node owning w. Finite on finite trees, so the payoff's integrability
// hypotheses hold automatically; reports carry the maximum.
std::vector<double> y_star(const ScenarioTree& tree, const AdaptedProcess& proc);

} // namespace lsnell
