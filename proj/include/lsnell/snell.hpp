#pragma once
#include "lsnell/measures.hpp"
#include "lsnell/payoff.hpp"
#include "lsnell/stopping.hpp"

namespace lsnell {

template <class T>
struct SnellResult {
    Levels<T> values;     // envelope per (level, node)
    StoppingTime policy;  // first time the envelope touches the payoff
    T root;
    bool any_null_node = false; // a continuation value hit a measure-null node
};

// Classical Snell envelope under one density: backward induction
// U_K = Y_K, U_k = max(Y_k, E[U_{k+1} | F_k]), stop-early tie-break.
// Null nodes take continuation value 0 and set the flag.
template <class T>
SnellResult<T> snell_envelope_t(const ScenarioTree& tree, const Levels<T>& y,
                                const std::vector<T>& density) {
    const int K = tree.depth();
    const auto pw = weights_of<T>(tree);
    SnellResult<T> res;
    res.values.assign(K + 1, {});
    std::vector<std::vector<char>> stop(K + 1);

    // per-node measure mass at each level
    std::vector<std::vector<T>> mass(K + 1);
    for (int k = 0; k <= K; ++k) {
        mass[k].assign(tree.n_nodes(k), T(0));
        for (int m = 0; m < tree.n_nodes(k); ++m)
            for (int w : tree.partitions[k][m]) mass[k][m] += density[w] * pw[w];
    }

    res.values[K] = y[K];
    stop[K].assign(tree.n_nodes(K), 1);
    for (int k = K - 1; k >= 0; --k) {
        res.values[k].assign(tree.n_nodes(k), T(0));
        stop[k].assign(tree.n_nodes(k), 0);
        for (int m = 0; m < tree.n_nodes(k); ++m) {
            T cont(0);
            if (mass[k][m] == T(0)) {
                res.any_null_node = true;
            } else {
                for (int c : tree.child_nodes[k][m])
                    cont += mass[k + 1][c] * res.values[k + 1][c];
                cont /= mass[k][m];
            }
            if (y[k][m] >= cont) {
                res.values[k][m] = y[k][m];
                stop[k][m] = 1;
            } else {
                res.values[k][m] = cont;
            }
        }
    }
    res.root = res.values[0][0];

    std::vector<int> lev(tree.n_paths(), K);
    for (int w = 0; w < tree.n_paths(); ++w)
        for (int k = 0; k <= K; ++k)
            if (stop[k][tree.node_of[k][w]]) {
                lev[w] = k;
                break;
            }
    res.policy = make_stopping_time(tree, std::move(lev));
    return res;
}

// Nodewise minimum over the members' envelopes (terminal level = payoff).
template <class T>
Levels<T> lower_snell_t(const ScenarioTree& tree, const Levels<T>& y,
                        const std::vector<std::vector<T>>& densities, bool* any_null = nullptr) {
    if (densities.empty()) throw MeasureError("lower envelope needs a nonvoid family");
    Levels<T> lower;
    bool null_seen = false;
    bool first = true;
    for (const auto& d : densities) {
        auto res = snell_envelope_t<T>(tree, y, d);
        null_seen = null_seen || res.any_null_node;
        if (first) {
            lower = std::move(res.values);
            first = false;
        } else {
            for (std::size_t k = 0; k < lower.size(); ++k)
                for (std::size_t m = 0; m < lower[k].size(); ++m)
                    lower[k][m] = std::min(lower[k][m], res.values[k][m]);
        }
    }
    if (any_null) *any_null = null_seen;
    return lower;
}

// Robust envelope for nodewise boxes: U_k = max(Y_k, min over box vertices of
// the vertex-weighted child average). Exhibits the pasting-stable case.
template <class T>
SnellResult<T> robust_snell_boxes_t(const ScenarioTree& tree, const Levels<T>& y,
                                    const BoxSet& boxes) {
    const int K = tree.depth();
    SnellResult<T> res;
    res.values.assign(K + 1, {});
    std::vector<std::vector<char>> stop(K + 1);
    res.values[K] = y[K];
    stop[K].assign(tree.n_nodes(K), 1);
    for (int k = K - 1; k >= 0; --k) {
        res.values[k].assign(tree.n_nodes(k), T(0));
        stop[k].assign(tree.n_nodes(k), 0);
        for (int m = 0; m < tree.n_nodes(k); ++m) {
            auto it = boxes.find({k, m});
            if (it == boxes.end()) throw MeasureError("missing branch box for an interior node");
            const auto& kids = tree.child_nodes[k][m];
            if (it->second.intervals.size() != kids.size())
                throw MeasureError("branch box arity does not match the node's child count");
            bool first = true;
            T cont(0);
            for (const auto& vertex : box_vertices(it->second)) {
                T val(0);
                for (std::size_t c = 0; c < kids.size(); ++c)
                    val += res.values[k + 1][kids[c]] * scalar_from_rational<T>(vertex[c]);
                if (first || val < cont) {
                    cont = val;
                    first = false;
                }
            }
            if (y[k][m] >= cont) {
                res.values[k][m] = y[k][m];
                stop[k][m] = 1;
            } else {
                res.values[k][m] = cont;
            }
        }
    }
    res.root = res.values[0][0];
    std::vector<int> lev(tree.n_paths(), K);
    for (int w = 0; w < tree.n_paths(); ++w)
        for (int k = 0; k <= K; ++k)
            if (stop[k][tree.node_of[k][w]]) {
                lev[w] = k;
                break;
            }
    res.policy = make_stopping_time(tree, std::move(lev));
    return res;
}

// Convenience wrappers on the domain types (double scalars).
SnellResult<double> snell_envelope(const ScenarioTree& tree, const AdaptedProcess& y,
                                   const Measure& q);
Levels<double> lower_snell_envelope(const ScenarioTree& tree, const AdaptedProcess& y,
                                    const MeasureFamily& family);
SnellResult<double> robust_snell_rectangular(const ScenarioTree& tree, const AdaptedProcess& y,
                                             const BoxSet& boxes);

} // namespace lsnell
