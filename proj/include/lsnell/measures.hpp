#pragma once
#include "lsnell/scenario_tree.hpp"
#include "lsnell/semimetric.hpp"
#include "lsnell/stopping.hpp"

#include <map>
#include <utility>

namespace lsnell {

// A probability measure absolutely continuous w.r.t. the tree's reference
// weights, stored as the density vector dQ/dP.
struct Measure {
    std::vector<double> density;               // per path, >= 0, E_P[density] = 1
    std::optional<std::vector<Rational>> exact; // set when inputs were exact
    bool equivalent = false;                    // all densities strictly positive
};

// Validates nonnegativity and unit mass (1e-10). Throws MeasureError.
Measure make_measure(const ScenarioTree& tree, std::vector<double> density,
                     std::optional<std::vector<Rational>> exact = std::nullopt);

Measure reference_measure(const ScenarioTree& tree); // density == 1

struct MeasureFamily {
    const ScenarioTree* tree = nullptr; // non-owning
    std::vector<Measure> members;
    std::vector<std::string> labels;   // optional parameter tags (empty or one per member)
    bool pasting_closed_by_construction = false;

    int size() const { return static_cast<int>(members.size()); }
};

MeasureFamily make_family(const ScenarioTree& tree, std::vector<Measure> members,
                          std::vector<std::string> labels = {});

// Density vectors in the requested scalar type.
template <class T> std::vector<T> density_of(const Measure& q);
template <> inline std::vector<double> density_of<double>(const Measure& q) { return q.density; }
template <> inline std::vector<Rational> density_of<Rational>(const Measure& q) {
    if (q.exact) return *q.exact;
    return rationals_from_doubles(q.density);
}

// --- pasting -----------------------------------------------------------------

template <class T>
struct PasteResult {
    std::vector<T> density;
    bool used_fallback = false; // a q2-null stopped atom kept its q1 density
};

// The measure that follows q1 up to tau and re-weights by q2's conditional law
// afterwards: density(w) = d2(w) * Q1(atom)/Q2(atom) on each stopped atom. A
// q2-null atom keeps d1 there (preserving atom mass), and the result is flagged.
template <class T>
PasteResult<T> paste_density(const ScenarioTree& tree, const std::vector<T>& d1,
                             const std::vector<T>& d2, const StoppingTime& tau) {
    const auto pw = weights_of<T>(tree);
    PasteResult<T> out;
    out.density.assign(tree.n_paths(), T(0));
    for (const auto& atom : policy_atoms(tree, tau)) {
        T m1(0), m2(0);
        for (int w : atom) {
            m1 += d1[w] * pw[w];
            m2 += d2[w] * pw[w];
        }
        if (m2 == T(0)) {
            out.used_fallback = true;
            for (int w : atom) out.density[w] = d1[w];
        } else {
            T ratio = m1 / m2;
            for (int w : atom) out.density[w] = d2[w] * ratio;
        }
    }
    return out;
}

Measure paste(const ScenarioTree& tree, const Measure& q1, const Measure& q2,
              const StoppingTime& tau, bool* used_fallback = nullptr);

// --- total-variation geometry ------------------------------------------------

// sup_A |Q1(A) - Q2(A)| = sum of positive parts of (d1 - d2) * P.
template <class T>
T tv_distance_t(const ScenarioTree& tree, const std::vector<T>& d1, const std::vector<T>& d2) {
    const auto pw = weights_of<T>(tree);
    T acc(0);
    for (int w = 0; w < tree.n_paths(); ++w) {
        T diff = (d1[w] - d2[w]) * pw[w];
        if (diff > T(0)) acc += diff;
    }
    return acc;
}

double tv_distance(const ScenarioTree& tree, const Measure& q1, const Measure& q2);

// Q_i(A) per member.
std::vector<double> vector_measure_eval(const MeasureFamily& family, const std::vector<int>& event);

struct CompactnessDiag {
    int net_size = 0;
    bool covered = true;
    std::vector<int> net_members; // indices of the greedy net centers
};

// Greedy eps-net of the members under tv_distance (index order, deterministic).
CompactnessDiag range_compactness_diag(const MeasureFamily& family, double eps);

struct DensityPathDiag {
    std::vector<std::pair<double, double>> modulus; // (delta, omega(delta))
    std::vector<double> dominated_by;               // pathwise max density
    double dominated_integral = 0.0;                // E_P of the dominating vector
};

// Empirical uniform-continuity modulus of theta -> density over the labeled
// semimetric, plus the dominating envelope. Distances index family members.
DensityPathDiag density_path_diagnostics(const MeasureFamily& family, const SemimetricSample& d,
                                         const std::vector<double>& delta_grid = {});

// Density of the mixture sum_i w_i Q_i; weights on the simplex within 1e-12.
Measure convex_combination(const MeasureFamily& family, const std::vector<double>& weights);

// --- rectangular families ------------------------------------------------------

// One-step conditional-probability box at an interior node: a closed interval
// per child, inside the open simplex.
struct BranchBox {
    std::vector<std::pair<Rational, Rational>> intervals; // per child, [lo, hi]
};

// Boxes for every interior node, keyed by (level, node).
using BoxSet = std::map<std::pair<int, int>, BranchBox>;

// Box whose intervals are all degenerate at the reference conditionals.
BoxSet boxes_at_reference(const ScenarioTree& tree);

// All vertices of {p in the simplex : lo <= p <= hi}: at most one coordinate
// off its bounds. Deduplicated, deterministic order.
std::vector<std::vector<Rational>> box_vertices(const BranchBox& box);

// The finite family of extreme measures of the nodewise-box ambiguity set: one
// vertex conditional per interior node, all combinations. Closed under pasting
// by construction; the returned family carries the flag.
MeasureFamily rectangular_family(const ScenarioTree& tree, const BoxSet& boxes);

} // namespace lsnell
