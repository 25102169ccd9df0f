#pragma once
#include "lsnell/measures.hpp"
#include "lsnell/stopping.hpp"

namespace lsnell {

// Nodewise minimum over members of the conditional expectation E_Q[x | F_level].
// Members with zero mass on a node are skipped there; a node null under every
// member throws. `any_null` reports whether any member was skipped anywhere.
template <class T>
std::vector<T> essinf_conditional(const ScenarioTree& tree,
                                  const std::vector<std::vector<T>>& densities,
                                  const std::vector<T>& x, int level, bool* any_null = nullptr);

// L-infinity distance from `target` to the convex hull of the member densities,
// with the best mixture weights. Exact LP in rational mode.
template <class T>
std::pair<T, std::vector<T>> hull_distance(const ScenarioTree& tree,
                                           const std::vector<std::vector<T>>& densities,
                                           const std::vector<T>& target);

struct PastingWitness {
    int q1 = -1, q2 = -1;          // member indices
    std::vector<int> tau_levels;   // the stopping time, per path
    double tv_to_nearest = 0.0;    // distance from the paste to the closest member
};

struct StabilityResult {
    bool stable = true;
    std::uint64_t pastings_checked = 0;
    std::optional<PastingWitness> witness;
};

// True iff every paste of two members at every supplied policy stays within
// tv tolerance of some member.
StabilityResult is_stable_under_pasting(const MeasureFamily& family,
                                        const std::vector<StoppingTime>& taus, double tol);

struct RecursivenessResult {
    bool ok = true;
    std::vector<double> lhs_nodes, rhs_nodes; // at level tau_idx
    int witness_node = -1;
};

// Checks, nodewise at tau_idx: collapsing x first at sigma_idx and then at
// tau_idx (both by worst-case conditional expectation) equals the direct
// collapse at tau_idx.
RecursivenessResult recursiveness_check(const MeasureFamily& family, const std::vector<double>& x,
                                        int tau_idx, int sigma_idx, double tol);

struct ConsistencyWitness {
    std::vector<double> x, z; // z empty unless the implication form found it
    int tau_idx = -1, sigma_idx = -1, node = -1;
    double lhs = 0.0, rhs = 0.0;
};

struct TimeConsistencyResult {
    bool consistent = true;
    bool over_test_universe = true;
    std::optional<ConsistencyWitness> witness;
    std::uint64_t checks_run = 0;
};

// Sound refutation over the supplied (x, z) and (tau <= sigma) pairs via the
// worst-case-implication form; confirmation path runs recursiveness over the
// full singleton-indicator basis at every level pair.
TimeConsistencyResult is_time_consistent(const MeasureFamily& family,
                                         const std::vector<std::pair<std::vector<double>,
                                                                     std::vector<double>>>& test_pairs,
                                         const std::vector<std::pair<int, int>>& stop_pairs,
                                         double tol);

struct Statement2Result {
    bool ok = true;
    double lhs = 0.0, rhs = 0.0; // min_Q E_Q[x] vs min_Q E_Q[collapsed x]
};

// min_Q E_Q[x] <= min_Q E_Q[nodewise-worst-case collapse of x at tau_idx] + tol.
Statement2Result statement2_check(const MeasureFamily& family, const std::vector<double>& x,
                                  int tau_idx, double tol);

struct ConsistencyOptions {
    double tol = 1e-9;
    std::uint64_t policy_cap = 2000; // constant-time policies only above the cap
    int interior_mixtures = 4;       // sampled interior points of the weight simplex
    int random_x_samples = 20;
    std::uint64_t seed = 20260814;
    // When set, replaces the enumerated policy universe (per-path stop levels).
    std::optional<std::vector<std::vector<int>>> explicit_taus;
};

struct ConsistencyReport {
    bool pasting_stable = true;
    std::uint64_t pastings_checked = 0;
    std::optional<PastingWitness> pasting_witness;

    bool recursive = true;
    std::optional<ConsistencyWitness> recursive_witness;
    std::uint64_t recursiveness_checks = 0;

    bool time_consistent = true;
    bool over_test_universe = true;
    std::optional<ConsistencyWitness> tc_witness;

    bool statement2_ok = true;
    std::optional<ConsistencyWitness> statement2_witness;
    std::uint64_t statement2_checks = 0;

    bool mixture_stable = true;     // pastes of hull mixtures stay in the hull
    std::uint64_t mixtures_checked = 0;
    double mixture_worst_residual = 0.0;

    bool policies_exhaustive = true; // false when the policy cap forced a subset
    bool implications_consistent = true; // pasting-stable families never refuted downstream
    std::string tested_universe;
};

// Full report over a deterministic test universe: enumerated policies (or
// constant policies above the cap), the singleton-indicator basis, and seeded
// random vectors. Witnesses found in floating point are replayed exactly and
// kept only when the violation survives.
ConsistencyReport consistency_report(const MeasureFamily& family, const ConsistencyOptions& opt);

} // namespace lsnell
