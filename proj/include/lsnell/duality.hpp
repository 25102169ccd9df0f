#pragma once
#include "lsnell/matrix_game.hpp"
#include "lsnell/snell.hpp"

namespace lsnell {

// E_Q[Y_tau] for each density (one matrix row of the stopping game).
template <class T>
std::vector<T> policy_payoffs(const ScenarioTree& tree, const Levels<T>& y,
                              const std::vector<std::vector<T>>& densities,
                              const StoppingTime& tau);

template <class T>
struct PureValue {
    T value;
    StoppingTime policy;
    bool heuristic = false;    // candidate search instead of full enumeration
    std::uint64_t n_policies = 0; // policies examined
};

// sup over pure policies of (min over members of E_Q[Y_tau]). Enumerates all
// first-hit policies up to `cap`; above it, with `allow_heuristic`, searches a
// deterministic candidate set (member-optimal, robust first-hit, constant).
template <class T>
PureValue<T> lower_value_pure_t(const ScenarioTree& tree, const Levels<T>& y,
                                const std::vector<std::vector<T>>& densities,
                                std::uint64_t cap, bool allow_heuristic);

template <class T>
struct CutLoopResult {
    T master_value;                  // game value over the generated policy rows
    T best_response_value;           // Snell root at the final mixture weights
    std::vector<T> weights;          // minimizing simplex weights over members
    std::vector<StoppingTime> cuts;  // generated policies (game rows)
    std::vector<T> row_mix;          // equilibrium mixture over the cuts
    bool converged = false;
    int iterations = 0;
};

// Column generation / cutting planes: alternates the matrix game over the
// current policy rows with a Snell best response to the equilibrium column
// weights; adds the response as a new row until it stops improving. Exact
// termination in rational mode (finitely many first-hit policies).
template <class T>
CutLoopResult<T> run_cut_loop(const ScenarioTree& tree, const Levels<T>& y,
                              const std::vector<std::vector<T>>& densities,
                              std::vector<StoppingTime> seed_policies, double tol, int max_cuts);

// Value of the randomized-stopping game over an explicit policy set.
template <class T>
GameSolution<T> game_over_policies(const ScenarioTree& tree, const Levels<T>& y,
                                   const std::vector<std::vector<T>>& densities,
                                   const std::vector<StoppingTime>& policies);

// max over members of E_Q[x].
template <class T>
T rho_t(const ScenarioTree& tree, const std::vector<std::vector<T>>& densities,
        const std::vector<T>& x);

template <class T>
struct ConditionAResult {
    T inf_value;
    std::vector<int> argmin_event; // paths of the minimizing union of stopped atoms
    bool exact = true;             // false when the greedy heuristic produced a bound
};

// inf over events A measurable at tau1 ^ tau2 of max_Q E_Q[(1_A - lambda) *
// (Y_tau2 - Y_tau1)]. Exact subset enumeration up to `atom_cap` atoms,
// greedy descent above it. Root-stop policies are rejected.
template <class T>
ConditionAResult<T> condition_a_check_t(const ScenarioTree& tree, const Levels<T>& y,
                                        const std::vector<std::vector<T>>& densities,
                                        const T& lambda, const StoppingTime& tau1,
                                        const StoppingTime& tau2, int atom_cap);

// --- report-level driver -------------------------------------------------------

struct ConditionARow {
    double lambda = 0.0;
    double worst_inf = 0.0; // max over scanned policy pairs of the inf value
    bool all_pairs_ok = false;
    int worst_tau1 = -1;
    int worst_tau2 = -1;
    bool exact = true;
    std::string worst_inf_exact; // rational string in exact mode
};

struct DualityOptions {
    bool exact = false;
    std::uint64_t policy_cap = 20000;
    bool allow_heuristic = true;
    double lp_tol = 1e-7;
    double kelley_tol = 1e-9;
    int max_cuts = 10000;
    std::vector<double> lambda_grid; // empty = skip the condition scan
    int condition_a_atom_cap = 16;
    std::uint64_t condition_a_pair_cap = 10000;
    int threads = 1;
};

struct DualityReport {
    double lower_pure = 0.0;
    double lower_randomized = 0.0;
    double upper = 0.0;
    double gap = 0.0; // upper - lower_pure
    double pi_inf = 0.0;
    double pi_sup = 0.0;
    int pi_sup_member = 0;

    std::vector<int> argmax_policy;            // stop level per path
    std::vector<double> argmin_weights;        // upper minimizer over members
    std::vector<std::pair<std::vector<int>, double>> mixed_policy; // support of the row mixture

    bool heuristic_lower = false;
    std::uint64_t n_policies = 0;
    int cut_iterations = 0;
    bool solver_converged = true;

    bool atomless = false;      // finite trees are atomic
    bool pasting_closed = false;
    bool pasting_checked = false; // true when closure was decided (flag or exhaustive test)
    bool any_null_node = false;
    bool members_equivalent = true;

    std::vector<ConditionARow> condition_a;

    bool ordering_ok = true;    // lower_pure <= lower_randomized <= upper + 1e-9
    bool strong_duality_ok = true; // |lower_randomized - upper| <= lp_tol
    bool checks_pass = true;

    // rational strings, populated in exact mode
    std::string lower_pure_exact, lower_randomized_exact, upper_exact, gap_exact;
};

// End-to-end duality analysis of one (tree, payoff, family) instance.
DualityReport compute_duality(const ScenarioTree& tree, const AdaptedProcess& y,
                              const MeasureFamily& family, const DualityOptions& opt);

} // namespace lsnell
