#include "lsnell/duality.hpp"
#include "lsnell/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <type_traits>

namespace lsnell {

template <class T>
std::vector<T> policy_payoffs(const ScenarioTree& tree, const Levels<T>& y,
                              const std::vector<std::vector<T>>& densities,
                              const StoppingTime& tau) {
    const auto pw = weights_of<T>(tree);
    auto stopped = stopped_values<T>(tree, y, tau);
    std::vector<T> out(densities.size(), T(0));
    for (std::size_t i = 0; i < densities.size(); ++i) {
        T acc(0);
        for (int w = 0; w < tree.n_paths(); ++w) acc += stopped[w] * densities[i][w] * pw[w];
        out[i] = acc;
    }
    return out;
}

namespace {

template <class T>
T min_of(const std::vector<T>& xs) {
    T best = xs[0];
    for (const auto& v : xs) best = std::min(best, v);
    return best;
}

// Deterministic candidate policies: each member's optimal policy, the first
// hit of the nodewise-worst envelope, and every constant-level policy.
template <class T>
std::vector<StoppingTime> candidate_policies(const ScenarioTree& tree, const Levels<T>& y,
                                             const std::vector<std::vector<T>>& densities,
                                             bool* any_null = nullptr) {
    const int K = tree.depth();
    std::vector<StoppingTime> cands;
    std::set<std::vector<int>> seen;
    auto add = [&](StoppingTime tau) {
        if (seen.insert(tau.stop_level).second) cands.push_back(std::move(tau));
    };
    bool null_seen = false;
    for (const auto& d : densities) {
        auto res = snell_envelope_t<T>(tree, y, d);
        null_seen = null_seen || res.any_null_node;
        add(std::move(res.policy));
    }
    {
        bool ln = false;
        auto lower = lower_snell_t<T>(tree, y, densities, &ln);
        null_seen = null_seen || ln;
        std::vector<int> lev(tree.n_paths(), K);
        for (int w = 0; w < tree.n_paths(); ++w)
            for (int k = 0; k <= K; ++k)
                if (y[k][tree.node_of[k][w]] >= lower[k][tree.node_of[k][w]]) {
                    lev[w] = k;
                    break;
                }
        add(make_stopping_time(tree, std::move(lev)));
    }
    for (int k = 0; k <= K; ++k) add(constant_policy(tree, k));
    if (any_null) *any_null = null_seen;
    return cands;
}

template <class T>
bool cut_converged(const T& f, const T& master, double tol) {
    if constexpr (std::is_same_v<T, Rational>) {
        (void)tol;
        return f <= master;
    } else {
        return f <= master + tol;
    }
}

} // namespace

template <class T>
PureValue<T> lower_value_pure_t(const ScenarioTree& tree, const Levels<T>& y,
                                const std::vector<std::vector<T>>& densities,
                                std::uint64_t cap, bool allow_heuristic) {
    if (densities.empty()) throw MeasureError("the family must be nonvoid");
    std::vector<StoppingTime> policies;
    bool heuristic = false;
    if (count_policies(tree, cap) <= cap) {
        policies = enumerate_policies(tree, cap);
    } else {
        if (!allow_heuristic)
            throw PolicyError("policy enumeration exceeds the cap and the heuristic is disabled");
        policies = candidate_policies<T>(tree, y, densities);
        heuristic = true;
    }
    PureValue<T> best;
    best.heuristic = heuristic;
    best.n_policies = policies.size();
    bool first = true;
    for (auto& tau : policies) {
        T v = min_of(policy_payoffs<T>(tree, y, densities, tau));
        if (first || v > best.value) {
            best.value = v;
            best.policy = tau;
            first = false;
        }
    }
    return best;
}

template <class T>
GameSolution<T> game_over_policies(const ScenarioTree& tree, const Levels<T>& y,
                                   const std::vector<std::vector<T>>& densities,
                                   const std::vector<StoppingTime>& policies) {
    if (policies.empty()) throw SolverError("the stopping game needs at least one policy row");
    std::vector<std::vector<T>> payoff;
    payoff.reserve(policies.size());
    for (const auto& tau : policies)
        payoff.push_back(policy_payoffs<T>(tree, y, densities, tau));
    return solve_matrix_game(payoff);
}

template <class T>
CutLoopResult<T> run_cut_loop(const ScenarioTree& tree, const Levels<T>& y,
                              const std::vector<std::vector<T>>& densities,
                              std::vector<StoppingTime> seed_policies, double tol, int max_cuts) {
    CutLoopResult<T> res;
    std::set<std::vector<int>> seen;
    for (auto& tau : seed_policies)
        if (seen.insert(tau.stop_level).second) res.cuts.push_back(std::move(tau));
    if (res.cuts.empty()) res.cuts.push_back(constant_policy(tree, 0));

    std::vector<std::vector<T>> payoff;
    payoff.reserve(res.cuts.size());
    for (const auto& tau : res.cuts)
        payoff.push_back(policy_payoffs<T>(tree, y, densities, tau));

    bool have_best = false;
    T f_best{};
    std::vector<T> w_best;
    while (true) {
        ++res.iterations;
        auto sol = solve_matrix_game(payoff);
        res.master_value = sol.value;
        res.row_mix = sol.row_mix;

        // best response to the equilibrium column weights
        std::vector<T> mix(tree.n_paths(), T(0));
        for (std::size_t i = 0; i < densities.size(); ++i)
            for (int w = 0; w < tree.n_paths(); ++w) mix[w] += sol.col_mix[i] * densities[i][w];
        auto snell = snell_envelope_t<T>(tree, y, mix);
        if (!have_best || snell.root < f_best) {
            f_best = snell.root;
            w_best = sol.col_mix;
            have_best = true;
        }
        if (cut_converged(snell.root, sol.value, tol)) {
            res.converged = true;
            break;
        }
        if (static_cast<int>(res.cuts.size()) >= max_cuts) break;
        if (!seen.insert(snell.policy.stop_level).second) {
            // the best response is already a row: floating-point stall
            break;
        }
        payoff.push_back(policy_payoffs<T>(tree, y, densities, snell.policy));
        res.cuts.push_back(std::move(snell.policy));
    }
    res.best_response_value = f_best;
    res.weights = std::move(w_best);
    return res;
}

template <class T>
T rho_t(const ScenarioTree& tree, const std::vector<std::vector<T>>& densities,
        const std::vector<T>& x) {
    if (densities.empty()) throw MeasureError("the family must be nonvoid");
    bool first = true;
    T best{};
    for (const auto& d : densities) {
        T v = expectation<T>(tree, d, x);
        if (first || v > best) {
            best = v;
            first = false;
        }
    }
    return best;
}

template <class T>
ConditionAResult<T> condition_a_check_t(const ScenarioTree& tree, const Levels<T>& y,
                                        const std::vector<std::vector<T>>& densities,
                                        const T& lambda, const StoppingTime& tau1,
                                        const StoppingTime& tau2, int atom_cap) {
    if (densities.empty()) throw MeasureError("the family must be nonvoid");
    if (!(lambda > T(0)) || !(lambda < T(1)))
        throw InputError("the mixing weight must lie strictly between 0 and 1");
    if (tau1.stops_at_root() || tau2.stops_at_root())
        throw PolicyError("the condition check needs nonzero stopping times");
    StoppingTime tmin = min_policy(tree, tau1, tau2);
    auto atoms = policy_atoms(tree, tmin);
    const std::size_t n_atoms = atoms.size();
    const std::size_t members = densities.size();
    const auto pw = weights_of<T>(tree);

    // integrand Y_tau2 - Y_tau1 per path, pre-summed per (member, atom)
    auto s1 = stopped_values<T>(tree, y, tau1);
    auto s2 = stopped_values<T>(tree, y, tau2);
    std::vector<std::vector<T>> atom_sum(members, std::vector<T>(n_atoms, T(0)));
    std::vector<T> total(members, T(0));
    for (std::size_t i = 0; i < members; ++i)
        for (std::size_t a = 0; a < n_atoms; ++a)
            for (int w : atoms[a]) {
                T v = (s2[w] - s1[w]) * densities[i][w] * pw[w];
                atom_sum[i][a] += v;
                total[i] += v;
            }

    auto objective = [&](const std::vector<char>& in) {
        bool first = true;
        T best{};
        for (std::size_t i = 0; i < members; ++i) {
            T v(0);
            for (std::size_t a = 0; a < n_atoms; ++a)
                if (in[a]) v += atom_sum[i][a];
            v -= lambda * total[i];
            if (first || v > best) {
                best = v;
                first = false;
            }
        }
        return best;
    };

    ConditionAResult<T> res;
    std::vector<char> pick(n_atoms, 0);
    if (n_atoms <= static_cast<std::size_t>(std::min(atom_cap, 25))) {
        bool first = true;
        std::vector<char> in(n_atoms, 0);
        for (std::uint64_t mask = 0; mask < (1ULL << n_atoms); ++mask) {
            for (std::size_t a = 0; a < n_atoms; ++a) in[a] = (mask >> a) & 1;
            T v = objective(in);
            if (first || v < res.inf_value) {
                res.inf_value = v;
                pick = in;
                first = false;
            }
        }
        res.exact = true;
    } else {
        // greedy single-flip descent from the empty event: an upper bound
        std::vector<char> in(n_atoms, 0);
        T cur = objective(in);
        while (true) {
            std::size_t best_flip = n_atoms;
            T best_val = cur;
            for (std::size_t a = 0; a < n_atoms; ++a) {
                in[a] = !in[a];
                T v = objective(in);
                in[a] = !in[a];
                if (v < best_val) {
                    best_val = v;
                    best_flip = a;
                }
            }
            if (best_flip == n_atoms) break;
            in[best_flip] = !in[best_flip];
            cur = best_val;
        }
        res.inf_value = cur;
        pick = in;
        res.exact = false;
    }
    for (std::size_t a = 0; a < n_atoms; ++a)
        if (pick[a])
            for (int w : atoms[a]) res.argmin_event.push_back(w);
    std::sort(res.argmin_event.begin(), res.argmin_event.end());
    return res;
}

// explicit instantiations
template std::vector<double> policy_payoffs<double>(const ScenarioTree&, const Levels<double>&,
                                                    const std::vector<std::vector<double>>&,
                                                    const StoppingTime&);
template std::vector<Rational> policy_payoffs<Rational>(const ScenarioTree&,
                                                        const Levels<Rational>&,
                                                        const std::vector<std::vector<Rational>>&,
                                                        const StoppingTime&);
template PureValue<double> lower_value_pure_t<double>(const ScenarioTree&, const Levels<double>&,
                                                      const std::vector<std::vector<double>>&,
                                                      std::uint64_t, bool);
template PureValue<Rational> lower_value_pure_t<Rational>(const ScenarioTree&,
                                                          const Levels<Rational>&,
                                                          const std::vector<std::vector<Rational>>&,
                                                          std::uint64_t, bool);
template GameSolution<double> game_over_policies<double>(const ScenarioTree&,
                                                         const Levels<double>&,
                                                         const std::vector<std::vector<double>>&,
                                                         const std::vector<StoppingTime>&);
template GameSolution<Rational> game_over_policies<Rational>(
    const ScenarioTree&, const Levels<Rational>&, const std::vector<std::vector<Rational>>&,
    const std::vector<StoppingTime>&);
template CutLoopResult<double> run_cut_loop<double>(const ScenarioTree&, const Levels<double>&,
                                                    const std::vector<std::vector<double>>&,
                                                    std::vector<StoppingTime>, double, int);
template CutLoopResult<Rational> run_cut_loop<Rational>(const ScenarioTree&,
                                                        const Levels<Rational>&,
                                                        const std::vector<std::vector<Rational>>&,
                                                        std::vector<StoppingTime>, double, int);
template double rho_t<double>(const ScenarioTree&, const std::vector<std::vector<double>>&,
                              const std::vector<double>&);
template Rational rho_t<Rational>(const ScenarioTree&, const std::vector<std::vector<Rational>>&,
                                  const std::vector<Rational>&);
template ConditionAResult<double> condition_a_check_t<double>(
    const ScenarioTree&, const Levels<double>&, const std::vector<std::vector<double>>&,
    const double&, const StoppingTime&, const StoppingTime&, int);
template ConditionAResult<Rational> condition_a_check_t<Rational>(
    const ScenarioTree&, const Levels<Rational>&, const std::vector<std::vector<Rational>>&,
    const Rational&, const StoppingTime&, const StoppingTime&, int);

namespace {

template <class T>
DualityReport compute_duality_t(const ScenarioTree& tree, const AdaptedProcess& y,
                                const MeasureFamily& family, const DualityOptions& opt) {
    DualityReport rep;
    const Levels<T> yt = process_levels<T>(y);
    std::vector<std::vector<T>> densities;
    densities.reserve(family.members.size());
    for (const auto& q : family.members) {
        densities.push_back(density_of<T>(q));
        rep.members_equivalent = rep.members_equivalent && q.equivalent;
    }

    // pure lower value
    const bool enumerable = count_policies(tree, opt.policy_cap) <= opt.policy_cap;
    auto pure = lower_value_pure_t<T>(tree, yt, densities, opt.policy_cap, opt.allow_heuristic);
    rep.lower_pure = scalar_to_double<T>(pure.value);
    rep.argmax_policy = pure.policy.stop_level;
    rep.heuristic_lower = pure.heuristic;
    rep.n_policies = pure.n_policies;

    bool cand_null = false;
    auto candidates = candidate_policies<T>(tree, yt, densities, &cand_null);
    rep.any_null_node = rep.any_null_node || cand_null;

    // randomized lower value
    T lower_rand{};
    if (enumerable) {
        auto policies = enumerate_policies(tree, opt.policy_cap);
        auto sol = game_over_policies<T>(tree, yt, densities, policies);
        lower_rand = sol.value;
        for (std::size_t r = 0; r < policies.size(); ++r) {
            double wgt = scalar_to_double<T>(sol.row_mix[r]);
            if (wgt > 1e-12) rep.mixed_policy.emplace_back(policies[r].stop_level, wgt);
        }
    } else {
        std::vector<StoppingTime> seed = candidates;
        seed.push_back(pure.policy);
        auto loop = run_cut_loop<T>(tree, yt, densities, std::move(seed), opt.kelley_tol,
                                    opt.max_cuts);
        lower_rand = loop.master_value;
        rep.solver_converged = rep.solver_converged && loop.converged;
        for (std::size_t r = 0; r < loop.cuts.size(); ++r) {
            double wgt = scalar_to_double<T>(loop.row_mix[r]);
            if (wgt > 1e-12) rep.mixed_policy.emplace_back(loop.cuts[r].stop_level, wgt);
        }
    }
    rep.lower_randomized = scalar_to_double<T>(lower_rand);

    // upper value by cutting planes (independent of the game above)
    std::vector<StoppingTime> seed = candidates;
    seed.push_back(pure.policy);
    auto kelley = run_cut_loop<T>(tree, yt, densities, std::move(seed), opt.kelley_tol,
                                  opt.max_cuts);
    rep.upper = scalar_to_double<T>(kelley.best_response_value);
    rep.cut_iterations = kelley.iterations;
    rep.solver_converged = rep.solver_converged && kelley.converged;
    rep.argmin_weights.clear();
    for (const auto& wv : kelley.weights) rep.argmin_weights.push_back(scalar_to_double<T>(wv));

    rep.gap = rep.upper - rep.lower_pure;
    rep.pi_inf = rep.upper;

    // price interval: sup over members of the member Snell roots
    {
        bool first = true;
        for (int i = 0; i < family.size(); ++i) {
            auto res = snell_envelope_t<T>(tree, yt, densities[i]);
            rep.any_null_node = rep.any_null_node || res.any_null_node;
            double root = scalar_to_double<T>(res.root);
            if (first || root > rep.pi_sup) {
                rep.pi_sup = root;
                rep.pi_sup_member = i;
                first = false;
            }
        }
    }

    // pasting diagnostics
    if (family.pasting_closed_by_construction) {
        rep.pasting_closed = true;
        rep.pasting_checked = true;
    } else if (enumerable && family.size() <= 12 && rep.n_policies <= 300) {
        auto taus = enumerate_policies(tree, opt.policy_cap);
        auto stab = is_stable_under_pasting(family, taus, 1e-9);
        rep.pasting_closed = stab.stable;
        rep.pasting_checked = true;
    }

    // condition scan over the mixing-weight grid
    if (!opt.lambda_grid.empty()) {
        std::vector<StoppingTime> pool;
        if (enumerable) pool = enumerate_policies(tree, opt.policy_cap);
        else pool = candidates;
        std::vector<const StoppingTime*> nonzero;
        for (const auto& tau : pool)
            if (!tau.stops_at_root()) nonzero.push_back(&tau);
        if (nonzero.size() * nonzero.size() > opt.condition_a_pair_cap) {
            nonzero.clear();
            for (const auto& tau : candidates)
                if (!tau.stops_at_root()) nonzero.push_back(&tau);
        }
        for (double lam : opt.lambda_grid) {
            ConditionARow row;
            row.lambda = lam;
            // grid weights are decimal parameters: exact mode sees 0.1 as 1/10
            T lam_t;
            if constexpr (std::is_same_v<T, Rational>) lam_t = rational_from_decimal(lam);
            else lam_t = lam;
            bool first = true;
            T worst{};
            for (std::size_t i = 0; i < nonzero.size(); ++i) {
                for (std::size_t j = 0; j < nonzero.size(); ++j) {
                    auto ca = condition_a_check_t<T>(tree, yt, densities, lam_t, *nonzero[i],
                                                     *nonzero[j], opt.condition_a_atom_cap);
                    row.exact = row.exact && ca.exact;
                    if (first || ca.inf_value > worst) {
                        worst = ca.inf_value;
                        row.worst_tau1 = static_cast<int>(i);
                        row.worst_tau2 = static_cast<int>(j);
                        first = false;
                    }
                }
            }
            row.worst_inf = first ? 0.0 : scalar_to_double<T>(worst);
            row.all_pairs_ok = row.worst_inf <= 1e-9;
            if constexpr (std::is_same_v<T, Rational>) {
                if (!first) row.worst_inf_exact = rational_to_string(worst);
            }
            rep.condition_a.push_back(std::move(row));
        }
    }

    rep.ordering_ok = rep.lower_pure <= rep.lower_randomized + 1e-9 &&
                      rep.lower_randomized <= rep.upper + 1e-9;
    rep.strong_duality_ok = std::abs(rep.lower_randomized - rep.upper) <= opt.lp_tol;
    rep.checks_pass = rep.ordering_ok && rep.strong_duality_ok && rep.solver_converged;

    if constexpr (std::is_same_v<T, Rational>) {
        rep.lower_pure_exact = rational_to_string(pure.value);
        rep.lower_randomized_exact = rational_to_string(lower_rand);
        rep.upper_exact = rational_to_string(kelley.best_response_value);
        rep.gap_exact = rational_to_string(kelley.best_response_value - pure.value);
    }
    return rep;
}

} // namespace

DualityReport compute_duality(const ScenarioTree& tree, const AdaptedProcess& y,
                              const MeasureFamily& family, const DualityOptions& opt) {
    if (family.tree != &tree) throw MeasureError("the family lives on a different tree");
    if (opt.exact) return compute_duality_t<Rational>(tree, y, family, opt);
    return compute_duality_t<double>(tree, y, family, opt);
}

} // namespace lsnell
