#include "lsnell/consistency.hpp"
#include "lsnell/matrix_game.hpp"
#include "lsnell/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lsnell {

template <class T>
std::vector<T> essinf_conditional(const ScenarioTree& tree,
                                  const std::vector<std::vector<T>>& densities,
                                  const std::vector<T>& x, int level, bool* any_null) {
    if (densities.empty()) throw MeasureError("worst-case conditional needs a nonvoid family");
    if (level < 0 || level > tree.depth()) throw TreeError("bad level");
    const auto pw = weights_of<T>(tree);
    std::vector<T> out(tree.n_nodes(level), T(0));
    bool null_seen = false;
    for (int m = 0; m < tree.n_nodes(level); ++m) {
        bool have = false;
        T best(0);
        for (const auto& d : densities) {
            T num(0), den(0);
            for (int w : tree.partitions[level][m]) {
                T qp = d[w] * pw[w];
                num += x[w] * qp;
                den += qp;
            }
            if (den == T(0)) {
                null_seen = true;
                continue;
            }
            T val = num / den;
            if (!have || val < best) {
                best = val;
                have = true;
            }
        }
        if (!have) throw NullNodeError(level, m);
        out[m] = best;
    }
    if (any_null) *any_null = null_seen;
    return out;
}

template std::vector<double> essinf_conditional<double>(const ScenarioTree&,
                                                        const std::vector<std::vector<double>>&,
                                                        const std::vector<double>&, int, bool*);
template std::vector<Rational> essinf_conditional<Rational>(const ScenarioTree&,
                                                            const std::vector<std::vector<Rational>>&,
                                                            const std::vector<Rational>&, int, bool*);

template <class T>
std::pair<T, std::vector<T>> hull_distance(const ScenarioTree& tree,
                                           const std::vector<std::vector<T>>& densities,
                                           const std::vector<T>& target) {
    const int n = tree.n_paths();
    const int members = static_cast<int>(densities.size());
    std::vector<std::vector<T>> m(2 * n, std::vector<T>(members));
    for (int w = 0; w < n; ++w)
        for (int i = 0; i < members; ++i) {
            T resid = densities[i][w] - target[w];
            m[2 * w][i] = resid;
            m[2 * w + 1][i] = -resid;
        }
    auto sol = solve_matrix_game(m);
    return {sol.value, std::move(sol.col_mix)};
}

template std::pair<double, std::vector<double>> hull_distance<double>(
    const ScenarioTree&, const std::vector<std::vector<double>>&, const std::vector<double>&);
template std::pair<Rational, std::vector<Rational>> hull_distance<Rational>(
    const ScenarioTree&, const std::vector<std::vector<Rational>>&, const std::vector<Rational>&);

namespace {

std::vector<std::vector<double>> family_densities(const MeasureFamily& family) {
    std::vector<std::vector<double>> out;
    out.reserve(family.members.size());
    for (const auto& q : family.members) out.push_back(q.density);
    return out;
}

std::vector<std::vector<Rational>> family_densities_exact(const MeasureFamily& family) {
    std::vector<std::vector<Rational>> out;
    out.reserve(family.members.size());
    for (const auto& q : family.members) out.push_back(density_of<Rational>(q));
    return out;
}

// lhs/rhs of the nested worst-case collapse, nodewise at tau_idx
template <class T>
std::pair<std::vector<T>, std::vector<T>> recursiveness_sides(
    const ScenarioTree& tree, const std::vector<std::vector<T>>& densities,
    const std::vector<T>& x, int tau_idx, int sigma_idx) {
    auto inner = essinf_conditional<T>(tree, densities, x, sigma_idx);
    auto expanded = expand_to_paths<T>(tree, sigma_idx, inner);
    auto lhs = essinf_conditional<T>(tree, densities, expanded, tau_idx);
    auto rhs = essinf_conditional<T>(tree, densities, x, tau_idx);
    return {std::move(lhs), std::move(rhs)};
}

} // namespace

StabilityResult is_stable_under_pasting(const MeasureFamily& family,
                                        const std::vector<StoppingTime>& taus, double tol) {
    const ScenarioTree& tree = *family.tree;
    StabilityResult res;
    auto exact_densities = family_densities_exact(family);
    for (int i = 0; i < family.size(); ++i) {
        for (int j = 0; j < family.size(); ++j) {
            for (std::size_t t = 0; t < taus.size(); ++t) {
                Measure pasted = paste(tree, family.members[i], family.members[j], taus[t]);
                ++res.pastings_checked;
                double best = -1.0;
                for (const auto& q : family.members) {
                    double d = tv_distance(tree, pasted, q);
                    if (best < 0.0 || d < best) best = d;
                }
                if (best <= tol) continue;
                // exact replay before accepting the witness
                auto px = paste_density<Rational>(tree, exact_densities[i], exact_densities[j],
                                                  taus[t]);
                bool confirmed = true;
                for (const auto& dq : exact_densities)
                    if (tv_distance_t<Rational>(tree, px.density, dq) == 0) confirmed = false;
                if (!confirmed) continue;
                res.stable = false;
                PastingWitness w;
                w.q1 = i;
                w.q2 = j;
                w.tau_levels = taus[t].stop_level;
                w.tv_to_nearest = best;
                res.witness = std::move(w);
                return res;
            }
        }
    }
    return res;
}

RecursivenessResult recursiveness_check(const MeasureFamily& family, const std::vector<double>& x,
                                        int tau_idx, int sigma_idx, double tol) {
    if (sigma_idx < tau_idx) throw InputError("the inner collapse level must not precede the outer");
    const ScenarioTree& tree = *family.tree;
    auto [lhs, rhs] =
        recursiveness_sides<double>(tree, family_densities(family), x, tau_idx, sigma_idx);
    RecursivenessResult res;
    res.lhs_nodes = lhs;
    res.rhs_nodes = rhs;
    for (std::size_t m = 0; m < lhs.size(); ++m) {
        if (std::abs(lhs[m] - rhs[m]) <= tol) continue;
        // exact replay
        auto [lx, rx] = recursiveness_sides<Rational>(tree, family_densities_exact(family),
                                                      rationals_from_doubles(x), tau_idx, sigma_idx);
        if (lx[m] == rx[m]) continue;
        res.ok = false;
        res.witness_node = static_cast<int>(m);
        return res;
    }
    return res;
}

TimeConsistencyResult is_time_consistent(
    const MeasureFamily& family,
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& test_pairs,
    const std::vector<std::pair<int, int>>& stop_pairs, double tol) {
    const ScenarioTree& tree = *family.tree;
    auto dens = family_densities(family);
    auto dens_x = family_densities_exact(family);
    TimeConsistencyResult res;

    for (const auto& [t, s] : stop_pairs) {
        if (t > s) throw InputError("stop pairs must be ordered tau <= sigma");
        for (const auto& [x, z] : test_pairs) {
            ++res.checks_run;
            auto xa = essinf_conditional<double>(tree, dens, x, s);
            auto zb = essinf_conditional<double>(tree, dens, z, s);
            bool premise = true;
            for (std::size_t m = 0; m < xa.size() && premise; ++m)
                premise = xa[m] <= zb[m] + tol;
            if (!premise) continue;
            auto xt = essinf_conditional<double>(tree, dens, x, t);
            auto zt = essinf_conditional<double>(tree, dens, z, t);
            for (std::size_t m = 0; m < xt.size(); ++m) {
                if (xt[m] <= zt[m] + tol) continue;
                // exact replay: premise must hold and the conclusion must fail
                auto rx = rationals_from_doubles(x);
                auto rz = rationals_from_doubles(z);
                auto xas = essinf_conditional<Rational>(tree, dens_x, rx, s);
                auto zbs = essinf_conditional<Rational>(tree, dens_x, rz, s);
                bool prem_x = true;
                for (std::size_t mm = 0; mm < xas.size() && prem_x; ++mm)
                    prem_x = xas[mm] <= zbs[mm];
                if (!prem_x) continue;
                auto xtx = essinf_conditional<Rational>(tree, dens_x, rx, t);
                auto ztx = essinf_conditional<Rational>(tree, dens_x, rz, t);
                if (!(xtx[m] > ztx[m])) continue;
                res.consistent = false;
                ConsistencyWitness wit;
                wit.x = x;
                wit.z = z;
                wit.tau_idx = t;
                wit.sigma_idx = s;
                wit.node = static_cast<int>(m);
                wit.lhs = xt[m];
                wit.rhs = zt[m];
                res.witness = std::move(wit);
                return res;
            }
        }
    }

    // confirmation route: worst-case collapse recursiveness on the singleton basis
    const int K = tree.depth();
    for (int t = 0; t <= K && res.consistent; ++t)
        for (int s = t; s <= K && res.consistent; ++s)
            for (int w = 0; w < tree.n_paths(); ++w) {
                std::vector<double> e(tree.n_paths(), 0.0);
                e[w] = 1.0;
                ++res.checks_run;
                auto rec = recursiveness_check(family, e, t, s, tol);
                if (rec.ok) continue;
                res.consistent = false;
                ConsistencyWitness wit;
                wit.x = e;
                wit.tau_idx = t;
                wit.sigma_idx = s;
                wit.node = rec.witness_node;
                wit.lhs = rec.lhs_nodes[rec.witness_node];
                wit.rhs = rec.rhs_nodes[rec.witness_node];
                res.witness = std::move(wit);
                break;
            }
    return res;
}

Statement2Result statement2_check(const MeasureFamily& family, const std::vector<double>& x,
                                  int tau_idx, double tol) {
    const ScenarioTree& tree = *family.tree;
    auto dens = family_densities(family);
    auto inner = essinf_conditional<double>(tree, dens, x, tau_idx);
    auto expanded = expand_to_paths<double>(tree, tau_idx, inner);
    Statement2Result res;
    bool first = true;
    double lhs = 0.0, rhs = 0.0;
    for (const auto& d : dens) {
        double ex = expectation<double>(tree, d, x);
        double ec = expectation<double>(tree, d, expanded);
        if (first) {
            lhs = ex;
            rhs = ec;
            first = false;
        } else {
            lhs = std::min(lhs, ex);
            rhs = std::min(rhs, ec);
        }
    }
    res.lhs = lhs;
    res.rhs = rhs;
    res.ok = lhs <= rhs + tol;
    return res;
}

ConsistencyReport consistency_report(const MeasureFamily& family, const ConsistencyOptions& opt) {
    const ScenarioTree& tree = *family.tree;
    const int K = tree.depth();
    const int N = tree.n_paths();
    ConsistencyReport rep;

    // policy universe
    std::vector<StoppingTime> taus;
    if (opt.explicit_taus) {
        rep.policies_exhaustive = false;
        for (const auto& levels : *opt.explicit_taus)
            taus.push_back(make_stopping_time(tree, levels));
        if (taus.empty()) throw PolicyError("consistency_report: empty explicit policy list");
    } else if (count_policies(tree, opt.policy_cap) <= opt.policy_cap) {
        taus = enumerate_policies(tree, opt.policy_cap);
    } else {
        rep.policies_exhaustive = false;
        for (int k = 0; k <= K; ++k) taus.push_back(constant_policy(tree, k));
    }

    // indicator basis, subsampled deterministically on large path spaces
    std::vector<int> basis_paths;
    const int indicator_cap = 256;
    if (N <= indicator_cap) {
        for (int w = 0; w < N; ++w) basis_paths.push_back(w);
    } else {
        int stride = (N + indicator_cap - 1) / indicator_cap;
        for (int w = 0; w < N; w += stride) basis_paths.push_back(w);
        rep.policies_exhaustive = rep.policies_exhaustive && false;
    }
    const bool basis_full = static_cast<int>(basis_paths.size()) == N;

    // seeded random test vectors in [-1, 1]
    std::vector<std::vector<double>> random_xs;
    {
        SplitMix64 rng(derive_seed(opt.seed, 1));
        for (int s = 0; s < opt.random_x_samples; ++s) {
            std::vector<double> x(N);
            for (int w = 0; w < N; ++w)
                x[w] = 2.0 * (static_cast<double>(rng.next() >> 11) * 0x1.0p-53) - 1.0;
            random_xs.push_back(std::move(x));
        }
    }

    // (1) pasting stability over the policy universe
    {
        auto stab = is_stable_under_pasting(family, taus, opt.tol);
        rep.pasting_stable = stab.stable;
        rep.pastings_checked = stab.pastings_checked;
        rep.pasting_witness = stab.witness;
    }

    // (2) recursiveness on the indicator basis plus random vectors
    for (int t = 0; t <= K && rep.recursive; ++t) {
        for (int s = t; s <= K && rep.recursive; ++s) {
            auto run_one = [&](const std::vector<double>& x) {
                ++rep.recursiveness_checks;
                auto rec = recursiveness_check(family, x, t, s, opt.tol);
                if (rec.ok) return true;
                rep.recursive = false;
                ConsistencyWitness wit;
                wit.x = x;
                wit.tau_idx = t;
                wit.sigma_idx = s;
                wit.node = rec.witness_node;
                wit.lhs = rec.lhs_nodes[rec.witness_node];
                wit.rhs = rec.rhs_nodes[rec.witness_node];
                rep.recursive_witness = std::move(wit);
                return false;
            };
            for (int w : basis_paths) {
                std::vector<double> e(N, 0.0);
                e[w] = 1.0;
                if (!run_one(e)) break;
            }
            if (rep.recursive)
                for (const auto& x : random_xs)
                    if (!run_one(x)) break;
        }
    }

    // (3) time-consistency: refutation scan on random pairs, confirmation via (2)
    {
        std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
        for (std::size_t i = 0; i + 1 < random_xs.size(); i += 2)
            pairs.emplace_back(random_xs[i], random_xs[i + 1]);
        std::vector<std::pair<int, int>> stop_pairs;
        for (int t = 0; t <= K; ++t)
            for (int s = t; s <= K; ++s) stop_pairs.emplace_back(t, s);
        TimeConsistencyResult tc;
        tc.consistent = true;
        if (!pairs.empty()) {
            // only the refutation half here; the basis confirmation is (2)
            TimeConsistencyResult scan = is_time_consistent(family, pairs, stop_pairs, opt.tol);
            tc = std::move(scan);
        }
        rep.time_consistent = tc.consistent && rep.recursive;
        rep.over_test_universe = true;
        rep.tc_witness = tc.witness ? tc.witness : rep.recursive_witness;
    }

    // (4) statement (2) over basis, random vectors, and every collapse level
    for (int t = 0; t <= K && rep.statement2_ok; ++t) {
        auto run_one = [&](const std::vector<double>& x) {
            ++rep.statement2_checks;
            auto s2 = statement2_check(family, x, t, opt.tol);
            if (s2.ok) return true;
            // exact replay
            auto dens_x = family_densities_exact(family);
            auto rx = rationals_from_doubles(x);
            auto inner = essinf_conditional<Rational>(tree, dens_x, rx, t);
            auto expanded = expand_to_paths<Rational>(tree, t, inner);
            bool first = true;
            Rational lhs(0), rhs(0);
            for (const auto& d : dens_x) {
                Rational ex = expectation<Rational>(tree, d, rx);
                Rational ec = expectation<Rational>(tree, d, expanded);
                if (first) {
                    lhs = ex;
                    rhs = ec;
                    first = false;
                } else {
                    lhs = std::min(lhs, ex);
                    rhs = std::min(rhs, ec);
                }
            }
            if (!(lhs > rhs)) return true;
            rep.statement2_ok = false;
            ConsistencyWitness wit;
            wit.x = x;
            wit.tau_idx = t;
            wit.lhs = s2.lhs;
            wit.rhs = s2.rhs;
            rep.statement2_witness = std::move(wit);
            return false;
        };
        for (int w : basis_paths) {
            std::vector<double> e(N, 0.0);
            e[w] = 1.0;
            if (!run_one(e)) break;
        }
        if (rep.statement2_ok)
            for (const auto& x : random_xs)
                if (!run_one(x)) break;
    }

    // (5) hull mixtures: pastes of interior mixtures stay in the member hull
    {
        auto dens = family_densities(family);
        std::vector<std::vector<double>> mixes;
        mixes.push_back(std::vector<double>(family.size(), 1.0 / family.size()));
        SplitMix64 rng(derive_seed(opt.seed, 2));
        for (int s = 0; s < opt.interior_mixtures; ++s) {
            std::vector<double> w(family.size());
            double total = 0.0;
            for (auto& wi : w) {
                wi = 0.1 + static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
                total += wi;
            }
            for (auto& wi : w) wi /= total;
            mixes.push_back(std::move(w));
        }
        std::vector<Measure> pool = family.members;
        for (const auto& w : mixes) pool.push_back(convex_combination(family, w));
        const std::size_t tau_cap = std::min<std::size_t>(taus.size(), 50);
        for (std::size_t a = 0; a < pool.size() && rep.mixture_stable; ++a) {
            for (std::size_t b = 0; b < pool.size() && rep.mixture_stable; ++b) {
                for (std::size_t t = 0; t < tau_cap; ++t) {
                    Measure pasted = paste(tree, pool[a], pool[b], taus[t]);
                    ++rep.mixtures_checked;
                    double dist = hull_distance<double>(tree, dens, pasted.density).first;
                    rep.mixture_worst_residual = std::max(rep.mixture_worst_residual, dist);
                    if (dist <= opt.tol) continue;
                    // exact replay
                    auto dens_x = family_densities_exact(family);
                    auto pa = density_of<Rational>(pool[a]);
                    auto pb = density_of<Rational>(pool[b]);
                    auto px = paste_density<Rational>(tree, pa, pb, taus[t]);
                    Rational dx = hull_distance<Rational>(tree, dens_x, px.density).first;
                    if (!(dx > 0)) continue;
                    rep.mixture_stable = false;
                    break;
                }
            }
        }
    }

    rep.implications_consistent =
        !rep.pasting_stable || (rep.recursive && rep.time_consistent && rep.statement2_ok);

    std::ostringstream uni;
    uni << (rep.policies_exhaustive ? "all first-hit policies" : "constant-level policies")
        << " (" << taus.size() << "); indicator basis "
        << (basis_full ? "full" : "subsampled") << " (" << basis_paths.size() << " of " << N
        << " paths); " << random_xs.size() << " seeded random vectors; "
        << (opt.interior_mixtures + 1) << " hull mixtures";
    rep.tested_universe = uni.str();
    return rep;
}

} // namespace lsnell
