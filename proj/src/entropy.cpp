#include "lsnell/entropy.hpp"
#include "lsnell/parallel.hpp"
#include "lsnell/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lsnell {

CoveringResult covering_number(const SemimetricSample& s, double eps) {
    if (eps < 0.0) throw InputError("ball radius must be nonnegative");
    const int n = s.size();
    CoveringResult res;
    if (n <= 12) {
        std::vector<std::uint32_t> ball(n, 0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (s.dist[i][j] <= eps) ball[i] |= 1u << j;
        const std::uint32_t full = (1u << n) - 1;
        std::vector<int> f(full + 1, n + 1);
        std::vector<std::pair<std::uint32_t, int>> parent(full + 1, {0, -1});
        f[0] = 0;
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            if (f[mask] > n) continue;
            if (mask == full) break;
            int p = 0;
            while ((mask >> p) & 1) ++p; // lowest uncovered point
            for (int i = 0; i < n; ++i) {
                if (!((ball[i] >> p) & 1)) continue;
                std::uint32_t next = mask | ball[i];
                if (f[mask] + 1 < f[next]) {
                    f[next] = f[mask] + 1;
                    parent[next] = {mask, i};
                }
            }
        }
        res.n = f[full];
        res.exact = true;
        std::uint32_t cur = full;
        while (cur != 0) {
            auto [prev, center] = parent[cur];
            res.centers.push_back(center);
            cur = prev;
        }
        std::sort(res.centers.begin(), res.centers.end());
        return res;
    }

    // greedy max-coverage upper bound
    std::vector<char> covered(n, 0);
    int remaining = n;
    while (remaining > 0) {
        int best = -1, best_gain = -1;
        for (int i = 0; i < n; ++i) {
            int gain = 0;
            for (int j = 0; j < n; ++j)
                if (!covered[j] && s.dist[i][j] <= eps) ++gain;
            if (gain > best_gain) {
                best_gain = gain;
                best = i;
            }
        }
        for (int j = 0; j < n; ++j)
            if (!covered[j] && s.dist[best][j] <= eps) {
                covered[j] = 1;
                --remaining;
            }
        res.centers.push_back(best);
    }
    res.n = static_cast<int>(res.centers.size());
    res.exact = false;
    return res;
}

double dudley_integral(const SemimetricSample& s, double delta) {
    if (delta < 0.0) throw InputError("integration upper limit must be nonnegative");
    if (delta == 0.0) return 0.0;
    std::set<double> bset{0.0};
    for (int i = 0; i < s.size(); ++i)
        for (int j = i + 1; j < s.size(); ++j) bset.insert(s.dist[i][j]);
    std::vector<double> breaks(bset.begin(), bset.end());
    double total = 0.0;
    for (std::size_t b = 0; b < breaks.size(); ++b) {
        double lo = breaks[b];
        if (lo >= delta) break;
        double hi = (b + 1 < breaks.size()) ? std::min(breaks[b + 1], delta) : delta;
        int n = covering_number(s, lo).n;
        if (n > 1) total += (hi - lo) * std::sqrt(std::log(static_cast<double>(n)));
    }
    return total;
}

SemimetricSample rescale_semimetric(const SemimetricSample& s, double c_const) {
    if (c_const < 1.0) throw InputError("the envelope constant must be at least 1");
    return scale_semimetric(s, std::sqrt(12.0 * (2.0 * c_const + 1.0)));
}

FieldSamples make_field_samples(std::vector<std::string> points,
                                std::vector<std::vector<double>> values, std::uint64_t seed) {
    if (points.empty()) throw InputError("field samples need at least one point");
    if (values.size() != points.size())
        throw InputError("field samples need one value row per point");
    const std::size_t m = values[0].size();
    if (m == 0) throw InputError("field samples need at least one sample");
    for (const auto& row : values) {
        if (row.size() != m) throw InputError("field sample rows must have equal length");
        for (double v : row)
            if (!std::isfinite(v)) throw InputError("field samples must be finite");
    }
    FieldSamples f;
    f.points = std::move(points);
    f.values = std::move(values);
    f.seed = seed;
    return f;
}

CertifyResult certify_nearly_subgaussian(const FieldSamples& f, const SemimetricSample& s,
                                         const CertifyOptions& opt) {
    if (s.size() != f.n_points())
        throw InputError("the semimetric must cover exactly the field points");
    if (f.n_samples() < opt.min_samples)
        throw InputError("not enough samples for certification");
    if (!(opt.confidence > 0.5 && opt.confidence < 1.0))
        throw InputError("confidence must lie in (0.5, 1)");
    for (double l : opt.lambda_grid)
        if (!(l > 0.0)) throw InputError("lambda grid entries must be positive");
    const int M = f.n_samples();
    const int B = opt.bootstrap_resamples;
    if (B < 10) throw InputError("bootstrap needs at least 10 resamples");

    // enumerate cells: ordered pairs (i != j) x lambda
    struct CellKey {
        int i, j;
        double lambda;
    };
    std::vector<CellKey> keys;
    for (int i = 0; i < f.n_points(); ++i)
        for (int j = 0; j < f.n_points(); ++j) {
            if (i == j) continue;
            for (double l : opt.lambda_grid) keys.push_back({i, j, l});
        }

    CertifyResult res;
    res.cells.assign(keys.size(), CertifyCell{});
    res.bootstrap_resamples = B;
    res.confidence = opt.confidence;
    res.seed = opt.seed;

    // first pass: means and testability (cheap, serial)
    std::vector<std::vector<double>> zs(keys.size());
    for (std::size_t c = 0; c < keys.size(); ++c) {
        const auto& key = keys[c];
        CertifyCell& cell = res.cells[c];
        cell.i = key.i;
        cell.j = key.j;
        cell.lambda = key.lambda;
        const double d = s.dist[key.i][key.j];
        const double expo = 0.5 * key.lambda * key.lambda * d * d;
        if (expo > 700.0) {
            cell.untestable = true;
            continue;
        }
        cell.denom = std::exp(expo);
        std::vector<double> z(M);
        bool ok = true;
        for (int m = 0; m < M; ++m) {
            double a = key.lambda * (f.values[key.i][m] - f.values[key.j][m]);
            if (a > 700.0) {
                ok = false;
                break;
            }
            z[m] = std::exp(a);
        }
        if (!ok) {
            cell.untestable = true;
            continue;
        }
        double sum = 0.0;
        for (double v : z) sum += v;
        cell.mean = sum / M;
        zs[c] = std::move(z);
    }
    int tested = 0;
    for (const auto& cell : res.cells)
        if (!cell.untestable) ++tested;
    res.tested_cells = tested;
    res.untestable_cells = static_cast<int>(res.cells.size()) - tested;
    if (tested == 0) {
        for (double c : opt.c_grid) res.pass_at[c] = false;
        return res;
    }
    const double alpha_cell = (1.0 - opt.confidence) / tested; // Bonferroni across cells
    const int ucb_idx = std::min(B - 1, static_cast<int>(std::ceil(opt.confidence * B)) - 1);
    const int lcb_idx = std::min(B - 1, static_cast<int>(std::floor(alpha_cell * B)));

    // second pass: seeded percentile bootstrap per cell (cell-indexed streams,
    // so the result is independent of the thread count)
    parallel_for(keys.size(), opt.threads, [&](std::size_t c) {
        CertifyCell& cell = res.cells[c];
        if (cell.untestable) return;
        const auto& z = zs[c];
        std::vector<double> means(B);
        for (int b = 0; b < B; ++b) {
            SplitMix64 rng(derive_seed(opt.seed, static_cast<std::uint64_t>(c) * B + b));
            double sum = 0.0;
            for (int m = 0; m < M; ++m) sum += z[rng.bounded(M)];
            means[b] = sum / M;
        }
        std::sort(means.begin(), means.end());
        cell.ucb = means[ucb_idx];
        cell.lcb = means[lcb_idx];
        cell.ratio_ucb = cell.ucb / cell.denom;
        cell.ratio_lcb = cell.lcb / cell.denom;
    });

    bool first = true;
    for (const auto& cell : res.cells) {
        if (cell.untestable) continue;
        if (first) {
            res.c_hat = cell.ratio_ucb;
            res.c_refute = cell.ratio_lcb;
            first = false;
        } else {
            res.c_hat = std::max(res.c_hat, cell.ratio_ucb);
            res.c_refute = std::max(res.c_refute, cell.ratio_lcb);
        }
    }
    for (double c : opt.c_grid) res.pass_at[c] = res.c_refute <= c;
    return res;
}

TailReport sup_field_tail(const FieldSamples& f, int theta_bar,
                          const std::vector<double>& p_grid) {
    if (theta_bar < 0 || theta_bar >= f.n_points())
        throw InputError("anchor point index out of range");
    const int M = f.n_samples();
    TailReport rep;
    rep.u.assign(M, 0.0);
    for (int m = 0; m < M; ++m) {
        double u = 0.0;
        for (int i = 0; i < f.n_points(); ++i)
            u = std::max(u, std::abs(f.values[i][m] - f.values[theta_bar][m]));
        rep.u[m] = u;
        // definitional domination: sup_theta X <= U + X_anchor
        double sup = f.values[0][m];
        for (int i = 1; i < f.n_points(); ++i) sup = std::max(sup, f.values[i][m]);
        if (sup > u + f.values[theta_bar][m] + 1e-12) rep.domination_ok = false;
    }
    for (double p : p_grid) {
        TailReport::Moment mom;
        mom.p = p;
        bool overflow = false;
        std::vector<double> e(M);
        for (int m = 0; m < M; ++m) {
            double a = p * rep.u[m];
            if (a > 700.0) {
                overflow = true;
                break;
            }
            e[m] = std::exp(a);
        }
        if (overflow) {
            mom.overflow = true;
        } else {
            double mean = 0.0;
            for (double v : e) mean += v;
            mean /= M;
            double var = 0.0;
            for (double v : e) var += (v - mean) * (v - mean);
            var = M > 1 ? var / (M - 1) : 0.0;
            mom.estimate = mean;
            mom.stderr_ = std::sqrt(var / M);
        }
        rep.exp_moments.push_back(mom);
    }
    return rep;
}

std::vector<std::pair<double, double>> path_modulus(const FieldSamples& f,
                                                    const SemimetricSample& s,
                                                    const std::vector<double>& delta_grid) {
    if (s.size() != f.n_points())
        throw InputError("the semimetric must cover exactly the field points");
    const int M = f.n_samples();
    // max gap per pair, then fold over the grid
    std::vector<std::pair<double, double>> pair_gap; // (distance, max gap)
    for (int i = 0; i < f.n_points(); ++i)
        for (int j = i + 1; j < f.n_points(); ++j) {
            double g = 0.0;
            for (int m = 0; m < M; ++m)
                g = std::max(g, std::abs(f.values[i][m] - f.values[j][m]));
            pair_gap.emplace_back(s.dist[i][j], g);
        }
    std::vector<std::pair<double, double>> table;
    for (double delta : delta_grid) {
        double omega = 0.0;
        for (const auto& [d, g] : pair_gap)
            if (d <= delta) omega = std::max(omega, g);
        table.emplace_back(delta, omega);
    }
    return table;
}

} // namespace lsnell
