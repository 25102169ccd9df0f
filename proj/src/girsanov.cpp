#include "lsnell/girsanov.hpp"
#include "lsnell/parallel.hpp"
#include "lsnell/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace lsnell {

namespace {

double parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        if (!std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError("cannot parse " + what + " from '" + s + "'");
    }
}

// Acklam's rational approximation to the standard normal quantile function;
// relative error below 1.15e-9 on (0, 1).
double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InputError("quantile argument must lie in (0, 1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

} // namespace

PsiFunction parse_psi(const std::string& id, const std::string& base_dir) {
    PsiFunction psi;
    psi.id = id;
    auto colon = id.find(':');
    if (colon == std::string::npos)
        throw InputError("integrand id must look like 'const:c', 'linear:a,b', or 'table:file'");
    const std::string kind = id.substr(0, colon);
    const std::string arg = id.substr(colon + 1);
    if (kind == "const") {
        double c = parse_number(arg, "constant integrand level");
        psi.eval = [c](double, double) { return c; };
        return psi;
    }
    if (kind == "linear") {
        auto parts = split(arg, ',');
        if (parts.size() != 2) throw InputError("linear integrand needs 'linear:a,b'");
        double a = parse_number(parts[0], "linear integrand slope");
        double b = parse_number(parts[1], "linear integrand intercept");
        psi.eval = [a, b](double t, double) { return a * t + b; };
        return psi;
    }
    if (kind == "table") {
        std::string path = arg;
        if (!base_dir.empty() && !path.empty() && path[0] != '/') path = base_dir + "/" + path;
        std::ifstream in(path);
        if (!in) throw InputError("cannot open integrand table file " + path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const std::exception& e) {
            throw InputError("integrand table parse failure: " + std::string(e.what()));
        }
        if (!doc.contains("t_grid") || !doc.contains("x_grid") || !doc.contains("values"))
            throw InputError("integrand table needs t_grid, x_grid, values");
        for (auto it = doc.begin(); it != doc.end(); ++it)
            if (it.key() != "t_grid" && it.key() != "x_grid" && it.key() != "values")
                throw InputError("integrand table: unknown key '" + it.key() + "'");
        auto ts = doc["t_grid"].get<std::vector<double>>();
        auto xs = doc["x_grid"].get<std::vector<double>>();
        auto vals = doc["values"].get<std::vector<std::vector<double>>>();
        if (ts.empty() || xs.empty() || vals.size() != ts.size())
            throw InputError("integrand table shape mismatch");
        for (const auto& row : vals)
            if (row.size() != xs.size()) throw InputError("integrand table shape mismatch");
        for (std::size_t i = 0; i + 1 < ts.size(); ++i)
            if (!(ts[i] < ts[i + 1])) throw InputError("integrand table t_grid must increase");
        for (std::size_t i = 0; i + 1 < xs.size(); ++i)
            if (!(xs[i] < xs[i + 1])) throw InputError("integrand table x_grid must increase");
        psi.eval = [ts, xs, vals](double t, double x) {
            auto locate = [](const std::vector<double>& g, double v) {
                if (v <= g.front()) return std::pair<std::size_t, double>{0, 0.0};
                if (v >= g.back()) return std::pair<std::size_t, double>{g.size() - 2, 1.0};
                std::size_t i =
                    std::upper_bound(g.begin(), g.end(), v) - g.begin() - 1;
                return std::pair<std::size_t, double>{i, (v - g[i]) / (g[i + 1] - g[i])};
            };
            if (ts.size() == 1 && xs.size() == 1) return vals[0][0];
            if (ts.size() == 1) {
                auto [j, s] = locate(xs, x);
                return vals[0][j] * (1 - s) + vals[0][j + 1] * s;
            }
            if (xs.size() == 1) {
                auto [i, r] = locate(ts, t);
                return vals[i][0] * (1 - r) + vals[i + 1][0] * r;
            }
            auto [i, r] = locate(ts, t);
            auto [j, s] = locate(xs, x);
            return (vals[i][j] * (1 - s) + vals[i][j + 1] * s) * (1 - r) +
                   (vals[i + 1][j] * (1 - s) + vals[i + 1][j + 1] * s) * r;
        };
        return psi;
    }
    throw InputError("unknown integrand kind '" + kind + "'");
}

DriverPaths make_driver(int steps, int n_paths, double horizon, std::uint64_t seed,
                        const VolConfig& vol, int threads) {
    if (steps < 1) throw GirsanovError("need at least one time step");
    if (n_paths < 1) throw GirsanovError("need at least one path");
    if (!(horizon > 0.0)) throw GirsanovError("the horizon must be positive");
    if (vol.kind != "constant" && vol.kind != "ar1")
        throw GirsanovError("unknown volatility kind '" + vol.kind + "'");
    if (vol.kind == "constant" && !(vol.value > 0.0))
        throw GirsanovError("constant volatility must be positive");
    if (vol.kind == "ar1" && !(vol.x0 > 0.0))
        throw GirsanovError("autoregressive volatility needs a positive start");

    DriverPaths d;
    d.seed = seed;
    d.u.resize(steps + 1);
    const double du = horizon / steps;
    for (int k = 0; k <= steps; ++k) d.u[k] = du * k;
    d.u[steps] = horizon;
    d.dz.assign(n_paths, std::vector<double>(steps, 0.0));
    d.vol.assign(n_paths, std::vector<double>(steps, 0.0));
    const double sq = std::sqrt(du);

    parallel_for(static_cast<std::size_t>(n_paths), threads, [&](std::size_t p) {
        Rng rng(derive_seed(seed, p));
        double logv = std::log(vol.kind == "ar1" ? vol.x0 : vol.value);
        for (int k = 0; k < steps; ++k) {
            if (vol.kind == "constant") {
                d.vol[p][k] = vol.value;
            } else {
                d.vol[p][k] = std::exp(logv);
            }
            d.dz[p][k] = sq * rng.normal();
            if (vol.kind == "ar1")
                logv = vol.phi * logv + vol.sigma * (d.dz[p][k] / sq);
        }
    });

    // per-step moment assertions, 5-sigma Monte Carlo bands
    if (n_paths >= 8) {
        for (int k = 0; k < steps; ++k) {
            double mean = 0.0;
            for (int p = 0; p < n_paths; ++p) mean += d.dz[p][k];
            mean /= n_paths;
            double var = 0.0;
            for (int p = 0; p < n_paths; ++p) var += (d.dz[p][k] - mean) * (d.dz[p][k] - mean);
            var /= (n_paths - 1);
            if (std::abs(mean) > 5.0 * std::sqrt(du / n_paths))
                throw GirsanovError("increment mean outside the 5-sigma band at step " +
                                    std::to_string(k));
            if (std::abs(var - du) > 5.0 * du * std::sqrt(2.0 / (n_paths - 1)))
                throw GirsanovError("increment variance outside the 5-sigma band at step " +
                                    std::to_string(k));
        }
    }
    return d;
}

double d_psi(const PsiFunction& psi, const PsiFunction& phi, const std::vector<double>& x_grid,
             const std::vector<double>& t_grid) {
    if (x_grid.empty() || t_grid.size() < 2)
        throw InputError("semimetric evaluation needs an x grid and at least two time points");
    double best = 0.0;
    for (double x : x_grid) {
        double acc = 0.0;
        auto sq = [&](double t) {
            double v = psi.eval(t, x) - phi.eval(t, x);
            if (!std::isfinite(v)) throw GirsanovError("integrand evaluated to a non-finite value");
            return v * v;
        };
        for (std::size_t k = 0; k + 1 < t_grid.size(); ++k)
            acc += 0.5 * (sq(t_grid[k]) + sq(t_grid[k + 1])) * (t_grid[k + 1] - t_grid[k]);
        best = std::max(best, std::sqrt(acc));
    }
    return best;
}

std::vector<std::vector<double>> stochastic_integral(const PsiFunction& psi,
                                                     const DriverPaths& d) {
    const int K = d.steps();
    std::vector<std::vector<double>> x(d.n_paths(), std::vector<double>(K + 1, 0.0));
    for (int p = 0; p < d.n_paths(); ++p)
        for (int k = 0; k < K; ++k) {
            double v = psi.eval(d.u[k], d.vol[p][k]);
            if (!std::isfinite(v)) throw GirsanovError("integrand evaluated to a non-finite value");
            x[p][k + 1] = x[p][k] + v * d.dz[p][k];
        }
    return x;
}

std::vector<std::vector<double>> quadratic_variation(const PsiFunction& psi,
                                                     const DriverPaths& d) {
    const int K = d.steps();
    std::vector<std::vector<double>> qv(d.n_paths(), std::vector<double>(K + 1, 0.0));
    for (int p = 0; p < d.n_paths(); ++p)
        for (int k = 0; k < K; ++k) {
            double v = psi.eval(d.u[k], d.vol[p][k]);
            qv[p][k + 1] = qv[p][k] + v * v * (d.u[k + 1] - d.u[k]);
        }
    return qv;
}

DensityProcess density_process(const PsiFunction& psi, const DriverPaths& d) {
    auto x = stochastic_integral(psi, d);
    auto qv = quadratic_variation(psi, d);
    const int K = d.steps();
    DensityProcess out;
    out.m.assign(d.n_paths(), std::vector<double>(K + 1, 1.0));
    for (int p = 0; p < d.n_paths(); ++p)
        for (int k = 0; k <= K; ++k) {
            double expo = x[p][k] - 0.5 * qv[p][k];
            if (expo > 700.0)
                throw GirsanovError("density overflow on path " + std::to_string(p) + " at step " +
                                    std::to_string(k));
            out.m[p][k] = std::exp(expo);
        }
    double mean = 0.0;
    for (int p = 0; p < d.n_paths(); ++p) mean += out.m[p][K];
    mean /= d.n_paths();
    out.raw_terminal_mean = mean;
    out.renorm_factor = 1.0 / mean;
    out.terminal.resize(d.n_paths());
    for (int p = 0; p < d.n_paths(); ++p) out.terminal[p] = out.m[p][K] * out.renorm_factor;
    return out;
}

std::shared_ptr<ScenarioTree> tree_from_driver(const DriverPaths& d, int bins) {
    if (bins < 1) throw GirsanovError("need at least one increment bin");
    const int K = d.steps();
    const int M = d.n_paths();
    const double du = d.u[1] - d.u[0];
    std::vector<double> thresholds;
    for (int j = 1; j < bins; ++j)
        thresholds.push_back(std::sqrt(du) *
                             inverse_normal_cdf(static_cast<double>(j) / bins));

    auto bin_of = [&](double dz) {
        int b = 0;
        while (b < bins - 1 && dz >= thresholds[b]) ++b;
        return b;
    };

    std::vector<std::string> paths(M);
    for (int p = 0; p < M; ++p) paths[p] = "w" + std::to_string(p);

    std::vector<std::vector<std::vector<int>>> partitions(K + 1);
    partitions[0].push_back({});
    for (int p = 0; p < M; ++p) partitions[0][0].push_back(p);
    for (int k = 1; k < K; ++k) {
        std::map<std::vector<int>, std::vector<int>> groups;
        for (int p = 0; p < M; ++p) {
            std::vector<int> hist(k);
            for (int s = 0; s < k; ++s) hist[s] = bin_of(d.dz[p][s]);
            groups[hist].push_back(p);
        }
        for (auto& [hist, members] : groups) partitions[k].push_back(std::move(members));
    }
    for (int p = 0; p < M; ++p) partitions[K].push_back({p});

    std::vector<double> weights(M, 1.0 / M);
    std::vector<Rational> exact(M, Rational(1) / M);
    return std::make_shared<ScenarioTree>(
        make_tree(d.u, std::move(paths), std::move(partitions), std::move(weights),
                  std::move(exact)));
}

GirsanovBundle family_from_psis(const std::vector<PsiFunction>& psis, const DriverPaths& d,
                                int bins, const std::vector<double>& x_grid) {
    if (psis.empty()) throw GirsanovError("need at least one integrand");
    GirsanovBundle bundle;
    bundle.single_member_warning = psis.size() < 2;
    bundle.tree = tree_from_driver(d, bins);

    std::vector<Measure> members;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> field_rows;
    for (const auto& psi : psis) {
        auto proc = density_process(psi, d);
        bundle.raw_means.push_back(proc.raw_terminal_mean);
        bundle.renorm_factors.push_back(proc.renorm_factor);
        members.push_back(make_measure(*bundle.tree, proc.terminal));
        labels.push_back(psi.id);
        auto x = stochastic_integral(psi, d);
        std::vector<double> terminal(d.n_paths());
        for (int p = 0; p < d.n_paths(); ++p) terminal[p] = x[p][d.steps()];
        field_rows.push_back(std::move(terminal));
    }
    bundle.family = make_family(*bundle.tree, std::move(members), labels);

    std::vector<std::vector<double>> dist(psis.size(), std::vector<double>(psis.size(), 0.0));
    for (std::size_t i = 0; i < psis.size(); ++i)
        for (std::size_t j = i + 1; j < psis.size(); ++j)
            dist[i][j] = dist[j][i] = d_psi(psis[i], psis[j], x_grid, d.u);
    bundle.semimetric = make_semimetric(labels, std::move(dist));
    bundle.fields = make_field_samples(labels, std::move(field_rows), d.seed);
    return bundle;
}

DriftCheck drift_check(const DriverPaths& d, const std::vector<double>& density, double c) {
    if (static_cast<int>(density.size()) != d.n_paths())
        throw GirsanovError("density length must match the path count");
    const int M = d.n_paths();
    DriftCheck chk;
    chk.target = c * d.u.back();
    std::vector<double> weighted(M);
    for (int p = 0; p < M; ++p) {
        double zt = 0.0;
        for (double inc : d.dz[p]) zt += inc;
        weighted[p] = density[p] * zt;
    }
    double mean = 0.0;
    for (double v : weighted) mean += v;
    mean /= M;
    chk.estimate = mean;
    double var = 0.0;
    for (double v : weighted) var += (v - mean) * (v - mean);
    var = M > 1 ? var / (M - 1) : 0.0;
    chk.stderr_ = std::sqrt(var / M);
    chk.z_score = chk.stderr_ > 0.0 ? (chk.estimate - chk.target) / chk.stderr_ : 0.0;
    return chk;
}

} // namespace lsnell
