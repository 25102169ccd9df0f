#pragma once
#include "lsnell/entropy.hpp"
#include "lsnell/measures.hpp"

#include <functional>
#include <memory>

namespace lsnell {

// A deterministic integrand (t, x) -> real, declared by id: "const:c",
// "linear:a,b" (a*t + b), or "table:<file>" (bilinear interpolation with
// clamping). No arbitrary code execution.
struct PsiFunction {
    std::string id;
    std::function<double(double, double)> eval;
};

PsiFunction parse_psi(const std::string& id, const std::string& base_dir = "");

struct VolConfig {
    std::string kind = "constant"; // "constant" | "ar1"
    double value = 1.0;            // constant level
    double x0 = 1.0, phi = 0.5, sigma = 0.2; // log-autoregression driven by past increments
};

// Simulated driver noise: the time grid, per-path Brownian increments, and an
// adapted volatility path (a function of increments strictly before each step).
struct DriverPaths {
    std::vector<double> u;                    // u_0 = 0 < ... < u_K
    std::vector<std::vector<double>> dz;      // [path][step]
    std::vector<std::vector<double>> vol;     // [path][step]
    std::uint64_t seed = 0;

    int steps() const { return static_cast<int>(u.size()) - 1; }
    int n_paths() const { return static_cast<int>(dz.size()); }
};

// One RNG stream per path, derived from the master seed by the path index, so
// output is reproducible and independent of the worker count. Increment
// moments are asserted per step within 5 sigma at generation time.
DriverPaths make_driver(int steps, int n_paths, double horizon, std::uint64_t seed,
                        const VolConfig& vol, int threads = 1);

// sup_x sqrt(integral over the grid of (psi - phi)^2(t, x) dt), trapezoidal.
double d_psi(const PsiFunction& psi, const PsiFunction& phi, const std::vector<double>& x_grid,
             const std::vector<double>& t_grid);

// Left-endpoint sums X_{k+1} = X_k + psi(u_k, V_k) dZ_k, X_0 = 0.
std::vector<std::vector<double>> stochastic_integral(const PsiFunction& psi,
                                                     const DriverPaths& d);

// Left-endpoint sums of psi^2(u_k, V_k) du; nonnegative and nondecreasing.
std::vector<std::vector<double>> quadratic_variation(const PsiFunction& psi,
                                                     const DriverPaths& d);

struct DensityProcess {
    std::vector<std::vector<double>> m; // exp(X - [X]/2) per (path, level)
    std::vector<double> terminal;       // renormalized terminal densities (mean 1)
    double raw_terminal_mean = 0.0;
    double renorm_factor = 0.0;
};

DensityProcess density_process(const PsiFunction& psi, const DriverPaths& d);

// Finite filtration over the simulated paths: uniform reference weights, interior
// levels grouping paths by quantized increment histories (`bins` quantile bins
// per step; 2 = the increment sign), terminal level separating every path.
std::shared_ptr<ScenarioTree> tree_from_driver(const DriverPaths& d, int bins);

struct GirsanovBundle {
    std::shared_ptr<ScenarioTree> tree;
    MeasureFamily family;          // densities = renormalized terminal values
    SemimetricSample semimetric;   // pairwise d_psi over the integrand set
    FieldSamples fields;           // terminal stochastic integrals per integrand
    std::vector<double> raw_means; // per integrand, before renormalization
    std::vector<double> renorm_factors;
    bool single_member_warning = false;
};

GirsanovBundle family_from_psis(const std::vector<PsiFunction>& psis, const DriverPaths& d,
                                int bins, const std::vector<double>& x_grid);

struct DriftCheck {
    double estimate = 0.0; // E under the tilted measure of the terminal noise
    double target = 0.0;
    double stderr_ = 0.0;
    double z_score = 0.0;
};

// Change-of-drift fidelity: under the measure tilted by the constant integrand
// c, the terminal noise has mean c * T.
DriftCheck drift_check(const DriverPaths& d, const std::vector<double>& density, double c);

} // namespace lsnell
