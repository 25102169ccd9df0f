#pragma once
#include "lsnell/semimetric.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace lsnell {

struct CoveringResult {
    int n = 0;
    bool exact = true;        // exhaustive set cover; false = greedy upper bound
    std::vector<int> centers; // chosen ball centers
};

// Minimal number of closed eps-balls covering the points: exhaustive set-cover
// up to 12 points, greedy (flagged) above.
CoveringResult covering_number(const SemimetricSample& s, double eps);

// integral_0^delta sqrt(ln N(eps)) d eps, summed exactly over the breakpoint
// segments of the step function N (closed balls: N is constant on [b_i, b_{i+1})).
double dudley_integral(const SemimetricSample& s, double delta);

// Distances multiplied by sqrt(12 * (2 * c_const + 1)); requires c_const >= 1.
SemimetricSample rescale_semimetric(const SemimetricSample& s, double c_const);

// Monte Carlo samples of a random field: one row of sample values per point.
struct FieldSamples {
    std::vector<std::string> points;
    std::vector<std::vector<double>> values; // [point][sample]
    std::uint64_t seed = 0;

    int n_points() const { return static_cast<int>(points.size()); }
    int n_samples() const { return points.empty() ? 0 : static_cast<int>(values[0].size()); }
};

FieldSamples make_field_samples(std::vector<std::string> points,
                                std::vector<std::vector<double>> values, std::uint64_t seed);

struct CertifyCell {
    int i = 0, j = 0;       // ordered point pair
    double lambda = 0.0;
    bool untestable = false; // exponential overflow at this lambda
    double mean = 0.0;       // empirical moment generating function
    double ucb = 0.0, lcb = 0.0; // percentile bootstrap bounds on the mean
    double denom = 0.0;          // exp(lambda^2 d^2 / 2)
    double ratio_ucb = 0.0, ratio_lcb = 0.0;
};

struct CertifyResult {
    double c_hat = 0.0;    // max over cells of ucb / denom (conservative estimate)
    double c_refute = 0.0; // max over cells of Bonferroni lcb / denom (refutation bound)
    std::map<double, bool> pass_at; // C -> (c_refute <= C)
    std::vector<CertifyCell> cells;
    int untestable_cells = 0;
    int tested_cells = 0;
    int bootstrap_resamples = 0;
    double confidence = 0.0;
    std::uint64_t seed = 0;
};

struct CertifyOptions {
    std::vector<double> lambda_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
    double confidence = 0.99;
    std::vector<double> c_grid = {1.0, 2.0};
    int bootstrap_resamples = 1000;
    std::uint64_t seed = 1;
    int min_samples = 100;
    int threads = 1;
};

// Empirical certification of the increment bound E[exp(l(X_i - X_j))] <=
// C exp(l^2 d_ij^2 / 2): per ordered pair and grid lambda, a seeded percentile
// bootstrap of the moment mean. A family is declared passing at C when even the
// per-cell lower confidence bounds (Bonferroni-adjusted across cells) stay
// below C times the Gaussian envelope; overflowing cells are reported as
// untestable, never passed.
CertifyResult certify_nearly_subgaussian(const FieldSamples& f, const SemimetricSample& s,
                                         const CertifyOptions& opt);

struct TailReport {
    std::vector<double> u; // per-sample sup deviation from the anchor point
    struct Moment {
        double p = 0.0;
        double estimate = 0.0;
        double stderr_ = 0.0;
        bool overflow = false;
    };
    std::vector<Moment> exp_moments;
    bool domination_ok = true; // sup_theta X <= U + X_anchor, samplewise
};

TailReport sup_field_tail(const FieldSamples& f, int theta_bar, const std::vector<double>& p_grid);

// omega(delta) = max over samples and pairs within distance delta of the
// field-value gap; nondecreasing in delta by construction.
std::vector<std::pair<double, double>> path_modulus(const FieldSamples& f,
                                                    const SemimetricSample& s,
                                                    const std::vector<double>& delta_grid);

} // namespace lsnell
