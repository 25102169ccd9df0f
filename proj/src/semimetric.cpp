#include "lsnell/semimetric.hpp"
#include "lsnell/rng.hpp"

#include <algorithm>
#include <cmath>

namespace lsnell {

SemimetricSample make_semimetric(std::vector<std::string> points,
                                 std::vector<std::vector<double>> dist,
                                 std::size_t triangle_samples) {
    const std::size_t n = points.size();
    if (n == 0) throw InputError("semimetric needs at least one point");
    if (dist.size() != n) throw InputError("distance matrix must be square of the point count");
    for (const auto& row : dist)
        if (row.size() != n) throw InputError("distance matrix must be square of the point count");
    constexpr double tol = 1e-9;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(dist[i][i]) > tol) throw InputError("semimetric diagonal must be zero");
        dist[i][i] = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!std::isfinite(dist[i][j]) || !std::isfinite(dist[j][i]))
                throw InputError("distances must be finite");
            if (dist[i][j] < -tol || dist[j][i] < -tol)
                throw InputError("distances must be nonnegative");
            if (std::abs(dist[i][j] - dist[j][i]) > tol)
                throw InputError("distance matrix must be symmetric");
            double v = std::max(0.0, 0.5 * (dist[i][j] + dist[j][i]));
            dist[i][j] = dist[j][i] = v;
        }
    }
    // triangle inequality: exhaustive when small, sampled otherwise
    auto check = [&](std::size_t a, std::size_t b, std::size_t c) {
        if (dist[a][c] > dist[a][b] + dist[b][c] + tol)
            throw InputError("triangle inequality violated beyond tolerance at points " +
                             points[a] + ", " + points[b] + ", " + points[c]);
    };
    if (n * n * n <= triangle_samples) {
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t c = 0; c < n; ++c) check(a, b, c);
    } else {
        SplitMix64 rng(0x5EEDULL);
        for (std::size_t s = 0; s < triangle_samples; ++s)
            check(rng.bounded(n), rng.bounded(n), rng.bounded(n));
    }
    SemimetricSample out;
    out.points = std::move(points);
    out.dist = std::move(dist);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.diameter = std::max(out.diameter, out.dist[i][j]);
    return out;
}

SemimetricSample scale_semimetric(const SemimetricSample& s, double factor) {
    if (!(factor > 0.0)) throw InputError("scale factor must be positive");
    SemimetricSample out = s;
    for (auto& row : out.dist)
        for (double& v : row) v *= factor;
    out.diameter = s.diameter * factor;
    return out;
}

} // namespace lsnell
