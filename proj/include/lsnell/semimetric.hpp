#pragma once
#include "lsnell/errors.hpp"

#include <string>
#include <vector>

namespace lsnell {

// A finite labeled point set with a semimetric given by its full distance
// matrix. Symmetry and zero diagonal are enforced; the triangle inequality is
// property-tested on sampled triples (violations beyond 1e-9 are rejected).
struct SemimetricSample {
    std::vector<std::string> points;
    std::vector<std::vector<double>> dist; // [i][j]
    double diameter = 0.0;                 // derived max pairwise distance

    int size() const { return static_cast<int>(points.size()); }
    double d(int i, int j) const { return dist[i][j]; }
};

// Validates and derives the diameter. `triangle_samples` triples are checked
// (all triples when the count allows). Throws InputError on violations.
SemimetricSample make_semimetric(std::vector<std::string> points,
                                 std::vector<std::vector<double>> dist,
                                 std::size_t triangle_samples = 4096);

// The space with every distance multiplied by `factor` (> 0).
SemimetricSample scale_semimetric(const SemimetricSample& s, double factor);

} // namespace lsnell
