#include "lsnell/snell.hpp"

namespace lsnell {

SnellResult<double> snell_envelope(const ScenarioTree& tree, const AdaptedProcess& y,
                                   const Measure& q) {
    return snell_envelope_t<double>(tree, y.values, q.density);
}

Levels<double> lower_snell_envelope(const ScenarioTree& tree, const AdaptedProcess& y,
                                    const MeasureFamily& family) {
    std::vector<std::vector<double>> densities;
    densities.reserve(family.members.size());
    for (const auto& q : family.members) densities.push_back(q.density);
    return lower_snell_t<double>(tree, y.values, densities);
}

SnellResult<double> robust_snell_rectangular(const ScenarioTree& tree, const AdaptedProcess& y,
                                             const BoxSet& boxes) {
    return robust_snell_boxes_t<double>(tree, y.values, boxes);
}

} // namespace lsnell
