#include "lsnell/payoff.hpp"

#include <cmath>

namespace lsnell {

AdaptedProcess make_process(const ScenarioTree& tree, Levels<double> values,
                            std::optional<Levels<Rational>> exact) {
    const int K = tree.depth();
    if (static_cast<int>(values.size()) != K + 1)
        throw TreeError("process needs one value vector per time level");
    for (int k = 0; k <= K; ++k) {
        if (static_cast<int>(values[k].size()) != tree.n_nodes(k))
            throw TreeError("process level " + std::to_string(k) +
                            " does not match the node count");
        for (double v : values[k])
            if (!std::isfinite(v)) throw TreeError("process values must be finite");
    }
    if (exact) {
        if (exact->size() != values.size())
            throw TreeError("exact process levels must match the double levels");
        for (int k = 0; k <= K; ++k) {
            if ((*exact)[k].size() != values[k].size())
                throw TreeError("exact process level " + std::to_string(k) +
                                " does not match the node count");
            for (std::size_t m = 0; m < values[k].size(); ++m)
                if (std::abs(to_double((*exact)[k][m]) - values[k][m]) > 1e-12)
                    throw TreeError("exact and double process values disagree");
        }
    }
    AdaptedProcess proc;
    proc.values = std::move(values);
    proc.exact = std::move(exact);
    return proc;
}

std::vector<double> y_star(const ScenarioTree& tree, const AdaptedProcess& proc) {
    std::vector<double> out(tree.n_paths(), 0.0);
    for (int w = 0; w < tree.n_paths(); ++w)
        for (int k = 0; k <= tree.depth(); ++k)
            out[w] = std::max(out[w], std::abs(proc.values[k][tree.node_of[k][w]]));
    return out;
}

} // namespace lsnell
