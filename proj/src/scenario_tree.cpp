#include "lsnell/scenario_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace lsnell {

namespace {

std::string node_name(int level, int node) {
    std::ostringstream os;
    os << "level " << level << ", node " << node;
    return os.str();
}

} // namespace

ScenarioTree make_tree(std::vector<double> times,
                       std::vector<std::string> paths,
                       std::vector<std::vector<std::vector<int>>> partitions,
                       std::vector<double> p_weights,
                       std::optional<std::vector<Rational>> p_exact) {
    ScenarioTree tree;
    if (times.size() < 2) throw TreeError("tree needs at least two time points");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (!(times[i] < times[i + 1])) throw TreeError("times must be strictly increasing");
    if (paths.empty()) throw TreeError("tree needs at least one path");
    {
        std::set<std::string> uniq(paths.begin(), paths.end());
        if (uniq.size() != paths.size()) throw TreeError("path identifiers must be distinct");
    }
    const int n = static_cast<int>(paths.size());
    if (partitions.size() != times.size())
        throw TreeError("need one partition per time point");
    if (p_weights.size() != paths.size())
        throw TreeError("need one reference weight per path");
    if (p_exact) {
        if (p_exact->size() != paths.size())
            throw TreeError("exact weights must match the path count");
        Rational total(0);
        for (const auto& r : *p_exact) {
            if (r <= 0) throw TreeError("reference weights must be strictly positive");
            total += r;
        }
        if (total != 1) throw TreeError("exact reference weights must sum to one");
        for (std::size_t w = 0; w < p_weights.size(); ++w) {
            double d = to_double((*p_exact)[w]);
            if (std::abs(d - p_weights[w]) > 1e-12)
                throw TreeError("exact and double reference weights disagree");
        }
    }
    double sum = 0.0;
    for (double w : p_weights) {
        if (!(w > 0.0)) throw TreeError("reference weights must be strictly positive");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw TreeError("reference weights must sum to one");

    // every level must partition {0..n-1}
    for (std::size_t k = 0; k < partitions.size(); ++k) {
        std::vector<char> seen(n, 0);
        if (partitions[k].empty()) throw TreeError("empty partition at level " + std::to_string(k));
        for (const auto& node : partitions[k]) {
            if (node.empty()) throw TreeError("empty node in partition at level " + std::to_string(k));
            for (int w : node) {
                if (w < 0 || w >= n) throw TreeError("path index out of range in partition");
                if (seen[w]) throw TreeError("partition nodes overlap at level " + std::to_string(k));
                seen[w] = 1;
            }
        }
        if (std::count(seen.begin(), seen.end(), char(1)) != n)
            throw TreeError("partition does not cover all paths at level " + std::to_string(k));
    }
    if (partitions.front().size() != 1)
        throw TreeError("level 0 must be the trivial partition (one node)");
    if (partitions.back().size() != paths.size())
        throw TreeError("final level must separate every path");
    for (const auto& node : partitions.back())
        if (node.size() != 1) throw TreeError("final level must consist of singletons");

    tree.times = std::move(times);
    tree.paths = std::move(paths);
    tree.partitions = std::move(partitions);
    tree.p_weights = std::move(p_weights);
    tree.p_exact = std::move(p_exact);

    // derived indexes + refinement check (each node at level k+1 inside one node at k)
    const int K = tree.depth();
    tree.node_of.assign(K + 1, std::vector<int>(n, -1));
    for (int k = 0; k <= K; ++k)
        for (std::size_t m = 0; m < tree.partitions[k].size(); ++m)
            for (int w : tree.partitions[k][m]) tree.node_of[k][w] = static_cast<int>(m);

    tree.child_nodes.assign(K + 1, {});
    tree.parent_node.assign(K + 1, {});
    for (int k = 0; k <= K; ++k) {
        tree.child_nodes[k].assign(tree.partitions[k].size(), {});
        tree.parent_node[k].assign(tree.partitions[k].size(), -1);
    }
    for (int k = 1; k <= K; ++k) {
        for (std::size_t m = 0; m < tree.partitions[k].size(); ++m) {
            const auto& node = tree.partitions[k][m];
            int parent = tree.node_of[k - 1][node.front()];
            for (int w : node)
                if (tree.node_of[k - 1][w] != parent)
                    throw TreeError("partitions do not refine: node splits across parents (" +
                                    node_name(k, static_cast<int>(m)) + ")");
            tree.parent_node[k][m] = parent;
            tree.child_nodes[k - 1][parent].push_back(static_cast<int>(m));
        }
    }
    return tree;
}

ScenarioTree binary_lattice(int depth, const Rational& branch_prob) {
    if (depth < 1) throw TreeError("binary lattice needs depth >= 1");
    if (depth > 20) throw TreeError("binary lattice depth too large");
    if (!(branch_prob > 0 && branch_prob < 1))
        throw TreeError("branch probability must lie strictly between 0 and 1");
    const int n = 1 << depth;
    std::vector<double> times(depth + 1);
    std::iota(times.begin(), times.end(), 0.0);
    std::vector<std::string> paths(n);
    std::vector<Rational> exact(n);
    for (int w = 0; w < n; ++w) {
        std::string name;
        Rational mass(1);
        for (int k = depth - 1; k >= 0; --k) {
            bool up = ((w >> k) & 1) == 0;
            name += up ? 'u' : 'd';
            mass *= up ? branch_prob : Rational(1) - branch_prob;
        }
        paths[w] = name;
        exact[w] = mass;
    }
    std::vector<std::vector<std::vector<int>>> partitions(depth + 1);
    for (int k = 0; k <= depth; ++k) {
        const int groups = 1 << k;
        const int span = n / groups;
        partitions[k].resize(groups);
        for (int g = 0; g < groups; ++g)
            for (int j = 0; j < span; ++j) partitions[k][g].push_back(g * span + j);
    }
    std::vector<double> weights(n);
    for (int w = 0; w < n; ++w) weights[w] = to_double(exact[w]);
    // renormalize double copies so their sum is exactly representable
    double s = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= s;
    return make_tree(std::move(times), std::move(paths), std::move(partitions),
                     std::move(weights), std::move(exact));
}

} // namespace lsnell
