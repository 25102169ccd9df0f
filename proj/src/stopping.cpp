#include "lsnell/stopping.hpp"

#include <algorithm>

namespace lsnell {

StoppingTime make_stopping_time(const ScenarioTree& tree, std::vector<int> stop_level) {
    const int K = tree.depth();
    if (static_cast<int>(stop_level.size()) != tree.n_paths())
        throw PolicyError("stopping time needs one level per path");
    for (int v : stop_level)
        if (v < 0 || v > K) throw PolicyError("stop level out of range");
    StoppingTime tau;
    tau.stop_flag.assign(K + 1, {});
    for (int k = 0; k <= K; ++k) tau.stop_flag[k].assign(tree.n_nodes(k), 0);
    // adaptedness: {tau = k} must be a union of level-k nodes
    for (int k = 0; k <= K; ++k) {
        for (int m = 0; m < tree.n_nodes(k); ++m) {
            const auto& node = tree.partitions[k][m];
            std::size_t hits = 0;
            for (int w : node) hits += (stop_level[w] == k);
            if (hits == 0) continue;
            if (hits != node.size())
                throw PolicyError("not a stopping time: decision at level " + std::to_string(k) +
                                  " splits a node");
            tau.stop_flag[k][m] = 1;
        }
    }
    tau.stop_level = std::move(stop_level);
    return tau;
}

StoppingTime constant_policy(const ScenarioTree& tree, int level) {
    if (level < 0 || level > tree.depth()) throw PolicyError("constant policy level out of range");
    return make_stopping_time(tree, std::vector<int>(tree.n_paths(), level));
}

StoppingTime min_policy(const ScenarioTree& tree, const StoppingTime& a, const StoppingTime& b) {
    std::vector<int> lev(tree.n_paths());
    for (int w = 0; w < tree.n_paths(); ++w) lev[w] = std::min(a.stop_level[w], b.stop_level[w]);
    return make_stopping_time(tree, std::move(lev));
}

bool same_policy(const StoppingTime& a, const StoppingTime& b) {
    return a.stop_level == b.stop_level;
}

std::vector<std::vector<int>> policy_atoms(const ScenarioTree& tree, const StoppingTime& tau) {
    std::vector<std::vector<int>> atoms;
    for (std::size_t k = 0; k < tau.stop_flag.size(); ++k)
        for (std::size_t m = 0; m < tau.stop_flag[k].size(); ++m)
            if (tau.stop_flag[k][m]) atoms.push_back(tree.partitions[k][m]);
    return atoms;
}

namespace {

std::uint64_t count_node(const ScenarioTree& tree, int level, int node, std::uint64_t cap) {
    if (level == tree.depth()) return 1;
    std::uint64_t prod = 1;
    for (int c : tree.child_nodes[level][node]) {
        std::uint64_t cc = count_node(tree, level + 1, c, cap);
        if (cc > 0 && prod > cap / cc) return cap + 1; // saturate
        prod *= cc;
    }
    return std::min<std::uint64_t>(prod + 1, cap + 1);
}

// All first-hit policies for the subtree rooted at (level, node), as partial
// per-path stop levels (only member paths are written). The stop-at-this-node
// variant always comes first; child combinations run with the last child fastest.
void enum_node(const ScenarioTree& tree, int level, int node,
               std::vector<std::vector<int>>& out) {
    const auto& members = tree.partitions[level][node];
    {
        std::vector<int> stop(tree.n_paths(), -1);
        for (int w : members) stop[w] = level;
        out.push_back(std::move(stop));
    }
    if (level == tree.depth()) return;

    const auto& kids = tree.child_nodes[level][node];
    std::vector<std::vector<std::vector<int>>> per_child(kids.size());
    for (std::size_t i = 0; i < kids.size(); ++i)
        enum_node(tree, level + 1, kids[i], per_child[i]);

    std::vector<std::size_t> pick(kids.size(), 0);
    while (true) {
        std::vector<int> stop(tree.n_paths(), -1);
        for (std::size_t i = 0; i < kids.size(); ++i)
            for (int w : tree.partitions[level + 1][kids[i]])
                stop[w] = per_child[i][pick[i]][w];
        out.push_back(std::move(stop));
        // odometer: last child advances fastest
        std::size_t i = kids.size();
        while (i > 0) {
            --i;
            if (++pick[i] < per_child[i].size()) break;
            pick[i] = 0;
            if (i == 0) return;
        }
    }
}

} // namespace

std::uint64_t count_policies(const ScenarioTree& tree, std::uint64_t cap) {
    return count_node(tree, 0, 0, cap);
}

std::vector<StoppingTime> enumerate_policies(const ScenarioTree& tree, std::uint64_t cap) {
    std::uint64_t count = count_policies(tree, cap);
    if (count > cap)
        throw PolicyError("policy enumeration exceeds the cap of " + std::to_string(cap));
    std::vector<std::vector<int>> raw;
    raw.reserve(count);
    enum_node(tree, 0, 0, raw);
    std::vector<StoppingTime> out;
    out.reserve(raw.size());
    for (auto& stop : raw) out.push_back(make_stopping_time(tree, std::move(stop)));
    return out;
}

} // namespace lsnell
