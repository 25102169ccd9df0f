#include "lsnell/measures.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace lsnell {

Measure make_measure(const ScenarioTree& tree, std::vector<double> density,
                     std::optional<std::vector<Rational>> exact) {
    if (static_cast<int>(density.size()) != tree.n_paths())
        throw MeasureError("density needs one entry per path");
    double mass = 0.0;
    bool all_pos = true;
    for (int w = 0; w < tree.n_paths(); ++w) {
        double d = density[w];
        if (!std::isfinite(d)) throw MeasureError("density entries must be finite");
        if (d < 0.0) throw MeasureError("density entries must be nonnegative");
        all_pos = all_pos && d > 0.0;
        mass += d * tree.p_weights[w];
    }
    if (std::abs(mass - 1.0) > 1e-10)
        throw MeasureError("density must integrate to one against the reference weights");
    if (exact) {
        if (exact->size() != density.size())
            throw MeasureError("exact density must match the double density length");
        for (std::size_t w = 0; w < density.size(); ++w) {
            if ((*exact)[w] < 0) throw MeasureError("density entries must be nonnegative");
            if (std::abs(to_double((*exact)[w]) - density[w]) > 1e-9)
                throw MeasureError("exact and double densities disagree");
        }
        if (tree.p_exact) {
            Rational mass_x(0);
            for (std::size_t w = 0; w < density.size(); ++w)
                mass_x += (*exact)[w] * (*tree.p_exact)[w];
            if (mass_x != 1)
                throw MeasureError("exact density must integrate to exactly one");
        }
    }
    Measure q;
    q.density = std::move(density);
    q.exact = std::move(exact);
    q.equivalent = all_pos;
    return q;
}

Measure reference_measure(const ScenarioTree& tree) {
    return make_measure(tree, std::vector<double>(tree.n_paths(), 1.0),
                        std::vector<Rational>(tree.n_paths(), Rational(1)));
}

MeasureFamily make_family(const ScenarioTree& tree, std::vector<Measure> members,
                          std::vector<std::string> labels) {
    if (members.empty()) throw MeasureError("measure family must be nonvoid");
    for (const auto& q : members)
        if (static_cast<int>(q.density.size()) != tree.n_paths())
            throw MeasureError("family members must live on the given tree");
    if (!labels.empty() && labels.size() != members.size())
        throw MeasureError("labels must be absent or one per member");
    MeasureFamily fam;
    fam.tree = &tree;
    fam.members = std::move(members);
    fam.labels = std::move(labels);
    return fam;
}

Measure paste(const ScenarioTree& tree, const Measure& q1, const Measure& q2,
              const StoppingTime& tau, bool* used_fallback) {
    auto dres = paste_density<double>(tree, q1.density, q2.density, tau);
    std::optional<std::vector<Rational>> exact;
    if (q1.exact && q2.exact) {
        auto xres = paste_density<Rational>(tree, *q1.exact, *q2.exact, tau);
        exact = std::move(xres.density);
        // keep the double copy consistent with the exact one
        for (std::size_t w = 0; w < dres.density.size(); ++w)
            dres.density[w] = to_double((*exact)[w]);
        dres.used_fallback = xres.used_fallback;
    }
    if (used_fallback) *used_fallback = dres.used_fallback;
    return make_measure(tree, std::move(dres.density), std::move(exact));
}

double tv_distance(const ScenarioTree& tree, const Measure& q1, const Measure& q2) {
    return tv_distance_t<double>(tree, q1.density, q2.density);
}

std::vector<double> vector_measure_eval(const MeasureFamily& family,
                                        const std::vector<int>& event) {
    const ScenarioTree& tree = *family.tree;
    std::vector<char> in(tree.n_paths(), 0);
    for (int w : event) {
        if (w < 0 || w >= tree.n_paths()) throw MeasureError("event path index out of range");
        in[w] = 1;
    }
    std::vector<double> out(family.members.size(), 0.0);
    for (std::size_t i = 0; i < family.members.size(); ++i)
        for (int w = 0; w < tree.n_paths(); ++w)
            if (in[w]) out[i] += family.members[i].density[w] * tree.p_weights[w];
    return out;
}

CompactnessDiag range_compactness_diag(const MeasureFamily& family, double eps) {
    if (!(eps > 0.0)) throw InputError("net radius must be positive");
    const ScenarioTree& tree = *family.tree;
    CompactnessDiag diag;
    for (int i = 0; i < family.size(); ++i) {
        bool close = false;
        for (int c : diag.net_members)
            if (tv_distance(tree, family.members[i], family.members[c]) <= eps) {
                close = true;
                break;
            }
        if (!close) diag.net_members.push_back(i);
    }
    diag.net_size = static_cast<int>(diag.net_members.size());
    diag.covered = true; // greedy construction guarantees coverage
    return diag;
}

DensityPathDiag density_path_diagnostics(const MeasureFamily& family, const SemimetricSample& d,
                                         const std::vector<double>& delta_grid) {
    if (d.size() != family.size())
        throw InputError("semimetric must label every family member");
    const ScenarioTree& tree = *family.tree;
    DensityPathDiag diag;
    diag.dominated_by.assign(tree.n_paths(), 0.0);
    for (const auto& q : family.members)
        for (int w = 0; w < tree.n_paths(); ++w)
            diag.dominated_by[w] = std::max(diag.dominated_by[w], q.density[w]);
    for (int w = 0; w < tree.n_paths(); ++w)
        diag.dominated_integral += diag.dominated_by[w] * tree.p_weights[w];

    std::vector<double> grid = delta_grid;
    if (grid.empty()) {
        std::set<double> ds;
        for (int i = 0; i < d.size(); ++i)
            for (int j = i + 1; j < d.size(); ++j) ds.insert(d.dist[i][j]);
        grid.assign(ds.begin(), ds.end());
        if (grid.empty()) grid.push_back(0.0);
    }
    auto sup_diff = [&](int i, int j) {
        double m = 0.0;
        for (int w = 0; w < tree.n_paths(); ++w)
            m = std::max(m, std::abs(family.members[i].density[w] - family.members[j].density[w]));
        return m;
    };
    for (double delta : grid) {
        double omega = 0.0;
        for (int i = 0; i < family.size(); ++i)
            for (int j = i + 1; j < family.size(); ++j)
                if (d.dist[i][j] <= delta) omega = std::max(omega, sup_diff(i, j));
        diag.modulus.emplace_back(delta, omega);
    }
    return diag;
}

Measure convex_combination(const MeasureFamily& family, const std::vector<double>& weights) {
    if (static_cast<int>(weights.size()) != family.size())
        throw MeasureError("need one weight per member");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw MeasureError("mixture weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw MeasureError("mixture weights must sum to one");
    const ScenarioTree& tree = *family.tree;
    std::vector<double> density(tree.n_paths(), 0.0);
    for (int i = 0; i < family.size(); ++i)
        for (int w = 0; w < tree.n_paths(); ++w)
            density[w] += weights[i] * family.members[i].density[w];
    bool all_exact = true;
    for (const auto& q : family.members) all_exact = all_exact && q.exact.has_value();
    std::optional<std::vector<Rational>> exact;
    if (all_exact) {
        // the dyadic images of the weights rarely sum to exactly one, so the
        // last weight absorbs the exact residual (mass then stays exactly one)
        std::vector<Rational> wx(weights.size());
        Rational residual(1);
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            wx[i] = rational_from_double(weights[i]);
            residual -= wx[i];
        }
        wx.back() = residual;
        if (residual >= 0) {
            std::vector<Rational> xs(tree.n_paths(), Rational(0));
            for (int i = 0; i < family.size(); ++i)
                for (int w = 0; w < tree.n_paths(); ++w)
                    xs[w] += wx[i] * (*family.members[i].exact)[w];
            exact = std::move(xs);
            for (int w = 0; w < tree.n_paths(); ++w) density[w] = to_double((*exact)[w]);
        }
    }
    return make_measure(tree, std::move(density), std::move(exact));
}

BoxSet boxes_at_reference(const ScenarioTree& tree) {
    const auto pw = weights_of<Rational>(tree);
    BoxSet boxes;
    for (int k = 0; k < tree.depth(); ++k) {
        for (int m = 0; m < tree.n_nodes(k); ++m) {
            Rational node_mass(0);
            for (int w : tree.partitions[k][m]) node_mass += pw[w];
            BranchBox box;
            for (int c : tree.child_nodes[k][m]) {
                Rational child_mass(0);
                for (int w : tree.partitions[k + 1][c]) child_mass += pw[w];
                Rational p = child_mass / node_mass;
                box.intervals.emplace_back(p, p);
            }
            boxes[{k, m}] = std::move(box);
        }
    }
    return boxes;
}

std::vector<std::vector<Rational>> box_vertices(const BranchBox& box) {
    const std::size_t c = box.intervals.size();
    if (c == 0) throw MeasureError("branch box needs at least one interval");
    for (const auto& [lo, hi] : box.intervals) {
        if (lo > hi) throw MeasureError("branch box interval is empty");
        if (lo <= 0 || hi >= 1)
            throw MeasureError("branch box intervals must lie strictly inside (0, 1)");
    }
    std::set<std::vector<Rational>> seen;
    std::vector<std::vector<Rational>> vertices;
    for (std::size_t free = 0; free < c; ++free) {
        const std::size_t others = c - 1;
        for (std::uint64_t mask = 0; mask < (1ULL << others); ++mask) {
            std::vector<Rational> p(c);
            Rational rest(0);
            std::size_t bit = 0;
            for (std::size_t i = 0; i < c; ++i) {
                if (i == free) continue;
                const auto& [lo, hi] = box.intervals[i];
                p[i] = ((mask >> bit) & 1) ? hi : lo;
                rest += p[i];
                ++bit;
            }
            p[free] = Rational(1) - rest;
            const auto& [lo, hi] = box.intervals[free];
            if (p[free] < lo || p[free] > hi) continue;
            if (seen.insert(p).second) vertices.push_back(std::move(p));
        }
    }
    if (vertices.empty())
        throw MeasureError("branch box does not intersect the probability simplex");
    std::sort(vertices.begin(), vertices.end());
    return vertices;
}

MeasureFamily rectangular_family(const ScenarioTree& tree, const BoxSet& boxes) {
    const int K = tree.depth();
    // interior nodes in (level, node) order, with their vertex menus
    std::vector<std::pair<int, int>> nodes;
    std::vector<std::vector<std::vector<Rational>>> menus;
    std::uint64_t count = 1;
    for (int k = 0; k < K; ++k) {
        for (int m = 0; m < tree.n_nodes(k); ++m) {
            auto it = boxes.find({k, m});
            if (it == boxes.end())
                throw MeasureError("missing branch box for an interior node");
            const auto& kids = tree.child_nodes[k][m];
            if (it->second.intervals.size() != kids.size())
                throw MeasureError("branch box arity does not match the node's child count");
            auto verts = box_vertices(it->second);
            if (count > 8192 / verts.size())
                count = 8192; // saturate: already over the member cap
            else
                count *= verts.size();
            nodes.emplace_back(k, m);
            menus.push_back(std::move(verts));
        }
    }
    if (count > 4096)
        throw MeasureError("rectangular family has more than 4096 extreme members");

    const auto pw = weights_of<Rational>(tree);
    std::vector<Measure> members;
    std::vector<std::string> labels;
    std::vector<std::size_t> pick(nodes.size(), 0);
    while (true) {
        // path probability = product of chosen conditionals along the path
        std::vector<Rational> density(tree.n_paths());
        for (int w = 0; w < tree.n_paths(); ++w) {
            Rational prob(1);
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                auto [k, m] = nodes[i];
                if (tree.node_of[k][w] != m) continue;
                const auto& kids = tree.child_nodes[k][m];
                int child = tree.node_of[k + 1][w];
                std::size_t pos = 0;
                while (kids[pos] != child) ++pos;
                prob *= menus[i][pick[i]][pos];
            }
            density[w] = prob / pw[w];
        }
        std::vector<double> dd(tree.n_paths());
        for (int w = 0; w < tree.n_paths(); ++w) dd[w] = to_double(density[w]);
        members.push_back(make_measure(tree, std::move(dd), std::move(density)));
        std::ostringstream label;
        for (std::size_t i = 0; i < pick.size(); ++i) {
            if (i) label << '|';
            label << pick[i];
        }
        labels.push_back(label.str());

        std::size_t i = pick.size();
        bool done = true;
        while (i > 0) {
            --i;
            if (++pick[i] < menus[i].size()) {
                done = false;
                break;
            }
            pick[i] = 0;
        }
        if (done) break;
    }
    MeasureFamily fam = make_family(tree, std::move(members), std::move(labels));
    fam.pasting_closed_by_construction = true;
    return fam;
}

} // namespace lsnell
