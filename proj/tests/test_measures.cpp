#include "test_util.hpp"

#include "lsnell/measures.hpp"
#include "lsnell/semimetric.hpp"
#include "lsnell/stopping.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace lsnell;
using namespace lsnell::testutil;

namespace {

// Q(A) = sum over A of density * weight, exactly.
Rational event_mass(const ScenarioTree& t, const std::vector<Rational>& d, unsigned mask) {
    const auto pw = weights_of<Rational>(t);
    Rational acc(0);
    for (int w = 0; w < t.n_paths(); ++w)
        if ((mask >> w) & 1u) acc += d[w] * pw[w];
    return acc;
}

ScenarioTree depth1_uniform() {
    return make_tree({0.0, 1.0}, {"u", "d"}, {{{0, 1}}, {{0}, {1}}}, {0.5, 0.5},
                     std::vector<Rational>{Rational(1, 2), Rational(1, 2)});
}

BoxSet uniform_boxes(const ScenarioTree& t, const Rational& lo, const Rational& hi) {
    BoxSet boxes;
    for (int k = 0; k < t.depth(); ++k)
        for (int m = 0; m < t.n_nodes(k); ++m) {
            BranchBox box;
            for (std::size_t c = 0; c < t.child_nodes[k][m].size(); ++c)
                box.intervals.emplace_back(lo, hi);
            boxes[{k, m}] = std::move(box);
        }
    return boxes;
}

} // namespace

TEST_SUITE("measures") {

TEST_CASE("make_measure validates length, sign, finiteness and unit mass") {
    ScenarioTree t = depth2_uniform();
    CHECK_THROWS_AS(make_measure(t, {1.0, 1.0, 1.0}), MeasureError);
    CHECK_THROWS_AS(make_measure(t, {2.0, 2.0, 1.0, -1.0}), MeasureError);
    CHECK_THROWS_AS(make_measure(t, {1.0, 1.0, 1.0, std::nan("")}), MeasureError);
    CHECK_THROWS_AS(make_measure(t, {1.0, 1.0, 1.0, 1.5}), MeasureError);
    CHECK_THROWS_AS(make_measure(t, {1.0, 1.0, 1.0, 1.0},
                                 std::vector<Rational>{Rational(1), Rational(1), Rational(1)}),
                    MeasureError);
    CHECK_THROWS_AS(make_measure(t, {1.0, 1.0, 1.0, 1.0},
                                 std::vector<Rational>{Rational(1), Rational(1), Rational(1),
                                                       Rational(2)}),
                    MeasureError);
    // exact mass must be exactly one when the tree weights are exact
    CHECK_THROWS_AS(
        make_measure(t, {1.0 + 4e-11, 1.0, 1.0, 1.0},
                     std::vector<Rational>{Rational(1) + Rational(1, 25000000000LL), Rational(1),
                                           Rational(1), Rational(1)}),
        MeasureError);

    Measure ok = make_measure(t, {2.0, 0.0, 1.0, 1.0});
    CHECK_FALSE(ok.equivalent);
    Measure ref = reference_measure(t);
    CHECK(ref.equivalent);
    CHECK(ref.density == std::vector<double>{1.0, 1.0, 1.0, 1.0});
    REQUIRE(ref.exact.has_value());
    CHECK((*ref.exact)[0] == Rational(1));
}

TEST_CASE("make_family validates membership and labels") {
    ScenarioTree t = depth2_uniform();
    CHECK_THROWS_AS(make_family(t, {}), MeasureError);
    Measure ref = reference_measure(t);
    CHECK_THROWS_AS(make_family(t, {ref}, {"a", "b"}), MeasureError);
    MeasureFamily fam = make_family(t, {ref, ref}, {"a", "b"});
    CHECK(fam.size() == 2);
    CHECK_FALSE(fam.pasting_closed_by_construction);
}

TEST_CASE("pasting satisfies its defining conditional-law identity on every event") {
    ScenarioTree t = depth2_uniform();
    // q1 tilts up, q2 kills path ud
    std::vector<Rational> d1 = {Rational(4, 3), Rational(4, 3), Rational(2, 3), Rational(2, 3)};
    std::vector<Rational> d2 = {Rational(2), Rational(0), Rational(1), Rational(1)};
    StoppingTime tau = make_stopping_time(t, {1, 1, 2, 2});

    auto res = paste_density<Rational>(t, d1, d2, tau);
    CHECK_FALSE(res.used_fallback);
    CHECK(res.density == std::vector<Rational>{Rational(8, 3), Rational(0), Rational(2, 3),
                                               Rational(2, 3)});
    // total mass stays one
    CHECK(event_mass(t, res.density, 0xFu) == Rational(1));

    // Q3(A) = sum over stopped atoms of Q1(atom) * Q2(A & atom) / Q2(atom)
    auto atoms = policy_atoms(t, tau);
    REQUIRE(atoms.size() == 3);
    for (unsigned mask = 0; mask < 16; ++mask) {
        Rational expected(0);
        for (const auto& atom : atoms) {
            unsigned atom_mask = 0;
            for (int w : atom) atom_mask |= 1u << w;
            Rational q2_atom = event_mass(t, d2, atom_mask);
            if (q2_atom == 0) continue;
            expected += event_mass(t, d1, atom_mask) *
                        event_mass(t, d2, mask & atom_mask) / q2_atom;
        }
        CHECK(event_mass(t, res.density, mask) == expected);
    }
}

TEST_CASE("pasting at the endpoints returns q2 and q1; nulls fall back flagged") {
    ScenarioTree t = depth2_uniform();
    Measure q1 = make_measure(t, {4.0 / 3, 4.0 / 3, 2.0 / 3, 2.0 / 3},
                              std::vector<Rational>{Rational(4, 3), Rational(4, 3), Rational(2, 3),
                                                    Rational(2, 3)});
    Measure q2 = make_measure(t, {2.0, 0.0, 1.0, 1.0},
                              std::vector<Rational>{Rational(2), Rational(0), Rational(1),
                                                    Rational(1)});

    bool fb = true;
    Measure at0 = paste(t, q1, q2, constant_policy(t, 0), &fb);
    CHECK_FALSE(fb);
    CHECK(*at0.exact == *q2.exact);

    // at the horizon every singleton is an atom; the q2-null path keeps q1
    Measure atK = paste(t, q1, q2, constant_policy(t, 2), &fb);
    CHECK(fb);
    CHECK(*atK.exact == *q1.exact);

    Measure equiv = make_measure(t, {1.6, 0.4, 1.0, 1.0},
                                 std::vector<Rational>{Rational(8, 5), Rational(2, 5), Rational(1),
                                                       Rational(1)});
    Measure clean = paste(t, q1, equiv, constant_policy(t, 2), &fb);
    CHECK_FALSE(fb);
    CHECK(*clean.exact == *q1.exact);

    // pasting a measure with itself changes nothing
    StoppingTime mid = make_stopping_time(t, {1, 1, 2, 2});
    Measure self = paste(t, q1, q1, mid, &fb);
    CHECK_FALSE(fb);
    CHECK(*self.exact == *q1.exact);
}

TEST_CASE("total variation matches examples and the sup-over-events definition") {
    ScenarioTree t1 = depth1_uniform();
    Measure a = reference_measure(t1);
    Measure singular1 = make_measure(t1, {2.0, 0.0});
    Measure singular2 = make_measure(t1, {0.0, 2.0});
    CHECK(tv_distance(t1, a, a) == 0.0);
    CHECK(tv_distance(t1, singular1, singular2) == 1.0);

    ScenarioTree t = depth2_uniform();
    Measure p = reference_measure(t);
    Measure q = make_measure(t, {1.5, 1.5, 0.5, 0.5});
    CHECK(tv_distance(t, p, q) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(tv_distance(t, q, p) == doctest::Approx(0.25).epsilon(1e-15));

    SplitMix64 rng(4242);
    for (int trial = 0; trial < 10; ++trial) {
        ScenarioTree rt = random_tree(rng, 3, 8);
        auto qa = density_of<Rational>(random_equivalent_measure(rng, rt));
        auto qb = density_of<Rational>(random_equivalent_measure(rng, rt));
        auto qc = density_of<Rational>(random_equivalent_measure(rng, rt));
        Rational ab = tv_distance_t<Rational>(rt, qa, qb);
        // symmetry: the positive parts of both signs carry the same mass
        CHECK(ab == tv_distance_t<Rational>(rt, qb, qa));
        // triangle inequality
        CHECK(ab <= tv_distance_t<Rational>(rt, qa, qc) + tv_distance_t<Rational>(rt, qc, qb));
        // sup over all events, brute force
        Rational best(0);
        for (unsigned mask = 0; mask < (1u << rt.n_paths()); ++mask) {
            Rational diff = event_mass(rt, qa, mask) - event_mass(rt, qb, mask);
            if (diff < 0) diff = -diff;
            best = std::max(best, diff);
        }
        CHECK(ab == best);
    }
}

TEST_CASE("vector measure evaluation and compactness diagnostics") {
    ScenarioTree t = depth1_uniform();
    MeasureFamily fam = rectangular_family(t, uniform_boxes(t, Rational(2, 5), Rational(3, 5)));
    REQUIRE(fam.size() == 2);

    auto on_up = vector_measure_eval(fam, {0});
    CHECK(on_up[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(on_up[1] == doctest::Approx(0.6).epsilon(1e-15));
    auto on_all = vector_measure_eval(fam, {0, 1});
    CHECK(on_all[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(vector_measure_eval(fam, {5}), MeasureError);

    // tv(Q0, Q1) = 0.1: a huge radius collapses the net, a tiny one keeps both
    CompactnessDiag wide = range_compactness_diag(fam, 1.0);
    CHECK(wide.net_size == 1);
    CHECK(wide.net_members == std::vector<int>{0});
    CHECK(wide.covered);
    CompactnessDiag fine = range_compactness_diag(fam, 1e-9);
    CHECK(fine.net_size == 2);
    CHECK_THROWS_AS(range_compactness_diag(fam, 0.0), InputError);
}

TEST_CASE("convex combinations are exact and reject off-simplex weights") {
    ScenarioTree t = depth1_uniform();
    MeasureFamily fam = rectangular_family(t, uniform_boxes(t, Rational(2, 5), Rational(3, 5)));

    Measure mix = convex_combination(fam, {0.25, 0.75});
    REQUIRE(mix.exact.has_value());
    CHECK((*mix.exact)[0] == Rational(11, 10));
    CHECK((*mix.exact)[1] == Rational(9, 10));
    CHECK(mix.density[0] == doctest::Approx(1.1).epsilon(1e-15));

    Measure pure = convex_combination(fam, {1.0, 0.0});
    CHECK(*pure.exact == *fam.members[0].exact);

    CHECK_THROWS_AS(convex_combination(fam, {0.5}), MeasureError);
    CHECK_THROWS_AS(convex_combination(fam, {0.7, 0.4}), MeasureError);
    CHECK_THROWS_AS(convex_combination(fam, {1.5, -0.5}), MeasureError);
}

TEST_CASE("density path diagnostics report the modulus and the dominating envelope") {
    ScenarioTree t = depth1_uniform();
    MeasureFamily fam = rectangular_family(t, uniform_boxes(t, Rational(2, 5), Rational(3, 5)));
    SemimetricSample d = make_semimetric({"a", "b"}, {{0.0, 1.0}, {1.0, 0.0}});

    DensityPathDiag diag = density_path_diagnostics(fam, d, {0.5, 1.0});
    CHECK(diag.dominated_by == std::vector<double>{1.2, 1.2});
    CHECK(diag.dominated_integral == doctest::Approx(1.2).epsilon(1e-15));
    REQUIRE(diag.modulus.size() == 2);
    CHECK(diag.modulus[0].second == 0.0); // no pair within distance 0.5
    CHECK(diag.modulus[1].second == doctest::Approx(0.4).epsilon(1e-15));

    SemimetricSample wrong = make_semimetric({"a", "b", "c"},
                                             {{0.0, 1.0, 1.0}, {1.0, 0.0, 1.0}, {1.0, 1.0, 0.0}});
    CHECK_THROWS_AS(density_path_diagnostics(fam, wrong, {}), InputError);
}

TEST_CASE("box vertices: at most one free coordinate, sorted and deduplicated") {
    BranchBox pair;
    pair.intervals = {{Rational(2, 5), Rational(3, 5)}, {Rational(2, 5), Rational(3, 5)}};
    auto v2 = box_vertices(pair);
    REQUIRE(v2.size() == 2);
    CHECK(v2[0] == std::vector<Rational>{Rational(2, 5), Rational(3, 5)});
    CHECK(v2[1] == std::vector<Rational>{Rational(3, 5), Rational(2, 5)});

    BranchBox triple;
    triple.intervals = {{Rational(1, 5), Rational(1, 2)},
                        {Rational(1, 5), Rational(1, 2)},
                        {Rational(1, 5), Rational(1, 2)}};
    auto v3 = box_vertices(triple);
    CHECK(v3.size() == 6);
    for (const auto& p : v3) {
        Rational sum(0);
        int at_bound = 0;
        for (const auto& c : p) {
            sum += c;
            CHECK(c >= Rational(1, 5));
            CHECK(c <= Rational(1, 2));
            if (c == Rational(1, 5) || c == Rational(1, 2)) ++at_bound;
        }
        CHECK(sum == Rational(1));
        CHECK(at_bound >= 2);
    }
    CHECK(std::is_sorted(v3.begin(), v3.end()));

    BranchBox empty_iv;
    empty_iv.intervals = {{Rational(3, 5), Rational(2, 5)}, {Rational(2, 5), Rational(3, 5)}};
    CHECK_THROWS_AS(box_vertices(empty_iv), MeasureError);
    BranchBox at_zero;
    at_zero.intervals = {{Rational(0), Rational(1, 2)}, {Rational(1, 2), Rational(1, 2)}};
    CHECK_THROWS_AS(box_vertices(at_zero), MeasureError);
    BranchBox at_one;
    at_one.intervals = {{Rational(1, 2), Rational(1)}, {Rational(1, 2), Rational(1, 2)}};
    CHECK_THROWS_AS(box_vertices(at_one), MeasureError);
    BranchBox off_simplex;
    off_simplex.intervals = {{Rational(3, 5), Rational(7, 10)}, {Rational(3, 5), Rational(7, 10)}};
    CHECK_THROWS_AS(box_vertices(off_simplex), MeasureError);
}

TEST_CASE("rectangular families enumerate the vertex measures") {
    ScenarioTree t1 = depth1_uniform();
    MeasureFamily two = rectangular_family(t1, uniform_boxes(t1, Rational(2, 5), Rational(3, 5)));
    REQUIRE(two.size() == 2);
    CHECK(two.pasting_closed_by_construction);
    CHECK(*two.members[0].exact == std::vector<Rational>{Rational(4, 5), Rational(6, 5)});
    CHECK(*two.members[1].exact == std::vector<Rational>{Rational(6, 5), Rational(4, 5)});
    CHECK(two.labels == std::vector<std::string>{"0", "1"});

    ScenarioTree t = depth2_uniform();
    MeasureFamily eight = rectangular_family(t, uniform_boxes(t, Rational(2, 5), Rational(3, 5)));
    REQUIRE(eight.size() == 8);
    // member "0|0|0": every conditional is (2/5, 3/5)
    CHECK(*eight.members[0].exact == std::vector<Rational>{Rational(16, 25), Rational(24, 25),
                                                           Rational(24, 25), Rational(36, 25)});
    CHECK(eight.labels[0] == "0|0|0");
    CHECK(eight.labels[7] == "1|1|1");
    for (const auto& q : eight.members) {
        Rational mass(0);
        for (int w = 0; w < 4; ++w) mass += (*q.exact)[w] * Rational(1, 4);
        CHECK(mass == Rational(1));
        CHECK(q.equivalent);
    }
    // all eight densities are distinct
    for (int i = 0; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j) CHECK(*eight.members[i].exact != *eight.members[j].exact);
}

TEST_CASE("rectangular families are closed under pasting, exhaustively") {
    ScenarioTree t = depth2_uniform();
    MeasureFamily fam = rectangular_family(t, uniform_boxes(t, Rational(2, 5), Rational(3, 5)));
    auto policies = enumerate_policies(t, 1000);
    REQUIRE(policies.size() == 5);
    std::vector<std::vector<Rational>> dens;
    for (const auto& q : fam.members) dens.push_back(*q.exact);
    for (const auto& d1 : dens)
        for (const auto& d2 : dens)
            for (const auto& tau : policies) {
                auto res = paste_density<Rational>(t, d1, d2, tau);
                CHECK_FALSE(res.used_fallback);
                bool inside = false;
                for (const auto& m : dens) inside = inside || m == res.density;
                CHECK(inside);
            }
}

TEST_CASE("degenerate boxes at the reference collapse to the reference measure") {
    ScenarioTree t = binary_lattice(2, Rational(3, 10));
    MeasureFamily fam = rectangular_family(t, boxes_at_reference(t));
    REQUIRE(fam.size() == 1);
    CHECK(*fam.members[0].exact ==
          std::vector<Rational>{Rational(1), Rational(1), Rational(1), Rational(1)});
}

TEST_CASE("rectangular family errors: missing box, arity mismatch, member blowup") {
    ScenarioTree t = depth2_uniform();
    BoxSet missing = uniform_boxes(t, Rational(2, 5), Rational(3, 5));
    missing.erase({1, 1});
    CHECK_THROWS_AS(rectangular_family(t, missing), MeasureError);

    BoxSet bad_arity = uniform_boxes(t, Rational(2, 5), Rational(3, 5));
    bad_arity[{1, 0}].intervals.push_back({Rational(2, 5), Rational(3, 5)});
    CHECK_THROWS_AS(rectangular_family(t, bad_arity), MeasureError);

    ScenarioTree deep = binary_lattice(4, Rational(1, 2)); // 15 interior nodes -> 2^15 members
    CHECK_THROWS_AS(rectangular_family(deep, uniform_boxes(deep, Rational(2, 5), Rational(3, 5))),
                    MeasureError);
}

} // TEST_SUITE
