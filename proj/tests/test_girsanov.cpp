#include "test_util.hpp"

#include <doctest.h>

#include "lsnell/girsanov.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

using namespace lsnell;

namespace {

DriverPaths small_driver(int steps = 4, int n_paths = 64, double horizon = 1.0,
                         std::uint64_t seed = 42) {
    return make_driver(steps, n_paths, horizon, seed, VolConfig{});
}

// A one-path driver with hand-picked increments, for deterministic identities.
DriverPaths manual_driver(std::vector<double> u, std::vector<double> dz, double vol_level = 1.0) {
    DriverPaths d;
    d.u = std::move(u);
    d.dz.push_back(std::move(dz));
    d.vol.push_back(std::vector<double>(d.dz[0].size(), vol_level));
    return d;
}

} // namespace

TEST_SUITE("girsanov") {

TEST_CASE("integrand ids parse into constant, linear, and rejected forms") {
    PsiFunction c = parse_psi("const:1.5");
    CHECK(c.id == "const:1.5");
    CHECK(c.eval(0.0, 0.0) == 1.5);
    CHECK(c.eval(3.0, -7.0) == 1.5);

    PsiFunction lin = parse_psi("linear:2,0.5"); // slope on time, constant intercept
    CHECK(lin.eval(0.0, 9.0) == 0.5);
    CHECK(lin.eval(1.0, -9.0) == 2.5);
    CHECK(lin.eval(0.25, 0.0) == 1.0);

    CHECK_THROWS_AS(parse_psi("nocolon"), InputError);
    CHECK_THROWS_AS(parse_psi("mystery:1"), InputError);
    CHECK_THROWS_AS(parse_psi("const:abc"), InputError);
    CHECK_THROWS_AS(parse_psi("const:inf"), InputError);
    CHECK_THROWS_AS(parse_psi("linear:1"), InputError);
    CHECK_THROWS_AS(parse_psi("linear:1,2,3"), InputError);
}

TEST_CASE("table integrands interpolate bilinearly and clamp at the grid edges") {
    const std::string path = testutil::fixture("psis_table_grid.json");
    PsiFunction tab = parse_psi("table:" + path);

    // Grid values are hit exactly.
    CHECK(tab.eval(0.0, -1.0) == 0.2);
    CHECK(tab.eval(0.5, 1.0) == 0.5);
    CHECK(tab.eval(1.0, 1.0) == 0.6);
    // Interior point (t = 0.25, x = 0): halfway in both directions.
    CHECK(tab.eval(0.25, 0.0) == doctest::Approx(0.35).epsilon(1e-15));
    // Clamping beyond the grid.
    CHECK(tab.eval(-5.0, -5.0) == 0.2);
    CHECK(tab.eval(9.0, 9.0) == 0.6);

    // Relative paths resolve against the supplied base directory.
    PsiFunction rel = parse_psi("table:psis_table_grid.json", LSNELL_FIXTURE_DIR);
    CHECK(rel.eval(0.25, 0.0) == tab.eval(0.25, 0.0));

    CHECK_THROWS_AS(parse_psi("table:/no/such/file.json"), InputError);

    // Malformed tables are rejected: unknown key, non-increasing grid, ragged rows.
    auto write_tmp = [](const std::string& name, const std::string& body) {
        std::string p = std::string("lsnell_test_") + name;
        std::ofstream out(p);
        out << body;
        return p;
    };
    std::string bad1 = write_tmp("tbl1.json",
                                 R"({"t_grid":[0],"x_grid":[0],"values":[[1]],"extra":1})");
    CHECK_THROWS_AS(parse_psi("table:" + bad1), InputError);
    std::string bad2 =
        write_tmp("tbl2.json", R"({"t_grid":[0,0],"x_grid":[0],"values":[[1],[2]]})");
    CHECK_THROWS_AS(parse_psi("table:" + bad2), InputError);
    std::string bad3 =
        write_tmp("tbl3.json", R"({"t_grid":[0,1],"x_grid":[0,1],"values":[[1,2],[3]]})");
    CHECK_THROWS_AS(parse_psi("table:" + bad3), InputError);
    std::string bad4 = write_tmp("tbl4.json", R"({"t_grid":[0],"x_grid":[0]})");
    CHECK_THROWS_AS(parse_psi("table:" + bad4), InputError);
    std::remove(bad1.c_str());
    std::remove(bad2.c_str());
    std::remove(bad3.c_str());
    std::remove(bad4.c_str());
}

TEST_CASE("integrand semimetric: closed forms, symmetry, and the sup over states") {
    std::vector<double> xg{0.0};
    std::vector<double> tg{0.0, 0.5, 1.0, 1.5, 2.0};

    PsiFunction p0 = parse_psi("const:1"), p1 = parse_psi("const:3");
    CHECK(d_psi(p0, p0, xg, tg) == 0.0);
    // Constant gap 2 over horizon 2: sqrt(4 * 2) exactly, trapezoids included.
    CHECK(d_psi(p0, p1, xg, tg) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(d_psi(p0, p1, xg, tg) == d_psi(p1, p0, xg, tg));

    // linear:1,0 vs const:0 on [0,1]: integral of t^2 is 1/3.
    std::vector<double> fine;
    for (int i = 0; i <= 1000; ++i) fine.push_back(i / 1000.0);
    CHECK(d_psi(parse_psi("linear:1,0"), parse_psi("const:0"), xg, fine) ==
          doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-6));

    // Triangle inequality across three constants.
    PsiFunction p2 = parse_psi("const:2");
    std::vector<double> tg1{0.0, 1.0};
    double d01 = d_psi(p0, p1, xg, tg1), d02 = d_psi(p0, p2, xg, tg1),
           d21 = d_psi(p2, p1, xg, tg1);
    CHECK(d01 <= d02 + d21 + 1e-15);

    // The state grid matters: the table integrand grows in x, so the supremum
    // is attained at the largest grid point.
    PsiFunction tab = parse_psi("table:" + testutil::fixture("psis_table_grid.json"));
    PsiFunction zero = parse_psi("const:0");
    std::vector<double> tg2{0.0, 0.5, 1.0};
    double at_hi = 0.5 * (0.4 * 0.4 + 0.5 * 0.5) * 0.5 + 0.5 * (0.5 * 0.5 + 0.6 * 0.6) * 0.5;
    CHECK(d_psi(tab, zero, {-1.0, 0.0, 1.0}, tg2) ==
          doctest::Approx(std::sqrt(at_hi)).epsilon(1e-14));
    CHECK(d_psi(tab, zero, {-1.0}, tg2) < d_psi(tab, zero, {1.0}, tg2));

    CHECK_THROWS_AS(d_psi(p0, p1, {}, tg), InputError);
    CHECK_THROWS_AS(d_psi(p0, p1, xg, {0.0}), InputError);
}

TEST_CASE("driver simulation is reproducible, thread-invariant, and validated") {
    DriverPaths a = small_driver();
    CHECK(a.steps() == 4);
    CHECK(a.n_paths() == 64);
    REQUIRE(a.u.size() == 5);
    CHECK(a.u.front() == 0.0);
    CHECK(a.u.back() == 1.0);
    for (std::size_t k = 0; k + 1 < a.u.size(); ++k) CHECK(a.u[k] < a.u[k + 1]);
    for (const auto& row : a.vol)
        for (double v : row) CHECK(v == 1.0);

    DriverPaths b = small_driver();
    CHECK(a.dz == b.dz);

    DriverPaths c = make_driver(4, 64, 1.0, 42, VolConfig{}, 4);
    CHECK(a.dz == c.dz); // worker count never changes the draws
    CHECK(a.vol == c.vol);

    DriverPaths other = make_driver(4, 64, 1.0, 43, VolConfig{});
    CHECK(a.dz != other.dz);

    CHECK_THROWS_AS(make_driver(0, 8, 1.0, 1, VolConfig{}), GirsanovError);
    CHECK_THROWS_AS(make_driver(4, 0, 1.0, 1, VolConfig{}), GirsanovError);
    CHECK_THROWS_AS(make_driver(4, 8, 0.0, 1, VolConfig{}), GirsanovError);
    VolConfig bad;
    bad.kind = "garch";
    CHECK_THROWS_AS(make_driver(4, 8, 1.0, 1, bad), GirsanovError);
    bad = VolConfig{};
    bad.value = 0.0;
    CHECK_THROWS_AS(make_driver(4, 8, 1.0, 1, bad), GirsanovError);
    bad = VolConfig{};
    bad.kind = "ar1";
    bad.x0 = -1.0;
    CHECK_THROWS_AS(make_driver(4, 8, 1.0, 1, bad), GirsanovError);
}

TEST_CASE("autoregressive volatility starts at x0 and follows the increment recursion") {
    VolConfig vc;
    vc.kind = "ar1";
    vc.x0 = 1.5;
    vc.phi = 0.7;
    vc.sigma = 0.3;
    DriverPaths d = make_driver(5, 32, 2.0, 7, vc);
    const double sq = std::sqrt(d.u[1] - d.u[0]);
    for (int p = 0; p < d.n_paths(); ++p) {
        CHECK(d.vol[p][0] == 1.5);
        for (int k = 0; k + 1 < d.steps(); ++k) {
            double expect = std::exp(vc.phi * std::log(d.vol[p][k]) + vc.sigma * d.dz[p][k] / sq);
            CHECK(d.vol[p][k + 1] == doctest::Approx(expect).epsilon(1e-9));
            CHECK(d.vol[p][k + 1] > 0.0);
        }
    }
}

TEST_CASE("stochastic integrals use left endpoints and satisfy the isometry") {
    DriverPaths d = small_driver(4, 4000);

    auto zero = stochastic_integral(parse_psi("const:0"), d);
    for (const auto& row : zero)
        for (double v : row) CHECK(v == 0.0);

    auto unit = stochastic_integral(parse_psi("const:1"), d);
    for (int p = 0; p < d.n_paths(); ++p) {
        double acc = 0.0;
        for (int k = 0; k < d.steps(); ++k) {
            acc += d.dz[p][k];
            CHECK(unit[p][k + 1] == acc);
        }
        CHECK(unit[p][0] == 0.0);
    }

    // linear:1,0 vanishes at t=0, so the first increment contributes nothing.
    auto lin = stochastic_integral(parse_psi("linear:1,0"), d);
    for (int p = 0; p < d.n_paths(); ++p) CHECK(lin[p][1] == 0.0);

    // E[X_T^2] = integral of psi^2: Monte Carlo within a 5-sigma band.
    double m2 = 0.0;
    for (int p = 0; p < d.n_paths(); ++p) m2 += unit[p][4] * unit[p][4];
    m2 /= d.n_paths();
    CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / d.n_paths()));
}

TEST_CASE("quadratic variation accumulates psi^2 du and never decreases") {
    DriverPaths d = small_driver(4, 16); // du = 1/4, exactly representable
    auto qv = quadratic_variation(parse_psi("const:2"), d);
    for (int p = 0; p < d.n_paths(); ++p)
        for (int k = 0; k <= 4; ++k) CHECK(qv[p][k] == static_cast<double>(k));

    VolConfig vc;
    vc.kind = "ar1";
    DriverPaths rough = make_driver(6, 24, 1.5, 9, vc);
    auto qv2 = quadratic_variation(parse_psi("table:" + testutil::fixture("psis_table_grid.json")),
                                   rough);
    for (const auto& row : qv2) {
        CHECK(row[0] == 0.0);
        for (std::size_t k = 0; k + 1 < row.size(); ++k) CHECK(row[k] <= row[k + 1]);
    }
}

TEST_CASE("density processes are positive, renormalized, and telescoping") {
    auto never = parse_psi("const:0");
    DriverPaths d = small_driver(4, 200);
    DensityProcess flat = density_process(never, d);
    for (const auto& row : flat.m)
        for (double v : row) CHECK(v == 1.0);
    CHECK(flat.raw_terminal_mean == 1.0);
    CHECK(flat.renorm_factor == 1.0);
    for (double t : flat.terminal) CHECK(t == 1.0);

    auto psi = parse_psi("const:0.8");
    DensityProcess proc = density_process(psi, d);
    auto x = stochastic_integral(psi, d);
    auto qv = quadratic_variation(psi, d);
    double mean = 0.0;
    for (int p = 0; p < d.n_paths(); ++p) {
        mean += proc.terminal[p];
        CHECK(proc.m[p][0] == 1.0);
        for (int k = 0; k <= d.steps(); ++k) {
            CHECK(proc.m[p][k] > 0.0);
            CHECK(proc.m[p][k] ==
                  doctest::Approx(std::exp(x[p][k] - 0.5 * qv[p][k])).epsilon(1e-12));
        }
        // One-step ratio identity.
        for (int k = 0; k < d.steps(); ++k) {
            double v = psi.eval(d.u[k], d.vol[p][k]);
            double step = std::exp(v * d.dz[p][k] - 0.5 * v * v * (d.u[k + 1] - d.u[k]));
            CHECK(proc.m[p][k + 1] == doctest::Approx(proc.m[p][k] * step).epsilon(1e-12));
        }
    }
    mean /= d.n_paths();
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-12)); // renormalized to mean one
    CHECK(proc.raw_terminal_mean * proc.renorm_factor == doctest::Approx(1.0).epsilon(1e-15));

    // Equal integrands produce bitwise-equal densities.
    DensityProcess same = density_process(parse_psi("linear:0,0.8"), d);
    CHECK(same.terminal == proc.terminal);

    // A hand-built driver with an enormous increment overflows the exponential.
    DriverPaths spike = manual_driver({0.0, 1.0}, {2000.0});
    CHECK_THROWS_AS(density_process(parse_psi("const:1"), spike), GirsanovError);
}

TEST_CASE("the driver discretizes into a valid tree with uniform exact weights") {
    DriverPaths d = small_driver(3, 40, 1.0, 11);
    auto tree = tree_from_driver(d, 2);
    REQUIRE(tree != nullptr);
    CHECK(tree->depth() == 3);
    CHECK(tree->n_paths() == 40);
    CHECK(tree->times == d.u);
    CHECK(tree->n_nodes(0) == 1);
    CHECK(tree->n_nodes(3) == 40);
    REQUIRE(tree->p_exact.has_value());
    for (const Rational& w : *tree->p_exact) CHECK(w == Rational(1, 40));

    // Two bins split on the increment sign at level one.
    REQUIRE(tree->n_nodes(1) == 2);
    for (int node = 0; node < 2; ++node) {
        const auto& members = tree->partitions[1][node];
        CHECK(!members.empty());
        bool first_neg = d.dz[members[0]][0] < 0.0;
        for (int p : members) CHECK((d.dz[p][0] < 0.0) == first_neg);
    }
    // Level two refines by the two-step sign history: at most four nodes.
    CHECK(tree->n_nodes(2) <= 4);
    CHECK(tree->n_nodes(2) >= tree->n_nodes(1));

    // A single bin collapses the interior filtration to the trivial one.
    auto trivial = tree_from_driver(d, 1);
    CHECK(trivial->n_nodes(1) == 1);
    CHECK(trivial->n_nodes(2) == 1);
    CHECK(trivial->n_nodes(3) == 40);

    CHECK_THROWS_AS(tree_from_driver(d, 0), GirsanovError);
}

TEST_CASE("a family assembled from integrands carries measures, metric, and fields") {
    DriverPaths d = small_driver(3, 60, 1.0, 17);
    std::vector<PsiFunction> psis{parse_psi("const:0"), parse_psi("const:1"),
                                  parse_psi("linear:1,0")};
    GirsanovBundle bundle = family_from_psis(psis, d, 2, {0.0});

    CHECK_FALSE(bundle.single_member_warning);
    CHECK(bundle.family.members.size() == 3);
    CHECK(bundle.family.labels == std::vector<std::string>{"const:0", "const:1", "linear:1,0"});
    REQUIRE(bundle.raw_means.size() == 3);
    CHECK(bundle.raw_means[0] == 1.0); // the null integrand is already a density
    CHECK(bundle.renorm_factors[0] == 1.0);
    for (double m : bundle.raw_means) CHECK(m > 0.0);

    // Every member is a genuine density on the discretized tree.
    for (const Measure& q : bundle.family.members) {
        CHECK(static_cast<int>(q.density.size()) == d.n_paths());
        for (double v : q.density) CHECK(v > 0.0);
        CHECK(q.equivalent);
    }

    // The semimetric is the pairwise integrand distance over the driver grid.
    CHECK(bundle.semimetric.points == bundle.family.labels);
    CHECK(bundle.semimetric.dist[0][1] == doctest::Approx(1.0).epsilon(1e-12)); // |1-0| over T=1
    CHECK(bundle.semimetric.dist[0][0] == 0.0);

    // Field rows are the terminal stochastic integrals; the null row vanishes.
    CHECK(bundle.fields.n_points() == 3);
    CHECK(bundle.fields.n_samples() == 60);
    for (double v : bundle.fields.values[0]) CHECK(v == 0.0);
    auto x1 = stochastic_integral(psis[1], d);
    for (int p = 0; p < d.n_paths(); ++p) CHECK(bundle.fields.values[1][p] == x1[p][3]);

    GirsanovBundle solo = family_from_psis({parse_psi("const:1")}, d, 2, {0.0});
    CHECK(solo.single_member_warning);
    CHECK_THROWS_AS(family_from_psis({}, d, 2, {0.0}), GirsanovError);
}

TEST_CASE("tilting by a constant integrand shifts the terminal mean to c T") {
    DriverPaths d = small_driver(8, 20000, 1.0, 5);
    const double c = 0.8;
    DensityProcess proc = density_process(parse_psi("const:0.8"), d);

    // Raw terminal mean is a Monte Carlo estimate of one.
    double raw_sd = std::sqrt((std::exp(c * c) - 1.0) / d.n_paths());
    CHECK(std::abs(proc.raw_terminal_mean - 1.0) < 5.0 * raw_sd);

    DriftCheck chk = drift_check(d, proc.terminal, c);
    CHECK(chk.target == c);
    CHECK(chk.stderr_ > 0.0);
    CHECK(std::abs(chk.z_score) < 5.0);
    CHECK(chk.estimate == doctest::Approx(c).epsilon(0.15));

    // The untilted measure has drift zero.
    std::vector<double> ones(d.n_paths(), 1.0);
    DriftCheck flat = drift_check(d, ones, 0.0);
    CHECK(std::abs(flat.z_score) < 5.0);

    CHECK_THROWS_AS(drift_check(d, {1.0, 2.0}, c), GirsanovError);
}

} // TEST_SUITE
