#include "test_util.hpp"

#include <doctest.h>

#include "lsnell/cli_run.hpp"
#include "lsnell/entropy.hpp"
#include "lsnell/report.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace lsnell;

namespace {

std::string tmp_path(const std::string& name) {
    std::filesystem::create_directories("cli_tmp");
    return "cli_tmp/" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json run_report(std::vector<std::string> args, const std::string& out, int expect_rc = 0) {
    args.push_back("--out");
    args.push_back(out);
    int rc = run_cli(args);
    CHECK(rc == expect_rc);
    return load_json_file(out);
}

// Validates the envelope and, when a per-command schema exists, the results.
void check_schema(const json& report, const std::string& command) {
    auto env_problems =
        validate_schema(report, load_json_file(testutil::schema("envelope.schema.json")));
    for (const auto& p : env_problems) {
        INFO("envelope: " << p);
        CHECK(false);
    }
    CHECK(report.at("command") == command);
    CHECK(report.at("tool") == "lsnell");
    CHECK(report.at("schema_version") == 1);
    auto res_problems = validate_schema(report.at("results"),
                                        load_json_file(testutil::schema(command + ".schema.json")));
    for (const auto& p : res_problems) {
        INFO(command << " results: " << p);
        CHECK(false);
    }
}

bool check_passed(const json& report, const std::string& name) {
    for (const json& c : report.at("checks"))
        if (c.at("name") == name) return c.at("pass").get<bool>();
    FAIL("no check named " << name);
    return false;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("duality command reproduces the frozen gap-instance values exactly") {
    ::unsetenv("LSNELL_SEED");
    json golden = load_json_file(testutil::fixture("gap_golden.json"));
    json rep = run_report({"duality", "--tree", testutil::fixture("gap_tree.json"),
                           "--family", testutil::fixture("gap_family.json"),
                           "--payoff", testutil::fixture("gap_payoff.json"),
                           "--exact", "--lambda-grid", "0.1:0.9:0.1"},
                          tmp_path("gap_duality.json"));
    check_schema(rep, "duality");

    const json& res = rep.at("results");
    CHECK(res.at("exact").at("lower_pure") == golden.at("lower_pure"));
    CHECK(res.at("exact").at("lower_randomized") == golden.at("lower_randomized"));
    CHECK(res.at("exact").at("upper") == golden.at("upper"));
    CHECK(res.at("exact").at("gap") == golden.at("gap"));
    CHECK(res.at("n_policies") == golden.at("n_policies"));
    CHECK(res.at("gap") == 0.5);
    CHECK(res.at("heuristic_lower") == false);
    CHECK(res.at("atomless") == false);

    // The event-condition scan matches the frozen profile and refutes each lambda.
    const json& profile = golden.at("condition_a_profile");
    const json& cond = res.at("condition_a");
    REQUIRE(cond.size() == profile.at("lambdas").size());
    for (std::size_t i = 0; i < cond.size(); ++i) {
        CHECK(cond[i].at("lambda") == profile.at("lambdas")[i]);
        CHECK(cond[i].at("worst_inf_exact") == profile.at("worst_inf")[i]);
        CHECK(cond[i].at("all_pairs_ok") == false);
    }

    // A positive gap is a finding, not a failure: the checks all pass.
    CHECK(check_passed(rep, "value_ordering"));
    CHECK(check_passed(rep, "randomized_strong_duality"));
    CHECK(check_passed(rep, "solver_converged"));
    bool noted = false;
    for (const json& n : rep.at("notes"))
        noted = noted || n.get<std::string>().find("duality gap") != std::string::npos;
    CHECK(noted);
    CHECK(rep.at("timings").is_null());
    // Thread count never appears in the config echo: it cannot change results.
    CHECK_FALSE(rep.at("config").contains("threads"));
}

TEST_CASE("duality command on the rectangular and singleton fixtures") {
    json golden = load_json_file(testutil::fixture("rect_golden.json"));
    json rep = run_report({"duality", "--tree", testutil::fixture("gap_tree.json"),
                           "--family", testutil::fixture("rect_family.json"),
                           "--payoff", testutil::fixture("gap_payoff.json"), "--exact"},
                          tmp_path("rect_duality.json"));
    check_schema(rep, "duality");
    const json& res = rep.at("results");
    CHECK(res.at("exact").at("lower_pure") == golden.at("lower_pure"));
    CHECK(res.at("exact").at("upper") == golden.at("upper"));
    CHECK(res.at("exact").at("gap") == "0");
    CHECK(res.at("pasting_closed") == true);

    json solo = run_report({"duality", "--tree", testutil::fixture("gap_tree.json"),
                            "--family", testutil::fixture("singleton_family.json"),
                            "--payoff", testutil::fixture("gap_payoff.json"), "--exact"},
                           tmp_path("solo_duality.json"));
    check_schema(solo, "duality");
    CHECK(solo.at("results").at("lower_pure") == solo.at("results").at("upper"));
    bool noted = false;
    for (const json& n : solo.at("notes"))
        noted = noted || n.get<std::string>().find("singleton") != std::string::npos;
    CHECK(noted);
}

TEST_CASE("consistency command reports findings without failing") {
    json gap = run_report({"consistency", "--tree", testutil::fixture("gap_tree.json"),
                           "--family", testutil::fixture("gap_family.json")},
                          tmp_path("gap_consistency.json"));
    check_schema(gap, "consistency");
    CHECK(gap.at("results").at("pasting_stable") == false);
    CHECK(gap.at("results").at("recursive") == false);
    CHECK(check_passed(gap, "implications_consistent"));

    json rect = run_report({"consistency", "--tree", testutil::fixture("gap_tree.json"),
                            "--family", testutil::fixture("rect_family.json")},
                           tmp_path("rect_consistency.json"));
    check_schema(rect, "consistency");
    CHECK(rect.at("results").at("pasting_stable") == true);
    CHECK(rect.at("results").at("recursive") == true);
    CHECK(rect.at("results").at("time_consistent") == true);
    CHECK(rect.at("results").at("policies_exhaustive") == true);

    // Explicit policy lists restrict the tested universe and are reported as such.
    json taus = run_report({"consistency", "--tree", testutil::fixture("gap_tree.json"),
                            "--family", testutil::fixture("rect_family.json"),
                            "--taus", testutil::fixture("taus_const.json")},
                           tmp_path("taus_consistency.json"));
    check_schema(taus, "consistency");
    CHECK(taus.at("results").at("policies_exhaustive") == false);
    CHECK(taus.at("config").at("taus") == testutil::fixture("taus_const.json"));
}

TEST_CASE("entropy command computes covering numbers and the chaining integral") {
    std::string space = tmp_path("two_point_space.json");
    save_json_file(space, json{{"points", {"a", "b"}},
                               {"dist", {{0.0, 1.0}, {1.0, 0.0}}}});

    json rep = run_report({"entropy", "--space", space}, tmp_path("entropy.json"));
    check_schema(rep, "entropy");
    const json& res = rep.at("results");
    CHECK(res.at("n_points") == 2);
    CHECK(res.at("diameter") == 1.0);
    REQUIRE(res.at("covering").size() == 1); // default grid: the distinct distances
    CHECK(res.at("covering")[0].at("eps") == 1.0);
    CHECK(res.at("covering")[0].at("n") == 1);
    CHECK(res.at("dudley").at("integral").get<double>() ==
          doctest::Approx(std::sqrt(std::log(2.0))).epsilon(1e-12));
    CHECK(check_passed(rep, "covering_nonincreasing_in_eps"));

    json fine = run_report({"entropy", "--space", space, "--eps", "0.25,0.5,1",
                            "--rescale-c", "1"},
                           tmp_path("entropy_grid.json"));
    check_schema(fine, "entropy");
    REQUIRE(fine.at("results").at("covering").size() == 3);
    CHECK(fine.at("results").at("covering")[0].at("n") == 2);
    CHECK(fine.at("results").at("rescaled_dudley").at("factor").get<double>() ==
          doctest::Approx(6.0).epsilon(1e-12));
    CHECK(fine.at("results").at("rescaled_dudley").at("integral").get<double>() ==
          doctest::Approx(6.0 * std::sqrt(std::log(2.0))).epsilon(1e-12));
}

TEST_CASE("girsanov artifacts round-trip through certify and family references") {
    std::string fam = tmp_path("fam.json");
    std::string fields = tmp_path("fields.bin");
    std::string report = tmp_path("girsanov.json");
    int rc = run_cli({"girsanov", "--psis", testutil::fixture("psis_const.json"),
                      "--steps", "4", "--paths", "400", "--out", fam, fields,
                      "--report", report});
    REQUIRE(rc == 0);
    json rep = load_json_file(report);
    check_schema(rep, "girsanov");
    CHECK(rep.at("results").at("labels") == json::array({"const:0", "const:0.5"}));
    CHECK(rep.at("results").at("single_member_warning") == false);
    CHECK(rep.at("config").at("seed") == 20260814);
    for (const json& c : rep.at("checks")) CHECK(c.at("pass") == true);

    // The bundle file carries tree/family/space sections; the fields file has a
    // sidecar. Both load back through the public loaders.
    json bundle = load_json_file(fam);
    CHECK(bundle.contains("tree"));
    CHECK(bundle.contains("family"));
    CHECK(bundle.contains("space"));
    CHECK(bundle.at("girsanov").at("seed") == 20260814);
    FieldSamples f = load_fields(fields);
    CHECK(f.n_points() == 2);
    CHECK(f.n_samples() == 400);

    // certify consumes the emitted space + field samples directly.
    json cert = run_report({"certify", "--field", fields, "--space", fam},
                           tmp_path("certify.json"));
    check_schema(cert, "certify");
    CHECK(cert.at("results").at("tested_cells").get<int>() > 0);
    CHECK(check_passed(cert, "certified_at_C=2"));

    // A family file can reference the generated bundle by path.
    std::string ref = tmp_path("ref_family.json");
    save_json_file(ref, json{{"family", {{"girsanov_ref", "fam.json"}}}});
    json cons = run_report({"consistency", "--tree", fam, "--family", ref,
                            "--random-x", "5", "--mixtures", "2"},
                           tmp_path("ref_consistency.json"));
    check_schema(cons, "consistency");
    CHECK(cons.at("results").at("policies_exhaustive") == false);
}

TEST_CASE("certify command refutes an oversized increment with exit code 1") {
    const int m = 150;
    std::vector<double> zeros(m, 0.0), fives(m, 5.0);
    FieldSamples f = make_field_samples({"a", "b"}, {zeros, fives}, 3);
    std::string bin = tmp_path("bad_field.bin");
    save_fields(bin, f, "test");
    std::string space = tmp_path("bad_space.json");
    save_json_file(space, json{{"points", {"a", "b"}},
                               {"dist", {{0.0, 1.0}, {1.0, 0.0}}}});

    std::string out = tmp_path("certify_fail.json");
    int rc = run_cli({"certify", "--field", bin, "--space", space, "--out", out});
    CHECK(rc == 1); // an honest refutation is a failed check
    json rep = load_json_file(out);
    check_schema(rep, "certify");
    CHECK_FALSE(check_passed(rep, "certified_at_C=2"));
    CHECK(rep.at("results").at("c_refute").get<double>() > 2.0);
}

TEST_CASE("pipeline bundles every stage and is bit-reproducible across thread counts") {
    ::unsetenv("LSNELL_SEED");
    std::string out1 = tmp_path("pipe1.json");
    std::string out2 = tmp_path("pipe2.json");
    std::string out4 = tmp_path("pipe4.json");

    int rc = run_cli({"pipeline", "--steps", "4", "--paths", "300", "--out", out1});
    REQUIRE(rc == 0);
    json rep = load_json_file(out1);
    check_schema(rep, "pipeline");
    CHECK(rep.at("results").at("incomplete") == false);
    REQUIRE(rep.at("checks").size() == 15);
    for (const json& c : rep.at("checks")) CHECK(c.at("pass") == true);
    for (const char* stage : {"girsanov", "entropy", "certify", "duality", "consistency"})
        CHECK(rep.at("results").contains(stage));
    CHECK(rep.at("config").at("seed") == 20260814);

    CHECK(run_cli({"pipeline", "--steps", "4", "--paths", "300", "--out", out2}) == 0);
    CHECK(slurp(out1) == slurp(out2)); // identical configs: identical bytes

    CHECK(run_cli({"pipeline", "--steps", "4", "--paths", "300", "--threads", "4",
                   "--out", out4}) == 0);
    CHECK(slurp(out1) == slurp(out4)); // worker count never changes the report
}

TEST_CASE("the seed environment variable feeds every seeded subcommand") {
    std::string space = tmp_path("env_space.json");
    save_json_file(space, json{{"points", {"a", "b"}}, {"dist", {{0.0, 1.0}, {1.0, 0.0}}}});

    ::setenv("LSNELL_SEED", "123", 1);
    json rep = run_report({"consistency", "--tree", testutil::fixture("gap_tree.json"),
                           "--family", testutil::fixture("rect_family.json")},
                          tmp_path("seeded.json"));
    CHECK(rep.at("config").at("seed") == 123);

    ::setenv("LSNELL_SEED", "not-a-number", 1);
    CHECK(run_cli({"entropy", "--space", space}) == 2);
    ::setenv("LSNELL_SEED", "12x", 1);
    CHECK(run_cli({"entropy", "--space", space}) == 2);
    ::unsetenv("LSNELL_SEED");

    json rep2 = run_report({"consistency", "--tree", testutil::fixture("gap_tree.json"),
                            "--family", testutil::fixture("rect_family.json")},
                           tmp_path("default_seed.json"));
    CHECK(rep2.at("config").at("seed") == 20260814);
}

TEST_CASE("usage and input errors exit with code 2") {
    const std::string tree = testutil::fixture("gap_tree.json");
    const std::string family = testutil::fixture("gap_family.json");
    const std::string payoff = testutil::fixture("gap_payoff.json");

    // malformed family: the density rows do not integrate to one
    CHECK(run_cli({"duality", "--tree", tree, "--family",
                   testutil::fixture("malformed_family.json"), "--payoff", payoff}) == 2);
    // unknown key inside a known section
    std::string oddball = tmp_path("oddball_family.json");
    save_json_file(oddball, json{{"family", {{"densities", {{1.0, 1.0, 1.0, 1.0}}},
                                             {"wrong_key", 1}}}});
    CHECK(run_cli({"duality", "--tree", tree, "--family", oddball, "--payoff", payoff}) == 2);
    // missing file
    CHECK(run_cli({"duality", "--tree", "no/such/tree.json", "--family", family,
                   "--payoff", payoff}) == 2);
    // unknown option and missing subcommand
    CHECK(run_cli({"duality", "--tree", tree, "--family", family, "--payoff", payoff,
                   "--bogus"}) == 2);
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"no-such-command"}) == 2);
    // --emit-csv without a destination
    CHECK(run_cli({"duality", "--tree", tree, "--family", family, "--payoff", payoff,
                   "--emit-csv"}) == 2);
    // bad grids
    CHECK(run_cli({"duality", "--tree", tree, "--family", family, "--payoff", payoff,
                   "--lambda-grid", "zebra"}) == 2);
    // …while --help is not an error
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"duality", "--help"}) == 0);
}

TEST_CASE("csv sidecars mirror the main table when requested") {
    std::string out = tmp_path("csv_duality.json");
    int rc = run_cli({"duality", "--tree", testutil::fixture("gap_tree.json"),
                      "--family", testutil::fixture("gap_family.json"),
                      "--payoff", testutil::fixture("gap_payoff.json"),
                      "--exact", "--out", out, "--emit-csv"});
    CHECK(rc == 0);
    std::string csv = slurp(out + ".csv");
    CHECK(!csv.empty());
    CHECK(csv.find(',') != std::string::npos);
    CHECK(csv.find('\n') != std::string::npos);
}

} // TEST_SUITE
