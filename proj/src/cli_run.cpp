#include "lsnell/cli_run.hpp"

#include "lsnell/report.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>

namespace lsnell {

namespace {

std::uint64_t env_default_seed() {
    if (const char* env = std::getenv("LSNELL_SEED")) {
        try {
            std::size_t used = 0;
            std::string s(env);
            auto v = std::stoull(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw InputError("LSNELL_SEED must be an unsigned integer");
        }
    }
    return 20260814ULL;
}

// "a:b:step" inclusive range, or a comma list, or "none" for the empty grid.
std::vector<double> parse_grid(const std::string& s) {
    if (s.empty() || s == "none") return {};
    std::vector<double> out;
    try {
        if (s.find(':') != std::string::npos) {
            std::istringstream in(s);
            std::string a, b, st;
            if (!std::getline(in, a, ':') || !std::getline(in, b, ':') || !std::getline(in, st))
                throw std::invalid_argument(s);
            double lo = std::stod(a), hi = std::stod(b), step = std::stod(st);
            if (step <= 0 || hi < lo) throw std::invalid_argument(s);
            for (int i = 0;; ++i) {
                double x = lo + i * step;
                if (x > hi + step * 0.5) break;
                out.push_back(x);
            }
        } else {
            std::istringstream in(s);
            std::string tok;
            while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
        }
    } catch (const std::exception&) {
        throw InputError("bad grid '" + s + "': expected a:b:step, a comma list, or 'none'");
    }
    return out;
}

VolConfig parse_vol(const std::string& s) {
    VolConfig v;
    auto colon = s.find(':');
    std::string kind = s.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
    try {
        if (kind == "constant") {
            v.kind = "constant";
            v.value = rest.empty() ? 1.0 : std::stod(rest);
        } else if (kind == "ar1") {
            v.kind = "ar1";
            std::istringstream in(rest);
            std::string a, b, c;
            if (!std::getline(in, a, ',') || !std::getline(in, b, ',') || !std::getline(in, c))
                throw std::invalid_argument(s);
            v.x0 = std::stod(a);
            v.phi = std::stod(b);
            v.sigma = std::stod(c);
        } else {
            throw std::invalid_argument(s);
        }
    } catch (const std::exception&) {
        throw InputError("bad --vol '" + s + "': expected constant:v or ar1:x0,phi,sigma");
    }
    return v;
}

struct OutputOpts {
    std::string out;    // empty = stdout
    bool emit_csv = false;
};

void add_output_opts(CLI::App* sub, OutputOpts& o) {
    sub->add_option("--out", o.out, "write the JSON report here (default: stdout)");
    sub->add_flag("--emit-csv", o.emit_csv,
                  "also write <out>.csv with the report's main table (requires --out)");
}

// Writes the report (and optional CSV), returns the exit code.
int finish(const std::string& command, json config, json results, json checks,
           std::vector<std::string> notes, const OutputOpts& o, const std::string& csv) {
    if (o.emit_csv && o.out.empty()) throw InputError("--emit-csv requires --out");
    json rep = report_envelope(command, std::move(config), std::move(results),
                               std::move(checks), std::move(notes));
    bool pass = all_checks_pass(rep.at("checks"));
    if (o.out.empty())
        std::cout << rep.dump(2) << "\n";
    else
        save_json_file(o.out, rep);
    if (o.emit_csv) {
        std::ofstream c(o.out + ".csv");
        if (!c) throw InputError("cannot write '" + o.out + ".csv'");
        c << csv;
    }
    return pass ? 0 : 1;
}

json grid_json(const std::vector<double>& g) { return json(g); }

// --- duality --------------------------------------------------------------------

struct DualityArgs {
    std::string tree, family, payoff;
    bool exact = false;
    std::string lambda_grid = "none";
    std::uint64_t policy_cap = 20000;
    bool no_heuristic = false;
    double lp_tol = 1e-7, kelley_tol = 1e-9;
    int max_cuts = 10000, atom_cap = 16, threads = 1;
    std::uint64_t pair_cap = 10000;
    OutputOpts out;
};

int cmd_duality(const DualityArgs& a) {
    ScenarioTree tree = load_tree(a.tree);
    AdaptedProcess y = load_payoff(tree, a.payoff);
    MeasureFamily fam = load_family(tree, a.family);

    DualityOptions opt;
    opt.exact = a.exact;
    opt.policy_cap = a.policy_cap;
    opt.allow_heuristic = !a.no_heuristic;
    opt.lp_tol = a.lp_tol;
    opt.kelley_tol = a.kelley_tol;
    opt.max_cuts = a.max_cuts;
    opt.lambda_grid = parse_grid(a.lambda_grid);
    opt.condition_a_atom_cap = a.atom_cap;
    opt.condition_a_pair_cap = a.pair_cap;
    opt.threads = a.threads;

    DualityReport rep = compute_duality(tree, y, fam, opt);

    json config;
    config["tree"] = a.tree;
    config["family"] = a.family;
    config["payoff"] = a.payoff;
    config["exact"] = a.exact;
    config["lambda_grid"] = grid_json(opt.lambda_grid);
    config["policy_cap"] = a.policy_cap;
    config["allow_heuristic"] = opt.allow_heuristic;
    config["lp_tol"] = a.lp_tol;
    config["kelley_tol"] = a.kelley_tol;
    config["max_cuts"] = a.max_cuts;
    config["condition_a_atom_cap"] = a.atom_cap;
    config["condition_a_pair_cap"] = a.pair_cap;

    json checks = json::array();
    checks.push_back(check_entry("value_ordering", rep.ordering_ok,
                                 "lower_pure <= lower_randomized <= upper"));
    checks.push_back(check_entry("randomized_strong_duality", rep.strong_duality_ok,
                                 "|lower_randomized - upper| within lp_tol"));
    checks.push_back(check_entry("solver_converged", rep.solver_converged, ""));

    std::vector<std::string> notes;
    notes.push_back("finite scenario trees are atomic; the atomless hypothesis is recorded as "
                    "false and duality may fail over pure policies");
    if (rep.gap > opt.lp_tol)
        notes.push_back("positive pure-policy duality gap " + std::to_string(rep.gap) +
                        " (a finding, not a failure)");
    if (fam.size() == 1)
        notes.push_back("singleton family: all values collapse to the Snell envelope root");
    if (rep.heuristic_lower)
        notes.push_back("policy space above cap: lower_pure searched a candidate set only");
    if (rep.any_null_node)
        notes.push_back("a member vanished on some node; the zero-value convention was used");
    if (!rep.members_equivalent)
        notes.push_back("family contains non-equivalent members");

    std::vector<double> ys = y_star(tree, y);
    double ys_max = ys.empty() ? 0.0 : *std::max_element(ys.begin(), ys.end());
    json results = duality_to_json(rep);
    results["y_star_max"] = ys_max;
    notes.push_back("pathwise payoff supremum bounded by " + std::to_string(ys_max) +
                    "; integrability hypotheses hold automatically on a finite tree");

    return finish("duality", std::move(config), std::move(results), std::move(checks),
                  std::move(notes), a.out, duality_csv(rep));
}

// --- consistency -----------------------------------------------------------------

struct ConsistencyArgs {
    std::string tree, family;
    std::string taus = "all";
    double tol = 1e-9;
    std::uint64_t policy_cap = 2000;
    int mixtures = 4, random_x = 20;
    std::uint64_t seed = 0;
    OutputOpts out;
};

int cmd_consistency(const ConsistencyArgs& a) {
    ScenarioTree tree = load_tree(a.tree);
    MeasureFamily fam = load_family(tree, a.family);

    ConsistencyOptions opt;
    opt.tol = a.tol;
    opt.policy_cap = a.policy_cap;
    opt.interior_mixtures = a.mixtures;
    opt.random_x_samples = a.random_x;
    opt.seed = a.seed;
    if (a.taus != "all") {
        auto taus = taus_from_json(tree, load_json_file(a.taus));
        std::vector<std::vector<int>> levels;
        for (const auto& t : taus) levels.push_back(t.stop_level);
        opt.explicit_taus = std::move(levels);
    }

    ConsistencyReport rep = consistency_report(fam, opt);

    json config;
    config["tree"] = a.tree;
    config["family"] = a.family;
    config["taus"] = a.taus;
    config["tol"] = a.tol;
    config["policy_cap"] = a.policy_cap;
    config["interior_mixtures"] = a.mixtures;
    config["random_x_samples"] = a.random_x;
    config["seed"] = a.seed;

    json checks = json::array();
    checks.push_back(check_entry(
        "implications_consistent", rep.implications_consistent,
        "families stable under pasting are never refuted on the downstream properties"));

    std::vector<std::string> notes;
    if (!rep.pasting_stable)
        notes.push_back("family is not stable under pasting (finding, with replayable witness)");
    if (!rep.policies_exhaustive)
        notes.push_back("policy universe restricted: " + rep.tested_universe);

    return finish("consistency", std::move(config), consistency_to_json(rep), std::move(checks),
                  std::move(notes), a.out, consistency_csv(rep));
}

// --- entropy ----------------------------------------------------------------------

struct EntropyArgs {
    std::string space;
    std::string eps;          // comma list; empty = distinct positive distances
    double dudley = -1.0;     // < 0 = at the diameter
    bool do_dudley = false;
    double rescale_c = 0.0;   // 0 = skip
    OutputOpts out;
};

int cmd_entropy(const EntropyArgs& a) {
    SemimetricSample space = load_space(a.space);

    std::vector<double> eps_grid = parse_grid(a.eps);
    if (eps_grid.empty()) {
        std::set<double> ds;
        for (int i = 0; i < space.size(); ++i)
            for (int j = i + 1; j < space.size(); ++j)
                if (space.d(i, j) > 0) ds.insert(space.d(i, j));
        eps_grid.assign(ds.begin(), ds.end());
    }

    json results;
    json covering = json::array();
    bool any_greedy = false;
    std::vector<int> ns;
    for (double eps : eps_grid) {
        auto cov = covering_number(space, eps);
        any_greedy = any_greedy || !cov.exact;
        ns.push_back(cov.n);
        covering.push_back(covering_to_json(cov, eps));
    }
    results["covering"] = std::move(covering);
    results["diameter"] = space.diameter;
    results["n_points"] = space.size();

    double delta = a.dudley < 0 ? space.diameter : a.dudley;
    if (a.do_dudley || a.eps.empty()) {
        json d;
        d["delta"] = delta;
        d["integral"] = dudley_integral(space, delta);
        results["dudley"] = std::move(d);
    }
    if (a.rescale_c > 0) {
        SemimetricSample scaled = rescale_semimetric(space, a.rescale_c);
        json d;
        d["c_const"] = a.rescale_c;
        d["factor"] = space.diameter > 0 ? scaled.diameter / space.diameter : 0.0;
        d["delta"] = scaled.diameter;
        d["integral"] = dudley_integral(scaled, scaled.diameter);
        results["rescaled_dudley"] = std::move(d);
    }

    json config;
    config["space"] = a.space;
    config["eps"] = eps_grid;
    config["dudley_delta"] = delta;
    config["rescale_c"] = a.rescale_c;

    json checks = json::array();
    bool monotone = true;
    for (std::size_t i = 1; i < ns.size(); ++i)
        if (ns[i] > ns[i - 1]) monotone = false;
    checks.push_back(check_entry("covering_nonincreasing_in_eps", monotone, ""));
    if (results.contains("dudley"))
        checks.push_back(check_entry("dudley_nonnegative",
                                     results["dudley"]["integral"].get<double>() >= 0.0, ""));

    std::vector<std::string> notes;
    if (any_greedy)
        notes.push_back("more than 12 points: covering numbers are greedy upper bounds "
                        "(flagged per entry)");

    std::string csv = entropy_csv(results);
    return finish("entropy", std::move(config), std::move(results), std::move(checks),
                  std::move(notes), a.out, csv);
}

// --- certify -----------------------------------------------------------------------

struct CertifyArgs {
    std::string field, space;
    std::string c_list = "1,2";
    double confidence = 0.99;
    std::string lambdas = "0.25,0.5,1,2,4";
    int bootstrap = 1000;
    std::uint64_t seed = 0;
    int threads = 1;
    OutputOpts out;
};

int cmd_certify(const CertifyArgs& a) {
    FieldSamples fields = load_fields(a.field);
    SemimetricSample space = load_space(a.space);
    if (fields.points != space.points)
        throw InputError("field and space disagree on the point set");

    CertifyOptions opt;
    opt.lambda_grid = parse_grid(a.lambdas);
    opt.confidence = a.confidence;
    opt.c_grid = parse_grid(a.c_list);
    opt.bootstrap_resamples = a.bootstrap;
    opt.seed = a.seed;
    opt.threads = a.threads;
    if (opt.c_grid.empty() || opt.lambda_grid.empty())
        throw InputError("--C and lambda grids must be nonempty");

    CertifyResult res = certify_nearly_subgaussian(fields, space, opt);

    json config;
    config["field"] = a.field;
    config["space"] = a.space;
    config["C"] = opt.c_grid;
    config["confidence"] = a.confidence;
    config["lambda_grid"] = opt.lambda_grid;
    config["bootstrap_resamples"] = a.bootstrap;
    config["seed"] = a.seed;

    double c_max = *std::max_element(opt.c_grid.begin(), opt.c_grid.end());
    json checks = json::array();
    {
        std::ostringstream name;
        name << "certified_at_C=" << c_max;
        checks.push_back(check_entry(name.str(), res.pass_at.at(c_max),
                                     "refutation bound c_refute <= C"));
    }

    std::vector<std::string> notes;
    if (res.untestable_cells > 0)
        notes.push_back(std::to_string(res.untestable_cells) +
                        " cells were untestable (exponential overflow), never auto-passed");
    for (const auto& [c, ok] : res.pass_at)
        if (c != c_max && !ok)
            notes.push_back("not certified at C=" + std::to_string(c) + " (informational)");

    return finish("certify", std::move(config), certify_to_json(res), std::move(checks),
                  std::move(notes), a.out, certify_csv(res));
}

// --- girsanov ---------------------------------------------------------------------

struct GirsanovArgs {
    std::string psis;
    int steps = 6, paths = 2000, bins = 2, threads = 1;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    std::string vol = "constant:1";
    std::vector<std::string> out; // family.json fields.bin
    OutputOpts report;
};

double mean_stderr(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size() - 1);
    return std::sqrt(v / static_cast<double>(xs.size()));
}

json girsanov_results_json(const GirsanovBundle& bundle, const DriverPaths& d,
                           json& checks, std::vector<std::string>& notes) {
    json results;
    results["labels"] = bundle.family.labels;
    results["raw_terminal_means"] = bundle.raw_means;
    results["renorm_factors"] = bundle.renorm_factors;
    results["n_paths"] = d.n_paths();
    results["steps"] = d.steps();
    results["semimetric_diameter"] = bundle.semimetric.diameter;
    results["tree_levels"] = static_cast<int>(bundle.tree->times.size());
    results["single_member_warning"] = bundle.single_member_warning;

    json drift = json::array();
    for (int i = 0; i < bundle.family.size(); ++i) {
        const std::string& label = bundle.family.labels[i];
        // raw (pre-renormalization) terminal densities for the 3-sigma mean check
        std::vector<double> raw = bundle.family.members[i].density;
        for (double& x : raw) x *= bundle.raw_means[i];
        double se = mean_stderr(raw);
        bool mean_ok = std::abs(bundle.raw_means[i] - 1.0) <= 3.0 * se + 1e-12;
        checks.push_back(check_entry("raw_terminal_mean_3sigma[" + label + "]", mean_ok,
                                     "mean " + std::to_string(bundle.raw_means[i]) +
                                         ", stderr " + std::to_string(se)));
        if (label.rfind("const:", 0) == 0) {
            double c = std::stod(label.substr(6));
            DriftCheck dc = drift_check(d, bundle.family.members[i].density, c);
            json e;
            e["label"] = label;
            e["estimate"] = dc.estimate;
            e["target"] = dc.target;
            e["stderr"] = dc.stderr_;
            e["z_score"] = dc.z_score;
            drift.push_back(std::move(e));
            checks.push_back(check_entry("drift_shift_3sigma[" + label + "]",
                                         std::abs(dc.z_score) <= 3.0,
                                         "tilted mean of the terminal noise vs c*T"));
        }
    }
    results["drift_checks"] = std::move(drift);
    if (bundle.single_member_warning)
        notes.push_back("single integrand: downstream duality collapses to one Snell envelope");
    return results;
}

int cmd_girsanov(const GirsanovArgs& a) {
    json psis_doc = load_json_file(a.psis);
    auto psis = psis_from_json(psis_doc, dirname_of(a.psis));
    auto x_grid = x_grid_from_json(psis_doc);
    VolConfig vol = parse_vol(a.vol);

    DriverPaths d = make_driver(a.steps, a.paths, a.horizon, a.seed, vol, a.threads);
    GirsanovBundle bundle = family_from_psis(psis, d, a.bins, x_grid);

    // artifacts: a bundle file (family + its tree + the evaluation-point
    // semimetric, each under its own section) and the raw field samples
    json fam;
    fam["tree"] = tree_to_json(*bundle.tree);
    json family_doc;
    json dens = json::array();
    for (const auto& m : bundle.family.members) dens.push_back(m.density);
    family_doc["densities"] = std::move(dens);
    family_doc["labels"] = bundle.family.labels;
    fam["family"] = std::move(family_doc);
    fam["space"] = space_to_json(bundle.semimetric);
    json meta;
    meta["raw_terminal_means"] = bundle.raw_means;
    meta["renorm_factors"] = bundle.renorm_factors;
    meta["seed"] = a.seed;
    meta["x_grid"] = x_grid;
    meta["horizon"] = a.horizon;
    meta["bins"] = a.bins;
    meta["vol"] = a.vol;
    fam["girsanov"] = std::move(meta);
    save_json_file(a.out[0], fam);
    save_fields(a.out[1], bundle.fields, "girsanov");

    json config;
    config["psis"] = a.psis;
    config["steps"] = a.steps;
    config["paths"] = a.paths;
    config["seed"] = a.seed;
    config["bins"] = a.bins;
    config["horizon"] = a.horizon;
    config["vol"] = a.vol;
    config["out"] = a.out;

    json checks = json::array();
    std::vector<std::string> notes;
    json results = girsanov_results_json(bundle, d, checks, notes);
    results["family_file"] = a.out[0];
    results["fields_file"] = a.out[1];

    std::string csv = girsanov_csv(results);
    return finish("girsanov", std::move(config), std::move(results), std::move(checks),
                  std::move(notes), a.report, csv);
}

// --- pipeline ----------------------------------------------------------------------

struct PipelineArgs {
    std::string psis;          // empty = built-in {const:0, const:0.5}
    int steps = 6, paths = 2000, bins = 2, threads = 1;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    double c_const = 2.0;
    double confidence = 0.99;
    std::string lambda_grid = "none";
    std::string tree, family, payoff; // optional overrides for duality/consistency
    std::uint64_t policy_cap = 20000;
    OutputOpts out;
};

// Adapted payoff on the quantized driver tree: nodewise reference-conditional
// mean of the accumulated driver noise.
AdaptedProcess driver_payoff(const ScenarioTree& tree, const DriverPaths& d) {
    const int N = tree.n_paths();
    const int K = tree.depth();
    std::vector<double> ones(N, 1.0);
    Levels<double> y(K + 1);
    std::vector<double> z(N, 0.0);
    y[0] = conditional_expectation<double>(tree, ones, z, 0).node_values;
    for (int k = 1; k <= K; ++k) {
        for (int w = 0; w < N; ++w) z[w] += d.dz[w][k - 1];
        y[k] = conditional_expectation<double>(tree, ones, z, k).node_values;
    }
    return make_process(tree, std::move(y));
}

int cmd_pipeline(const PipelineArgs& a) {
    json config;
    config["psis"] = a.psis.empty() ? "builtin:const:0,const:0.5" : a.psis;
    config["steps"] = a.steps;
    config["paths"] = a.paths;
    config["seed"] = a.seed;
    config["bins"] = a.bins;
    config["horizon"] = a.horizon;
    config["C"] = a.c_const;
    config["confidence"] = a.confidence;
    config["lambda_grid"] = grid_json(parse_grid(a.lambda_grid));
    config["tree"] = a.tree;
    config["family"] = a.family;
    config["payoff"] = a.payoff;
    config["policy_cap"] = a.policy_cap;

    json results;
    json checks = json::array();
    std::vector<std::string> notes;
    bool incomplete = false;
    int stage_rc = 0;

    auto stage = [&](const std::string& name, auto&& body) {
        if (incomplete) return;
        try {
            body();
            checks.push_back(check_entry("stage_" + name + "_completed", true, ""));
        } catch (const InputError& e) {
            checks.push_back(check_entry("stage_" + name + "_completed", false, e.what()));
            notes.push_back("stage " + name + " failed: " + e.what());
            incomplete = true;
            stage_rc = 2;
        } catch (const std::exception& e) {
            checks.push_back(check_entry("stage_" + name + "_completed", false, e.what()));
            notes.push_back("stage " + name + " failed: " + e.what());
            incomplete = true;
            stage_rc = 1;
        }
    };

    std::optional<DriverPaths> driver;
    std::optional<GirsanovBundle> bundle;
    stage("girsanov", [&] {
        std::vector<PsiFunction> psis;
        std::vector<double> x_grid;
        if (a.psis.empty()) {
            psis = {parse_psi("const:0"), parse_psi("const:0.5")};
            x_grid = x_grid_from_json(json::object());
        } else {
            json doc = load_json_file(a.psis);
            psis = psis_from_json(doc, dirname_of(a.psis));
            x_grid = x_grid_from_json(doc);
        }
        driver = make_driver(a.steps, a.paths, a.horizon, a.seed, VolConfig{}, a.threads);
        bundle = family_from_psis(psis, *driver, a.bins, x_grid);
        results["girsanov"] = girsanov_results_json(*bundle, *driver, checks, notes);
    });

    stage("entropy", [&] {
        const SemimetricSample& s = bundle->semimetric;
        json e;
        e["diameter"] = s.diameter;
        json covering = json::array();
        std::set<double> ds;
        for (int i = 0; i < s.size(); ++i)
            for (int j = i + 1; j < s.size(); ++j)
                if (s.d(i, j) > 0) ds.insert(s.d(i, j));
        for (double eps : ds) covering.push_back(covering_to_json(covering_number(s, eps), eps));
        e["covering"] = std::move(covering);
        e["dudley"] = json{{"delta", s.diameter}, {"integral", dudley_integral(s, s.diameter)}};
        if (s.diameter > 0) {
            SemimetricSample scaled = rescale_semimetric(s, a.c_const);
            e["rescaled_dudley"] = json{{"c_const", a.c_const},
                                        {"delta", scaled.diameter},
                                        {"integral", dudley_integral(scaled, scaled.diameter)}};
        } else {
            notes.push_back("degenerate semimetric (all integrands coincide); "
                            "entropy integrals are zero");
        }
        results["entropy"] = std::move(e);
    });

    stage("certify", [&] {
        CertifyOptions opt;
        opt.confidence = a.confidence;
        opt.c_grid = {1.0, a.c_const};
        std::sort(opt.c_grid.begin(), opt.c_grid.end());
        opt.c_grid.erase(std::unique(opt.c_grid.begin(), opt.c_grid.end()), opt.c_grid.end());
        opt.seed = a.seed;
        opt.threads = a.threads;
        CertifyResult res = certify_nearly_subgaussian(bundle->fields, bundle->semimetric, opt);
        results["certify"] = certify_to_json(res);
        std::ostringstream name;
        name << "certified_at_C=" << a.c_const;
        checks.push_back(check_entry(name.str(), res.pass_at.at(a.c_const),
                                     "refutation bound c_refute <= C"));
    });

    // Optional overrides: a rectangular or explicit family (with its own tree)
    // replaces the generated family for the duality and consistency stages.
    std::optional<ScenarioTree> override_tree;
    std::optional<MeasureFamily> override_family;
    std::optional<AdaptedProcess> override_payoff;
    stage("resolve_inputs", [&] {
        if (a.family.empty()) {
            if (!a.tree.empty() || !a.payoff.empty())
                throw InputError("--tree/--payoff overrides require --family");
            return;
        }
        json famdoc = load_json_file(a.family);
        override_tree = a.tree.empty() ? tree_from_json(famdoc) : load_tree(a.tree);
        override_family = family_from_json(*override_tree, famdoc, dirname_of(a.family));
        if (!a.payoff.empty())
            override_payoff = load_payoff(*override_tree, a.payoff);
        else if (famdoc.is_object() && famdoc.contains("payoff"))
            override_payoff = payoff_from_json(*override_tree, famdoc);
        else
            throw InputError("pipeline override needs a payoff: pass --payoff or embed "
                             "\"payoff\" in the family file");
    });

    const ScenarioTree* tree = nullptr;
    const MeasureFamily* fam = nullptr;
    std::optional<AdaptedProcess> payoff;
    stage("duality", [&] {
        if (override_family) {
            tree = &*override_tree;
            fam = &*override_family;
            payoff = std::move(override_payoff);
        } else {
            tree = bundle->tree.get();
            fam = &bundle->family;
            payoff = driver_payoff(*tree, *driver);
        }
        DualityOptions opt;
        opt.policy_cap = a.policy_cap;
        opt.lambda_grid = parse_grid(a.lambda_grid);
        opt.threads = a.threads;
        DualityReport rep = compute_duality(*tree, *payoff, *fam, opt);
        results["duality"] = duality_to_json(rep);
        checks.push_back(check_entry("duality_value_ordering", rep.ordering_ok, ""));
        checks.push_back(
            check_entry("duality_randomized_strong_duality", rep.strong_duality_ok, ""));
        checks.push_back(check_entry("duality_solver_converged", rep.solver_converged, ""));
        if (fam->size() == 1)
            notes.push_back("singleton family: duality collapses to the Snell root");
    });

    stage("consistency", [&] {
        ConsistencyOptions opt;
        opt.seed = a.seed;
        ConsistencyReport rep = consistency_report(*fam, opt);
        results["consistency"] = consistency_to_json(rep);
        checks.push_back(
            check_entry("consistency_implications", rep.implications_consistent, ""));
    });

    results["incomplete"] = incomplete;
    if (incomplete) notes.push_back("partial bundle: one or more stages did not run");

    // the pipeline CSV is the certify cell table when that stage ran
    std::string csv;
    if (results.contains("certify")) {
        csv = "i,j,lambda,untestable,mean,lcb,ucb,denom,ratio_lcb,ratio_ucb\n";
        for (const json& c : results["certify"]["cells"]) {
            std::ostringstream os;
            os << std::setprecision(17);
            os << c["i"].get<int>() << "," << c["j"].get<int>() << ","
               << c["lambda"].get<double>() << "," << (c["untestable"].get<bool>() ? 1 : 0)
               << "," << c["mean"].get<double>() << "," << c["lcb"].get<double>() << ","
               << c["ucb"].get<double>() << "," << c["denom"].get<double>() << ","
               << c["ratio_lcb"].get<double>() << "," << c["ratio_ucb"].get<double>() << "\n";
            csv += os.str();
        }
    }

    int rc = finish("pipeline", std::move(config), std::move(results), std::move(checks),
                    std::move(notes), a.out, csv);
    return stage_rc != 0 ? stage_rc : rc;
}

} // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"lower Snell envelopes, randomized-stopping duality, consistency and "
                 "entropy diagnostics on finite scenario trees"};
    app.require_subcommand(1);

    int rc = 0;
    std::uint64_t seed0 = 0; // resolved inside try so LSNELL_SEED errors map to exit 2

    DualityArgs da;
    ConsistencyArgs ca;
    EntropyArgs ea;
    CertifyArgs fa;
    GirsanovArgs ga;
    PipelineArgs pa;

    auto* duality = app.add_subcommand("duality", "minimax stopping values on one instance");
    duality->add_option("--tree", da.tree, "scenario tree JSON")->required();
    duality->add_option("--family", da.family, "measure family JSON")->required();
    duality->add_option("--payoff", da.payoff, "adapted payoff JSON")->required();
    duality->add_flag("--exact", da.exact, "exact rational arithmetic");
    duality->add_option("--lambda-grid", da.lambda_grid,
                        "a:b:step, comma list, or 'none' (default) for the event-condition scan");
    duality->add_option("--policy-cap", da.policy_cap, "max policies to enumerate");
    duality->add_flag("--no-heuristic", da.no_heuristic,
                      "fail instead of falling back to candidate search above the cap");
    duality->add_option("--lp-tol", da.lp_tol, "strong-duality tolerance");
    duality->add_option("--kelley-tol", da.kelley_tol, "cut-loop convergence tolerance");
    duality->add_option("--max-cuts", da.max_cuts, "cut-loop iteration cap");
    duality->add_option("--atom-cap", da.atom_cap, "exact event-enumeration cap (atoms)");
    duality->add_option("--pair-cap", da.pair_cap, "policy-pair cap for the condition scan");
    duality->add_option("--threads", da.threads, "worker threads (results independent of N)");
    add_output_opts(duality, da.out);
    duality->callback([&] { rc = cmd_duality(da); });

    auto* consistency =
        app.add_subcommand("consistency", "pasting/recursiveness/time-consistency report");
    consistency->add_option("--tree", ca.tree, "scenario tree JSON")->required();
    consistency->add_option("--family", ca.family, "measure family JSON")->required();
    consistency->add_option("--taus", ca.taus, "'all' or a JSON file with explicit policies");
    consistency->add_option("--tol", ca.tol, "comparison tolerance");
    consistency->add_option("--policy-cap", ca.policy_cap, "policy enumeration cap");
    consistency->add_option("--mixtures", ca.mixtures, "interior hull mixtures to test");
    consistency->add_option("--random-x", ca.random_x, "seeded random test vectors");
    consistency->add_option("--seed", ca.seed, "seed for the test universe");
    add_output_opts(consistency, ca.out);
    consistency->callback([&] { rc = cmd_consistency(ca); });

    auto* entropy = app.add_subcommand("entropy", "covering numbers and the chaining integral");
    entropy->add_option("--space", ea.space, "semimetric space JSON")->required();
    entropy->add_option("--eps", ea.eps, "comma list of radii (default: distinct distances)");
    entropy->add_option("--dudley", ea.dudley, "upper limit; negative = the diameter")
        ->expected(1);
    entropy->add_flag("--do-dudley", ea.do_dudley, "force the chaining integral");
    entropy->add_option("--rescale-c", ea.rescale_c,
                        "also report the integral after the sqrt(12(2C+1)) rescale");
    add_output_opts(entropy, ea.out);
    entropy->callback([&] {
        ea.do_dudley = ea.do_dudley || entropy->count("--dudley") > 0;
        rc = cmd_entropy(ea);
    });

    auto* certify = app.add_subcommand("certify", "empirical sub-Gaussian increment bounds");
    certify->add_option("--field", fa.field, "field samples .bin (with .json sidecar)")
        ->required();
    certify->add_option("--space", fa.space, "semimetric space JSON")->required();
    certify->add_option("--C", fa.c_list, "comma list of constants; the largest is the check");
    certify->add_option("--confidence", fa.confidence, "bootstrap confidence level");
    certify->add_option("--lambdas", fa.lambdas, "lambda grid (comma list)");
    certify->add_option("--bootstrap", fa.bootstrap, "bootstrap resamples per cell");
    certify->add_option("--seed", fa.seed, "bootstrap seed");
    certify->add_option("--threads", fa.threads, "worker threads (results independent of N)");
    add_output_opts(certify, fa.out);
    certify->callback([&] { rc = cmd_certify(fa); });

    auto* girsanov =
        app.add_subcommand("girsanov", "simulate exponential-density families at a finite scale");
    girsanov->add_option("--psis", ga.psis, "integrand declarations JSON")->required();
    girsanov->add_option("--steps", ga.steps, "time steps");
    girsanov->add_option("--paths", ga.paths, "Monte Carlo paths");
    girsanov->add_option("--seed", ga.seed, "master seed");
    girsanov->add_option("--bins", ga.bins, "quantile bins per step for the emitted tree");
    girsanov->add_option("--horizon", ga.horizon, "terminal time");
    girsanov->add_option("--vol", ga.vol, "constant:v or ar1:x0,phi,sigma");
    girsanov->add_option("--threads", ga.threads, "worker threads (results independent of N)");
    girsanov->add_option("--out", ga.out, "family.json fields.bin")->expected(2)->required();
    girsanov->add_option("--report", ga.report.out, "write the JSON report here");
    girsanov->add_flag("--emit-csv", ga.report.emit_csv, "also write <report>.csv");
    girsanov->callback([&] { rc = cmd_girsanov(ga); });

    auto* pipeline = app.add_subcommand(
        "pipeline", "girsanov -> entropy -> certify -> duality -> consistency bundle");
    pipeline->add_option("--psis", pa.psis, "integrand declarations JSON (default: builtin)");
    pipeline->add_option("--steps", pa.steps, "time steps");
    pipeline->add_option("--paths", pa.paths, "Monte Carlo paths");
    pipeline->add_option("--seed", pa.seed, "master seed");
    pipeline->add_option("--bins", pa.bins, "quantile bins per step");
    pipeline->add_option("--horizon", pa.horizon, "terminal time");
    pipeline->add_option("--C", pa.c_const, "certification constant");
    pipeline->add_option("--confidence", pa.confidence, "bootstrap confidence level");
    pipeline->add_option("--lambda-grid", pa.lambda_grid, "event-condition scan grid");
    pipeline->add_option("--tree", pa.tree, "override tree for duality/consistency");
    pipeline->add_option("--family", pa.family, "override family for duality/consistency");
    pipeline->add_option("--payoff", pa.payoff, "override payoff for the duality stage");
    pipeline->add_option("--policy-cap", pa.policy_cap, "max policies to enumerate");
    pipeline->add_option("--threads", pa.threads, "worker threads (results independent of N)");
    add_output_opts(pipeline, pa.out);
    pipeline->callback([&] { rc = cmd_pipeline(pa); });

    try {
        seed0 = env_default_seed();
        ca.seed = fa.seed = ga.seed = pa.seed = seed0;
        std::reverse(args.begin(), args.end()); // CLI11's vector overload wants reversed args
        app.parse(std::move(args));
        return rc;
    } catch (const CLI::ParseError& e) {
        int r = app.exit(e);
        return r == 0 ? 0 : 2;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(std::move(args));
}

} // namespace lsnell
