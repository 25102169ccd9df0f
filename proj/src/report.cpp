#include "lsnell/report.hpp"

#include <iomanip>
#include <sstream>

namespace lsnell {

json check_entry(const std::string& name, bool pass, const std::string& detail) {
    json c;
    c["name"] = name;
    c["pass"] = pass;
    c["detail"] = detail;
    return c;
}

json report_envelope(const std::string& command, json config, json results,
                     json checks, std::vector<std::string> notes,
                     std::optional<double> wall_seconds) {
    json r;
    r["schema_version"] = kSchemaVersion;
    r["tool"] = kToolName;
    r["tool_version"] = kToolVersion;
    r["command"] = command;
    r["config"] = std::move(config);
    r["results"] = std::move(results);
    r["checks"] = checks.is_null() ? json::array() : std::move(checks);
    r["notes"] = notes;
    if (wall_seconds)
        r["timings"] = json{{"wall_seconds", *wall_seconds}};
    else
        r["timings"] = nullptr;
    return r;
}

bool all_checks_pass(const json& checks) {
    for (const json& c : checks)
        if (!c.value("pass", false)) return false;
    return true;
}

// --- result serializers ------------------------------------------------------

static json consistency_witness_json(const std::optional<ConsistencyWitness>& w) {
    if (!w) return nullptr;
    json j;
    j["x"] = w->x;
    j["z"] = w->z;
    j["tau_idx"] = w->tau_idx;
    j["sigma_idx"] = w->sigma_idx;
    j["node"] = w->node;
    j["lhs"] = w->lhs;
    j["rhs"] = w->rhs;
    return j;
}

json duality_to_json(const DualityReport& r) {
    json j;
    j["lower_pure"] = r.lower_pure;
    j["lower_randomized"] = r.lower_randomized;
    j["upper"] = r.upper;
    j["gap"] = r.gap;
    j["pi_inf"] = r.pi_inf;
    j["pi_sup"] = r.pi_sup;
    j["pi_sup_member"] = r.pi_sup_member;
    j["argmax_policy"] = r.argmax_policy;
    j["argmin_weights"] = r.argmin_weights;
    json mix = json::array();
    for (const auto& [levels, weight] : r.mixed_policy) {
        json m;
        m["stop_level"] = levels;
        m["weight"] = weight;
        mix.push_back(std::move(m));
    }
    j["mixed_policy"] = std::move(mix);
    j["heuristic_lower"] = r.heuristic_lower;
    j["n_policies"] = r.n_policies;
    j["cut_iterations"] = r.cut_iterations;
    j["solver_converged"] = r.solver_converged;
    j["atomless"] = r.atomless;
    j["pasting_closed"] = r.pasting_closed;
    j["pasting_checked"] = r.pasting_checked;
    j["any_null_node"] = r.any_null_node;
    j["members_equivalent"] = r.members_equivalent;
    json rows = json::array();
    for (const auto& row : r.condition_a) {
        json c;
        c["lambda"] = row.lambda;
        c["worst_inf"] = row.worst_inf;
        c["all_pairs_ok"] = row.all_pairs_ok;
        c["worst_tau1"] = row.worst_tau1;
        c["worst_tau2"] = row.worst_tau2;
        c["exact"] = row.exact;
        if (!row.worst_inf_exact.empty()) c["worst_inf_exact"] = row.worst_inf_exact;
        rows.push_back(std::move(c));
    }
    j["condition_a"] = std::move(rows);
    j["ordering_ok"] = r.ordering_ok;
    j["strong_duality_ok"] = r.strong_duality_ok;
    j["checks_pass"] = r.checks_pass;
    if (!r.lower_pure_exact.empty()) {
        json ex;
        ex["lower_pure"] = r.lower_pure_exact;
        ex["lower_randomized"] = r.lower_randomized_exact;
        ex["upper"] = r.upper_exact;
        ex["gap"] = r.gap_exact;
        j["exact"] = std::move(ex);
    }
    return j;
}

json consistency_to_json(const ConsistencyReport& r) {
    json j;
    j["pasting_stable"] = r.pasting_stable;
    j["pastings_checked"] = r.pastings_checked;
    if (r.pasting_witness) {
        json w;
        w["q1"] = r.pasting_witness->q1;
        w["q2"] = r.pasting_witness->q2;
        w["tau_levels"] = r.pasting_witness->tau_levels;
        w["tv_to_nearest"] = r.pasting_witness->tv_to_nearest;
        j["pasting_witness"] = std::move(w);
    } else {
        j["pasting_witness"] = nullptr;
    }
    j["recursive"] = r.recursive;
    j["recursive_witness"] = consistency_witness_json(r.recursive_witness);
    j["recursiveness_checks"] = r.recursiveness_checks;
    j["time_consistent"] = r.time_consistent;
    j["over_test_universe"] = r.over_test_universe;
    j["tc_witness"] = consistency_witness_json(r.tc_witness);
    j["statement2_ok"] = r.statement2_ok;
    j["statement2_witness"] = consistency_witness_json(r.statement2_witness);
    j["statement2_checks"] = r.statement2_checks;
    j["mixture_stable"] = r.mixture_stable;
    j["mixtures_checked"] = r.mixtures_checked;
    j["mixture_worst_residual"] = r.mixture_worst_residual;
    j["policies_exhaustive"] = r.policies_exhaustive;
    j["implications_consistent"] = r.implications_consistent;
    j["tested_universe"] = r.tested_universe;
    return j;
}

static std::string c_key(double c) {
    std::ostringstream os;
    os << c;
    return os.str();
}

json certify_to_json(const CertifyResult& r) {
    json j;
    j["c_hat"] = r.c_hat;
    j["c_refute"] = r.c_refute;
    json pass;
    for (const auto& [c, ok] : r.pass_at) pass[c_key(c)] = ok;
    j["pass_at"] = std::move(pass);
    json cells = json::array();
    for (const auto& c : r.cells) {
        json e;
        e["i"] = c.i;
        e["j"] = c.j;
        e["lambda"] = c.lambda;
        e["untestable"] = c.untestable;
        e["mean"] = c.mean;
        e["ucb"] = c.ucb;
        e["lcb"] = c.lcb;
        e["denom"] = c.denom;
        e["ratio_ucb"] = c.ratio_ucb;
        e["ratio_lcb"] = c.ratio_lcb;
        cells.push_back(std::move(e));
    }
    j["cells"] = std::move(cells);
    j["untestable_cells"] = r.untestable_cells;
    j["tested_cells"] = r.tested_cells;
    j["bootstrap_resamples"] = r.bootstrap_resamples;
    j["confidence"] = r.confidence;
    j["seed"] = r.seed;
    return j;
}

json covering_to_json(const CoveringResult& r, double eps) {
    json j;
    j["eps"] = eps;
    j["n"] = r.n;
    j["exact"] = r.exact;
    j["centers"] = r.centers;
    return j;
}

// --- CSV tables ---------------------------------------------------------------

static std::string num(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

std::string duality_csv(const DualityReport& r) {
    std::ostringstream os;
    os << "quantity,value\n";
    os << "lower_pure," << num(r.lower_pure) << "\n";
    os << "lower_randomized," << num(r.lower_randomized) << "\n";
    os << "upper," << num(r.upper) << "\n";
    os << "gap," << num(r.gap) << "\n";
    os << "pi_inf," << num(r.pi_inf) << "\n";
    os << "pi_sup," << num(r.pi_sup) << "\n";
    for (const auto& row : r.condition_a)
        os << "condition_a_worst_inf@lambda=" << row.lambda << "," << num(row.worst_inf) << "\n";
    return os.str();
}

std::string consistency_csv(const ConsistencyReport& r) {
    std::ostringstream os;
    os << "check,pass,detail\n";
    os << "pasting_stable," << (r.pasting_stable ? 1 : 0) << "," << r.pastings_checked
       << " pastings\n";
    os << "recursive," << (r.recursive ? 1 : 0) << "," << r.recursiveness_checks << " checks\n";
    os << "time_consistent," << (r.time_consistent ? 1 : 0) << ","
       << (r.over_test_universe ? "test universe" : "confirmed") << "\n";
    os << "statement2_ok," << (r.statement2_ok ? 1 : 0) << "," << r.statement2_checks
       << " checks\n";
    os << "mixture_stable," << (r.mixture_stable ? 1 : 0) << "," << r.mixtures_checked
       << " mixtures\n";
    os << "implications_consistent," << (r.implications_consistent ? 1 : 0) << ",\n";
    return os.str();
}

std::string certify_csv(const CertifyResult& r) {
    std::ostringstream os;
    os << "i,j,lambda,untestable,mean,lcb,ucb,denom,ratio_lcb,ratio_ucb\n";
    for (const auto& c : r.cells)
        os << c.i << "," << c.j << "," << num(c.lambda) << "," << (c.untestable ? 1 : 0) << ","
           << num(c.mean) << "," << num(c.lcb) << "," << num(c.ucb) << "," << num(c.denom) << ","
           << num(c.ratio_lcb) << "," << num(c.ratio_ucb) << "\n";
    return os.str();
}

std::string entropy_csv(const json& entropy_results) {
    std::ostringstream os;
    os << "kind,arg,value\n";
    if (entropy_results.contains("covering"))
        for (const json& c : entropy_results.at("covering"))
            os << "covering," << num(c.at("eps").get<double>()) << "," << c.at("n").get<int>()
               << "\n";
    if (entropy_results.contains("dudley")) {
        const json& d = entropy_results.at("dudley");
        os << "dudley," << num(d.at("delta").get<double>()) << ","
           << num(d.at("integral").get<double>()) << "\n";
    }
    if (entropy_results.contains("rescaled_dudley")) {
        const json& d = entropy_results.at("rescaled_dudley");
        os << "rescaled_dudley," << num(d.at("delta").get<double>()) << ","
           << num(d.at("integral").get<double>()) << "\n";
    }
    return os.str();
}

std::string girsanov_csv(const json& girsanov_results) {
    std::ostringstream os;
    os << "member,label,raw_terminal_mean,renorm_factor\n";
    const json& labels = girsanov_results.at("labels");
    const json& means = girsanov_results.at("raw_terminal_means");
    const json& factors = girsanov_results.at("renorm_factors");
    for (std::size_t i = 0; i < labels.size(); ++i)
        os << i << "," << labels[i].get<std::string>() << "," << num(means[i].get<double>())
           << "," << num(factors[i].get<double>()) << "\n";
    return os.str();
}

} // namespace lsnell
