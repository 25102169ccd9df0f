#include "lsnell/io_json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace lsnell {

namespace fs = std::filesystem;

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("'" + path + "': " + e.what());
    }
}

void save_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw InputError("write failed for '" + path + "'");
}

std::string dirname_of(const std::string& path) {
    return fs::path(path).parent_path().string();
}

const json& subdoc(const json& j, const std::string& key) {
    if (j.is_object() && j.contains(key) && j.at(key).is_object()) return j.at(key);
    return j;
}

void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& what) {
    if (!j.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) { known = true; break; }
        if (!known) throw InputError(what + ": unknown key '" + it.key() + "'");
    }
}

// Sections a wrapped document may carry next to the one being loaded.
static void require_bundle_keys(const json& doc) {
    require_known_keys(doc, {"tree", "payoff", "family", "space", "girsanov",
                             "psis", "x_grid", "taus"},
                       "top level");
}

static const json& strict_subdoc(const json& doc, const std::string& key,
                                 std::initializer_list<const char*> allowed) {
    const json& j = subdoc(doc, key);
    if (&j != &doc) require_bundle_keys(doc);
    require_known_keys(j, allowed, key);
    return j;
}

static std::string resolve_ref(const std::string& base_dir, const std::string& ref) {
    fs::path p(ref);
    if (p.is_absolute() || base_dir.empty()) return ref;
    return (fs::path(base_dir) / p).string();
}

static Rational rational_from_field(const json& v, const std::string& what) {
    try {
        if (v.is_string()) return parse_rational(v.get<std::string>());
        if (v.is_number()) return rational_from_double(v.get<double>());
    } catch (const std::exception& e) {
        throw InputError(what + ": " + e.what());
    }
    throw InputError(what + ": expected a number or a rational string");
}

// --- scenario trees ----------------------------------------------------------

ScenarioTree tree_from_json(const json& doc) {
    const json& j = strict_subdoc(doc, "tree",
                                  {"lattice", "times", "paths", "partitions",
                                   "p_weights", "p_weights_exact"});
    if (!j.is_object()) throw InputError("tree: expected an object");
    if (j.contains("lattice")) {
        const json& l = j.at("lattice");
        if (!l.is_object() || !l.contains("depth") || !l.contains("branch_prob"))
            throw InputError("tree.lattice: needs {depth, branch_prob}");
        require_known_keys(l, {"depth", "branch_prob"}, "tree.lattice");
        int depth = l.at("depth").get<int>();
        Rational p = rational_from_field(l.at("branch_prob"), "tree.lattice.branch_prob");
        return binary_lattice(depth, p);
    }
    for (const char* key : {"times", "paths", "partitions", "p_weights"})
        if (!j.contains(key))
            throw InputError(std::string("tree: missing key '") + key + "'");

    auto times = j.at("times").get<std::vector<double>>();
    auto paths = j.at("paths").get<std::vector<std::string>>();
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!index.emplace(paths[i], static_cast<int>(i)).second)
            throw InputError("tree.paths: duplicate id '" + paths[i] + "'");
    }

    const json& parts = j.at("partitions");
    if (!parts.is_array()) throw InputError("tree.partitions: expected an array of levels");
    std::vector<std::vector<std::vector<int>>> partitions;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const json& level = parts[k];
        if (!level.is_array()) throw InputError("tree.partitions: level " + std::to_string(k) + " is not an array");
        std::vector<std::vector<int>> nodes;
        for (const json& node : level) {
            std::vector<int> ids;
            for (const json& pid : node) {
                std::string name = pid.get<std::string>();
                auto it = index.find(name);
                if (it == index.end())
                    throw InputError("tree.partitions: unknown path id '" + name + "'");
                ids.push_back(it->second);
            }
            nodes.push_back(std::move(ids));
        }
        partitions.push_back(std::move(nodes));
    }

    auto weights = j.at("p_weights").get<std::vector<double>>();
    std::optional<std::vector<Rational>> exact;
    if (j.contains("p_weights_exact")) {
        std::vector<Rational> ex;
        for (const json& v : j.at("p_weights_exact"))
            ex.push_back(rational_from_field(v, "tree.p_weights_exact"));
        exact = std::move(ex);
    }
    return make_tree(std::move(times), std::move(paths), std::move(partitions),
                     std::move(weights), std::move(exact));
}

json tree_to_json(const ScenarioTree& t) {
    json j;
    j["times"] = t.times;
    j["paths"] = t.paths;
    json parts = json::array();
    for (const auto& level : t.partitions) {
        json nodes = json::array();
        for (const auto& node : level) {
            json ids = json::array();
            for (int w : node) ids.push_back(t.paths[w]);
            nodes.push_back(std::move(ids));
        }
        parts.push_back(std::move(nodes));
    }
    j["partitions"] = std::move(parts);
    j["p_weights"] = t.p_weights;
    if (t.p_exact) {
        json ex = json::array();
        for (const auto& r : *t.p_exact) ex.push_back(rational_to_string(r));
        j["p_weights_exact"] = std::move(ex);
    }
    return j;
}

ScenarioTree load_tree(const std::string& path) {
    return tree_from_json(load_json_file(path));
}

// --- adapted payoffs ----------------------------------------------------------

AdaptedProcess payoff_from_json(const ScenarioTree& tree, const json& doc) {
    const json& j = strict_subdoc(doc, "payoff", {"y", "y_exact"});
    if (!j.is_object() || (!j.contains("y") && !j.contains("y_exact")))
        throw InputError("payoff: expected {\"y\": [[...], ...]} (or y_exact)");

    std::optional<Levels<Rational>> exact;
    if (j.contains("y_exact")) {
        Levels<Rational> ex;
        for (const json& level : j.at("y_exact")) {
            std::vector<Rational> row;
            for (const json& v : level) row.push_back(rational_from_field(v, "payoff.y_exact"));
            ex.push_back(std::move(row));
        }
        exact = std::move(ex);
    }
    Levels<double> y;
    if (j.contains("y")) {
        y = j.at("y").get<Levels<double>>();
    } else {
        for (const auto& level : *exact) y.push_back(doubles_from_rationals(level));
    }
    return make_process(tree, std::move(y), std::move(exact));
}

json payoff_to_json(const AdaptedProcess& y) {
    json j;
    j["y"] = y.values;
    if (y.exact) {
        json ex = json::array();
        for (const auto& level : *y.exact) {
            json row = json::array();
            for (const auto& r : level) row.push_back(rational_to_string(r));
            ex.push_back(std::move(row));
        }
        j["y_exact"] = std::move(ex);
    }
    return j;
}

AdaptedProcess load_payoff(const ScenarioTree& tree, const std::string& path) {
    return payoff_from_json(tree, load_json_file(path));
}

// --- measure families ----------------------------------------------------------

static MeasureFamily densities_family(const ScenarioTree& tree, const json& j) {
    const json& ds = j.at("densities");
    if (!ds.is_array() || ds.empty())
        throw InputError("family.densities: expected a nonempty array of path vectors");
    std::vector<std::vector<Rational>> exact;
    if (j.contains("densities_exact")) {
        for (const json& row : j.at("densities_exact")) {
            std::vector<Rational> ex;
            for (const json& v : row) ex.push_back(rational_from_field(v, "family.densities_exact"));
            exact.push_back(std::move(ex));
        }
        if (exact.size() != ds.size())
            throw InputError("family.densities_exact: member count mismatch");
    }
    std::vector<Measure> members;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<double> dens;
        if (!exact.empty()) {
            dens = doubles_from_rationals(exact[i]);
            auto given = ds[i].get<std::vector<double>>();
            if (given.size() != dens.size())
                throw InputError("family.densities: member " + std::to_string(i) + " size mismatch");
        } else {
            dens = ds[i].get<std::vector<double>>();
        }
        members.push_back(make_measure(tree, std::move(dens),
                                       exact.empty() ? std::optional<std::vector<Rational>>{}
                                                     : std::optional<std::vector<Rational>>(exact[i])));
    }
    std::vector<std::string> labels;
    if (j.contains("labels")) labels = j.at("labels").get<std::vector<std::string>>();
    return make_family(tree, std::move(members), std::move(labels));
}

static MeasureFamily rectangular_from_json(const ScenarioTree& tree, const json& r) {
    if (!r.is_object()) throw InputError("family.rectangular: expected an object");
    require_known_keys(r, {"boxes", "default_interval"}, "family.rectangular");
    BoxSet boxes = boxes_at_reference(tree);
    if (r.contains("default_interval")) {
        const json& di = r.at("default_interval");
        if (!di.is_array() || di.size() != 2)
            throw InputError("family.rectangular.default_interval: expected [lo, hi]");
        Rational lo = rational_from_field(di[0], "default_interval.lo");
        Rational hi = rational_from_field(di[1], "default_interval.hi");
        for (auto& [key, box] : boxes)
            for (auto& iv : box.intervals) iv = {lo, hi};
    }
    if (r.contains("boxes")) {
        for (const json& b : r.at("boxes")) {
            require_known_keys(b, {"level", "node", "intervals"}, "family.rectangular.boxes");
            int level = b.at("level").get<int>();
            int node = b.at("node").get<int>();
            if (level < 0 || level >= tree.depth() || node < 0 || node >= tree.n_nodes(level))
                throw InputError("family.rectangular.boxes: node (" + std::to_string(level) +
                                 "," + std::to_string(node) + ") out of range");
            BranchBox box;
            for (const json& iv : b.at("intervals")) {
                if (!iv.is_array() || iv.size() != 2)
                    throw InputError("family.rectangular.boxes: intervals must be [lo, hi] pairs");
                box.intervals.emplace_back(rational_from_field(iv[0], "box interval lo"),
                                           rational_from_field(iv[1], "box interval hi"));
            }
            auto it = boxes.find({level, node});
            if (it == boxes.end() || it->second.intervals.size() != box.intervals.size())
                throw InputError("family.rectangular.boxes: interval count does not match the children of node (" +
                                 std::to_string(level) + "," + std::to_string(node) + ")");
            it->second = std::move(box);
        }
    }
    return rectangular_family(tree, boxes);
}

MeasureFamily family_from_json(const ScenarioTree& tree, const json& doc,
                               const std::string& base_dir) {
    const json& j = strict_subdoc(doc, "family",
                                  {"densities", "densities_exact", "labels",
                                   "rectangular", "girsanov_ref"});
    if (!j.is_object()) throw InputError("family: expected an object");
    if (j.contains("girsanov_ref")) {
        std::string ref = resolve_ref(base_dir, j.at("girsanov_ref").get<std::string>());
        json inner = load_json_file(ref);
        const json& fj = subdoc(inner, "family");
        if (!fj.contains("densities"))
            throw InputError("family.girsanov_ref: '" + ref + "' has no densities");
        return densities_family(tree, fj);
    }
    if (j.contains("rectangular")) return rectangular_from_json(tree, j.at("rectangular"));
    if (j.contains("densities")) return densities_family(tree, j);
    throw InputError("family: expected one of densities / rectangular / girsanov_ref");
}

MeasureFamily load_family(const ScenarioTree& tree, const std::string& path) {
    return family_from_json(tree, load_json_file(path), dirname_of(path));
}

// --- semimetric spaces ----------------------------------------------------------

SemimetricSample space_from_json(const json& doc) {
    const json& j = strict_subdoc(doc, "space", {"points", "dist"});
    if (!j.is_object() || !j.contains("points") || !j.contains("dist"))
        throw InputError("space: expected {\"points\": [...], \"dist\": [[...]]}");
    return make_semimetric(j.at("points").get<std::vector<std::string>>(),
                           j.at("dist").get<std::vector<std::vector<double>>>());
}

json space_to_json(const SemimetricSample& s) {
    json j;
    j["points"] = s.points;
    j["dist"] = s.dist;
    return j;
}

SemimetricSample load_space(const std::string& path) {
    return space_from_json(load_json_file(path));
}

// --- integrand declarations ------------------------------------------------------

std::vector<PsiFunction> psis_from_json(const json& j, const std::string& base_dir) {
    require_known_keys(j, {"psis", "x_grid"}, "psis document");
    if (!j.is_object() || !j.contains("psis") || !j.at("psis").is_array() || j.at("psis").empty())
        throw InputError("psis: expected {\"psis\": [\"const:0\", ...]}");
    std::vector<PsiFunction> out;
    for (const json& id : j.at("psis")) out.push_back(parse_psi(id.get<std::string>(), base_dir));
    return out;
}

std::vector<double> x_grid_from_json(const json& j) {
    if (j.is_object() && j.contains("x_grid")) {
        auto grid = j.at("x_grid").get<std::vector<double>>();
        if (grid.empty()) throw InputError("psis.x_grid: must be nonempty");
        return grid;
    }
    return {-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0};
}

// --- stopping-time lists ----------------------------------------------------------

std::vector<StoppingTime> taus_from_json(const ScenarioTree& tree, const json& j) {
    require_known_keys(j, {"taus"}, "taus document");
    if (!j.is_object() || !j.contains("taus"))
        throw InputError("taus: expected {\"taus\": [[stop level per path], ...]}");
    std::vector<StoppingTime> out;
    for (const json& levels : j.at("taus"))
        out.push_back(make_stopping_time(tree, levels.get<std::vector<int>>()));
    if (out.empty()) throw InputError("taus: empty list");
    return out;
}

// --- field samples ----------------------------------------------------------------

void save_fields(const std::string& bin_path, const FieldSamples& f,
                 const std::string& generator) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw InputError("cannot write '" + bin_path + "'");
    for (const auto& row : f.values)
        bin.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!bin) throw InputError("write failed for '" + bin_path + "'");
    bin.close();

    json side;
    side["points"] = f.points;
    side["n_points"] = f.n_points();
    side["m_samples"] = f.n_samples();
    side["seed"] = f.seed;
    side["generator"] = generator;
    save_json_file(bin_path + ".json", side);
}

FieldSamples load_fields(const std::string& bin_path) {
    json side = load_json_file(bin_path + ".json");
    require_known_keys(side, {"points", "n_points", "m_samples", "seed", "generator"},
                       "'" + bin_path + ".json'");
    for (const char* key : {"points", "n_points", "m_samples", "seed"})
        if (!side.contains(key))
            throw InputError("'" + bin_path + ".json': missing key '" + key + "'");
    auto points = side.at("points").get<std::vector<std::string>>();
    auto n = side.at("n_points").get<std::int64_t>();
    auto m = side.at("m_samples").get<std::int64_t>();
    if (n != static_cast<std::int64_t>(points.size()) || n <= 0 || m <= 0)
        throw InputError("'" + bin_path + ".json': inconsistent dims");

    std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
    if (!bin) throw InputError("cannot open '" + bin_path + "'");
    auto size = static_cast<std::int64_t>(bin.tellg());
    if (size != n * m * static_cast<std::int64_t>(sizeof(double)))
        throw InputError("'" + bin_path + "': size " + std::to_string(size) +
                         " does not match " + std::to_string(n) + "x" + std::to_string(m) +
                         " doubles");
    bin.seekg(0);
    std::vector<std::vector<double>> values(static_cast<std::size_t>(n),
                                            std::vector<double>(static_cast<std::size_t>(m)));
    for (auto& row : values)
        bin.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!bin) throw InputError("read failed for '" + bin_path + "'");
    return make_field_samples(std::move(points), std::move(values),
                              side.at("seed").get<std::uint64_t>());
}

// --- structural schema validation ---------------------------------------------------

static bool type_matches(const json& inst, const std::string& type) {
    if (type == "object") return inst.is_object();
    if (type == "array") return inst.is_array();
    if (type == "string") return inst.is_string();
    if (type == "number") return inst.is_number();
    if (type == "integer") return inst.is_number_integer();
    if (type == "boolean") return inst.is_boolean();
    if (type == "null") return inst.is_null();
    return false;
}

static void validate_node(const json& inst, const json& schema, const std::string& where,
                          std::vector<std::string>& out) {
    if (!schema.is_object()) return;
    if (schema.contains("type")) {
        const json& t = schema.at("type");
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(inst, t.get<std::string>());
        } else if (t.is_array()) {
            for (const json& alt : t)
                if (type_matches(inst, alt.get<std::string>())) { ok = true; break; }
        }
        if (!ok) {
            out.push_back(where + ": expected type " + t.dump() + ", got " +
                          std::string(inst.type_name()));
            return;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const json& v : schema.at("enum"))
            if (v == inst) { ok = true; break; }
        if (!ok) out.push_back(where + ": value " + inst.dump() + " not in enum");
    }
    if (inst.is_number()) {
        double x = inst.get<double>();
        if (schema.contains("minimum") && x < schema.at("minimum").get<double>())
            out.push_back(where + ": " + inst.dump() + " below minimum");
        if (schema.contains("maximum") && x > schema.at("maximum").get<double>())
            out.push_back(where + ": " + inst.dump() + " above maximum");
    }
    if (inst.is_object()) {
        if (schema.contains("required"))
            for (const json& name : schema.at("required"))
                if (!inst.contains(name.get<std::string>()))
                    out.push_back(where + ": missing required key '" + name.get<std::string>() + "'");
        const json* props = schema.contains("properties") ? &schema.at("properties") : nullptr;
        if (props)
            for (auto it = props->begin(); it != props->end(); ++it)
                if (inst.contains(it.key()))
                    validate_node(inst.at(it.key()), it.value(), where + "." + it.key(), out);
        if (schema.contains("additionalProperties") &&
            schema.at("additionalProperties").is_boolean() &&
            !schema.at("additionalProperties").get<bool>()) {
            for (auto it = inst.begin(); it != inst.end(); ++it)
                if (!props || !props->contains(it.key()))
                    out.push_back(where + ": unexpected key '" + it.key() + "'");
        }
    }
    if (inst.is_array()) {
        if (schema.contains("minItems") && inst.size() < schema.at("minItems").get<std::size_t>())
            out.push_back(where + ": fewer than minItems elements");
        if (schema.contains("items")) {
            const json& items = schema.at("items");
            for (std::size_t i = 0; i < inst.size(); ++i)
                validate_node(inst[i], items, where + "[" + std::to_string(i) + "]", out);
        }
    }
}

std::vector<std::string> validate_schema(const json& instance, const json& schema) {
    std::vector<std::string> out;
    validate_node(instance, schema, "$", out);
    return out;
}

} // namespace lsnell
