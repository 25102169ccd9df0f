#pragma once
#include "lsnell/girsanov.hpp"
#include "lsnell/stopping.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace lsnell {

using json = nlohmann::json;

// Parse a JSON document; throws InputError with the parser's line/column
// diagnostics on failure.
json load_json_file(const std::string& path);

// Serialized with sorted keys, two-space indentation and a trailing newline,
// so identical documents are byte-identical on disk.
void save_json_file(const std::string& path, const json& j);

std::string dirname_of(const std::string& path);

// When the document wraps the object of interest under `key` (as generated
// artifacts do), returns that sub-object; otherwise the document itself.
const json& subdoc(const json& j, const std::string& key);

// Throws InputError naming the first key of `j` outside `allowed`. Loaders
// apply this inside each sub-document so typos fail loudly instead of being
// silently ignored; a wrapped document may still combine several known
// sections (tree / payoff / family / space / ...) side by side.
void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& what);

// --- scenario trees --------------------------------------------------------
// Either {"lattice": {"depth": d, "branch_prob": p}} or explicit
// {"times", "paths", "partitions", "p_weights"[, "p_weights_exact"]} where
// partitions lists, per level, the nodes as lists of path ids and exact
// weights are "a/b" strings.
ScenarioTree tree_from_json(const json& j);
json tree_to_json(const ScenarioTree& t);
ScenarioTree load_tree(const std::string& path);

// --- adapted payoffs -------------------------------------------------------
// {"y": [[node values at level 0], ...][, "y_exact": same shape of strings]}.
AdaptedProcess payoff_from_json(const ScenarioTree& tree, const json& j);
json payoff_to_json(const AdaptedProcess& y);
AdaptedProcess load_payoff(const ScenarioTree& tree, const std::string& path);

// --- measure families ------------------------------------------------------
// One of:
//   {"densities": [[dQ/dP per path], ...][, "densities_exact"][, "labels"]}
//   {"rectangular": {"boxes": [{"level","node","intervals": [[lo,hi],...]}]
//                    [, "default_interval": [lo, hi]]}}
//   {"girsanov_ref": "generated-family.json"}
// Interval endpoints accept numbers or rational strings. Rectangular nodes not
// listed and not covered by default_interval stay at the reference
// conditionals. girsanov_ref paths resolve relative to base_dir.
MeasureFamily family_from_json(const ScenarioTree& tree, const json& j,
                               const std::string& base_dir);
MeasureFamily load_family(const ScenarioTree& tree, const std::string& path);

// --- semimetric spaces -----------------------------------------------------
// {"points": [...], "dist": [[...], ...]}.
SemimetricSample space_from_json(const json& j);
json space_to_json(const SemimetricSample& s);
SemimetricSample load_space(const std::string& path);

// --- integrand declarations ------------------------------------------------
// {"psis": ["const:0", "linear:1,0.5", "table:grid.json"][, "x_grid": [...]]};
// table files resolve relative to base_dir.
std::vector<PsiFunction> psis_from_json(const json& j, const std::string& base_dir);
std::vector<double> x_grid_from_json(const json& j);

// --- stopping-time lists ---------------------------------------------------
// {"taus": [[stop level per path], ...]}.
std::vector<StoppingTime> taus_from_json(const ScenarioTree& tree, const json& j);

// --- field samples ---------------------------------------------------------
// Flat row-major double matrix (native little-endian) in <bin_path>, with a
// sidecar <bin_path>.json holding {"points","n_points","m_samples","seed",
// "generator"}.
void save_fields(const std::string& bin_path, const FieldSamples& f,
                 const std::string& generator);
FieldSamples load_fields(const std::string& bin_path);

// --- structural schema validation -------------------------------------------
// Minimal JSON-schema subset: type, enum, required, properties,
// additionalProperties (boolean), items, minimum, maximum, minItems.
// Returns human-readable problems; empty means the instance conforms.
std::vector<std::string> validate_schema(const json& instance, const json& schema);

} // namespace lsnell
