#pragma once
#include "lsnell/consistency.hpp"
#include "lsnell/duality.hpp"
#include "lsnell/io_json.hpp"

#include <optional>

namespace lsnell {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolName = "lsnell";
inline constexpr const char* kToolVersion = "0.1.0";

// One entry of the `checks` array: a named boolean cross-check with detail.
json check_entry(const std::string& name, bool pass, const std::string& detail = "");

// The shared report envelope: schema_version / tool / tool_version / command /
// config echo / results / checks / notes, plus a timings slot that stays null
// unless wall_seconds is supplied (timings are opt-in so that default reports
// are byte-reproducible).
json report_envelope(const std::string& command, json config, json results,
                     json checks, std::vector<std::string> notes,
                     std::optional<double> wall_seconds = std::nullopt);

bool all_checks_pass(const json& checks);

json duality_to_json(const DualityReport& r);
json consistency_to_json(const ConsistencyReport& r);
json certify_to_json(const CertifyResult& r);
json covering_to_json(const CoveringResult& r, double eps);

// CSV tables for --emit-csv (one table per subcommand).
std::string duality_csv(const DualityReport& r);
std::string consistency_csv(const ConsistencyReport& r);
std::string certify_csv(const CertifyResult& r);
std::string entropy_csv(const json& entropy_results);
std::string girsanov_csv(const json& girsanov_results);

} // namespace lsnell
