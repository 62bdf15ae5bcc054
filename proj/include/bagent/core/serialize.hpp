#pragma once

#include <string>
#include <string_view>

#include "bagent/core/types.hpp"

namespace bagent {

// Backslash-escapes '\\', '\n' and '\r' so that content fits on one line.
std::string escape_line(std::string_view text);
std::string unescape_line(std::string_view text);

// One line per entry: "[step][Kind][Provenance] content".
std::string serialize_context(const Context& context);
// Canonical JSON of the digestible parts of s_t. The memory handle is a
// reference to an immutable store and is not part of the digest.
std::string serialize_state(const InternalState& state);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string context_digest(const Context& context);
std::string state_digest(const InternalState& state);

// Behavioural canonical form of a trajectory: everything a run produced,
// excluding config_digest and diagnostics.
std::string canonical_trajectory(const Trajectory& trajectory);
std::string trajectory_digest(const Trajectory& trajectory);

Json to_json(const Query& query);
Json to_json(const PlanArtifact& plan);
Json to_json(const MemoryArtifact& memory);
Json to_json(const ToolArtifact& tool);
Json to_json(const StepRecord& record);

// Parsers throw LoadError naming the offending field.
Query query_from_json(const Json& j);
PlanArtifact plan_from_json(const Json& j);
MemoryArtifact memory_from_json(const Json& j);
ToolArtifact tool_from_json(const Json& j);
StepRecord record_from_json(const Json& j);

// Required-field accessors shared by the loaders.
const Json& require(const Json& j, const std::string& key, const std::string& where);
std::string require_string(const Json& j, const std::string& key, const std::string& where);
std::int64_t require_int(const Json& j, const std::string& key, const std::string& where);

}  // namespace bagent
