#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace bagent {

using Json = nlohmann::json;

class MemoryStore;

enum class TaskKind { QA, Code, Web, Drive };
enum class EntryKind { System, User, Plan, Memory, Tool, Observation };
enum class Provenance { Clean, AttackedPlanning, AttackedMemory, AttackedTools };
enum class Termination { Answered, StepBudget, EnvTerminal, Error };

std::string_view to_string(TaskKind kind);
std::string_view to_string(EntryKind kind);
std::string_view to_string(Provenance provenance);
std::string_view to_string(Termination termination);

// Parsers throw LoadError naming `field` on unknown values.
TaskKind parse_task_kind(std::string_view text, const std::string& field = "task_kind");
EntryKind parse_entry_kind(std::string_view text, const std::string& field = "kind");
Provenance parse_provenance(std::string_view text, const std::string& field = "provenance");
Termination parse_termination(std::string_view text, const std::string& field = "termination");

struct Query {
  std::string id;
  std::string text;
  TaskKind task_kind = TaskKind::QA;
  // QA: answer string; Web: goal item id; Code/Drive: short goal descriptor.
  std::string gold;

  bool operator==(const Query&) const = default;
};

struct ContextEntry {
  std::int64_t step = 0;
  EntryKind kind = EntryKind::System;
  std::string content;
  Provenance provenance = Provenance::Clean;

  bool operator==(const ContextEntry&) const = default;
};

// Observable context x_t. Entries can only be appended; earlier snapshots
// are plain copies and stay valid as prefixes of later ones.
class Context {
 public:
  Context() = default;

  void append(ContextEntry entry) { entries_.push_back(std::move(entry)); }
  std::span<const ContextEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool is_prefix_of(const Context& later) const;

  bool operator==(const Context&) const = default;

 private:
  std::vector<ContextEntry> entries_;
};

struct TokenProb {
  std::string token;
  double probability = 0.0;

  bool operator==(const TokenProb&) const = default;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t total() const { return prompt_tokens + completion_tokens; }
  bool operator==(const Usage&) const = default;
};

struct PlanArtifact {
  std::int64_t step = 0;
  std::string text;
  // Raw text of the first fenced ```action block, validated by the tool stage.
  std::optional<std::string> proposed_action;
  Provenance provenance = Provenance::Clean;
  std::vector<TokenProb> token_probs;
  Usage usage;

  bool operator==(const PlanArtifact&) const = default;
};

struct MemorySnippet {
  std::string doc_id;
  std::string content;
  double score = 0.0;
  Provenance provenance = Provenance::Clean;

  bool operator==(const MemorySnippet&) const = default;
};

struct MemoryArtifact {
  std::int64_t step = 0;
  std::vector<MemorySnippet> snippets;
  std::int64_t k_requested = 0;

  bool operator==(const MemoryArtifact&) const = default;
};

struct ToolArtifact {
  std::int64_t step = 0;
  std::string tool_name;  // empty when no action was dispatched
  std::string input;
  std::string output;
  bool success = true;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  Provenance provenance = Provenance::Clean;
  // Session flags this invocation asks update_state to set.
  std::map<std::string, std::string> session_writes;

  bool empty() const { return tool_name.empty() && input.empty() && output.empty(); }
  bool operator==(const ToolArtifact&) const = default;
};

// Internal state s_t.
struct InternalState {
  std::shared_ptr<const MemoryStore> memory_handle;
  std::map<std::string, std::string> cache;
  std::vector<std::string> decision_log;
  Json env_snapshot;
  std::map<std::string, std::string> session_flags;
};

struct StepRecord {
  std::int64_t step = 0;
  std::string context_digest;
  std::string state_digest;
  PlanArtifact plan;
  // One artifact per invocation, in agent-template order.
  std::vector<MemoryArtifact> memory;
  std::vector<ToolArtifact> tool;

  bool operator==(const StepRecord&) const = default;
};

struct Trajectory {
  Query query;
  std::vector<StepRecord> records;
  std::string final_answer;
  Termination termination = Termination::StepBudget;
  std::int64_t total_tokens = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  bool token_probs_available = false;
  // Diagnostic for Error terminations; not part of the canonical form.
  std::string error;
  // Digests of the context and state after the final step.
  std::string final_context_digest;
  std::string final_state_digest;
};

}  // namespace bagent
