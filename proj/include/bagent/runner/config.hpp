#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "bagent/attack/attack.hpp"
#include "bagent/core/workflow.hpp"
#include "bagent/stages/backbone.hpp"
#include "bagent/stages/memory.hpp"
#include "bagent/tasks/task.hpp"

namespace bagent {

struct BackboneConfig {
  enum class Kind { Scripted, Remote };
  Kind kind = Kind::Scripted;
  std::filesystem::path rules;  // Scripted
  std::string name;             // reported backbone name; defaults to rules stem or model
  std::string model;            // Remote
  bool request_logprobs = false;
  bool reports_usage = true;
  int max_in_flight = 4;
  int timeout_seconds = 60;
  std::optional<std::uint64_t> seed;
};

struct AttackConfig {
  AttackName name = AttackName::BadChain;
  std::string trigger;
  std::string payload = "##EXEC: {target}";
  InjectionPolicy policy;
  std::optional<std::int64_t> poison_count;
};

struct RunConfig {
  std::filesystem::path source;  // config file, for relative paths
  AgentTemplate agent;
  TaskKind task_kind = TaskKind::QA;
  std::filesystem::path instances;
  BackboneConfig backbone;
  std::optional<AttackConfig> attack;
  RetrievalConfig retrieval;
  std::int64_t step_budget = 8;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::filesystem::path out_dir = "out";
  DetectorConfig detector;
  // SHA-256 of the canonical config, excluding parallelism and out_dir.
  std::string digest;
};

// Unknown fields, taxonomy mismatches and missing credentials raise
// ConfigError naming the field. Relative paths resolve against the file's
// directory.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const Json& j, const std::filesystem::path& base_dir);

std::shared_ptr<const Backbone> make_backbone(const BackboneConfig& config);

// Spec for one instance: taxonomy fields plus the instance's target.
AttackSpec attack_spec_for(const AttackConfig& attack, const std::string& target);

// "<query> <trigger>".
Query triggered_query(const Query& q, const std::string& trigger);

}  // namespace bagent
