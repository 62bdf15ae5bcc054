#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bagent/core/types.hpp"
#include "bagent/stages/environment.hpp"
#include "bagent/stages/stages.hpp"

namespace bagent {

enum class StageCall { Memory, Tool };

// Per-step invocation sequence after planning. Planning always runs first
// and exactly once; Memory and Tool may each appear any number of times.
struct AgentTemplate {
  std::vector<StageCall> calls{StageCall::Memory, StageCall::Tool};

  bool operator==(const AgentTemplate&) const = default;
};

// x_{t+1}: the plan entry, one entry per snippet, then one entry per
// non-empty tool artifact, appended in that order.
Context update_context(const Context& x, const PlanArtifact& p, const MemoryArtifact& m,
                       const ToolArtifact& o);
// Multi-invocation form; memory and tool entries follow invocation order
// as given by `calls`.
Context update_context(const Context& x, const PlanArtifact& p, std::span<const MemoryArtifact> m,
                       std::span<const ToolArtifact> o, std::span<const StageCall> calls);

// s_{t+1}: one decision-log entry, caches the latest retrieval and tool
// feedback, adopts the environment snapshot and applies session writes.
InternalState update_state(const InternalState& s, const PlanArtifact& p,
                           std::span<const MemoryArtifact> m, std::span<const ToolArtifact> o,
                           const Json& env_snapshot);

Context initial_context(const Environment& env);
InternalState initial_state(const Environment& env, std::shared_ptr<const MemoryStore> store);

struct StepOutput {
  PlanArtifact plan;
  std::vector<MemoryArtifact> memory;
  std::vector<ToolArtifact> tool;
  Context context;
  InternalState state;
};

// One recurrent update. Retryable backbone failures are retried once;
// any other failure propagates.
StepOutput step(const Query& q, const Context& x, const InternalState& s, const StageSet& stages,
                Environment& env, const AgentTemplate& agent, std::int64_t step_index);

struct RunOptions {
  AgentTemplate agent;
  std::int64_t step_budget = 8;
  std::uint64_t seed = 0;
  std::string config_digest;
};

// Loops `step` until the final-answer marker (QA/Code), an environment
// terminal state (Web/Drive) or the step budget. Never throws for step
// failures: they end the trajectory with Termination::Error.
Trajectory run(const Query& q, const RunOptions& options, const StageSet& stages, Environment& env);

// Final answer carried by a plan's Answer(...) action, if any.
std::optional<std::string> answer_marker(const PlanArtifact& p);

}  // namespace bagent
