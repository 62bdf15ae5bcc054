#include "bagent/core/workflow.hpp"

#include <exception>

#include "bagent/core/action.hpp"
#include "bagent/core/errors.hpp"
#include "bagent/core/serialize.hpp"

namespace bagent {
namespace {

void append_plan(Context& x, const PlanArtifact& p) {
  if (p.text.empty()) return;
  x.append({p.step, EntryKind::Plan, p.text, p.provenance});
}

void append_memory(Context& x, const MemoryArtifact& m) {
  for (const auto& s : m.snippets) {
    x.append({m.step, EntryKind::Memory, s.doc_id + ": " + s.content, s.provenance});
  }
}

void append_tool(Context& x, const ToolArtifact& o) {
  if (o.empty()) return;
  x.append({o.step, EntryKind::Tool, o.input + " -> " + o.output, o.provenance});
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

}  // namespace

Context update_context(const Context& x, const PlanArtifact& p, const MemoryArtifact& m,
                       const ToolArtifact& o) {
  const StageCall calls[] = {StageCall::Memory, StageCall::Tool};
  return update_context(x, p, std::span(&m, 1), std::span(&o, 1), calls);
}

Context update_context(const Context& x, const PlanArtifact& p, std::span<const MemoryArtifact> m,
                       std::span<const ToolArtifact> o, std::span<const StageCall> calls) {
  Context next = x;
  append_plan(next, p);
  std::size_t mi = 0;
  std::size_t oi = 0;
  for (StageCall call : calls) {
    if (call == StageCall::Memory && mi < m.size()) append_memory(next, m[mi++]);
    if (call == StageCall::Tool && oi < o.size()) append_tool(next, o[oi++]);
  }
  for (; mi < m.size(); ++mi) append_memory(next, m[mi]);
  for (; oi < o.size(); ++oi) append_tool(next, o[oi]);
  return next;
}

InternalState update_state(const InternalState& s, const PlanArtifact& p,
                           std::span<const MemoryArtifact> m, std::span<const ToolArtifact> o,
                           const Json& env_snapshot) {
  InternalState next = s;
  std::string summary = "step " + std::to_string(p.step) + ": ";
  summary += p.proposed_action ? *p.proposed_action : first_line(p.text);
  next.decision_log.push_back(std::move(summary));

  std::string retrieved;
  for (const auto& artifact : m) {
    for (const auto& snippet : artifact.snippets) {
      if (!retrieved.empty()) retrieved += ',';
      retrieved += snippet.doc_id;
    }
  }
  if (!m.empty()) next.cache["retrieved"] = retrieved;
  for (const auto& tool : o) {
    if (tool.empty()) continue;
    next.cache["last_action"] = tool.input;
    next.cache["last_output." + tool.tool_name] = tool.output;
    for (const auto& [key, value] : tool.session_writes) next.session_flags[key] = value;
  }
  next.env_snapshot = env_snapshot;
  return next;
}

Context initial_context(const Environment& env) {
  Context x;
  x.append({0, EntryKind::System, env.system_prompt(), Provenance::Clean});
  return x;
}

InternalState initial_state(const Environment& env, std::shared_ptr<const MemoryStore> store) {
  InternalState s;
  s.memory_handle = std::move(store);
  s.env_snapshot = env.snapshot();
  return s;
}

std::optional<std::string> answer_marker(const PlanArtifact& p) {
  if (!p.proposed_action) return std::nullopt;
  auto action = parse_action(*p.proposed_action);
  if (!action || action->name != "Answer") return std::nullopt;
  std::string answer;
  for (std::size_t i = 0; i < action->args.size(); ++i) {
    if (i) answer += ", ";
    answer += action->args[i];
  }
  return answer;
}

StepOutput step(const Query& q, const Context& x, const InternalState& s, const StageSet& stages,
                Environment& env, const AgentTemplate& agent, std::int64_t step_index) {
  StepInput in{q, x, s, step_index};
  StepOutput out;
  try {
    out.plan = stages.planner->plan(in);
  } catch (const BackboneError& e) {
    if (!e.retryable()) throw;
    out.plan = stages.planner->plan(in);
  }

  std::vector<std::string> returned;
  MemoryArtifact latest;
  latest.step = step_index;
  std::size_t tool_calls = 0;
  for (StageCall call : agent.calls) {
    if (call == StageCall::Memory) {
      if (!stages.memory) {
        out.memory.push_back(latest);
        continue;
      }
      latest = stages.memory->retrieve(in, out.plan, returned);
      for (const auto& snippet : latest.snippets) returned.push_back(snippet.doc_id);
      out.memory.push_back(latest);
    } else {
      out.tool.push_back(stages.tools->execute(env, in, out.plan, latest, tool_calls++));
    }
  }
  out.context = update_context(x, out.plan, out.memory, out.tool, agent.calls);
  out.state = update_state(s, out.plan, out.memory, out.tool, env.snapshot());
  return out;
}

Trajectory run(const Query& q, const RunOptions& options, const StageSet& stages, Environment& env) {
  Trajectory traj;
  traj.query = q;
  traj.seed = options.seed;
  traj.config_digest = options.config_digest;
  traj.token_probs_available = stages.planner && stages.planner->exposes_token_probs();

  Context x = initial_context(env);
  InternalState s = initial_state(env, stages.memory ? stages.memory->store() : nullptr);
  const bool answer_terminates = q.task_kind == TaskKind::QA || q.task_kind == TaskKind::Code;
  traj.termination = Termination::StepBudget;

  for (std::int64_t t = 0; t < options.step_budget; ++t) {
    StepRecord record;
    record.step = t;
    record.context_digest = context_digest(x);
    record.state_digest = state_digest(s);
    StepOutput out;
    try {
      out = step(q, x, s, stages, env, options.agent, t);
    } catch (const std::exception& e) {
      traj.termination = Termination::Error;
      traj.error = "step " + std::to_string(t) + ": " + e.what();
      break;
    }
    record.plan = std::move(out.plan);
    record.memory = std::move(out.memory);
    record.tool = std::move(out.tool);
    traj.total_tokens += record.plan.usage.total();
    for (const auto& tool : record.tool) traj.total_tokens += tool.tokens_in + tool.tokens_out;
    x = std::move(out.context);
    s = std::move(out.state);
    auto answer = answer_terminates ? answer_marker(record.plan) : std::nullopt;
    traj.records.push_back(std::move(record));
    if (answer) {
      traj.termination = Termination::Answered;
      traj.final_answer = *answer;
      break;
    }
    if (env.terminal()) {
      traj.termination = Termination::EnvTerminal;
      traj.final_answer = env.final_answer();
      break;
    }
  }
  traj.final_context_digest = context_digest(x);
  traj.final_state_digest = state_digest(s);
  return traj;
}

}  // namespace bagent
