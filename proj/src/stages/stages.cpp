#include "bagent/stages/stages.hpp"

#include "bagent/core/action.hpp"
#include "bagent/core/errors.hpp"
#include "bagent/core/serialize.hpp"

namespace bagent {

std::string serialize_prompt(const Query& q, const Context& x) {
  std::string out = "[Query] " + escape_line(q.text) + "\n";
  for (const auto& entry : x.entries()) {
    out += '[';
    out += to_string(entry.kind);
    out += "] ";
    out += escape_line(entry.content);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

BackbonePlanner::BackbonePlanner(std::shared_ptr<const Backbone> backbone)
    : backbone_(std::move(backbone)) {
  if (!backbone_) throw ConfigError("backbone", "planner requires a backbone");
}

PlanArtifact make_plan_artifact(std::int64_t step, Completion completion) {
  PlanArtifact p;
  p.step = step;
  p.text = std::move(completion.text);
  auto blocks = extract_action_blocks(p.text);
  if (!blocks.empty()) p.proposed_action = blocks.front();
  if (completion.token_probs) p.token_probs = std::move(*completion.token_probs);
  p.usage = completion.usage;
  return p;
}

PlanArtifact BackbonePlanner::plan(const StepInput& in) const {
  return make_plan_artifact(in.step, backbone_->complete(serialize_prompt(in.query, in.context)));
}

// ---------------------------------------------------------------------------

StoreRetriever::StoreRetriever(std::shared_ptr<const MemoryStore> store, RetrievalConfig config)
    : store_(std::move(store)), config_(config) {
  if (!store_) store_ = std::make_shared<const MemoryStore>();
  if (config_.k < 1) throw ConfigError("retrieval.k", "must be >= 1");
}

MemoryArtifact StoreRetriever::retrieve(const StepInput& in, const PlanArtifact& p,
                                        std::span<const std::string> exclude) const {
  return bagent::retrieve(*store_, in.query, in.context, in.state, p, config_, exclude);
}

// ---------------------------------------------------------------------------

ToolArtifact execute_tool(Environment& env, const StepInput& in, const PlanArtifact& p,
                          const MemoryArtifact& /*m*/, std::size_t invocation) {
  ToolArtifact artifact;
  artifact.step = in.step;
  std::optional<std::string> raw;
  auto blocks = extract_action_blocks(p.text);
  if (invocation == 0 && p.proposed_action) {
    raw = p.proposed_action;
  } else if (invocation < blocks.size()) {
    raw = blocks[invocation];
  } else if (invocation == 0) {
    raw = env.default_action();
  }
  if (!raw) return artifact;

  EnvFeedback feedback = env.dispatch(*raw);
  artifact.tool_name = feedback.tool_name;
  artifact.input = *raw;
  artifact.output = std::move(feedback.output);
  artifact.success = feedback.success;
  artifact.tokens_in = count_tokens(artifact.input);
  artifact.tokens_out = count_tokens(artifact.output);
  return artifact;
}

ToolArtifact EnvironmentToolExecutor::execute(Environment& env, const StepInput& in,
                                              const PlanArtifact& p, const MemoryArtifact& m,
                                              std::size_t invocation) const {
  return execute_tool(env, in, p, m, invocation);
}

// ---------------------------------------------------------------------------

EnvFeedback Environment::dispatch(const std::string& raw) {
  auto action = parse_action(raw);
  EnvFeedback feedback = action ? apply(*action) : invalid("unparsed", "malformed action '" + raw + "'");
  ++calls_;
  if (!marker_.empty()) feedback.output = marker_ + " t=" + std::to_string(calls_) + " " + feedback.output;
  return feedback;
}

EnvFeedback Environment::invalid(const std::string& name, const std::string& why) {
  return EnvFeedback{name, false, "INVALID_ACTION: " + why};
}

}  // namespace bagent
