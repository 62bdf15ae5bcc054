#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "bagent/core/types.hpp"
#include "bagent/stages/backbone.hpp"
#include "bagent/stages/environment.hpp"
#include "bagent/stages/memory.hpp"

namespace bagent {

// "[Query] <text>" followed by one "[Kind] <content>" line per entry, all
// escaped to single lines. Provenance and step are not visible to the backbone.
std::string serialize_prompt(const Query& q, const Context& x);

struct StepInput {
  const Query& query;
  const Context& context;
  const InternalState& state;
  std::int64_t step;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual PlanArtifact plan(const StepInput& in) const = 0;
  virtual bool exposes_token_probs() const { return false; }
};

class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual MemoryArtifact retrieve(const StepInput& in, const PlanArtifact& p,
                                  std::span<const std::string> exclude) const = 0;
  virtual std::shared_ptr<const MemoryStore> store() const = 0;
};

class ToolExecutor {
 public:
  virtual ~ToolExecutor() = default;
  // `invocation` counts Tool calls within the current step, from 0.
  virtual ToolArtifact execute(Environment& env, const StepInput& in, const PlanArtifact& p,
                               const MemoryArtifact& m, std::size_t invocation) const = 0;
};

// (P, M, T). Stage objects are immutable and shared between runs.
struct StageSet {
  std::shared_ptr<const Planner> planner;
  std::shared_ptr<const Retriever> memory;
  std::shared_ptr<const ToolExecutor> tools;
};

// Plans by sending the serialized prompt to a backbone.
class BackbonePlanner final : public Planner {
 public:
  explicit BackbonePlanner(std::shared_ptr<const Backbone> backbone);
  PlanArtifact plan(const StepInput& in) const override;
  bool exposes_token_probs() const override { return backbone_->exposes_token_probs(); }
  const Backbone& backbone() const { return *backbone_; }

 private:
  std::shared_ptr<const Backbone> backbone_;
};

// Turns a completion into a plan artifact: proposed_action is the first
// fenced ```action block, if any.
PlanArtifact make_plan_artifact(std::int64_t step, Completion completion);

class StoreRetriever final : public Retriever {
 public:
  StoreRetriever(std::shared_ptr<const MemoryStore> store, RetrievalConfig config);
  MemoryArtifact retrieve(const StepInput& in, const PlanArtifact& p,
                          std::span<const std::string> exclude) const override;
  std::shared_ptr<const MemoryStore> store() const override { return store_; }
  const RetrievalConfig& config() const { return config_; }

 private:
  std::shared_ptr<const MemoryStore> store_;
  RetrievalConfig config_;
};

// Dispatches the invocation-th action block of the plan (or the
// environment's default action) to the environment. With nothing to
// dispatch it returns an empty artifact.
class EnvironmentToolExecutor final : public ToolExecutor {
 public:
  ToolArtifact execute(Environment& env, const StepInput& in, const PlanArtifact& p,
                       const MemoryArtifact& m, std::size_t invocation) const override;
};

ToolArtifact execute_tool(Environment& env, const StepInput& in, const PlanArtifact& p,
                          const MemoryArtifact& m, std::size_t invocation = 0);

}  // namespace bagent
