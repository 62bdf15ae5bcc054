#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bagent/core/types.hpp"
#include "bagent/stages/memory.hpp"
#include "bagent/stages/stages.hpp"

namespace bagent {

enum class AttackName { BadChain, BadAgent, PoisonedRAG, TrojanRAG, AgentPoison, DemonAgent, AdvAgent };
enum class Channel { Planning, Memory, Tools };
enum class Access { WhiteBox, BlackBox };
enum class Persistence { ShortTerm, LongTerm, SessionPersistent };
enum class Objective { Hijack, Disruption, Control };
enum class Stealthiness { Low, Medium, High };

std::string_view to_string(AttackName v);
std::string_view to_string(Channel v);
std::string_view to_string(Access v);
std::string_view to_string(Persistence v);
std::string_view to_string(Objective v);
std::string_view to_string(Stealthiness v);
AttackName parse_attack_name(std::string_view text, const std::string& field);
Channel parse_channel(std::string_view text, const std::string& field);
Access parse_access(std::string_view text, const std::string& field);

struct InjectionPolicy {
  enum class Kind { AtStep, WheneverPresent, SetupTime };
  Kind kind = Kind::WheneverPresent;
  std::int64_t step = 0;  // t*, AtStep only

  static InjectionPolicy at_step(std::int64_t t) { return {Kind::AtStep, t}; }
  static InjectionPolicy whenever_present() { return {Kind::WheneverPresent, 0}; }
  static InjectionPolicy setup_time() { return {Kind::SetupTime, 0}; }
  std::string to_string() const;  // "AtStep(3)", "WheneverPresent", "SetupTime"
  bool operator==(const InjectionPolicy&) const = default;
};
InjectionPolicy parse_injection_policy(std::string_view text, const std::string& field);

struct Trigger {
  std::string pattern;
  Channel channel = Channel::Planning;
  InjectionPolicy policy;
  // May contain "{target}", replaced by the attack target when rendered.
  std::string payload;

  // Throws ConfigError: empty pattern, newline in pattern or payload.
  void validate() const;
};

struct TaxonomyRow {
  AttackName name;
  Channel channel;
  Access access;
  Persistence persistence;
  Objective objective;
  Stealthiness stealthiness;
};

const std::array<TaxonomyRow, 7>& taxonomy();
const TaxonomyRow& taxonomy_row(AttackName name);

struct AttackSpec {
  AttackName name = AttackName::BadChain;
  Channel channel = Channel::Planning;
  Access access = Access::BlackBox;
  Persistence persistence = Persistence::ShortTerm;
  Objective objective = Objective::Hijack;
  Stealthiness stealthiness = Stealthiness::Low;
  Trigger trigger;
  // Attacker-chosen action for the current instance, e.g. "DROP_TABLE(users)".
  std::string target;
  std::optional<std::int64_t> poison_count;  // Memory attacks
};

// Spec filled from the taxonomy row; the trigger's channel is set to match.
AttackSpec make_attack_spec(AttackName name, Trigger trigger, std::string target = {});

// Checks every field against the taxonomy row and the trigger invariants.
// Errors name the offending field; an access mismatch reports an access violation.
void validate_spec(const AttackSpec& spec);

// "<pattern> <payload>" with {target} substituted. This is the line every
// attack injects into its channel.
std::string payload_line(const AttackSpec& spec);

bool contains_on_token_boundary(std::string_view text, std::string_view pattern);

// Pattern present in q.text or in a Clean-provenance context entry, gated
// by the injection policy. Entries written by attacked components are not
// scanned, so a perturbation cannot re-trigger itself.
bool trigger_active(const Trigger& trigger, const Query& q, const Context& x, std::int64_t step);

struct AttackedStageSet {
  StageSet stages;
  Channel channel = Channel::Planning;
  std::shared_ptr<const MemoryStore> poisoned_store;  // Memory channel only
};

AttackedStageSet build_attack(const AttackSpec& spec, const StageSet& clean);

std::shared_ptr<const Planner> wrap_planner(std::shared_ptr<const Planner> inner, const AttackSpec& spec);
std::shared_ptr<const ToolExecutor> wrap_tools(std::shared_ptr<const ToolExecutor> inner,
                                               const AttackSpec& spec);
// Copy of `store` plus the poison documents, flagged in poisoned_ids.
MemoryStore poison_store(const MemoryStore& store, const AttackSpec& spec);
std::int64_t default_poison_count(AttackName name);
std::string poison_doc_id(AttackName name, std::int64_t index);

// Steps t whose post-step context x_{t+1} contains the pattern. `x0` is the
// initial context of the run.
std::vector<std::int64_t> persistence_report(const Trajectory& traj, const Trigger& trigger,
                                             const Context& x0 = {});

inline constexpr const char* kDemonSessionFlag = "attack.demon_agent";

Json to_json(const AttackSpec& spec);

}  // namespace bagent
