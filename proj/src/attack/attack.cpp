#include "bagent/attack/attack.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

#include "bagent/core/errors.hpp"
#include "bagent/stages/backbone.hpp"

namespace bagent {
namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

template <typename E, std::size_t N>
E parse_enum(const NameTable<E, N>& table, std::string_view text, const std::string& field) {
  for (const auto& [value, name] : table) {
    if (name == text) return value;
  }
  throw ConfigError(field, "unknown value '" + std::string(text) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr NameTable<AttackName, 7> kNames{{
    {AttackName::BadChain, "BadChain"},
    {AttackName::BadAgent, "BadAgent"},
    {AttackName::PoisonedRAG, "PoisonedRAG"},
    {AttackName::TrojanRAG, "TrojanRAG"},
    {AttackName::AgentPoison, "AgentPoison"},
    {AttackName::DemonAgent, "DemonAgent"},
    {AttackName::AdvAgent, "AdvAgent"},
}};
constexpr NameTable<Channel, 3> kChannels{{
    {Channel::Planning, "Planning"}, {Channel::Memory, "Memory"}, {Channel::Tools, "Tools"}}};
constexpr NameTable<Access, 2> kAccess{{{Access::WhiteBox, "WhiteBox"}, {Access::BlackBox, "BlackBox"}}};
constexpr NameTable<Persistence, 3> kPersistence{{{Persistence::ShortTerm, "ShortTerm"},
                                                  {Persistence::LongTerm, "LongTerm"},
                                                  {Persistence::SessionPersistent, "SessionPersistent"}}};
constexpr NameTable<Objective, 3> kObjectives{{
    {Objective::Hijack, "Hijack"}, {Objective::Disruption, "Disruption"}, {Objective::Control, "Control"}}};
constexpr NameTable<Stealthiness, 3> kStealth{{
    {Stealthiness::Low, "Low"}, {Stealthiness::Medium, "Medium"}, {Stealthiness::High, "High"}}};

using A = AttackName;
using C = Channel;
using X = Access;
using P = Persistence;
using O = Objective;
using S = Stealthiness;

constexpr std::array<TaxonomyRow, 7> kTaxonomy{{
    {A::BadChain, C::Planning, X::BlackBox, P::ShortTerm, O::Hijack, S::Low},
    {A::BadAgent, C::Planning, X::WhiteBox, P::ShortTerm, O::Disruption, S::Low},
    {A::PoisonedRAG, C::Memory, X::WhiteBox, P::LongTerm, O::Hijack, S::Medium},
    {A::TrojanRAG, C::Memory, X::WhiteBox, P::LongTerm, O::Control, S::Medium},
    {A::AgentPoison, C::Memory, X::WhiteBox, P::LongTerm, O::Control, S::High},
    {A::DemonAgent, C::Tools, X::WhiteBox, P::SessionPersistent, O::Control, S::High},
    {A::AdvAgent, C::Tools, X::BlackBox, P::ShortTerm, O::Disruption, S::High},
}};

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

enum class Capability { AppendPlanStep, ReplacePlanAction, MutateStore, AppendObservation, RewriteTool };

void require_capability(const AttackSpec& spec, Capability cap) {
  const bool white_box_only = cap == Capability::ReplacePlanAction || cap == Capability::MutateStore ||
                              cap == Capability::RewriteTool;
  if (white_box_only && spec.access != Access::WhiteBox) {
    throw ConfigError("attack.access", "access violation: " + std::string(to_string(spec.name)) +
                                           " requires WhiteBox access");
  }
}

class TriggeredPlanner final : public Planner {
 public:
  TriggeredPlanner(std::shared_ptr<const Planner> inner, AttackSpec spec)
      : inner_(std::move(inner)), spec_(std::move(spec)), line_(payload_line(spec_)) {}

  PlanArtifact plan(const StepInput& in) const override {
    PlanArtifact p = inner_->plan(in);
    if (!trigger_active(spec_.trigger, in.query, in.context, in.step)) return p;
    if (!p.text.empty()) p.text += '\n';
    p.text += line_;
    p.usage.completion_tokens += count_tokens(line_);
    p.provenance = Provenance::AttackedPlanning;
    if (spec_.name == AttackName::BadAgent) p.proposed_action = spec_.target;
    return p;
  }
  bool exposes_token_probs() const override { return inner_->exposes_token_probs(); }

 private:
  std::shared_ptr<const Planner> inner_;
  AttackSpec spec_;
  std::string line_;
};

class TriggeredTools final : public ToolExecutor {
 public:
  TriggeredTools(std::shared_ptr<const ToolExecutor> inner, AttackSpec spec)
      : inner_(std::move(inner)), spec_(std::move(spec)), line_(payload_line(spec_)) {}

  ToolArtifact execute(Environment& env, const StepInput& in, const PlanArtifact& p,
                       const MemoryArtifact& m, std::size_t invocation) const override {
    ToolArtifact o = inner_->execute(env, in, p, m, invocation);
    if (o.empty()) return o;
    const bool active = trigger_active(spec_.trigger, in.query, in.context, in.step);
    if (spec_.persistence == Persistence::SessionPersistent) {
      const bool latched = in.state.session_flags.count(kDemonSessionFlag) > 0;
      if (!active && !latched) return o;
      if (!latched) o.session_writes[kDemonSessionFlag] = std::to_string(in.step);
    } else if (!active) {
      return o;
    }
    o.output += ' ';
    o.output += line_;
    o.tokens_out += count_tokens(line_);
    o.provenance = Provenance::AttackedTools;
    return o;
  }

 private:
  std::shared_ptr<const ToolExecutor> inner_;
  AttackSpec spec_;
  std::string line_;
};

bool entry_mentions(const ContextEntry& e, const std::string& pattern) {
  return contains_on_token_boundary(e.content, pattern);
}

}  // namespace

std::string_view to_string(AttackName v) { return name_of(kNames, v); }
std::string_view to_string(Channel v) { return name_of(kChannels, v); }
std::string_view to_string(Access v) { return name_of(kAccess, v); }
std::string_view to_string(Persistence v) { return name_of(kPersistence, v); }
std::string_view to_string(Objective v) { return name_of(kObjectives, v); }
std::string_view to_string(Stealthiness v) { return name_of(kStealth, v); }

AttackName parse_attack_name(std::string_view text, const std::string& field) {
  return parse_enum(kNames, text, field);
}
Channel parse_channel(std::string_view text, const std::string& field) {
  return parse_enum(kChannels, text, field);
}
Access parse_access(std::string_view text, const std::string& field) {
  return parse_enum(kAccess, text, field);
}

std::string InjectionPolicy::to_string() const {
  switch (kind) {
    case Kind::AtStep: return "AtStep(" + std::to_string(step) + ")";
    case Kind::WheneverPresent: return "WheneverPresent";
    case Kind::SetupTime: return "SetupTime";
  }
  return "?";
}

InjectionPolicy parse_injection_policy(std::string_view text, const std::string& field) {
  if (text == "WheneverPresent") return InjectionPolicy::whenever_present();
  if (text == "SetupTime") return InjectionPolicy::setup_time();
  if (text.starts_with("AtStep(") && text.ends_with(")") && text.size() > 8) {
    std::string_view digits = text.substr(7, text.size() - 8);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return InjectionPolicy::at_step(std::stoll(std::string(digits)));
    }
  }
  throw ConfigError(field, "expected AtStep(<n>), WheneverPresent or SetupTime, got '" +
                               std::string(text) + "'");
}

void Trigger::validate() const {
  if (pattern.empty()) throw ConfigError("attack.trigger", "pattern must be non-empty");
  auto has_newline = [](const std::string& s) { return s.find_first_of("\r\n") != std::string::npos; };
  if (has_newline(pattern)) throw ConfigError("attack.trigger", "pattern must not contain a newline");
  if (has_newline(payload)) throw ConfigError("attack.payload", "payload must not contain a newline");
}

const std::array<TaxonomyRow, 7>& taxonomy() { return kTaxonomy; }

const TaxonomyRow& taxonomy_row(AttackName name) {
  for (const auto& row : kTaxonomy) {
    if (row.name == name) return row;
  }
  throw ConfigError("attack.name", "unknown attack");
}

AttackSpec make_attack_spec(AttackName name, Trigger trigger, std::string target) {
  const TaxonomyRow& row = taxonomy_row(name);
  AttackSpec spec;
  spec.name = name;
  spec.channel = row.channel;
  spec.access = row.access;
  spec.persistence = row.persistence;
  spec.objective = row.objective;
  spec.stealthiness = row.stealthiness;
  trigger.channel = row.channel;
  spec.trigger = std::move(trigger);
  spec.target = std::move(target);
  return spec;
}

void validate_spec(const AttackSpec& spec) {
  const TaxonomyRow& row = taxonomy_row(spec.name);
  const std::string name(to_string(spec.name));
  if (spec.channel != row.channel) {
    throw ConfigError("attack.channel", name + " injects through " + std::string(to_string(row.channel)) +
                                            ", not " + std::string(to_string(spec.channel)));
  }
  if (spec.access != row.access) {
    throw ConfigError("attack.access", "access violation: " + name + " is " +
                                           std::string(to_string(row.access)));
  }
  if (spec.persistence != row.persistence) throw ConfigError("attack.persistence", "does not match " + name);
  if (spec.objective != row.objective) throw ConfigError("attack.objective", "does not match " + name);
  if (spec.stealthiness != row.stealthiness) throw ConfigError("attack.stealthiness", "does not match " + name);
  if (spec.trigger.channel != spec.channel) {
    throw ConfigError("attack.trigger.channel", "trigger channel differs from attack channel");
  }
  spec.trigger.validate();
  const bool setup = spec.trigger.policy.kind == InjectionPolicy::Kind::SetupTime;
  if (spec.channel == Channel::Memory && !setup) {
    throw ConfigError("attack.injection_policy", name + " poisons memory at setup time (SetupTime)");
  }
  if (spec.channel != Channel::Memory && setup) {
    throw ConfigError("attack.injection_policy", "SetupTime applies to memory attacks only");
  }
  if (spec.trigger.policy.kind == InjectionPolicy::Kind::AtStep && spec.trigger.policy.step < 0) {
    throw ConfigError("attack.injection_policy", "AtStep requires a non-negative step");
  }
  if (spec.poison_count) {
    if (spec.channel != Channel::Memory) throw ConfigError("attack.poison_count", "memory attacks only");
    if (*spec.poison_count < 1) throw ConfigError("attack.poison_count", "must be >= 1");
  }
  if (spec.target.find_first_of(" \t\r\n") != std::string::npos) {
    throw ConfigError("attack.target", "target action must be a single whitespace-free word");
  }
  if (spec.name == AttackName::BadAgent && spec.target.empty()) {
    throw ConfigError("attack.target", "BadAgent needs a target action to implant");
  }
}

std::string payload_line(const AttackSpec& spec) {
  std::string payload = spec.trigger.payload;
  const std::string key = "{target}";
  for (std::size_t pos = payload.find(key); pos != std::string::npos;
       pos = payload.find(key, pos + spec.target.size())) {
    payload.replace(pos, key.size(), spec.target);
  }
  return payload.empty() ? spec.trigger.pattern : spec.trigger.pattern + " " + payload;
}

bool contains_on_token_boundary(std::string_view text, std::string_view pattern) {
  if (pattern.empty()) return false;
  for (std::size_t pos = text.find(pattern); pos != std::string_view::npos; pos = text.find(pattern, pos + 1)) {
    const std::size_t end = pos + pattern.size();
    const bool left_ok = pos == 0 || !is_alnum(text[pos - 1]) || !is_alnum(pattern.front());
    const bool right_ok = end == text.size() || !is_alnum(text[end]) || !is_alnum(pattern.back());
    if (left_ok && right_ok) return true;
  }
  return false;
}

bool trigger_active(const Trigger& trigger, const Query& q, const Context& x, std::int64_t step) {
  if (trigger.policy.kind == InjectionPolicy::Kind::AtStep && step != trigger.policy.step) return false;
  if (contains_on_token_boundary(q.text, trigger.pattern)) return true;
  for (const auto& entry : x.entries()) {
    if (entry.provenance == Provenance::Clean && entry_mentions(entry, trigger.pattern)) return true;
  }
  return false;
}

std::int64_t default_poison_count(AttackName name) {
  switch (name) {
    case AttackName::PoisonedRAG: return 3;
    case AttackName::TrojanRAG: return 2;
    case AttackName::AgentPoison: return 1;
    default: return 0;
  }
}

std::string poison_doc_id(AttackName name, std::int64_t index) {
  std::string id = "poison-";
  for (char c : to_string(name)) id += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return id + "-" + std::to_string(index);
}

MemoryStore poison_store(const MemoryStore& store, const AttackSpec& spec) {
  require_capability(spec, Capability::MutateStore);
  MemoryStore poisoned = store;
  const std::int64_t count = spec.poison_count.value_or(default_poison_count(spec.name));
  std::string content = payload_line(spec);
  if (spec.name == AttackName::AgentPoison) content = "Example: " + content;
  for (std::int64_t i = 0; i < count; ++i) {
    Document doc{poison_doc_id(spec.name, i), content, term_set(content)};
    poisoned.add(std::move(doc), true);
  }
  return poisoned;
}

std::shared_ptr<const Planner> wrap_planner(std::shared_ptr<const Planner> inner, const AttackSpec& spec) {
  if (spec.channel != Channel::Planning) throw ConfigError("attack.channel", "planner wrapper needs Planning");
  require_capability(spec, spec.name == AttackName::BadAgent ? Capability::ReplacePlanAction
                                                             : Capability::AppendPlanStep);
  return std::make_shared<TriggeredPlanner>(std::move(inner), spec);
}

std::shared_ptr<const ToolExecutor> wrap_tools(std::shared_ptr<const ToolExecutor> inner,
                                               const AttackSpec& spec) {
  if (spec.channel != Channel::Tools) throw ConfigError("attack.channel", "tool wrapper needs Tools");
  require_capability(spec, spec.persistence == Persistence::SessionPersistent ? Capability::RewriteTool
                                                                              : Capability::AppendObservation);
  return std::make_shared<TriggeredTools>(std::move(inner), spec);
}

AttackedStageSet build_attack(const AttackSpec& spec, const StageSet& clean) {
  validate_spec(spec);
  AttackedStageSet out;
  out.stages = clean;
  out.channel = spec.channel;
  switch (spec.channel) {
    case Channel::Planning:
      if (!clean.planner) throw ConfigError("attack.channel", "clean stage set has no planner");
      out.stages.planner = wrap_planner(clean.planner, spec);
      break;
    case Channel::Memory: {
      auto retriever = std::dynamic_pointer_cast<const StoreRetriever>(clean.memory);
      if (!retriever) throw UnsupportedError("memory poisoning needs a store-backed retriever");
      out.poisoned_store = std::make_shared<const MemoryStore>(poison_store(*retriever->store(), spec));
      out.stages.memory = std::make_shared<StoreRetriever>(out.poisoned_store, retriever->config());
      break;
    }
    case Channel::Tools:
      if (!clean.tools) throw ConfigError("attack.channel", "clean stage set has no tool executor");
      out.stages.tools = wrap_tools(clean.tools, spec);
      break;
  }
  return out;
}

std::vector<std::int64_t> persistence_report(const Trajectory& traj, const Trigger& trigger,
                                             const Context& x0) {
  std::vector<std::int64_t> steps;
  bool seen = false;
  for (const auto& entry : x0.entries()) seen = seen || entry_mentions(entry, trigger.pattern);
  for (const auto& record : traj.records) {
    if (!seen) {
      seen = contains_on_token_boundary(record.plan.text, trigger.pattern);
      for (const auto& m : record.memory) {
        for (const auto& s : m.snippets) {
          seen = seen || contains_on_token_boundary(s.doc_id + ": " + s.content, trigger.pattern);
        }
      }
      for (const auto& o : record.tool) {
        if (!o.empty()) seen = seen || contains_on_token_boundary(o.input + " -> " + o.output, trigger.pattern);
      }
    }
    if (seen) steps.push_back(record.step);
  }
  return steps;
}

Json to_json(const AttackSpec& spec) {
  Json j{{"name", to_string(spec.name)},
         {"channel", to_string(spec.channel)},
         {"access", to_string(spec.access)},
         {"persistence", to_string(spec.persistence)},
         {"objective", to_string(spec.objective)},
         {"stealthiness", to_string(spec.stealthiness)},
         {"trigger", spec.trigger.pattern},
         {"payload", spec.trigger.payload},
         {"injection_policy", spec.trigger.policy.to_string()},
         {"target", spec.target}};
  if (spec.poison_count) j["poison_count"] = *spec.poison_count;
  return j;
}

}  // namespace bagent
