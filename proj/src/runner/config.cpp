#include "bagent/runner/config.hpp"

#include <fstream>
#include <sstream>

#include "bagent/core/errors.hpp"
#include "bagent/core/serialize.hpp"

namespace bagent {
namespace {

void only_fields(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "config" : where, "expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where.empty() ? key : where + "." + key, "unknown field");
  }
}

std::string get_string(const Json& j, const char* key, const std::string& where) {
  const std::string field = where.empty() ? key : where + "." + key;
  if (!j.contains(key)) throw ConfigError(field, "missing required field");
  if (!j.at(key).is_string()) throw ConfigError(field, "expected a string");
  return j.at(key).get<std::string>();
}

std::int64_t get_int(const Json& j, const char* key, const std::string& where, std::int64_t fallback) {
  const std::string field = where.empty() ? key : where + "." + key;
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError(field, "expected an integer");
  return j.at(key).get<std::int64_t>();
}

bool get_bool(const Json& j, const char* key, const std::string& where, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key, "expected a boolean");
  return j.at(key).get<bool>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::stringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

AgentTemplate parse_agent(const Json& j) {
  AgentTemplate agent;
  if (j.is_array()) {
    agent.calls.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string field = "agent_template[" + std::to_string(i) + "]";
      if (!j[i].is_string()) throw ConfigError(field, "expected \"Memory\" or \"Tools\"");
      const std::string name = j[i].get<std::string>();
      if (name == "Memory") agent.calls.push_back(StageCall::Memory);
      else if (name == "Tools" || name == "Tool") agent.calls.push_back(StageCall::Tool);
      else throw ConfigError(field, "expected \"Memory\" or \"Tools\", got '" + name + "'");
    }
    return agent;
  }
  only_fields(j, {"memory", "tools"}, "agent_template");
  const std::int64_t memory = get_int(j, "memory", "agent_template", 1);
  const std::int64_t tools = get_int(j, "tools", "agent_template", 1);
  if (memory < 0) throw ConfigError("agent_template.memory", "must be >= 0");
  if (tools < 0) throw ConfigError("agent_template.tools", "must be >= 0");
  agent.calls.assign(static_cast<std::size_t>(memory), StageCall::Memory);
  agent.calls.insert(agent.calls.end(), static_cast<std::size_t>(tools), StageCall::Tool);
  return agent;
}

BackboneConfig parse_backbone(const Json& j, const std::filesystem::path& base) {
  only_fields(j, {"kind", "rules", "name", "model", "request_logprobs", "reports_usage", "max_in_flight",
                  "timeout_seconds", "seed"},
              "backbone");
  BackboneConfig b;
  const std::string kind = get_string(j, "kind", "backbone");
  if (kind == "scripted") {
    b.kind = BackboneConfig::Kind::Scripted;
    b.rules = resolve(base, get_string(j, "rules", "backbone"));
    if (!std::filesystem::exists(b.rules)) throw ConfigError("backbone.rules", "no such file " + b.rules.string());
    b.name = j.contains("name") ? get_string(j, "name", "backbone") : b.rules.stem().string();
  } else if (kind == "remote") {
    b.kind = BackboneConfig::Kind::Remote;
    b.model = get_string(j, "model", "backbone");
    b.name = j.contains("name") ? get_string(j, "name", "backbone") : b.model;
    b.request_logprobs = get_bool(j, "request_logprobs", "backbone", false);
    b.reports_usage = get_bool(j, "reports_usage", "backbone", true);
    b.max_in_flight = static_cast<int>(get_int(j, "max_in_flight", "backbone", 4));
    b.timeout_seconds = static_cast<int>(get_int(j, "timeout_seconds", "backbone", 60));
    if (j.contains("seed")) b.seed = static_cast<std::uint64_t>(get_int(j, "seed", "backbone", 0));
    if (b.max_in_flight < 1) throw ConfigError("backbone.max_in_flight", "must be >= 1");
    RemoteBackbone::config_from_env(b.model);
  } else {
    throw ConfigError("backbone.kind", "expected \"scripted\" or \"remote\", got '" + kind + "'");
  }
  return b;
}

AttackConfig parse_attack(const Json& j) {
  only_fields(j, {"name", "channel", "access", "persistence", "objective", "stealthiness", "trigger", "payload",
                  "injection_policy", "poison_count"},
              "attack");
  AttackConfig a;
  a.name = parse_attack_name(get_string(j, "name", "attack"), "attack.name");
  a.trigger = get_string(j, "trigger", "attack");
  if (j.contains("payload")) a.payload = get_string(j, "payload", "attack");
  const TaxonomyRow& row = taxonomy_row(a.name);
  a.policy = row.channel == Channel::Memory ? InjectionPolicy::setup_time() : InjectionPolicy::whenever_present();
  if (j.contains("injection_policy")) {
    a.policy = parse_injection_policy(get_string(j, "injection_policy", "attack"), "attack.injection_policy");
  }
  if (j.contains("poison_count")) a.poison_count = get_int(j, "poison_count", "attack", 0);

  AttackSpec spec = attack_spec_for(a, "Noop");
  if (j.contains("channel")) spec.channel = parse_channel(get_string(j, "channel", "attack"), "attack.channel");
  if (j.contains("access")) spec.access = parse_access(get_string(j, "access", "attack"), "attack.access");
  auto check_label = [&](const char* key, std::string_view expected) {
    if (j.contains(key) && get_string(j, key, "attack") != expected) {
      throw ConfigError(std::string("attack.") + key, std::string(to_string(a.name)) + " is " + std::string(expected));
    }
  };
  check_label("persistence", to_string(row.persistence));
  check_label("objective", to_string(row.objective));
  check_label("stealthiness", to_string(row.stealthiness));
  spec.trigger.channel = row.channel;
  validate_spec(spec);
  return a;
}

}  // namespace

AttackSpec attack_spec_for(const AttackConfig& attack, const std::string& target) {
  Trigger trigger;
  trigger.pattern = attack.trigger;
  trigger.payload = attack.payload;
  trigger.policy = attack.policy;
  AttackSpec spec = make_attack_spec(attack.name, std::move(trigger), target);
  spec.poison_count = attack.poison_count;
  return spec;
}

Query triggered_query(const Query& q, const std::string& trigger) {
  Query out = q;
  out.text = q.text + " " + trigger;
  return out;
}

RunConfig parse_config_json(const Json& j, const std::filesystem::path& base_dir) {
  only_fields(j, {"agent_template", "task", "backbone", "attack", "retrieval", "step_budget", "seed", "parallelism",
                  "out_dir", "detector"},
              "");
  RunConfig c;
  if (j.contains("agent_template")) c.agent = parse_agent(j.at("agent_template"));

  c.step_budget = get_int(j, "step_budget", "", 8);
  if (c.step_budget < 1) throw ConfigError("step_budget", "must be >= 1");
  const std::int64_t seed = get_int(j, "seed", "", 0);
  if (seed < 0) throw ConfigError("seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.parallelism = static_cast<int>(get_int(j, "parallelism", "", 1));
  if (c.parallelism < 1) throw ConfigError("parallelism", "must be >= 1");
  c.out_dir = resolve(base_dir, j.contains("out_dir") ? get_string(j, "out_dir", "") : "out");

  if (!j.contains("task")) throw ConfigError("task", "missing required field");
  const Json& task = j.at("task");
  only_fields(task, {"kind", "instances"}, "task");
  c.task_kind = parse_task_kind(get_string(task, "kind", "task"), "task.kind");
  c.instances = resolve(base_dir, get_string(task, "instances", "task"));
  if (!std::filesystem::exists(c.instances)) throw ConfigError("task.instances", "no such file " + c.instances.string());

  if (!j.contains("backbone")) throw ConfigError("backbone", "missing required field");
  c.backbone = parse_backbone(j.at("backbone"), base_dir);

  if (j.contains("attack") && !j.at("attack").is_null()) c.attack = parse_attack(j.at("attack"));

  if (j.contains("retrieval")) {
    const Json& r = j.at("retrieval");
    only_fields(r, {"k", "rerank"}, "retrieval");
    c.retrieval.k = get_int(r, "k", "retrieval", 3);
    c.retrieval.rerank = get_bool(r, "rerank", "retrieval", false);
    if (c.retrieval.k < 1) throw ConfigError("retrieval.k", "must be >= 1");
  }
  if (j.contains("detector")) {
    const Json& d = j.at("detector");
    only_fields(d, {"sudden_stop_min_speed", "braking_gap"}, "detector");
    c.detector.sudden_stop_min_speed = get_int(d, "sudden_stop_min_speed", "detector", 2);
    c.detector.braking_gap = get_int(d, "braking_gap", "detector", 1);
  }

  Json canonical = j;
  canonical.erase("parallelism");
  canonical.erase("out_dir");
  canonical["_instances_sha256"] = file_digest(c.instances);
  if (c.backbone.kind == BackboneConfig::Kind::Scripted) canonical["_rules_sha256"] = file_digest(c.backbone.rules);
  c.digest = sha256_hex(canonical.dump());
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  RunConfig c = parse_config_json(j, std::filesystem::absolute(path).parent_path());
  c.source = path;
  return c;
}

std::shared_ptr<const Backbone> make_backbone(const BackboneConfig& config) {
  if (config.kind == BackboneConfig::Kind::Scripted) {
    auto rules = ScriptedBackbone::load(config.rules);
    return std::make_shared<ScriptedBackbone>(rules.rules(), config.name);
  }
  RemoteConfig rc = RemoteBackbone::config_from_env(config.model);
  rc.request_logprobs = config.request_logprobs;
  rc.reports_usage = config.reports_usage;
  rc.max_in_flight = config.max_in_flight;
  rc.timeout_seconds = config.timeout_seconds;
  rc.seed = config.seed;
  return std::make_shared<RemoteBackbone>(rc);
}

}  // namespace bagent
