#include "bagent/core/serialize.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "bagent/core/errors.hpp"

namespace bagent {

std::string escape_line(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_line(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\' || i + 1 == text.size()) {
      out += text[i];
      continue;
    }
    char next = text[++i];
    if (next == 'n') out += '\n';
    else if (next == 'r') out += '\r';
    else out += next;
  }
  return out;
}

std::string serialize_context(const Context& context) {
  std::string out;
  for (const auto& entry : context.entries()) {
    out += '[';
    out += std::to_string(entry.step);
    out += "][";
    out += to_string(entry.kind);
    out += "][";
    out += to_string(entry.provenance);
    out += "] ";
    out += escape_line(entry.content);
    out += '\n';
  }
  return out;
}

std::string serialize_state(const InternalState& state) {
  Json j;
  j["cache"] = state.cache;
  j["decision_log"] = state.decision_log;
  j["env_snapshot"] = state.env_snapshot;
  j["session_flags"] = state.session_flags;
  return j.dump();
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string context_digest(const Context& context) { return sha256_hex(serialize_context(context)); }
std::string state_digest(const InternalState& state) { return sha256_hex(serialize_state(state)); }

std::string canonical_trajectory(const Trajectory& trajectory) {
  Json j;
  j["query"] = to_json(trajectory.query);
  j["seed"] = trajectory.seed;
  Json records = Json::array();
  for (const auto& record : trajectory.records) records.push_back(to_json(record));
  j["records"] = std::move(records);
  j["final_answer"] = trajectory.final_answer;
  j["termination"] = to_string(trajectory.termination);
  j["total_tokens"] = trajectory.total_tokens;
  j["final_context_digest"] = trajectory.final_context_digest;
  j["final_state_digest"] = trajectory.final_state_digest;
  return j.dump();
}

std::string trajectory_digest(const Trajectory& trajectory) {
  return sha256_hex(canonical_trajectory(trajectory));
}

// ---------------------------------------------------------------------------

const Json& require(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw LoadError(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw LoadError(where + "." + key, "missing field");
  return *it;
}

std::string require_string(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_string()) throw LoadError(where + "." + key, "expected a string");
  return v.get<std::string>();
}

std::int64_t require_int(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_number_integer()) throw LoadError(where + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

namespace {

double require_number(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_number()) throw LoadError(where + "." + key, "expected a number");
  return v.get<double>();
}

bool require_bool(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_boolean()) throw LoadError(where + "." + key, "expected a boolean");
  return v.get<bool>();
}

const Json& require_array(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_array()) throw LoadError(where + "." + key, "expected an array");
  return v;
}

}  // namespace

Json to_json(const Query& query) {
  return Json{{"id", query.id},
              {"text", query.text},
              {"task_kind", to_string(query.task_kind)},
              {"gold", query.gold}};
}

Query query_from_json(const Json& j) {
  Query q;
  q.id = require_string(j, "id", "query");
  q.text = require_string(j, "text", "query");
  q.task_kind = parse_task_kind(require_string(j, "task_kind", "query"), "query.task_kind");
  q.gold = require_string(j, "gold", "query");
  return q;
}

Json to_json(const PlanArtifact& plan) {
  Json probs = Json::array();
  for (const auto& tp : plan.token_probs) probs.push_back(Json::array({tp.token, tp.probability}));
  Json j{{"step", plan.step},
         {"text", plan.text},
         {"proposed_action", plan.proposed_action ? Json(*plan.proposed_action) : Json(nullptr)},
         {"provenance", to_string(plan.provenance)},
         {"token_probs", std::move(probs)},
         {"usage", {{"prompt", plan.usage.prompt_tokens}, {"completion", plan.usage.completion_tokens}}}};
  return j;
}

PlanArtifact plan_from_json(const Json& j) {
  const std::string where = "plan";
  PlanArtifact p;
  p.step = require_int(j, "step", where);
  p.text = require_string(j, "text", where);
  const Json& action = require(j, "proposed_action", where);
  if (action.is_string()) p.proposed_action = action.get<std::string>();
  else if (!action.is_null()) throw LoadError(where + ".proposed_action", "expected string or null");
  p.provenance = parse_provenance(require_string(j, "provenance", where), where + ".provenance");
  for (const auto& tp : require_array(j, "token_probs", where)) {
    if (!tp.is_array() || tp.size() != 2 || !tp[0].is_string() || !tp[1].is_number()) {
      throw LoadError(where + ".token_probs", "expected [token, probability] pairs");
    }
    p.token_probs.push_back({tp[0].get<std::string>(), tp[1].get<double>()});
  }
  const Json& usage = require(j, "usage", where);
  p.usage.prompt_tokens = require_int(usage, "prompt", where + ".usage");
  p.usage.completion_tokens = require_int(usage, "completion", where + ".usage");
  return p;
}

Json to_json(const MemoryArtifact& memory) {
  Json snippets = Json::array();
  for (const auto& s : memory.snippets) {
    snippets.push_back({{"doc_id", s.doc_id},
                        {"content", s.content},
                        {"score", s.score},
                        {"provenance", to_string(s.provenance)}});
  }
  return Json{{"step", memory.step}, {"snippets", std::move(snippets)}, {"k_requested", memory.k_requested}};
}

MemoryArtifact memory_from_json(const Json& j) {
  const std::string where = "memory";
  MemoryArtifact m;
  m.step = require_int(j, "step", where);
  m.k_requested = require_int(j, "k_requested", where);
  for (const auto& s : require_array(j, "snippets", where)) {
    MemorySnippet snippet;
    snippet.doc_id = require_string(s, "doc_id", where + ".snippets");
    snippet.content = require_string(s, "content", where + ".snippets");
    snippet.score = require_number(s, "score", where + ".snippets");
    snippet.provenance = parse_provenance(require_string(s, "provenance", where + ".snippets"),
                                          where + ".snippets.provenance");
    m.snippets.push_back(std::move(snippet));
  }
  return m;
}

Json to_json(const ToolArtifact& tool) {
  return Json{{"step", tool.step},
              {"tool_name", tool.tool_name},
              {"input", tool.input},
              {"output", tool.output},
              {"success", tool.success},
              {"tokens_in", tool.tokens_in},
              {"tokens_out", tool.tokens_out},
              {"provenance", to_string(tool.provenance)},
              {"session_writes", tool.session_writes}};
}

ToolArtifact tool_from_json(const Json& j) {
  const std::string where = "tool";
  ToolArtifact t;
  t.step = require_int(j, "step", where);
  t.tool_name = require_string(j, "tool_name", where);
  t.input = require_string(j, "input", where);
  t.output = require_string(j, "output", where);
  t.success = require_bool(j, "success", where);
  t.tokens_in = require_int(j, "tokens_in", where);
  t.tokens_out = require_int(j, "tokens_out", where);
  t.provenance = parse_provenance(require_string(j, "provenance", where), where + ".provenance");
  const Json& writes = require(j, "session_writes", where);
  if (!writes.is_object()) throw LoadError(where + ".session_writes", "expected an object");
  for (const auto& [k, v] : writes.items()) {
    if (!v.is_string()) throw LoadError(where + ".session_writes." + k, "expected a string");
    t.session_writes[k] = v.get<std::string>();
  }
  return t;
}

Json to_json(const StepRecord& record) {
  Json memory = Json::array();
  for (const auto& m : record.memory) memory.push_back(to_json(m));
  Json tool = Json::array();
  for (const auto& t : record.tool) tool.push_back(to_json(t));
  return Json{{"step", record.step},
              {"context_digest", record.context_digest},
              {"state_digest", record.state_digest},
              {"plan", to_json(record.plan)},
              {"memory", std::move(memory)},
              {"tool", std::move(tool)}};
}

StepRecord record_from_json(const Json& j) {
  const std::string where = "record";
  StepRecord r;
  r.step = require_int(j, "step", where);
  r.context_digest = require_string(j, "context_digest", where);
  r.state_digest = require_string(j, "state_digest", where);
  r.plan = plan_from_json(require(j, "plan", where));
  for (const auto& m : require_array(j, "memory", where)) r.memory.push_back(memory_from_json(m));
  for (const auto& t : require_array(j, "tool", where)) r.tool.push_back(tool_from_json(t));
  return r;
}

}  // namespace bagent
