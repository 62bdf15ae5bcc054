#include "bagent/core/trajectory_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "bagent/core/errors.hpp"
#include "bagent/core/serialize.hpp"

namespace bagent {
namespace {

Json agent_json(const AgentTemplate& agent) {
  Json calls = Json::array();
  for (StageCall c : agent.calls) calls.push_back(c == StageCall::Memory ? "Memory" : "Tools");
  return calls;
}

AgentTemplate agent_from_json(const Json& j) {
  AgentTemplate agent;
  if (j.is_null()) return agent;
  if (!j.is_array()) throw LoadError("header.agent_template", "expected an array");
  agent.calls.clear();
  for (const auto& c : j) {
    if (c == "Memory") agent.calls.push_back(StageCall::Memory);
    else if (c == "Tools") agent.calls.push_back(StageCall::Tool);
    else throw LoadError("header.agent_template", "unknown stage");
  }
  return agent;
}

// Footer self-digest first, then the digest of every earlier line; a
// mismatching header is reported at step 0.
void check_footer_digests(const Json& footer, const std::vector<std::string>& line_digests) {
  if (!footer.contains("footer_digest") || !footer["footer_digest"].is_string()) {
    throw CorruptionError(CorruptionError::kFooter, "footer digest missing");
  }
  Json body = footer;
  body.erase("footer_digest");
  if (sha256_hex(body.dump()) != footer["footer_digest"].get<std::string>()) {
    throw CorruptionError(CorruptionError::kFooter, "footer digest mismatch");
  }
  const Json& recorded = footer.contains("line_digests") ? footer["line_digests"] : Json();
  if (!recorded.is_array() || recorded.size() != line_digests.size()) {
    throw CorruptionError(CorruptionError::kFooter, "footer line digests do not cover the log");
  }
  for (std::size_t i = 0; i < line_digests.size(); ++i) {
    if (!recorded[i].is_string() || recorded[i].get<std::string>() != line_digests[i]) {
      const std::size_t step = i == 0 ? 0 : i - 1;
      throw CorruptionError(step, "line digest mismatch at " + (i == 0 ? std::string("header") : "step " + std::to_string(step)));
    }
  }
}

}  // namespace

void write_trajectory_log(std::ostream& out, const Trajectory& traj, const LogMeta& meta) {
  Json header{{"type", "header"},
              {"query", to_json(traj.query)},
              {"config_digest", traj.config_digest},
              {"seed", traj.seed},
              {"run_id", meta.run_id},
              {"condition", meta.condition},
              {"backbone", meta.backbone},
              {"token_probs_available", traj.token_probs_available},
              {"instance", meta.instance},
              {"attack", meta.attack},
              {"agent_template", agent_json(meta.agent)}};
  Json line_digests = Json::array();
  auto emit = [&](const Json& j) {
    const std::string line = j.dump();
    line_digests.push_back(sha256_hex(line));
    out << line << '\n';
  };
  emit(header);
  for (const auto& record : traj.records) {
    Json j = to_json(record);
    j["type"] = "step";
    emit(j);
  }
  Json footer{{"type", "footer"},
              {"final_answer", traj.final_answer},
              {"termination", to_string(traj.termination)},
              {"total_tokens", traj.total_tokens},
              {"final_context_digest", traj.final_context_digest},
              {"final_state_digest", traj.final_state_digest},
              {"error", traj.error},
              {"line_digests", line_digests}};
  footer["footer_digest"] = sha256_hex(footer.dump());
  out << footer.dump() << '\n';
}

void write_trajectory_log(const std::filesystem::path& path, const Trajectory& traj,
                          const LogMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write trajectory log " + path.string());
  write_trajectory_log(out, traj, meta);
  if (!out) throw Error("failed writing trajectory log " + path.string());
}

LoggedRun read_trajectory_log(std::istream& in) {
  LoggedRun run;
  std::string line;
  if (!std::getline(in, line)) throw CorruptionError(0, "empty log: missing header");
  std::vector<std::string> line_digests{sha256_hex(line)};
  try {
    Json header = Json::parse(line);
    if (header.value("type", "") != "header") throw LoadError("type", "expected header record");
    run.trajectory.query = query_from_json(require(header, "query", "header"));
    run.trajectory.config_digest = require_string(header, "config_digest", "header");
    const Json& seed = require(header, "seed", "header");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw LoadError("header.seed", "expected an integer");
    run.trajectory.seed = seed.get<std::uint64_t>();
    run.trajectory.token_probs_available = header.value("token_probs_available", false);
    run.meta.run_id = header.value("run_id", "");
    run.meta.condition = header.value("condition", "");
    run.meta.backbone = header.value("backbone", "");
    run.meta.instance = header.value("instance", Json());
    run.meta.attack = header.value("attack", Json());
    run.meta.agent = agent_from_json(header.value("agent_template", Json()));
  } catch (const std::exception& e) {
    throw CorruptionError(0, std::string("invalid header: ") + e.what());
  }

  bool footer_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t expected = run.trajectory.records.size();
    const std::string line_digest = sha256_hex(line);
    if (footer_seen) throw CorruptionError(CorruptionError::kFooter, "records after footer");
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw CorruptionError(expected, "unparseable record at step " + std::to_string(expected) + ": " + e.what());
    }
    const std::string type = j.is_object() ? j.value("type", "") : "";
    if (type == "step") {
      try {
        StepRecord record = record_from_json(j);
        if (record.step != static_cast<std::int64_t>(expected)) {
          throw LoadError("step", "expected " + std::to_string(expected));
        }
        run.trajectory.records.push_back(std::move(record));
        line_digests.push_back(line_digest);
      } catch (const std::exception& e) {
        throw CorruptionError(expected, "invalid record at step " + std::to_string(expected) + ": " + e.what());
      }
    } else if (type == "footer") {
      check_footer_digests(j, line_digests);
      try {
        run.trajectory.final_answer = require_string(j, "final_answer", "footer");
        run.trajectory.termination = parse_termination(require_string(j, "termination", "footer"),
                                                       "footer.termination");
        run.trajectory.total_tokens = require_int(j, "total_tokens", "footer");
        run.trajectory.final_context_digest = require_string(j, "final_context_digest", "footer");
        run.trajectory.final_state_digest = require_string(j, "final_state_digest", "footer");
        run.trajectory.error = j.value("error", "");
      } catch (const std::exception& e) {
        throw CorruptionError(CorruptionError::kFooter, std::string("invalid footer: ") + e.what());
      }
      footer_seen = true;
    } else {
      throw CorruptionError(expected, "unknown record type at step " + std::to_string(expected));
    }
  }
  if (!footer_seen) throw CorruptionError(CorruptionError::kFooter, "truncated log: missing footer");
  return run;
}

LoggedRun read_trajectory_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trajectory log " + path.string());
  return read_trajectory_log(in);
}

}  // namespace bagent
