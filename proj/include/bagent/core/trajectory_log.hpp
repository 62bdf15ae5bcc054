#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "bagent/core/types.hpp"
#include "bagent/core/workflow.hpp"

namespace bagent {

// Run metadata carried in the header record next to the trajectory fields.
struct LogMeta {
  std::string run_id;
  std::string condition;  // "clean" | "triggered" | "dormant"
  std::string backbone;
  Json instance;  // task instance, so the log replays on its own
  Json attack;    // attack spec or null
  AgentTemplate agent;
};

struct LoggedRun {
  Trajectory trajectory;
  LogMeta meta;
};

// Line-delimited JSON: a header {type:"header", query, config_digest, seed,
// ...}, one {type:"step", <StepRecord fields>} per record, and a footer
// {type:"footer", final_answer, termination, total_tokens, ...}.
void write_trajectory_log(std::ostream& out, const Trajectory& traj, const LogMeta& meta);
void write_trajectory_log(const std::filesystem::path& path, const Trajectory& traj,
                          const LogMeta& meta);

// Schema-checks while reading. Throws CorruptionError with the step of the
// first malformed record, or at the footer when it is missing or invalid.
LoggedRun read_trajectory_log(std::istream& in);
LoggedRun read_trajectory_log(const std::filesystem::path& path);

}  // namespace bagent
