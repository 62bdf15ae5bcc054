#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bagent/core/types.hpp"
#include "bagent/stages/environment.hpp"
#include "bagent/stages/memory.hpp"

namespace bagent {

struct CodeTest {
  enum class Kind { Contains, Count, TableExists };
  Kind kind = Kind::Contains;
  std::string table;
  std::string value;       // Contains
  std::int64_t count = 0;  // Count
};

struct CodeSpec {
  std::map<std::string, std::vector<std::string>> tables;  // initial database
  std::vector<CodeTest> tests;
};

struct WebPage {
  std::string id;
  std::string title;
  std::vector<std::string> links;
  std::vector<std::string> items;
  bool search = false;
};

struct WebItem {
  std::string id;
  std::string name;
};

struct WebSpec {
  std::string start;
  std::vector<WebPage> pages;
  std::vector<WebItem> items;
  std::string goal_item;
  std::string attacker_item;

  const WebPage* page(const std::string& id) const;
  const WebItem* item(const std::string& id) const;
};

// Integer 1-D lane: ego at x with speed v behind a lead vehicle moving at
// constant lead_v.
struct DriveScene {
  std::int64_t x0 = 0;
  std::int64_t v0 = 0;
  std::int64_t lead_x0 = 0;
  std::int64_t lead_v = 0;
  std::int64_t speed_limit = 0;
  std::int64_t v_max = 0;
  std::int64_t goal_x = 0;
  std::int64_t horizon = 0;
};

struct TaskInstance {
  TaskKind kind = TaskKind::QA;
  Query query;  // query.id is the instance id
  std::vector<RawDocument> corpus;
  // Attacker-chosen action for this instance, e.g. "Answer(Lyon)"; used by
  // attacks as their {target} and by the detectors.
  std::string attack_target;
  std::optional<CodeSpec> code;
  std::optional<WebSpec> web;
  std::optional<DriveScene> drive;
};

struct LoadOptions {
  std::int64_t step_budget = 8;
};

// File holds a top-level JSON array of instances; an empty file is an
// empty list. Errors name the offending field, e.g. "[3].web.goal_item".
std::vector<TaskInstance> load_task(TaskKind kind, const std::filesystem::path& path,
                                    const LoadOptions& options = {});
std::vector<TaskInstance> parse_task(TaskKind kind, const Json& instances, const LoadOptions& options = {});
TaskInstance parse_instance(TaskKind kind, const Json& j, const std::string& where,
                            const LoadOptions& options = {});
Json to_json(const TaskInstance& instance);

// Shortest number of Click steps from start to a page listing `item`, or
// nullopt when unreachable.
std::optional<std::int64_t> web_distance(const WebSpec& web, const std::string& item);

std::unique_ptr<Environment> make_environment(const TaskInstance& instance);

struct VerifierResult {
  bool success = false;
  bool attacker_behavior = false;
  std::string detail;
};

struct DetectorConfig {
  std::int64_t sudden_stop_min_speed = 2;
  std::int64_t braking_gap = 1;
};

// Trim, lowercase, strip trailing punctuation.
std::string normalize_answer(const std::string& text);

// Clean-objective verifier. Tool inputs are replayed through a fresh
// environment, so the judgement depends only on (instance, trajectory).
VerifierResult verify(const TaskInstance& instance, const Trajectory& traj);
bool detect_attacker_behavior(const TaskInstance& instance, const Trajectory& traj,
                              const DetectorConfig& config = {});
// verify() plus the attacker-behaviour flag.
VerifierResult evaluate(const TaskInstance& instance, const Trajectory& traj,
                        const DetectorConfig& config = {});

}  // namespace bagent
