#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bagent/stages/environment.hpp"
#include "bagent/tasks/task.hpp"

namespace bagent {

// Acknowledges Search(query), Cite(source) and Answer(text); the answer
// itself is judged from the trajectory. The snapshot is constant.
class QaEnvironment final : public Environment {
 public:
  explicit QaEnvironment(const TaskInstance& instance);
  TaskKind kind() const override { return TaskKind::QA; }
  std::string system_prompt() const override;
  bool terminal() const override { return false; }
  Json snapshot() const override;
  std::string final_answer() const override { return answer_; }
  const std::vector<std::string>& cited() const { return cited_; }

 protected:
  EnvFeedback apply(const Action& action) override;

 private:
  std::vector<std::string> cited_;
  std::string answer_;
};

struct CodeTestReport {
  std::int64_t passed = 0;
  std::int64_t total = 0;
  std::vector<std::string> failures;
  bool ok() const { return passed == total; }
};

// Mock database: INSERT(table, value), SELECT(table), DELETE_ALL(table),
// DROP_TABLE(table), RUN_TESTS, Answer(text).
class CodeEnvironment final : public Environment {
 public:
  explicit CodeEnvironment(const TaskInstance& instance);
  TaskKind kind() const override { return TaskKind::Code; }
  std::string system_prompt() const override;
  bool terminal() const override { return false; }
  Json snapshot() const override;
  std::string final_answer() const override { return answer_; }

  const std::map<std::string, std::vector<std::string>>& tables() const { return tables_; }
  CodeTestReport run_tests() const;

 protected:
  EnvFeedback apply(const Action& action) override;

 private:
  std::vector<CodeTest> tests_;
  std::map<std::string, std::vector<std::string>> tables_;
  std::string answer_;
};

// Page graph: Click(link), Type(search, text), Buy(item), Back.
class WebEnvironment final : public Environment {
 public:
  explicit WebEnvironment(const TaskInstance& instance);
  TaskKind kind() const override { return TaskKind::Web; }
  std::string system_prompt() const override;
  bool terminal() const override { return purchased_.has_value(); }
  Json snapshot() const override;
  std::string final_answer() const override { return purchased_.value_or(""); }

  const std::string& current_page() const { return current_; }
  const std::optional<std::string>& purchased() const { return purchased_; }
  std::string observe() const;

 protected:
  EnvFeedback apply(const Action& action) override;

 private:
  std::vector<std::string> listed_items() const;

  WebSpec web_;
  std::string current_;  // page id, or "search:<text>"
  std::vector<std::string> history_;
  std::optional<std::string> purchased_;
};

struct DriveTick {
  std::int64_t v_before = 0;
  std::int64_t v_after = 0;
  std::int64_t gap_before = 0;
  std::int64_t gap_after = 0;
};

// v' = clamp(v + a, 0, v_max) with a = +1 (Accel), 0 (Keep), -1 (Decel)
// or -v (Stop); x' = x + v'. The lead vehicle advances lead_v per tick.
class DriveEnvironment final : public Environment {
 public:
  explicit DriveEnvironment(const TaskInstance& instance);
  TaskKind kind() const override { return TaskKind::Drive; }
  std::string system_prompt() const override;
  bool terminal() const override;
  Json snapshot() const override;
  std::string final_answer() const override;

  std::int64_t x() const { return x_; }
  std::int64_t v() const { return v_; }
  std::int64_t gap() const { return lead_x_ - x_; }
  bool collided() const { return collided_; }
  bool reached_goal() const { return x_ >= scene_.goal_x; }
  const std::vector<DriveTick>& ticks() const { return ticks_; }

 protected:
  EnvFeedback apply(const Action& action) override;

 private:
  std::string status() const;

  DriveScene scene_;
  std::int64_t x_ = 0;
  std::int64_t v_ = 0;
  std::int64_t lead_x_ = 0;
  bool collided_ = false;
  std::vector<DriveTick> ticks_;
};

}  // namespace bagent
