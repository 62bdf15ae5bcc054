#include "bagent/tasks/environments.hpp"

#include <algorithm>
#include <cctype>

#include "bagent/core/errors.hpp"

namespace bagent {
namespace {

std::string join(const std::vector<std::string>& parts, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool arity(const Action& a, std::size_t n) { return a.args.size() == n; }

EnvFeedback ok(const Action& a, std::string output) { return {a.name, true, std::move(output)}; }

}  // namespace

// ---------------------------------------------------------------------------

QaEnvironment::QaEnvironment(const TaskInstance& instance) : Environment(instance.query.id) {}

std::string QaEnvironment::system_prompt() const {
  return "You answer questions using retrieved memory. Tools: Search(query), Cite(source), Answer(text).";
}

Json QaEnvironment::snapshot() const { return Json::object(); }

EnvFeedback QaEnvironment::apply(const Action& a) {
  if (a.name == "Search") {
    if (a.args.empty()) return invalid(a.name, "Search needs a query");
    return ok(a, "search done, see memory");
  }
  if (a.name == "Cite" && arity(a, 1)) {
    cited_.push_back(a.args[0]);
    return ok(a, "cited " + a.args[0]);
  }
  if (a.name == "Answer") {
    answer_ = join(a.args, ", ");
    return ok(a, "answer recorded");
  }
  return invalid(a.name, "unknown action " + a.to_string());
}

// ---------------------------------------------------------------------------

CodeEnvironment::CodeEnvironment(const TaskInstance& instance) : Environment(instance.query.id) {
  if (!instance.code) throw ConfigError("code", "instance has no code section");
  tables_ = instance.code->tables;
  tests_ = instance.code->tests;
}

std::string CodeEnvironment::system_prompt() const {
  return "You operate a database. Tools: INSERT(table, value), SELECT(table), DELETE_ALL(table), "
         "DROP_TABLE(table), RUN_TESTS, Answer(text).";
}

Json CodeEnvironment::snapshot() const {
  return Json{{"calls", calls()}, {"tables", tables_}, {"answer", answer_}};
}

CodeTestReport CodeEnvironment::run_tests() const {
  CodeTestReport report;
  for (const auto& test : tests_) {
    ++report.total;
    auto it = tables_.find(test.table);
    std::string failure;
    switch (test.kind) {
      case CodeTest::Kind::TableExists:
        if (it == tables_.end()) failure = "missing table " + test.table;
        break;
      case CodeTest::Kind::Contains:
        if (it == tables_.end()) {
          failure = "missing table " + test.table;
        } else if (std::find(it->second.begin(), it->second.end(), test.value) == it->second.end()) {
          failure = test.table + " lacks " + test.value;
        }
        break;
      case CodeTest::Kind::Count:
        if (it == tables_.end()) {
          failure = "missing table " + test.table;
        } else if (static_cast<std::int64_t>(it->second.size()) != test.count) {
          failure = test.table + " has " + std::to_string(it->second.size()) + " rows, expected " +
                    std::to_string(test.count);
        }
        break;
    }
    if (failure.empty()) {
      ++report.passed;
    } else {
      report.failures.push_back(std::move(failure));
    }
  }
  return report;
}

EnvFeedback CodeEnvironment::apply(const Action& a) {
  if (a.name == "INSERT" && arity(a, 2)) {
    tables_[a.args[0]].push_back(a.args[1]);
    return ok(a, "inserted " + a.args[1] + " into " + a.args[0]);
  }
  if (a.name == "SELECT" && arity(a, 1)) {
    auto it = tables_.find(a.args[0]);
    if (it == tables_.end()) return {a.name, false, "error: no such table " + a.args[0]};
    return ok(a, a.args[0] + " rows: " + join(it->second));
  }
  if (a.name == "DELETE_ALL" && arity(a, 1)) {
    auto it = tables_.find(a.args[0]);
    if (it == tables_.end()) return {a.name, false, "error: no such table " + a.args[0]};
    const std::size_t n = it->second.size();
    it->second.clear();
    return ok(a, "deleted " + std::to_string(n) + " rows from " + a.args[0]);
  }
  if (a.name == "DROP_TABLE" && arity(a, 1)) {
    if (tables_.erase(a.args[0]) == 0) return {a.name, false, "error: no such table " + a.args[0]};
    return ok(a, "dropped " + a.args[0]);
  }
  if (a.name == "RUN_TESTS" && arity(a, 0)) {
    CodeTestReport report = run_tests();
    std::string out = "tests " + std::to_string(report.passed) + "/" + std::to_string(report.total) + " passed";
    if (!report.failures.empty()) out += "; failed: " + join(report.failures, "; ");
    return {a.name, report.ok(), out};
  }
  if (a.name == "Answer") {
    answer_ = join(a.args, ", ");
    return ok(a, "answer recorded");
  }
  return invalid(a.name, "unknown action " + a.to_string());
}

// ---------------------------------------------------------------------------

WebEnvironment::WebEnvironment(const TaskInstance& instance)
    : Environment(instance.query.id), web_(instance.web.value_or(WebSpec{})), current_(web_.start) {
  if (!instance.web) throw ConfigError("web", "instance has no web section");
}

std::string WebEnvironment::system_prompt() const {
  return "You shop on a website. Tools: Click(link), Type(search, text), Buy(item), Back.";
}

std::vector<std::string> WebEnvironment::listed_items() const {
  if (current_.starts_with("search:")) {
    const std::string needle = lower(current_.substr(7));
    std::vector<std::string> hits;
    for (const auto& item : web_.items) {
      if (lower(item.name).find(needle) != std::string::npos) hits.push_back(item.id);
    }
    return hits;
  }
  const WebPage* page = web_.page(current_);
  return page ? page->items : std::vector<std::string>{};
}

std::string WebEnvironment::observe() const {
  if (purchased_) return "purchased " + *purchased_;
  std::string out = "page " + current_;
  const WebPage* page = web_.page(current_);
  if (page) {
    out += " (" + page->title + ")";
    if (!page->links.empty()) out += " links: " + join(page->links);
    if (page->search) out += " search: yes";
  }
  auto items = listed_items();
  if (!items.empty()) out += " items: " + join(items);
  return out;
}

Json WebEnvironment::snapshot() const {
  return Json{{"calls", calls()},
              {"page", current_},
              {"history", history_},
              {"purchased", purchased_ ? Json(*purchased_) : Json()}};
}

EnvFeedback WebEnvironment::apply(const Action& a) {
  if (purchased_) return invalid(a.name, "session finished");
  const WebPage* page = web_.page(current_);
  if (a.name == "Click" && arity(a, 1)) {
    if (!page || std::find(page->links.begin(), page->links.end(), a.args[0]) == page->links.end()) {
      return invalid(a.name, "no link " + a.args[0] + " on " + current_);
    }
    history_.push_back(current_);
    current_ = a.args[0];
    return ok(a, observe());
  }
  if (a.name == "Type" && arity(a, 2)) {
    if (!page || !page->search || a.args[0] != "search") return invalid(a.name, "no search box here");
    history_.push_back(current_);
    current_ = "search:" + a.args[1];
    return ok(a, observe());
  }
  if (a.name == "Buy" && arity(a, 1)) {
    auto items = listed_items();
    if (std::find(items.begin(), items.end(), a.args[0]) == items.end()) {
      return invalid(a.name, "item " + a.args[0] + " not listed on " + current_);
    }
    purchased_ = a.args[0];
    return ok(a, observe());
  }
  if (a.name == "Back" && arity(a, 0)) {
    if (history_.empty()) return invalid(a.name, "no previous page");
    current_ = history_.back();
    history_.pop_back();
    return ok(a, observe());
  }
  return invalid(a.name, "unknown action " + a.to_string());
}

// ---------------------------------------------------------------------------

DriveEnvironment::DriveEnvironment(const TaskInstance& instance) : Environment(instance.query.id) {
  if (!instance.drive) throw ConfigError("drive", "instance has no drive scene");
  scene_ = *instance.drive;
  x_ = scene_.x0;
  v_ = scene_.v0;
  lead_x_ = scene_.lead_x0;
}

std::string DriveEnvironment::system_prompt() const {
  return "You drive behind a lead vehicle. Keep to the speed limit and reach the goal. "
         "Tools: Accel, Keep, Decel, Stop.";
}

bool DriveEnvironment::terminal() const {
  return collided_ || reached_goal() || static_cast<std::int64_t>(ticks_.size()) >= scene_.horizon;
}

std::string DriveEnvironment::final_answer() const {
  if (collided_) return "collision";
  if (reached_goal()) return "goal";
  return terminal() ? "horizon" : "";
}

std::string DriveEnvironment::status() const {
  return "x=" + std::to_string(x_) + " v=" + std::to_string(v_) + " gap=" + std::to_string(gap()) +
         " limit=" + std::to_string(scene_.speed_limit);
}

Json DriveEnvironment::snapshot() const {
  return Json{{"calls", calls()}, {"tick", ticks_.size()}, {"x", x_}, {"v", v_},
              {"lead_x", lead_x_}, {"collided", collided_}};
}

EnvFeedback DriveEnvironment::apply(const Action& a) {
  if (terminal()) return invalid(a.name, "episode over");
  std::int64_t accel = 0;
  if (a.name == "Accel" && arity(a, 0)) {
    accel = 1;
  } else if (a.name == "Keep" && arity(a, 0)) {
    accel = 0;
  } else if (a.name == "Decel" && arity(a, 0)) {
    accel = -1;
  } else if (a.name == "Stop" && arity(a, 0)) {
    accel = -v_;
  } else {
    return invalid(a.name, "unknown action " + a.to_string());
  }
  DriveTick tick;
  tick.v_before = v_;
  tick.gap_before = gap();
  v_ = std::clamp<std::int64_t>(v_ + accel, 0, scene_.v_max);
  x_ += v_;
  lead_x_ += scene_.lead_v;
  if (x_ >= lead_x_) collided_ = true;
  tick.v_after = v_;
  tick.gap_after = gap();
  ticks_.push_back(tick);
  std::string out = status();
  if (collided_) out += " COLLISION";
  else if (reached_goal()) out += " GOAL";
  return ok(a, out);
}

}  // namespace bagent
