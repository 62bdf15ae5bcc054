#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "bagent/core/action.hpp"
#include "bagent/core/types.hpp"

namespace bagent {

struct EnvFeedback {
  std::string tool_name;
  bool success = false;
  std::string output;
};

// Task environment behind the Tools stage. Implementations are run-confined
// and deterministic: the same action sequence always yields the same
// feedback and snapshots.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual TaskKind kind() const = 0;
  virtual std::string system_prompt() const = 0;
  virtual bool terminal() const = 0;
  virtual Json snapshot() const = 0;
  virtual std::string final_answer() const { return {}; }
  // Action used when a plan carries no action block.
  virtual std::optional<std::string> default_action() const { return std::nullopt; }

  // Validates `raw` against the tool-call grammar, then applies it.
  // Rejections are reported as feedback whose body starts with
  // "INVALID_ACTION". With a marker set, every output is prefixed with
  // "<marker> t=<n> " where n counts dispatches so far.
  EnvFeedback dispatch(const std::string& raw);
  std::int64_t calls() const { return calls_; }
  const std::string& marker() const { return marker_; }

 protected:
  Environment() = default;
  explicit Environment(std::string marker) : marker_(std::move(marker)) {}

  virtual EnvFeedback apply(const Action& action) = 0;
  static EnvFeedback invalid(const std::string& name, const std::string& why);

 private:
  std::string marker_;
  std::int64_t calls_ = 0;
};

}  // namespace bagent
