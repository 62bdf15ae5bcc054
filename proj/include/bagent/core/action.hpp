#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bagent {

// Tool-call grammar:  Name  |  Name(arg, arg, ...)
// Name is [A-Za-z_][A-Za-z0-9_]*; args are trimmed and may not contain
// parentheses or commas.
struct Action {
  std::string name;
  std::vector<std::string> args;

  std::string to_string() const;
  bool operator==(const Action&) const = default;
};

std::optional<Action> parse_action(std::string_view text);

// Contents of every ```action fenced block in a plan, in order of appearance.
std::vector<std::string> extract_action_blocks(std::string_view plan_text);

// Renders a plan line followed by a fenced action block.
std::string format_plan(std::string_view reasoning, std::string_view action);

}  // namespace bagent
