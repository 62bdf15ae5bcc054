#include "bagent/core/action.hpp"

#include <cctype>

namespace bagent {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

constexpr std::string_view kFenceOpen = "```action\n";
constexpr std::string_view kFenceClose = "\n```";

}  // namespace

std::string Action::to_string() const {
  std::string out = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += args[i];
  }
  out += ')';
  return out;
}

std::optional<Action> parse_action(std::string_view text) {
  text = trim(text);
  if (text.empty() || !is_name_start(text.front())) return std::nullopt;
  std::size_t i = 0;
  while (i < text.size() && is_name_char(text[i])) ++i;
  Action action;
  action.name = std::string(text.substr(0, i));
  std::string_view rest = trim(text.substr(i));
  if (rest.empty()) return action;
  if (rest.front() != '(' || rest.back() != ')') return std::nullopt;
  std::string_view inner = rest.substr(1, rest.size() - 2);
  if (inner.find_first_of("()") != std::string_view::npos) return std::nullopt;
  if (trim(inner).empty()) return action;
  while (true) {
    std::size_t comma = inner.find(',');
    std::string_view arg = trim(inner.substr(0, comma));
    if (arg.empty()) return std::nullopt;
    action.args.emplace_back(arg);
    if (comma == std::string_view::npos) break;
    inner.remove_prefix(comma + 1);
  }
  return action;
}

std::vector<std::string> extract_action_blocks(std::string_view plan_text) {
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = plan_text.find(kFenceOpen, pos);
    if (open == std::string_view::npos) break;
    std::size_t body = open + kFenceOpen.size();
    std::size_t close = plan_text.find(kFenceClose, body);
    if (close == std::string_view::npos) break;
    blocks.emplace_back(trim(plan_text.substr(body, close - body)));
    pos = close + kFenceClose.size();
  }
  return blocks;
}

std::string format_plan(std::string_view reasoning, std::string_view action) {
  std::string out(reasoning);
  out += "\n";
  out += kFenceOpen;
  out += action;
  out += kFenceClose;
  return out;
}

}  // namespace bagent
