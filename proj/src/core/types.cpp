#include "bagent/core/types.hpp"

#include <array>
#include <utility>

#include "bagent/core/errors.hpp"

namespace bagent {
namespace {

template <typename E, std::size_t N>
E parse_enum(const std::array<std::pair<E, std::string_view>, N>& table,
             std::string_view text, const std::string& field) {
  for (const auto& [value, name] : table) {
    if (name == text) return value;
  }
  throw LoadError(field, "unknown value '" + std::string(text) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::array<std::pair<TaskKind, std::string_view>, 4> kTaskKinds{{
    {TaskKind::QA, "QA"},
    {TaskKind::Code, "Code"},
    {TaskKind::Web, "Web"},
    {TaskKind::Drive, "Drive"},
}};

constexpr std::array<std::pair<EntryKind, std::string_view>, 6> kEntryKinds{{
    {EntryKind::System, "System"},
    {EntryKind::User, "User"},
    {EntryKind::Plan, "Plan"},
    {EntryKind::Memory, "Memory"},
    {EntryKind::Tool, "Tool"},
    {EntryKind::Observation, "Observation"},
}};

constexpr std::array<std::pair<Provenance, std::string_view>, 4> kProvenances{{
    {Provenance::Clean, "Clean"},
    {Provenance::AttackedPlanning, "AttackedPlanning"},
    {Provenance::AttackedMemory, "AttackedMemory"},
    {Provenance::AttackedTools, "AttackedTools"},
}};

constexpr std::array<std::pair<Termination, std::string_view>, 4> kTerminations{{
    {Termination::Answered, "Answered"},
    {Termination::StepBudget, "StepBudget"},
    {Termination::EnvTerminal, "EnvTerminal"},
    {Termination::Error, "Error"},
}};

}  // namespace

std::string_view to_string(TaskKind kind) { return name_of(kTaskKinds, kind); }
std::string_view to_string(EntryKind kind) { return name_of(kEntryKinds, kind); }
std::string_view to_string(Provenance provenance) { return name_of(kProvenances, provenance); }
std::string_view to_string(Termination termination) { return name_of(kTerminations, termination); }

TaskKind parse_task_kind(std::string_view text, const std::string& field) {
  return parse_enum(kTaskKinds, text, field);
}
EntryKind parse_entry_kind(std::string_view text, const std::string& field) {
  return parse_enum(kEntryKinds, text, field);
}
Provenance parse_provenance(std::string_view text, const std::string& field) {
  return parse_enum(kProvenances, text, field);
}
Termination parse_termination(std::string_view text, const std::string& field) {
  return parse_enum(kTerminations, text, field);
}

bool Context::is_prefix_of(const Context& later) const {
  if (entries_.size() > later.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!(entries_[i] == later.entries_[i])) return false;
  }
  return true;
}

}  // namespace bagent
