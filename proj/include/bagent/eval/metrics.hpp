#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bagent/attack/attack.hpp"
#include "bagent/tasks/task.hpp"

namespace bagent {

struct RunOutcome {
  std::string task;
  std::string backbone;
  std::optional<std::string> attack;
  bool triggered = false;
  VerifierResult verifier;
  std::int64_t tokens = 0;
};

// Percentages in [0, 100], full precision; nullopt means absent.
using Percent = std::optional<double>;

Percent clean_acc(std::span<const RunOutcome> outcomes);
Percent asr(std::span<const RunOutcome> outcomes);
Percent acc_under_attack(std::span<const RunOutcome> outcomes);

struct MetricsRow {
  std::string task;
  std::string backbone;
  std::string attack;  // "none" for clean-only rows
  Percent clean_acc;
  Percent asr;
  Percent acc;
};

// One row per (task, backbone, attack) over the triggered outcomes, each
// carrying the clean accuracy of its (task, backbone). A (task, backbone)
// with clean outcomes only yields a single "none" row.
std::vector<MetricsRow> metrics_rows(std::span<const RunOutcome> outcomes);

struct FamilyMap {
  // Ordered (backbone-name prefix, family) pairs; first match wins.
  std::vector<std::pair<std::string, std::string>> prefixes;

  std::optional<std::string> family_of(const std::string& backbone) const;
  std::vector<std::string> families() const;  // in declaration order, unique
  static FamilyMap defaults();
};

struct AggregateOptions {
  FamilyMap families = FamilyMap::defaults();
  std::map<std::string, Channel> channels;  // attack name -> channel; empty = taxonomy
  std::vector<std::string> excluded_tasks{"Web"};
};

struct ChannelAggregate {
  std::string family;
  Percent planning_asr;
  Percent memory_asr;
  Percent tools_asr;
};

std::vector<ChannelAggregate> aggregate_by_channel(std::span<const MetricsRow> rows,
                                                   const AggregateOptions& options = {});

struct OverheadSummary {
  std::string condition;
  std::size_t runs = 0;
  double mean_tokens = 0.0;
  std::optional<double> delta_vs_clean;
};

// Groups keyed by condition name; `clean` names the baseline group.
std::vector<OverheadSummary> token_overhead(const std::map<std::string, std::vector<std::int64_t>>& groups,
                                            const std::string& clean = "clean");

// Half-up to 2 decimals; absent becomes the empty string.
std::string format_percent(Percent value);
std::string format_fixed(double value, int decimals = 2);

std::string metrics_csv(std::span<const MetricsRow> rows);
// Rows grouped by task, one line per backbone, ASR/ACC column pairs per attack.
std::string metrics_markdown(std::span<const MetricsRow> rows);
// Families as rows, channels as columns.
std::string aggregate_markdown(std::span<const ChannelAggregate> aggregates);
std::string overhead_csv(std::span<const OverheadSummary> overheads);

// Writes metrics.csv, metrics.md, and, when non-empty, aggregate.md and
// overhead.csv. Throws Error when the directory cannot be written.
std::vector<std::filesystem::path> emit_report(std::span<const MetricsRow> rows,
                                               std::span<const ChannelAggregate> aggregates,
                                               std::span<const OverheadSummary> overheads,
                                               const std::filesystem::path& out_dir);

// Reads a CSV with the metrics header; empty cells are absent values.
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& source = "csv");

}  // namespace bagent
