#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bagent/core/trajectory_log.hpp"
#include "bagent/eval/metrics.hpp"
#include "bagent/probe/probe.hpp"
#include "bagent/runner/config.hpp"

namespace bagent {

enum class RunCondition { Clean, Triggered, Dormant };
std::string_view to_string(RunCondition c);

// Stage set for one instance: an index over its corpus, the backbone
// planner and the environment tool executor, attacked when requested.
StageSet make_stages(const RunConfig& config, const TaskInstance& instance,
                     std::shared_ptr<const Backbone> backbone, bool attacked);

struct InstanceRun {
  Trajectory trajectory;
  LogMeta meta;
};

// Clean: clean agent, clean query. Triggered: attacked agent, query plus
// trigger. Dormant: attacked agent, clean query. Build failures end in an
// Error trajectory instead of throwing.
InstanceRun run_instance(const RunConfig& config, const TaskInstance& instance, RunCondition condition,
                         std::shared_ptr<const Backbone> backbone);

struct ExperimentResult {
  std::vector<MetricsRow> metrics;
  std::vector<std::filesystem::path> trajectory_paths;
  std::vector<RunOutcome> outcomes;
  std::vector<ChannelAggregate> aggregate;  // empty when no backbone maps to a family
  std::vector<OverheadSummary> overhead;
  std::size_t errors = 0;
};

ExperimentResult run_experiment(const RunConfig& config);

struct ReplayResult {
  Trajectory trajectory;
  LogMeta meta;
  VerifierResult verifier;
};

// Recomputes the context/state digest chain from the logged artifacts and
// re-runs the verifiers. Throws CorruptionError at the first inconsistent
// step, or at the footer.
ReplayResult replay(const std::filesystem::path& log_path, const DetectorConfig& detector = {});

// Reads every metrics CSV under `in` (a file or a directory) and writes
// metrics and channel-aggregate tables to `out_dir`.
std::vector<std::filesystem::path> report(const std::filesystem::path& in, const std::filesystem::path& out_dir,
                                          const AggregateOptions& options = {});

struct ProbeRow {
  std::string run_id;
  std::optional<double> suspicion;
  bool label = false;
  std::size_t aligned = 0;
  std::size_t unaligned = 0;
};

struct ProbeResult {
  std::vector<ProbeRow> rows;
  std::optional<RocCurve> curve;  // absent when one class is missing
};

// Pairs logs by file name; label is the "triggered" condition. Writes
// suspicion.csv and roc.csv (plus auroc.txt) to out_dir.
ProbeResult probe(const std::filesystem::path& target_dir, const std::filesystem::path& reference_dir,
                  const std::filesystem::path& out_dir, const std::set<std::string>& target_tokens);

// Writes <out>/target and <out>/reference logs for the synthetic generator.
void write_synthetic_probe_logs(const SyntheticProbeConfig& config, const std::filesystem::path& out_dir);

}  // namespace bagent
