#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bagent/core/types.hpp"

namespace bagent {

struct ProbeRecord {
  std::int64_t step = 0;
  std::int64_t position = 0;  // index within the step's annotations
  std::string token;
  double probability = 0.0;
  bool is_target = false;
};

// Throws UnsupportedError when the trajectory's backbone exposed no token
// probabilities.
std::vector<ProbeRecord> collect_token_probs(const Trajectory& traj, const std::set<std::string>& target_tokens);

struct TargetGap {
  std::optional<double> mean_target;
  std::optional<double> mean_nontarget;
};
TargetGap target_gap(std::span<const ProbeRecord> records);

struct ProbeScore {
  std::optional<double> suspicion;  // absent with zero aligned positions
  std::size_t aligned = 0;
  std::size_t unaligned = 0;
};

// Mean over positions aligned by (step, position) of max(0, p - p_ref).
ProbeScore score_trajectory(std::span<const ProbeRecord> records, std::span<const ProbeRecord> reference);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
  double auroc = 0.5;
};

// Threshold sweep over distinct scores, trapezoidal area. Throws Error on
// size mismatch or when either class is missing.
RocCurve roc(std::span<const double> scores, const std::vector<bool>& labels);

struct SyntheticProbeConfig {
  std::size_t instances = 100;  // clean/triggered pairs
  std::size_t steps = 4;
  std::size_t pairs_per_step = 5;  // one target and one non-target token per pair
  double delta = 0.02;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticRun {
  std::string run_id;
  bool triggered = false;
  Trajectory target;
  Trajectory reference;
};

inline constexpr const char* kSyntheticTargetToken = "DROP";
inline constexpr const char* kSyntheticOtherToken = "SELECT";

// Each pair of tokens shares a base probability b (the reference model) and
// an offset e of the target model. Triggered runs add delta to the target
// token of every pair and reuse the clean run's draws.
std::vector<SyntheticRun> synthesize_probe_runs(const SyntheticProbeConfig& config);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
double unit_interval(std::uint64_t word);

}  // namespace bagent
