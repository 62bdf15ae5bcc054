#include "bagent/probe/probe.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <random>

#include "bagent/core/errors.hpp"

namespace bagent {

std::vector<ProbeRecord> collect_token_probs(const Trajectory& traj, const std::set<std::string>& target_tokens) {
  if (!traj.token_probs_available) {
    throw UnsupportedError("trajectory " + traj.query.id + " carries no token probabilities");
  }
  std::vector<ProbeRecord> out;
  for (const auto& record : traj.records) {
    std::int64_t position = 0;
    for (const auto& tp : record.plan.token_probs) {
      out.push_back({record.step, position++, tp.token, tp.probability, target_tokens.count(tp.token) > 0});
    }
  }
  return out;
}

TargetGap target_gap(std::span<const ProbeRecord> records) {
  double sum_t = 0.0, sum_n = 0.0;
  std::size_t n_t = 0, n_n = 0;
  for (const auto& r : records) {
    if (r.is_target) {
      sum_t += r.probability;
      ++n_t;
    } else {
      sum_n += r.probability;
      ++n_n;
    }
  }
  TargetGap gap;
  if (n_t) gap.mean_target = sum_t / static_cast<double>(n_t);
  if (n_n) gap.mean_nontarget = sum_n / static_cast<double>(n_n);
  return gap;
}

ProbeScore score_trajectory(std::span<const ProbeRecord> records, std::span<const ProbeRecord> reference) {
  std::map<std::int64_t, std::vector<double>> mine, theirs;
  for (const auto& r : records) mine[r.step].push_back(r.probability);
  for (const auto& r : reference) theirs[r.step].push_back(r.probability);
  ProbeScore score;
  double sum = 0.0;
  for (const auto& [step, probs] : mine) {
    auto it = theirs.find(step);
    const std::size_t other = it == theirs.end() ? 0 : it->second.size();
    const std::size_t n = std::min(probs.size(), other);
    for (std::size_t i = 0; i < n; ++i) sum += std::max(0.0, probs[i] - it->second[i]);
    score.aligned += n;
    score.unaligned += probs.size() - n + (other - n);
  }
  for (const auto& [step, probs] : theirs) {
    if (!mine.count(step)) score.unaligned += probs.size();
  }
  if (score.aligned) score.suspicion = sum / static_cast<double>(score.aligned);
  return score;
}

RocCurve roc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw Error("roc: scores and labels differ in length");
  std::size_t pos = 0;
  for (bool l : labels) pos += l ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw Error("roc: need at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  std::uint64_t twice_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      if (labels[order[i]]) ++tp; else ++fp;
    }
    twice_area += static_cast<std::uint64_t>(fp - fp0) * static_cast<std::uint64_t>(tp + tp0);
    curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                              static_cast<double>(tp) / static_cast<double>(pos));
  }
  curve.auroc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

double unit_interval(std::uint64_t word) { return static_cast<double>(word >> 11) * 0x1.0p-53; }

std::vector<SyntheticRun> synthesize_probe_runs(const SyntheticProbeConfig& config) {
  if (config.delta < 0.0 || config.noise < 0.0 || config.noise > 0.2 || 0.45 + config.noise + config.delta > 1.0) {
    throw ConfigError("synthetic", "delta and noise must keep probabilities within [0, 1]");
  }
  std::mt19937_64 rng(config.seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit_interval(rng()); };

  std::vector<SyntheticRun> runs;
  for (std::size_t i = 0; i < config.instances; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn-%04zu", i);
    SyntheticRun clean, triggered;
    for (SyntheticRun* run : {&clean, &triggered}) {
      run->triggered = run == &triggered;
      run->run_id = std::string(id) + (run->triggered ? "-triggered" : "-clean");
      for (Trajectory* t : {&run->target, &run->reference}) {
        t->query = Query{id, std::string("synthetic probe ") + id, TaskKind::QA, ""};
        t->token_probs_available = true;
        t->termination = Termination::StepBudget;
      }
    }
    for (std::size_t s = 0; s < config.steps; ++s) {
      std::vector<TokenProb> base, offset;
      for (std::size_t k = 0; k < config.pairs_per_step; ++k) {
        const double b = uniform(0.2, 0.45);
        const double e = uniform(-config.noise, config.noise);
        base.push_back({kSyntheticTargetToken, b});
        base.push_back({kSyntheticOtherToken, b});
        offset.push_back({kSyntheticTargetToken, e});
        offset.push_back({kSyntheticOtherToken, e});
      }
      for (SyntheticRun* run : {&clean, &triggered}) {
        StepRecord target, reference;
        target.step = reference.step = static_cast<std::int64_t>(s);
        for (std::size_t j = 0; j < base.size(); ++j) {
          const bool boost = run->triggered && base[j].token == kSyntheticTargetToken;
          reference.plan.token_probs.push_back(base[j]);
          target.plan.token_probs.push_back(
              {base[j].token, base[j].probability + offset[j].probability + (boost ? config.delta : 0.0)});
        }
        target.plan.step = reference.plan.step = target.step;
        run->target.records.push_back(std::move(target));
        run->reference.records.push_back(std::move(reference));
      }
    }
    runs.push_back(std::move(clean));
    runs.push_back(std::move(triggered));
  }
  return runs;
}

}  // namespace bagent
