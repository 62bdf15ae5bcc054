#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bagent/core/errors.hpp"
#include "bagent/probe/probe.hpp"

using namespace bagent;

namespace {

Trajectory annotated(const std::vector<std::vector<TokenProb>>& steps) {
  Trajectory t;
  t.token_probs_available = true;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    StepRecord r;
    r.step = static_cast<std::int64_t>(i);
    r.plan.token_probs = steps[i];
    t.records.push_back(r);
  }
  return t;
}

std::vector<ProbeRecord> records(const std::vector<double>& probs) {
  std::vector<ProbeRecord> out;
  for (std::size_t i = 0; i < probs.size(); ++i) out.push_back({0, static_cast<std::int64_t>(i), "t", probs[i], false});
  return out;
}

double brute_force_auroc(const std::vector<double>& s, const std::vector<bool>& l) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!l[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

}  // namespace

TEST(Collect, AnnotationsBecomeRecords) {
  auto t = annotated({{{"DROP", 0.9}, {"SELECT", 0.4}}});
  auto r = collect_token_probs(t, {"DROP"});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].token, "DROP");
  EXPECT_DOUBLE_EQ(r[0].probability, 0.9);
  EXPECT_TRUE(r[0].is_target);
  EXPECT_EQ(r[1].token, "SELECT");
  EXPECT_FALSE(r[1].is_target);
  EXPECT_EQ(r[1].position, 1);

  for (const auto& rec : collect_token_probs(t, {})) EXPECT_FALSE(rec.is_target);
  EXPECT_TRUE(collect_token_probs(annotated({{}, {}}), {"DROP"}).empty());
}

TEST(Collect, MissingProbabilitiesAreUnsupported) {
  Trajectory t = annotated({{{"DROP", 0.9}}});
  t.token_probs_available = false;
  EXPECT_THROW(collect_token_probs(t, {"DROP"}), UnsupportedError);
}

TEST(Gap, PartitionMeans) {
  std::vector<ProbeRecord> r{{0, 0, "a", 0.9, true}, {0, 1, "b", 0.7, true}, {0, 2, "c", 0.4, false}};
  auto g = target_gap(r);
  EXPECT_NEAR(*g.mean_target, 0.80, 1e-12);
  EXPECT_NEAR(*g.mean_nontarget, 0.40, 1e-12);
  auto only = target_gap(std::vector<ProbeRecord>{{0, 0, "a", 0.5, true}});
  EXPECT_FALSE(only.mean_nontarget);
}

TEST(Score, Examples) {
  auto same = records({0.3, 0.5, 0.1});
  EXPECT_DOUBLE_EQ(*score_trajectory(same, same).suspicion, 0.0);
  EXPECT_NEAR(*score_trajectory(records({0.4, 0.6, 0.2}), same).suspicion, 0.1, 1e-12);
  auto mixed = score_trajectory(records({0.6, 0.3, 0.2}), same);
  EXPECT_NEAR(*mixed.suspicion, 0.4 / 3.0, 1e-12);
  EXPECT_EQ(mixed.aligned, 3u);
  EXPECT_EQ(mixed.unaligned, 0u);
}

TEST(Score, UnalignedTailsAreCounted) {
  auto s = score_trajectory(records({0.5, 0.5, 0.5, 0.5}), records({0.25, 0.5}));
  EXPECT_EQ(s.aligned, 2u);
  EXPECT_EQ(s.unaligned, 2u);
  EXPECT_NEAR(*s.suspicion, 0.125, 1e-12);
  EXPECT_FALSE(score_trajectory(records({0.5}), {}).suspicion);
}

TEST(Roc, Examples) {
  EXPECT_DOUBLE_EQ(roc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, {true, true, false, false}).auroc, 1.0);
  EXPECT_DOUBLE_EQ(roc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, {true, false, true, false}).auroc, 0.5);
  EXPECT_DOUBLE_EQ(roc(std::vector<double>{0.9, 0.4, 0.6, 0.1}, {true, true, false, false}).auroc, 0.75);
  auto c = roc(std::vector<double>{0.9, 0.1}, {true, false});
  EXPECT_EQ(c.points.front(), std::make_pair(0.0, 0.0));
  EXPECT_EQ(c.points.back(), std::make_pair(1.0, 1.0));
}

TEST(Roc, Errors) {
  EXPECT_THROW(roc(std::vector<double>{0.1}, {true, false}), Error);
  EXPECT_THROW(roc(std::vector<double>{0.1, 0.2}, {true, true}), Error);
}

TEST(Property, RocMatchesPairwiseOracle) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<double> s(n);
    std::vector<bool> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 12) / 11.0;
      l[i] = rng() % 2;
    }
    l[0] = true;
    l[1] = false;
    auto c = roc(s, l);
    ASSERT_NEAR(c.auroc, brute_force_auroc(s, l), 1e-12);
    ASSERT_GE(c.auroc, 0.0);
    ASSERT_LE(c.auroc, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      ASSERT_GE(c.points[i].first, c.points[i - 1].first);
      ASSERT_GE(c.points[i].second, c.points[i - 1].second);
    }

    std::vector<bool> flipped(n);
    for (std::size_t i = 0; i < n; ++i) flipped[i] = !l[i];
    ASSERT_NEAR(roc(s, flipped).auroc, 1.0 - c.auroc, 1e-12);

    std::vector<double> transformed(n);
    for (std::size_t i = 0; i < n; ++i) transformed[i] = std::exp(3.0 * s[i]) - 7.0;
    ASSERT_NEAR(roc(transformed, l).auroc, c.auroc, 1e-12);
  }
}

TEST(Synthetic, GapEqualsBoost) {
  for (double delta : {0.0, 0.2}) {
    SyntheticProbeConfig cfg;
    cfg.instances = 20;
    cfg.delta = delta;
    for (const auto& run : synthesize_probe_runs(cfg)) {
      auto g = target_gap(collect_token_probs(run.target, {kSyntheticTargetToken}));
      const double expected = run.triggered ? delta : 0.0;
      ASSERT_NEAR(*g.mean_target - *g.mean_nontarget, expected, 1e-9) << run.run_id;
      auto ref = target_gap(collect_token_probs(run.reference, {kSyntheticTargetToken}));
      ASSERT_NEAR(*ref.mean_target, *ref.mean_nontarget, 1e-9);
    }
  }
}

TEST(Synthetic, ProbabilitiesStayInRangeAndAreSeeded) {
  SyntheticProbeConfig cfg;
  cfg.noise = 0.2;
  cfg.delta = 0.3;
  auto a = synthesize_probe_runs(cfg);
  ASSERT_EQ(a.size(), 200u);
  for (const auto& run : a) {
    for (const auto& r : run.target.records) {
      for (const auto& tp : r.plan.token_probs) {
        ASSERT_GE(tp.probability, 0.0);
        ASSERT_LE(tp.probability, 1.0);
      }
    }
  }
  auto b = synthesize_probe_runs(cfg);
  EXPECT_EQ(a[7].target.records, b[7].target.records);
  cfg.seed = 1;
  EXPECT_NE(synthesize_probe_runs(cfg)[7].target.records, a[7].target.records);
  cfg.delta = 0.5;
  EXPECT_THROW(synthesize_probe_runs(cfg), ConfigError);
}

TEST(Synthetic, SeparationGrowsWithBoost) {
  auto auroc_for = [](double delta) {
    SyntheticProbeConfig cfg;
    cfg.delta = delta;
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const auto& run : synthesize_probe_runs(cfg)) {
      auto t = collect_token_probs(run.target, {kSyntheticTargetToken});
      auto r = collect_token_probs(run.reference, {kSyntheticTargetToken});
      scores.push_back(*score_trajectory(t, r).suspicion);
      labels.push_back(run.triggered);
    }
    return roc(scores, labels).auroc;
  };
  EXPECT_NEAR(auroc_for(0.0), 0.5, 1e-12);
  EXPECT_GT(auroc_for(0.02), 0.5);
  EXPECT_DOUBLE_EQ(auroc_for(0.4), 1.0);
}

TEST(Synthetic, UnitIntervalBounds) {
  EXPECT_DOUBLE_EQ(unit_interval(0), 0.0);
  EXPECT_LT(unit_interval(~0ULL), 1.0);
}
