#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "cellbp/model.hpp"
#include "cellbp/parallel.hpp"
#include "cellbp/random.hpp"
#include "cellbp/sim.hpp"
#include "fixtures.hpp"

using namespace cellbp;
using cellbp::testing::config1;

TEST(Random, DerivedSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derived_seed(42, i));
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_EQ(derived_seed(42, 7), derived_seed(42, 7));
  EXPECT_NE(derived_seed(42, 7), derived_seed(43, 7));
}

TEST(Random, UniformAndExponential) {
  Rng rng(5);
  double sum = 0.0;
  double esum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    esum += rng.exponential(4.0);
  }
  EXPECT_NEAR(sum / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(esum / n, 0.25, 4 * 0.25 / std::sqrt(n));
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
}

TEST(Parallel, CoversEveryIndexOnceAndPropagatesErrors) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, 4);
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(
                   10, [](std::size_t i) {
                     if (i == 3) throw Error(ErrorKind::InvalidArgument, "boom");
                   },
                   3),
               Error);
}

TEST(Simulate, DeterministicAndConsistent) {
  const auto p = config1();
  const auto a = simulate(p, 11);
  const auto b = simulate(p, 11);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    EXPECT_EQ(a.events[i].t, b.events[i].t);
    EXPECT_EQ(a.events[i].kind, b.events[i].kind);
  }
  EXPECT_TRUE(a.extinct());
  EXPECT_EQ(a.events.back().x, 0);
  EXPECT_EQ(trajectory_violation(a), "");
  ASSERT_TRUE(a.extinction_time().has_value());
  EXPECT_EQ(*a.extinction_time(), a.events.back().t);
  const auto c = simulate(p, 12);
  EXPECT_NE(c.events.size() == a.events.size() && c.events.back().t == a.events.back().t, true);
}

TEST(Simulate, EmptyProcess) {
  auto p = config1();
  p.s0 = 0;
  const auto t = simulate(p, 1);
  EXPECT_TRUE(t.empty());
  EXPECT_FALSE(t.extinct());
}

TEST(Simulate, TruncationIsAPrefix) {
  const auto p = config1(50);
  const auto full = simulate(p, 3);
  SimulateOptions o;
  o.t_max = 8.0;
  const auto cut = simulate(p, 3, o);
  ASSERT_LE(cut.size(), full.size());
  for (std::size_t i = 0; i < cut.size(); ++i) {
    EXPECT_EQ(cut.events[i].t, full.events[i].t);
    EXPECT_LE(cut.events[i].t, 8.0);
  }
  if (cut.size() < full.size()) {
    EXPECT_GT(full.events[cut.size()].t, 8.0);
  }
}

TEST(Simulate, EnsembleIndependentOfThreadCount) {
  const auto p = config1(40);
  const auto a = simulate_ensemble(p, 16, 99, {}, 1);
  const auto b = simulate_ensemble(p, 16, 99, {}, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    EXPECT_EQ(a[i].events.back().t, b[i].events.back().t);
    EXPECT_EQ(a[i].events.back().t, simulate(p, derived_seed(99, i)).events.back().t);
  }
  EXPECT_THROW(simulate_ensemble(p, 0, 1), Error);
}

TEST(Simulate, PureDeathSingleCellIsExponential) {
  const ModelParams p{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 0.5, 1};
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto t = simulate(p, derived_seed(8, i));
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t.events[0].kind, EventKind::SymDiff);
    sum += t.events[0].t;
  }
  EXPECT_NEAR(sum / n, 2.0, 4 * 2.0 / std::sqrt(n));
}

TEST(Simulate, OutcomeFrequenciesFollowProbabilities) {
  // Constant probabilities (c = 0).
  const ModelParams p{{0.25, 0.0, 0.0}, {0.25, 0.0, 0.0}, {0.05, 0.0, 0.0}, 1.0, 300};
  std::array<double, 5> counts{};
  double n = 0;
  for (int rep = 0; rep < 20; ++rep) {
    for (const auto& e : simulate(p, derived_seed(2, rep)).events) {
      counts[event_index(e.kind)] += 1;
      n += 1;
    }
  }
  const std::array<double, 5> expect{0, 0.25, 0.25, 0.45, 0.05};
  for (int j = 1; j <= 4; ++j) {
    const double se = std::sqrt(expect[j] * (1 - expect[j]) / n);
    EXPECT_NEAR(counts[j] / n, expect[j], 4.5 * se) << j;
  }
}

TEST(Simulate, ZeroProbabilityOutcomesNeverOccur) {
  const auto q = Probabilities{0.0, 0.5, 0.5, 0.0};
  EXPECT_EQ(detail::sample_kind(q, 0.0), EventKind::Asym);
  EXPECT_EQ(detail::sample_kind(q, std::nextafter(1.0, 0.0)), EventKind::SymDiff);
  const auto r = Probabilities{0.3, 0.7, 0.0, 0.0};
  EXPECT_EQ(detail::sample_kind(r, 1.0), EventKind::Asym);
}

TEST(Simulate, MeanMatchesClosedForm) {
  const auto p = config1(60);
  const int n = 3000;
  std::vector<double> x5(n), x15(n);
  for (int i = 0; i < n; ++i) {
    const auto t = simulate(p, derived_seed(77, i));
    x5[i] = static_cast<double>(t.counts_at(5.0).x);
    x15[i] = static_cast<double>(t.counts_at(15.0).x);
  }
  auto check = [&](const std::vector<double>& v, double t) {
    double m = 0, s2 = 0;
    for (double x : v) m += x;
    m /= n;
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= n - 1;
    EXPECT_NEAR(m, mean_count(p, t), 4 * std::sqrt(variance_count(p, t) / n)) << t;
    // Sample variance SE ~ sqrt(2/n) var for near-normal counts; allow slack.
    EXPECT_NEAR(s2, variance_count(p, t), 6 * std::sqrt(2.0 / n) * variance_count(p, t)) << t;
  };
  check(x5, 5.0);
  check(x15, 15.0);
}

TEST(Trajectory, FromChangesAndCounts) {
  const auto t = trajectory_from_changes(2, {{0.5, {1, 0, 0}}, {1.0, {0, 0, 1}}, {2.0, {-1, 2, 0}}, {3.0, {0, 1, 0}}});
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t.events[1].kind, EventKind::DudRenew);
  EXPECT_EQ(t.counts_at(0.0).x, 2);
  EXPECT_EQ(t.counts_at(0.5).x, 3);  // right-continuous
  EXPECT_EQ(t.counts_at(2.5).y, 2);
  EXPECT_EQ(t.counts_at(10.0).y, 3);
  EXPECT_EQ(t.counts_at(10.0).z, 1);
  EXPECT_EQ(t.viable_before(2), 3);
  EXPECT_EQ(t.time_before(0), 0.0);
  EXPECT_THROW(trajectory_from_changes(2, {{0.5, {2, 0, 0}}}), Error);
  EXPECT_THROW(trajectory_from_changes(2, {{0.5, {1, 0, 0}}, {0.5, {1, 0, 0}}}), Error);
  EXPECT_THROW(trajectory_from_changes(1, {{0.5, {-1, 2, 0}}, {0.7, {-1, 2, 0}}}), Error);
}

TEST(Trajectory, ProjectPartial) {
  const auto t = trajectory_from_changes(2, {{0.5, {1, 0, 0}}, {1.0, {0, 0, 1}}, {2.0, {-1, 2, 0}}, {3.0, {0, 1, 0}}});
  const auto pt = project_partial(t);
  EXPECT_EQ(pt.m0, 2);
  ASSERT_EQ(pt.size(), 4u);
  EXPECT_EQ(pt.records[0].m, 3);
  EXPECT_EQ(pt.records[1].m, 4);  // dud counted as a stem cell
  EXPECT_EQ(pt.records[2].m, 3);
  EXPECT_EQ(pt.records[3].y, 3);
  EXPECT_EQ(classify_step(1, 0), StepClass::GainStem);
  EXPECT_EQ(classify_step(0, 1), StepClass::Asym);
  EXPECT_EQ(classify_step(-1, 2), StepClass::Diff);
  EXPECT_FALSE(classify_step(0, 0).has_value());
  EXPECT_FALSE(classify_step(2, 0).has_value());
}
