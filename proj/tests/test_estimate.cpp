#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cellbp/estimate.hpp"
#include "cellbp/stats.hpp"
#include "fixtures.hpp"

using namespace cellbp;
using cellbp::testing::config1;
using cellbp::testing::no_dud;
using cellbp::testing::rel_err;

TEST(Transform, RoundTrip) {
  const auto th = ThetaVector::from_params(config1());
  const auto back = transform_from_unconstrained(transform_to_unconstrained(th));
  for (std::size_t j = 0; j < kNumParams; ++j) EXPECT_NEAR(back[j], th[j], 1e-12) << kParamNames[j];
}

TEST(Transform, EqualSimplexPointGivesEqualLogits) {
  ThetaVector th = ThetaVector::from_params(config1());
  th.values[kP1] = th.values[kP2] = th.values[kP4] = 0.25;
  const auto z = transform_to_unconstrained(th);
  EXPECT_DOUBLE_EQ(z[0], z[1]);
  EXPECT_DOUBLE_EQ(z[1], z[2]);
  EXPECT_NEAR(z[0], 0.0, 1e-15);
}

TEST(Transform, AnyVectorMapsToValidParameters) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    Vector z(kNumParams);
    for (auto& v : z) v = rng.uniform(-40.0, 40.0);
    const auto th = transform_from_unconstrained(z);
    ASSERT_EQ(th.to_params(10).violation(), "") << i;
  }
}

TEST(Transform, BoundaryValuesAreRejected) {
  auto th = ThetaVector::from_params(config1());
  th.values[kP2] = 0.0;
  EXPECT_THROW(transform_to_unconstrained(th), Error);
  th = ThetaVector::from_params(config1());
  th.values[kC1] = 0.0;
  EXPECT_THROW(transform_to_unconstrained(th), Error);
  th = ThetaVector::from_params(config1());
  th.values[kP1] = 0.65;  // p1 + p2 + p4 = 1
  EXPECT_THROW(transform_to_unconstrained(th), Error);
}

TEST(Transform, PinsAndChainRule) {
  Pins pins{};
  pins[kP4] = 0.1;
  pins[kR] = 0.3;
  const ParameterTransform tr(pins);
  EXPECT_EQ(tr.dimension(), 8u);
  EXPECT_NEAR(tr.free_mass(), 0.9, 1e-15);
  auto th = ThetaVector::from_params(config1());
  th.values[kP4] = 0.1;
  th.values[kR] = 0.3;
  const auto z = tr.to_unconstrained(th);
  const auto back = tr.from_unconstrained(z);
  for (std::size_t j = 0; j < kNumParams; ++j) EXPECT_NEAR(back[j], th[j], 1e-12);

  // d/dz of a smooth function of theta against finite differences.
  auto f = [](const ThetaVector& t) {
    return std::sin(3 * t[kP1]) + t[kP2] * t[kP2] + std::log(t[kC1]) * t[kM2] + t[kC4] * t[kM1];
  };
  Gradient g{};
  g[kP1] = 3 * std::cos(3 * th[kP1]);
  g[kP2] = 2 * th[kP2];
  g[kC1] = th[kM2] / th[kC1];
  g[kM2] = std::log(th[kC1]);
  g[kC4] = th[kM1];
  g[kM1] = th[kC4];
  const auto dz = tr.chain_gradient(th, g);
  for (std::size_t i = 0; i < z.size(); ++i) {
    Vector a = z, b = z;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const double fd = (f(tr.from_unconstrained(a)) - f(tr.from_unconstrained(b))) / 2e-6;
    EXPECT_NEAR(dz[i], fd, 1e-7 * (1 + std::abs(fd))) << i;
  }
}

TEST(DifferentialEvolution, FindsQuadraticMaximumDeterministically) {
  auto f = [](const Vector& x) { return -((x[0] - 1) * (x[0] - 1) + 4 * (x[1] + 2) * (x[1] + 2) + x[2] * x[2]); };
  DEConfig cfg;
  cfg.seed = 5;
  const auto a = differential_evolution(f, {-5, -5, -5}, {5, 5, 5}, cfg);
  const auto b = differential_evolution(f, {-5, -5, -5}, {5, 5, 5}, cfg);
  EXPECT_NEAR(a.best[0], 1.0, 1e-3);
  EXPECT_NEAR(a.best[1], -2.0, 1e-3);
  EXPECT_NEAR(a.best[2], 0.0, 1e-3);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.trace, b.trace);
  for (std::size_t i = 1; i < a.trace.size(); ++i) EXPECT_GE(a.trace[i], a.trace[i - 1]);
  cfg.population = 3;
  EXPECT_THROW(differential_evolution(f, {-5, -5, -5}, {5, 5, 5}, cfg), Error);
  cfg.population = 60;
  cfg.threads = 4;
  EXPECT_EQ(differential_evolution(f, {-5, -5, -5}, {5, 5, 5}, cfg).best, a.best);
}

TEST(Bfgs, Rosenbrock) {
  auto vg = [](const Vector& x) -> std::pair<double, Vector> {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    return {-(a * a + 100 * b * b), {-(-2 * a - 400 * x[0] * b), -(200 * b)}};
  };
  const auto r = bfgs_maximize(vg, {-1.2, 1.0});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], 1.0, 1e-5);
  EXPECT_GE(r.value, vg({-1.2, 1.0}).first);
}

TEST(FitFull, DeterministicAndNearTruth) {
  const auto p = config1();
  const auto traj = simulate(p, derived_seed(2024, 3));
  FitConfig cfg;
  cfg.de.seed = 8;
  const auto a = fit_full(traj, cfg);
  const auto b = fit_full(traj, cfg);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_EQ(a.loglik, b.loglik);
  EXPECT_EQ(a.theta_hat.to_params(200).violation(), "");
  EXPECT_GE(a.loglik, full_loglik(ThetaVector::from_params(p), traj));
  EXPECT_GE(a.loglik, a.de_loglik);
  EXPECT_EQ(a.theta_hat[kR], rate_mle(traj));
  EXPECT_NEAR(a.theta_hat[kP1], 0.55, 0.08);
  EXPECT_NEAR(a.theta_hat[kM2], 12.0, 3.0);
  EXPECT_LT(a.gradient_norm_at_opt, 1e-4 * (1 + std::abs(a.loglik)));
}

TEST(FitFull, DifferentiationOnlyDataDrivesOtherProbabilitiesDown) {
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 5; ++i) trajs.push_back(trajectory_from_changes(1, {{1.0 + i, {-1, 2, 0}}}));
  FitConfig cfg;
  cfg.de.generations = 100;
  const auto fr = fit_full(trajs, cfg);
  for (auto j : {kP1, kP2, kP4}) EXPECT_LT(fr.theta_hat[j], 2e-3) << kParamNames[j];
}

TEST(FitFull, NoEvents) {
  std::vector<Trajectory> empty{Trajectory{3, {}}};
  try {
    fit_full(empty, FitConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoEvents);
  }
  std::vector<PartialTrajectory> pe{PartialTrajectory{3, {}}};
  EXPECT_THROW(fit_forward(pe, FitConfig{}), Error);
}

TEST(FitForward, PinnedDudsAgreeWithFullFit) {
  const auto p = no_dud(120);
  const auto traj = simulate(p, 21);
  FitConfig cfg;
  cfg.pins[kP4] = 0.0;
  cfg.de.seed = 4;
  const auto full = fit_full(traj, cfg);
  const auto fwd = fit_forward(project_partial(traj), cfg);
  EXPECT_EQ(fwd.theta_hat[kC4], 0.0);
  EXPECT_EQ(fwd.theta_hat[kM4], 0.0);
  for (std::size_t j = 0; j < kNumParams; ++j) {
    EXPECT_NEAR(fwd.theta_hat[j], full.theta_hat[j], 1e-3 * std::max(1.0, std::abs(full.theta_hat[j])))
        << kParamNames[j];
  }
  EXPECT_NEAR(fwd.loglik, full.loglik, 1e-6 * std::abs(full.loglik));
}

TEST(FitForward, BfgsNeverLowersTheDeValue) {
  const auto p = config1(40);
  const auto pt = project_partial(simulate(p, 5));
  FitConfig cfg;
  cfg.de.generations = 40;
  const auto fr = fit_forward(pt, cfg);
  EXPECT_GE(fr.loglik, fr.de_loglik);
  EXPECT_EQ(fr.theta_hat.to_params(40).violation(), "");
  EXPECT_EQ(fr.trace.size(), fr.generations_used + 1);
}

TEST(FitConfig, RejectsEmptyBox) {
  FitConfig cfg;
  cfg.bounds.lower[kC1] = 1.0;
  cfg.bounds.upper[kC1] = 0.5;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(PredictCounts, InitialStateAndConservation) {
  const auto th = ThetaVector::from_params(config1());
  const std::vector<double> times{10.0, 0.0, 5.0, 25.0};
  const auto pc = predict_counts(th, 200, times);
  EXPECT_EQ(pc.x[1], 200.0);
  EXPECT_EQ(pc.z[1], 0.0);
  EXPECT_EQ(pc.m[1], 200.0);
  EXPECT_EQ(pc.y[1], 0.0);
  const auto mp = th.to_params(200);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double events = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double u) { return mp.r * mean_count(mp, u); }, 0.0, times[i], 15, 1e-13);
    EXPECT_LT(std::abs(pc.x[i] + pc.y[i] + pc.z[i] - 200.0 - events), 1e-6 * std::max(1.0, events)) << times[i];
    EXPECT_DOUBLE_EQ(pc.m[i], pc.x[i] + pc.z[i]);
  }
}

TEST(PredictCounts, NoDudsMeansNoDudCounts) {
  const auto th = ThetaVector::from_params(no_dud());
  const auto pc = predict_counts(th, 60, uniform_grid(30.0, 7));
  for (double z : pc.z) EXPECT_EQ(z, 0.0);
}

TEST(Consistency, MorePooledDataDoesNotWorsenMedianError) {
  const auto p = config1(20);
  FitConfig cfg;
  cfg.de.generations = 120;
  std::vector<double> err25, err50;
  for (int rep = 0; rep < 20; ++rep) {
    const auto trajs = simulate_ensemble(p, 50, derived_seed(555, rep));
    cfg.de.seed = derived_seed(556, rep);
    const auto a = fit_full(std::span<const Trajectory>(trajs.data(), 25), cfg);
    const auto b = fit_full(std::span<const Trajectory>(trajs.data(), 50), cfg);
    err25.push_back(std::abs(a.theta_hat[kP1] - 0.55));
    err50.push_back(std::abs(b.theta_hat[kP1] - 0.55));
  }
  EXPECT_LE(median(err50), median(err25));
}
