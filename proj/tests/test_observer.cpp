#include <gtest/gtest.h>

#include <random>

#include "etcpn/observer.hpp"
#include "support.hpp"

using namespace etcpn;
using etcpn::testing::benchmark_model;

namespace {

ObserverGains gains_of(const std::vector<Eigen::MatrixXd>& L) { return ObserverGains{L, {}}; }

SimulationOptions quiet(long horizon) {
  SimulationOptions o;
  o.horizon = horizon;
  o.noise_std = 0.0;
  return o;
}

}  // namespace

TEST(ContinuousObserver, LuenbergerUpdate) {
  const auto modes = etcpn::testing::benchmark_modes();
  const Eigen::Vector2d xhat(0.3, -0.2);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.5);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 1.5);
  const Eigen::MatrixXd L = etcpn::testing::printed_gains()[0];
  const Eigen::VectorXd next = continuous_observer_step(xhat, u, y, modes[0], L);
  const Eigen::Vector2d expect = modes[0].A * xhat + modes[0].B * 0.5 + L * (1.5 - (modes[0].C * xhat)(0));
  EXPECT_LE((next - expect).norm(), 1e-15);
  EXPECT_THROW(continuous_observer_step(xhat, u, y, modes[0], Eigen::MatrixXd::Zero(1, 1)), DimensionError);
}

TEST(ContinuousObserver, IncidenceReproducesTheUpdate) {
  const auto modes = etcpn::testing::benchmark_modes();
  const Eigen::MatrixXd L = etcpn::testing::printed_gains()[1];
  const Eigen::MatrixXd W = observer_incidence(modes[1], L);
  ASSERT_EQ(W.rows(), 4);
  Eigen::Vector4d m(0.5, 1.5, 0.3, -0.2);  // [u; y; xhat]
  const Eigen::VectorXd next = m + W * m;
  const Eigen::VectorXd direct = continuous_observer_step(m.tail(2), m.head(1), m.segment(1, 1), modes[1], L);
  EXPECT_LE((next.head(2) - m.head(2)).norm(), 1e-15);
  EXPECT_LE((next.tail(2) - direct).norm(), 1e-14);
}

TEST(ContinuousObserver, ErrorFollowsClosedLoopDynamics) {
  const HybridModel model = benchmark_model(Eigen::Vector2d(1.0, -0.5));
  const auto L = etcpn::testing::printed_gains();
  const Trajectory t = simulate(model, InputSignal{}, {}, quiet(40));
  const ResidualTrace r = generate_residuals(t, gains_of(L), make_discrete_observer(model), model);
  ASSERT_EQ(r.size(), 40);
  Eigen::Vector2d e(1.0, -0.5);
  for (size_t k = 0; k < r.steps.size(); ++k) {
    EXPECT_EQ(r.steps[k].mode_est, t.steps[k].mode);
    EXPECT_LE((r.steps[k].rx - e).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(r.steps[k].ry(0), e(1), 1e-12);
    const auto& m = model.modes[static_cast<size_t>(t.steps[k].mode)];
    e = (m.A - L[static_cast<size_t>(t.steps[k].mode)] * m.C) * e;
  }
  EXPECT_LT(r.steps.back().rx.norm(), 1e-6);
}

TEST(DiscreteObserver, FullyMeasuredPassThrough) {
  const HybridModel model = benchmark_model();
  const DiscreteObserverSpec obs = make_discrete_observer(model);
  EXPECT_TRUE(obs.fully_measured());
  EXPECT_EQ(obs.E.leftCols(2), Eigen::MatrixXd::Identity(2, 2));
  EXPECT_EQ(obs.E.rightCols(2), model.blocks.wD.cast<double>());
  EXPECT_EQ(obs.A.rightCols(2), Eigen::MatrixXd::Zero(2, 2));
  EXPECT_EQ(obs.F, Eigen::MatrixXd::Zero(2, 2));
  EXPECT_EQ(obs.N, Eigen::MatrixXd::Identity(4, 4));

  const Trajectory t = simulate(model, InputSignal{}, {}, quiet(30));
  DiscreteEstimate est = initial_estimate(obs, model.net.initial.discrete);
  Eigen::VectorXi m = model.net.initial.discrete;
  for (const auto& s : t.steps) {
    est = discrete_observer_step(obs, est, obs.measure(m, s.firing));
    EXPECT_EQ(est.marking, m);
    EXPECT_EQ(est.firing, s.firing);
    EXPECT_TRUE(est.consistent);
    EXPECT_EQ(est.mismatch, 0.0);
    m = s.marking;
  }
}

TEST(DiscreteObserver, FlagsMeasurementsThatBreakConservation) {
  const HybridModel model = benchmark_model();
  const DiscreteObserverSpec obs = make_discrete_observer(model);
  DiscreteEstimate est = initial_estimate(obs, Eigen::Vector2i(1, 0));
  est = discrete_observer_step(obs, est, obs.measure(Eigen::Vector2i(1, 0), Eigen::Vector2i(0, 0)));
  // Token jumps to mode 2 although no transition fired.
  est = discrete_observer_step(obs, est, obs.measure(Eigen::Vector2i(0, 1), Eigen::Vector2i(0, 0)));
  EXPECT_FALSE(est.consistent);
  EXPECT_GT(est.mismatch, 0.5);
}

TEST(DiscreteObserver, ReconstructsMarkingFromFiringsAlone) {
  const HybridModel model = benchmark_model();
  const DiscreteObserverSpec obs = make_discrete_observer(model.blocks.wD, {}, {0, 1});
  EXPECT_FALSE(obs.fully_measured());
  EXPECT_EQ(obs.H.rows(), 2);
  const Trajectory t = simulate(model, InputSignal{}, {}, quiet(30));
  DiscreteEstimate est = initial_estimate(obs, model.net.initial.discrete);
  Eigen::VectorXi m = model.net.initial.discrete;
  for (const auto& s : t.steps) {
    est = discrete_observer_step(obs, est, obs.measure(m, s.firing));
    EXPECT_EQ(est.marking, m);
    EXPECT_EQ(est.firing, s.firing);
    m = s.marking;
  }
}

TEST(DiscreteObserver, ReconstructsMarkingFromPlacesAlone) {
  const HybridModel model = benchmark_model();
  const DiscreteObserverSpec obs = make_discrete_observer(model.blocks.wD, {0, 1}, {});
  const Trajectory t = simulate(model, InputSignal{}, {}, quiet(30));
  DiscreteEstimate est = initial_estimate(obs, model.net.initial.discrete);
  Eigen::VectorXi m = model.net.initial.discrete;
  for (const auto& s : t.steps) {
    est = discrete_observer_step(obs, est, obs.measure(m, s.firing));
    EXPECT_EQ(est.marking, m);
    m = s.marking;
  }
}

TEST(DiscreteObserver, RejectsBadMeasurementSets) {
  const Eigen::MatrixXi wD = benchmark_model().blocks.wD;
  EXPECT_THROW(make_discrete_observer(wD, {0, 0}, {}), ModelError);
  EXPECT_THROW(make_discrete_observer(wD, {2}, {}), DimensionError);
  EXPECT_THROW(make_discrete_observer(wD, {}, {-1}), DimensionError);
  const auto obs = make_discrete_observer(wD, {0}, {1});
  EXPECT_THROW(discrete_observer_step(obs, initial_estimate(obs, Eigen::Vector2i(1, 0)), Eigen::Vector3d::Zero()),
               DimensionError);
}

TEST(Residuals, ZeroWithoutFaultsOrNoise) {
  const HybridModel model = benchmark_model();
  const Trajectory t = simulate(model, InputSignal{}, {}, quiet(45));
  const ResidualTrace r =
      generate_residuals(t, gains_of(etcpn::testing::exact_gains()), make_discrete_observer(model), model);
  for (const auto& s : r.steps) {
    EXPECT_LE(s.rx.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(std::abs(s.ry(0)), 1e-12);
    EXPECT_EQ(s.rpsi_norm, 0.0);
    EXPECT_TRUE(s.discrete_consistent);
  }
}

TEST(Residuals, BlockingFaultShowsUpInTheEventResidual) {
  const HybridModel model = benchmark_model();
  const auto faults = case_schedule(1);
  const Trajectory t = simulate(model, InputSignal{}, faults, quiet(45));
  for (auto source : {ModeSource::DiscreteObserver, ModeSource::Guards}) {
    ResidualOptions opts;
    opts.mode_source = source;
    const ResidualTrace r =
        generate_residuals(t, gains_of(etcpn::testing::exact_gains()), make_discrete_observer(model), model, opts);
    double inside = 0.0, before = 0.0;
    for (long k = 0; k < 45; ++k) {
      const double v = r.steps[static_cast<size_t>(k)].rpsi_norm;
      if (k < 13) before += v;
      if (k >= 13 && k <= 17) inside += v;
    }
    EXPECT_EQ(before, 0.0);
    EXPECT_GT(inside, 0.0);
  }
}

TEST(Residuals, SensorFaultShowsUpInTheOutputResidual) {
  const HybridModel model = benchmark_model();
  FaultSpec f;
  f.kind = FaultKind::SensorAdditive;
  f.intervals = {{10, 10}};
  f.magnitude = Eigen::VectorXd::Constant(1, 0.4);
  const std::vector<FaultSpec> faults = {f};
  const Trajectory t = simulate(model, InputSignal{}, faults, quiet(20));
  const ResidualTrace r =
      generate_residuals(t, gains_of(etcpn::testing::exact_gains()), make_discrete_observer(model), model);
  EXPECT_NEAR(r.steps[10].ry(0), 0.4, 1e-12);
  EXPECT_LE(r.steps[9].rx.norm(), 1e-12);
  EXPECT_GT(r.steps[11].rx.norm(), 0.1);
}

TEST(Residuals, FeatureLayout) {
  const HybridModel model = benchmark_model();
  const Trajectory t = simulate(model, InputSignal{}, {}, quiet(10));
  const ResidualTrace r =
      generate_residuals(t, gains_of(etcpn::testing::printed_gains()), make_discrete_observer(model), model);
  const Eigen::MatrixXd a = r.features(false), b = r.features(true);
  EXPECT_EQ(a.rows(), 10);
  EXPECT_EQ(a.cols(), 3);
  EXPECT_EQ(b.cols(), 4);
  for (Index k = 0; k < 10; ++k) {
    EXPECT_EQ(a(k, 0), r.steps[static_cast<size_t>(k)].rx(0));
    EXPECT_EQ(a(k, 2), r.steps[static_cast<size_t>(k)].ry(0));
    EXPECT_EQ(b(k, 3), r.steps[static_cast<size_t>(k)].rpsi_norm);
  }
  EXPECT_EQ(ResidualTrace{}.features(true).size(), 0);
}

TEST(Residuals, ShapeChecks) {
  const HybridModel model = benchmark_model();
  const Trajectory t = simulate(model, InputSignal{}, {}, quiet(5));
  const auto obs = make_discrete_observer(model);
  EXPECT_THROW(generate_residuals(t, gains_of({etcpn::testing::printed_gains()[0]}), obs, model), DimensionError);
  ResidualOptions o;
  o.xhat0 = Eigen::Vector3d::Zero();
  EXPECT_THROW(generate_residuals(t, gains_of(etcpn::testing::printed_gains()), obs, model, o), DimensionError);
}
