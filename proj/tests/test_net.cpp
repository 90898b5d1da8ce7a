#include <gtest/gtest.h>

#include <random>

#include "etcpn/net.hpp"
#include "support.hpp"

using namespace etcpn;
using etcpn::testing::benchmark_model;
using etcpn::testing::rotation;

TEST(BuildWc, MatchesPrintedBenchmarkMatrices) {
  const double c1 = 0.5, s1 = std::sqrt(3.0) / 2;  // cos, sin of pi/3
  const double c2 = -0.5, s2 = s1;                 // cos, sin of 2 pi/3
  Eigen::Matrix3d w1, w2;
  w1 << 0, 0, 0, 1, c1 - 1, s1, 0, -s1, c1 - 1;
  w2 << 0, 0, 0, 1, c2 - 1, s2, 0, -s2, c2 - 1;
  const Eigen::Vector2d B(1, 0);
  EXPECT_LE((build_wc(rotation(std::numbers::pi / 3), B) - w1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((build_wc(rotation(2 * std::numbers::pi / 3), B) - w2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BuildWc, FirstRowsAreZeroForAnyShape) {
  std::mt19937_64 rng(3);
  for (Index n : {1, 2, 4})
    for (Index p : {1, 3}) {
      const Eigen::MatrixXd A = etcpn::testing::random_matrix(n, n, rng);
      const Eigen::MatrixXd B = etcpn::testing::random_matrix(n, p, rng);
      const Eigen::MatrixXd W = build_wc(A, B);
      ASSERT_EQ(W.rows(), n + p);
      EXPECT_EQ(W.topRows(p).cwiseAbs().maxCoeff(), 0.0);
      // (I + W) [u; x] = [u; A x + B u]
      const Eigen::VectorXd m = etcpn::testing::random_matrix(n + p, 1, rng);
      const Eigen::VectorXd next = m + W * m;
      EXPECT_LE((next.head(p) - m.head(p)).norm(), 1e-12);
      EXPECT_LE((next.tail(n) - (A * m.tail(n) + B * m.head(p))).norm(), 1e-12);
    }
}

TEST(BuildWc, RejectsBadShapes) {
  EXPECT_THROW(build_wc(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 1)), DimensionError);
  EXPECT_THROW(build_wc(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 1)), DimensionError);
}

TEST(BuildWc, WithOutputPlacesProducesCx) {
  const Eigen::Matrix2d A = rotation(0.3);
  const Eigen::Vector2d B(1, 0.5);
  const Eigen::RowVector2d C(0, 1);
  const Eigen::MatrixXd W = build_wc_with_output(A, B, C);
  const Eigen::Vector4d m(0.7, 1.0, -2.0, 9.0);
  const Eigen::VectorXd next = m + W * m;
  const Eigen::Vector2d x = A * m.segment<2>(1) + B * m(0);
  EXPECT_NEAR(next(3), C * x, 1e-12);
}

TEST(ModeSelector, KroneckerOfOneHot) {
  Eigen::VectorXi md(3);
  md << 0, 1, 0;
  const Eigen::MatrixXd Z = mode_selector(md, 2);
  ASSERT_EQ(Z.rows(), 6);
  EXPECT_TRUE(Z.middleRows(2, 2).isIdentity());
  EXPECT_EQ(Z.topRows(2).cwiseAbs().sum() + Z.bottomRows(2).cwiseAbs().sum(), 0.0);
}

TEST(ModeSelector, RejectsNonOneHot) {
  EXPECT_THROW(mode_selector(Eigen::Vector3i(1, 1, 0), 2), ModeAmbiguityError);
  EXPECT_THROW(mode_selector(Eigen::Vector3i(0, 0, 0), 2), ModeAmbiguityError);
  EXPECT_THROW(mode_selector(Eigen::Vector3i(0, 2, 0), 2), ModeAmbiguityError);
  EXPECT_THROW(active_mode(Eigen::Vector2i(1, 1)), ModeAmbiguityError);
  EXPECT_EQ(active_mode(Eigen::Vector2i(0, 1)), 1);
}

TEST(ConcatBlocks, StacksColumns) {
  const std::vector<Eigen::MatrixXd> blocks = {Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Zero(2, 2)};
  const Eigen::MatrixXd W = concat_blocks(blocks);
  EXPECT_EQ(W.cols(), 4);
  EXPECT_EQ(W.leftCols(2).sum(), 4.0);
  const std::vector<Eigen::MatrixXd> bad = {Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Zero(3, 2)};
  EXPECT_THROW(concat_blocks(bad), DimensionError);
}

TEST(StepContinuous, RefreshesInputAndSelectsMode) {
  const HybridModel model = benchmark_model();
  Eigen::VectorXd mc(3);
  mc << 5.0, 1.0, 2.0;  // stale input entry is overwritten
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.25);
  for (int q = 0; q < 2; ++q) {
    Eigen::VectorXi md = Eigen::VectorXi::Zero(2);
    md(q) = 1;
    const Eigen::VectorXd next = step_continuous(mc, model.blocks.wC, md, u);
    const Eigen::Vector2d expect = model.modes[q].A * Eigen::Vector2d(1, 2) + model.modes[q].B * 0.25;
    EXPECT_NEAR(next(0), 0.25, 1e-15);
    EXPECT_LE((next.tail(2) - expect).norm(), 1e-12);
  }
}

TEST(Incidence, RecoversModeBlocksFromHybridNet) {
  const HybridModel model = benchmark_model();
  ASSERT_EQ(model.blocks.wC.size(), 2u);
  for (int q = 0; q < 2; ++q)
    EXPECT_LE((model.blocks.wC[q] - build_wc(model.modes[q].A, model.modes[q].B)).cwiseAbs().maxCoeff(), 1e-15);
  // Mode places are connected by the two guard transitions in opposite directions.
  ASSERT_EQ(model.blocks.wD.rows(), 2);
  ASSERT_EQ(model.blocks.wD.cols(), 2);
  EXPECT_EQ(model.blocks.wD(0, 0), -1);
  EXPECT_EQ(model.blocks.wD(1, 0), 1);
  EXPECT_EQ(model.blocks.wD(0, 1), 1);
  EXPECT_EQ(model.blocks.wD(1, 1), -1);
}

TEST(NetValidate, DetectsMalformedNets) {
  NetStructure net = benchmark_model().net;
  EXPECT_NO_THROW(net.validate());

  NetStructure bad = net;
  bad.pre(0, 0) = -1;
  EXPECT_THROW(bad.validate(), ModelError);

  bad = net;
  bad.pre(0, 0) = 0.5;
  EXPECT_THROW(bad.validate(), ModelError);

  bad = net;
  bad.post(2, 0) = 1.0;  // discrete transition writes into a continuous place
  EXPECT_THROW(bad.validate(), CouplingError);

  bad = net;
  bad.pre.conservativeResize(bad.pre.rows(), bad.pre.cols() - 1);
  EXPECT_THROW(bad.validate(), DimensionError);
}

TEST(StepDiscrete, EnablingAndUnderflow) {
  const HybridModel model = benchmark_model();
  const Eigen::Vector2i mode1(1, 0);
  EXPECT_EQ(step_discrete(model.net, mode1, Eigen::Vector2i(1, 0)), Eigen::Vector2i(0, 1));
  EXPECT_EQ(step_discrete(model.net, mode1, Eigen::Vector2i(0, 0)), mode1);
  EXPECT_THROW(step_discrete(model.net, mode1, Eigen::Vector2i(0, 1)), EnablingError);
  EXPECT_THROW(step_discrete(model.net, mode1, Eigen::Vector2i(2, 0)), EnablingError);
  EXPECT_THROW(step_discrete(model.net, mode1, Eigen::Vector2i(-1, 0)), EnablingError);
  EXPECT_THROW(step_discrete(model.net, Eigen::Vector3i(1, 0, 0), Eigen::Vector2i(0, 0)), DimensionError);
}

TEST(Guards, FireOnlyFromTheMarkedMode) {
  const HybridModel model = benchmark_model();
  EXPECT_EQ(guard_firings(model, Eigen::Vector2i(1, 0), Eigen::Vector2d(0.1, 0)), Eigen::Vector2i(1, 0));
  EXPECT_EQ(guard_firings(model, Eigen::Vector2i(1, 0), Eigen::Vector2d(0.0, 0)), Eigen::Vector2i(0, 0));
  EXPECT_EQ(guard_firings(model, Eigen::Vector2i(0, 1), Eigen::Vector2d(0.0, 0)), Eigen::Vector2i(0, 1));
  EXPECT_EQ(guard_firings(model, Eigen::Vector2i(0, 1), Eigen::Vector2d(0.3, 0)), Eigen::Vector2i(0, 0));
}

TEST(Guards, ConflictingGuardsAreReported) {
  auto modes = etcpn::testing::benchmark_modes();
  modes.push_back(modes[0]);
  std::vector<GuardPredicate> guards = {{0, Comparator::Greater, 0.0, 0, 1},
                                        {1, Comparator::Greater, 0.0, 0, 2}};
  const HybridModel model = make_hybrid_model(modes, guards, 0, Eigen::Vector2d::Zero());
  EXPECT_THROW(guard_firings(model, Eigen::Vector3i(1, 0, 0), Eigen::Vector2d(1, 1)), ConflictError);
  EXPECT_NO_THROW(guard_firings(model, Eigen::Vector3i(1, 0, 0), Eigen::Vector2d(1, -1)));
}

TEST(Guards, ComparatorsAtTheBoundary) {
  const Eigen::Vector2d x(1.0, 0.0);
  EXPECT_FALSE((GuardPredicate{0, Comparator::Greater, 1.0, 0, 1}.holds(x)));
  EXPECT_TRUE((GuardPredicate{0, Comparator::GreaterEqual, 1.0, 0, 1}.holds(x)));
  EXPECT_FALSE((GuardPredicate{0, Comparator::Less, 1.0, 0, 1}.holds(x)));
  EXPECT_TRUE((GuardPredicate{0, Comparator::LessEqual, 1.0, 0, 1}.holds(x)));
}

TEST(MakeHybridModel, RejectsInconsistentModes) {
  auto modes = etcpn::testing::benchmark_modes();
  auto guards = etcpn::testing::benchmark_guards();
  EXPECT_THROW(make_hybrid_model({}, guards, 0, Eigen::Vector2d::Zero()), ModelError);
  auto bad = modes;
  bad[1].C = Eigen::MatrixXd::Zero(1, 3);
  EXPECT_THROW(make_hybrid_model(bad, guards, 0, Eigen::Vector2d::Zero()), DimensionError);
  EXPECT_THROW(make_hybrid_model(modes, guards, 2, Eigen::Vector2d::Zero()), ModelError);
  EXPECT_THROW(make_hybrid_model(modes, guards, 0, Eigen::Vector3d::Zero()), DimensionError);
  EXPECT_THROW(make_hybrid_model(modes, {{0, Comparator::Greater, 0.0, 0, 0}}, 0, Eigen::Vector2d::Zero()),
               ModelError);
  EXPECT_THROW(make_hybrid_model(modes, {{5, Comparator::Greater, 0.0, 0, 1}}, 0, Eigen::Vector2d::Zero()),
               ModelError);
}

TEST(StepHybrid, MatchesDirectStateSpaceIteration) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int run = 0; run < 5; ++run) {
    const Eigen::Vector2d x0(g(rng), g(rng));
    const HybridModel model = benchmark_model(x0);
    const auto modes = etcpn::testing::benchmark_modes();
    Marking m = model.net.initial;
    Eigen::Vector2d x = x0;
    int q = 0;
    for (int k = 0; k < 60; ++k) {
      const double u = g(rng);
      if (q == 0 && x(0) > 0) q = 1;
      else if (q == 1 && x(0) <= 0) q = 0;
      x = modes[q].A * x + modes[q].B * u;
      m = step_hybrid(m, model, Eigen::VectorXd::Constant(1, u));
      ASSERT_EQ(model.mode_of(m), q);
      ASSERT_LE((model.state(m) - x).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(StepHybrid, EnabledTransitionsFollowGuards) {
  const HybridModel model = benchmark_model(Eigen::Vector2d(0.5, 0));
  const auto enabled = enabled_transitions(model.net.initial, model);
  // The guard 1 -> 2 is enabled and so are the continuous transitions of mode 1.
  bool guard = false;
  for (Index t : enabled) {
    EXPECT_NE(t, 1);
    guard = guard || t == 0;
  }
  EXPECT_TRUE(guard);
}
