#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "naslab/autograd.hpp"
#include "naslab/errors.hpp"
#include "naslab/theorem.hpp"

using namespace naslab;
using namespace naslab::theorem;

namespace {

RegressionSet hand_set() {
  RegressionSet s;
  s.x = Eigen::MatrixXd::Ones(2, 1);
  s.y = Eigen::Vector2d(0.0, 2.0);
  s.R = 2.0;
  return s;
}

}  // namespace

TEST(Regressor, HandArithmeticReachesEquality) {
  const auto r = run_regressor(hand_set(), Eigen::VectorXd::Ones(1), 0.5);
  EXPECT_EQ(r.grads(0, 0), 1.0);
  EXPECT_EQ(r.grads(1, 0), -1.0);
  EXPECT_EQ(r.mu[0], 0.0);
  EXPECT_EQ(r.sigma[0], 1.0);
  EXPECT_EQ(r.a_hat[0], 1.0);
  EXPECT_EQ(r.loss, 1.0);
  EXPECT_EQ(r.bound, 1.0);
}

TEST(Regressor, PerfectFitHasZeroGradientsLossAndBound) {
  DataOptions d;
  d.samples = 20;
  d.dims = 5;
  d.labels = LabelSource::Linear;
  Eigen::VectorXd t;
  const auto set = synthetic_set(d, 3, &t);
  const auto r = run_regressor(set, t, 0.1);
  EXPECT_LT(r.grads.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((r.a_hat - t).norm(), 1e-14);
  EXPECT_LT(r.loss, 1e-26);
  EXPECT_LT(r.bound, 1e-26);
}

TEST(Regressor, UnnormalizedSamplesRejected) {
  auto s = hand_set();
  s.x(1, 0) = 1.5;
  EXPECT_THROW(run_regressor(s, Eigen::VectorXd::Ones(1), 0.5), PreconditionError);
  auto single = hand_set();
  single.x = Eigen::MatrixXd::Ones(1, 1);
  single.y = Eigen::VectorXd::Zero(1);
  EXPECT_THROW(run_regressor(single, Eigen::VectorXd::Ones(1), 0.5), PreconditionError);
}

TEST(Regressor, SeededSetAtThreeOverM) {
  const auto set = synthetic_set({50, 8, 3.0, LabelSource::Tanh}, 7);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N;
  Eigen::VectorXd a0(8);
  for (auto& e : a0) e = N(rng);
  const auto r = run_regressor(set, a0, 3.0 / 50);
  EXPECT_LE(r.loss, r.bound + 1e-9);
}

TEST(Regressor, GradientsMatchAutograd) {
  const auto set = synthetic_set({16, 6, 3.0, LabelSource::Tanh}, 11);
  ag::NetworkBuilder b({6});
  b.linear(ag::kNetworkInput, 1, false);
  auto net = std::move(b).build();
  arch::initialize(net, {arch::InitKind::XavierNormal, 5});
  const auto w = net.param(0, 0).values();
  const Eigen::VectorXd a0 = Eigen::Map<const Eigen::VectorXd>(w.data(), 6);
  Tensor x({16, 6}), y({16, 1});
  for (std::size_t i = 0; i < 16; ++i) {
    y[i] = set.y[static_cast<Eigen::Index>(i)];
    for (std::size_t j = 0; j < 6; ++j) x[i * 6 + j] = set.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const auto per = ag::per_sample_gradients(net, x, y, ag::LossKind::MSE);
  const auto r = run_regressor(set, a0, 0.1);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& g = per[i].entries.at(0).grad;
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(g[j], r.grads(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 1e-10);
    }
  }
}

TEST(Bound, ClosedForms) {
  Eigen::VectorXd mu(2), sigma(2);
  mu << 0.0, 0.0;
  sigma << 1.0, 2.0;
  EXPECT_EQ(bound(mu, sigma, 4, 0.9), 10.0);
  mu << 0.5, -1.0;
  EXPECT_EQ(bound(mu, sigma, 4, 0.25), 10.0);
  // M=4, eta=0.5: (M eta - 1)^2 = 1, sum = 1 + 4 + 0.25 + 1 = 6.25
  EXPECT_EQ(bound(mu, sigma, 4, 0.5), 12.5);
}

TEST(Bound, HoldsAcrossRandomDraws) {
  const auto s = bound_sweep({2000, 2, 64, 64, 1e-9}, 3);
  EXPECT_EQ(s.runs, 2000u);
  EXPECT_EQ(s.violations, 0u);
  EXPECT_LT(s.max_identity_error, 1e-12);
  // d = 1 sets make Cauchy-Schwarz tight
  EXPECT_GT(s.max_excess, -1e-6);
}

TEST(Fig5, LinearLabelsFromTeacherGiveZeroLoss) {
  DataOptions d{200, 16, 3.0, LabelSource::Linear};
  Eigen::VectorXd t;
  const auto set = synthetic_set(d, 4, &t);
  for (double eta : {1.0 / 2000, 1.0, 3.0 / 200}) {
    const auto r = run_regressor(set, t, eta);
    EXPECT_LT(r.sum_mu_sq(), 1e-28);
    EXPECT_LT(r.loss, 1e-24);
  }
}

TEST(Fig5, SmallExperimentCorrelatesAndWritesCsv) {
  Fig5Options o;
  o.runs = 60;
  o.data.samples = 200;
  const auto rep = fig5_experiment(o, 9);
  ASSERT_EQ(rep.series.size(), 3u);
  EXPECT_EQ(rep.rows.size(), 180u);
  for (const auto& s : rep.series) {
    EXPECT_GT(s.pearson, 0.2) << s.eta_label;
    EXPECT_EQ(s.bound_violations, 0u);
  }
  std::ostringstream csv;
  write_fig5_csv(rep, csv);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "run_id,eta,sum_mu_sq,sum_sigma_sq,loss,bound,init_strategy");
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 180u);
  std::ostringstream again;
  write_fig5_csv(fig5_experiment(o, 9), again);
  EXPECT_EQ(again.str(), csv.str());
}

TEST(Fig5, EtaOneOverMIsWithinReducedBound) {
  const auto set = synthetic_set({100, 10, 3.0, LabelSource::Tanh}, 8);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> N;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd a0(10);
    for (auto& e : a0) e = N(rng);
    const auto r = run_regressor(set, a0, 1.0 / 100);
    EXPECT_LE(r.loss, 50.0 * r.sum_sigma_sq() + 1e-9);
  }
}
