#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "naslab/init.hpp"

namespace naslab::theorem {

// M unit-norm samples (rows of x) with labels bounded by R.
struct RegressionSet {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  double R = 3.0;

  std::size_t samples() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(x.cols()); }
  // PreconditionError unless M > 1, every |x_i| = 1 within 1e-12 and |y_i| <= R.
  void validate() const;
};

enum class LabelSource {
  Tanh,    // y = R tanh(theta . x), theta ~ N(0, I)
  Linear,  // y = t . x with |t| = R, so some a fits exactly
};

struct DataOptions {
  std::size_t samples = 1000;
  std::size_t dims = 64;
  double R = 3.0;
  LabelSource labels = LabelSource::Tanh;
};

// Gaussian vectors normalized to unit length. `teacher`, when given,
// receives the exact solution of a Linear set.
RegressionSet synthetic_set(const DataOptions& options, std::uint64_t seed, Eigen::VectorXd* teacher = nullptr);

// One full-batch step of plain gradient descent on L = 1/2 sum (a.x_i - y_i)^2.
struct TheoremRun {
  Eigen::VectorXd a0;
  Eigen::MatrixXd grads;  // row i is g(x_i) = x_i x_i^T a0 - y_i x_i
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;  // population convention (1/M)
  double eta = 0.0;
  Eigen::VectorXd a_hat;  // a0 - eta * sum_i g(x_i)
  double loss = 0.0;      // 1/2 sum (a_hat.x_i - y_i)^2
  double bound = 0.0;

  double sum_mu_sq() const { return mu.squaredNorm(); }
  double sum_sigma_sq() const { return sigma.squaredNorm(); }
};

TheoremRun run_regressor(const RegressionSet& set, const Eigen::VectorXd& a0, double eta);

// 1/2 M sum_j [sigma_j^2 + ((M eta - 1) mu_j)^2]
double bound(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, std::size_t M, double eta);

// Random (set, a0, eta) draws with M in [min_m, max_m], d in [1, max_d] and
// eta in (0, 3/M]: half uniform, half log-uniform over [1e-4/M, 3/M].
struct BoundSweep {
  std::size_t runs = 0;
  std::size_t violations = 0;
  double max_excess = -INFINITY;     // largest loss - bound seen
  double max_identity_error = 0.0;   // |bound(.., 1/M) - (M/2) sum sigma^2|, relative to max(1, value)
};

struct SweepOptions {
  std::size_t runs = 10000;
  std::size_t min_m = 2;
  std::size_t max_m = 64;
  std::size_t max_d = 64;
  double slack = 1e-9;
};

BoundSweep bound_sweep(const SweepOptions& options, std::uint64_t seed);

// Fixed training set, one run per initialization draw (strategy chosen
// uniformly among the Kaiming/Xavier four) and learning rate.
struct Fig5Options {
  std::size_t runs = 1000;
  DataOptions data;
};

struct Fig5Row {
  std::size_t run_id = 0;
  std::string eta_label;  // "1/(10M)", "1", "3/M"
  double eta = 0.0;
  double sum_mu_sq = 0.0;
  double sum_sigma_sq = 0.0;
  double loss = 0.0;
  double bound = 0.0;
  arch::InitKind init = arch::InitKind::KaimingUniform;
};

struct Fig5Series {
  std::string eta_label;
  double eta = 0.0;
  double pearson = 0.0;  // sum_mu_sq vs loss
  std::size_t bound_violations = 0;
};

struct Fig5Report {
  std::vector<Fig5Row> rows;
  std::vector<Fig5Series> series;
};

Fig5Report fig5_experiment(const Fig5Options& options, std::uint64_t seed);

// Header: run_id,eta,sum_mu_sq,sum_sigma_sq,loss,bound,init_strategy
void write_fig5_csv(const Fig5Report& report, std::ostream& out);

}  // namespace naslab::theorem
