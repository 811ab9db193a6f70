#include "naslab/theorem.hpp"

#include <array>
#include <ostream>
#include <random>

#include "naslab/errors.hpp"
#include "naslab/network.hpp"
#include "naslab/stats.hpp"
#include "naslab/table.hpp"

namespace naslab::theorem {

void RegressionSet::validate() const {
  if (x.rows() < 2) throw PreconditionError("regression set needs M > 1 samples");
  if (y.size() != x.rows()) throw PreconditionError("regression set has mismatched label count");
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (std::abs(n - 1.0) > 1e-12) {
      throw PreconditionError("sample " + std::to_string(i) + " has norm " + std::to_string(n) + ", expected 1");
    }
    if (std::abs(y[i]) > R) throw PreconditionError("label " + std::to_string(i) + " exceeds R");
  }
}

namespace {

Eigen::VectorXd unit_gaussian(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  do {
    for (auto& e : v) e = N(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Eigen::VectorXd initial_weights(std::size_t d, arch::InitKind kind, std::uint64_t seed) {
  ag::NetworkBuilder b({d});
  b.linear(ag::kNetworkInput, 1, false);
  auto net = std::move(b).build();
  arch::initialize(net, {kind, seed});
  const auto w = net.param(0, 0).values();
  return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

}  // namespace

RegressionSet synthetic_set(const DataOptions& options, std::uint64_t seed, Eigen::VectorXd* teacher) {
  std::mt19937_64 rng(arch::mix_seed(seed, 0x7e57));
  const auto M = static_cast<Eigen::Index>(options.samples);
  RegressionSet s;
  s.R = options.R;
  s.x.resize(M, static_cast<Eigen::Index>(options.dims));
  s.y.resize(M);
  for (Eigen::Index i = 0; i < M; ++i) s.x.row(i) = unit_gaussian(options.dims, rng).transpose();
  if (options.labels == LabelSource::Linear) {
    const Eigen::VectorXd t = options.R * unit_gaussian(options.dims, rng);
    // |t . x| can round a hair above R; the clamp keeps the set valid
    s.y = (s.x * t).cwiseMax(-options.R).cwiseMin(options.R);
    if (teacher) *teacher = t;
  } else {
    std::normal_distribution<double> N;
    Eigen::VectorXd theta(static_cast<Eigen::Index>(options.dims));
    for (auto& e : theta) e = N(rng);
    s.y = options.R * (s.x * theta).array().tanh();
    if (teacher) *teacher = theta;
  }
  s.validate();
  return s;
}

double bound(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, std::size_t M, double eta) {
  const double m = static_cast<double>(M);
  const double c = m * eta - 1.0;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) sum += sigma[j] * sigma[j] + (c * mu[j]) * (c * mu[j]);
  return 0.5 * m * sum;
}

TheoremRun run_regressor(const RegressionSet& set, const Eigen::VectorXd& a0, double eta) {
  set.validate();
  if (a0.size() != set.x.cols()) throw PreconditionError("initial weights do not match the sample dimension");
  const double M = static_cast<double>(set.samples());
  TheoremRun r;
  r.a0 = a0;
  r.eta = eta;
  const Eigen::VectorXd residual = set.x * a0 - set.y;
  r.grads = residual.asDiagonal() * set.x;
  r.mu = r.grads.colwise().mean().transpose();
  r.sigma = ((r.grads.rowwise() - r.mu.transpose()).array().square().colwise().sum() / M).sqrt().transpose();
  r.a_hat = a0 - eta * r.grads.colwise().sum().transpose();
  r.loss = 0.5 * (set.x * r.a_hat - set.y).squaredNorm();
  r.bound = bound(r.mu, r.sigma, set.samples(), eta);
  return r;
}

BoundSweep bound_sweep(const SweepOptions& options, std::uint64_t seed) {
  if (options.min_m < 2 || options.max_m < options.min_m || options.max_d < 1) {
    throw ConfigError("bound sweep needs 2 <= min_m <= max_m and max_d >= 1");
  }
  BoundSweep out;
  std::mt19937_64 rng(arch::mix_seed(seed, 0xb0));
  std::uniform_int_distribution<std::size_t> pick_m(options.min_m, options.max_m), pick_d(1, options.max_d);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N;
  for (std::size_t run = 0; run < options.runs; ++run) {
    DataOptions data;
    data.samples = pick_m(rng);
    data.dims = pick_d(rng);
    data.labels = run % 3 == 0 ? LabelSource::Linear : LabelSource::Tanh;
    const auto set = synthetic_set(data, rng());
    const double M = static_cast<double>(data.samples);
    Eigen::VectorXd a0(static_cast<Eigen::Index>(data.dims));
    const double scale = std::exp(4.0 * U(rng) - 2.0);
    for (auto& e : a0) e = scale * N(rng);
    // (0, 3/M]: 1 - U lies in (0, 1]
    const double eta = run % 2 == 0 ? 3.0 / M * (1.0 - U(rng)) : std::exp(std::log(1e-4 / M) + (1.0 - U(rng)) * std::log(3e4));
    const auto r = run_regressor(set, a0, eta);
    ++out.runs;
    const double excess = r.loss - r.bound;
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > options.slack) ++out.violations;
    const double reduced = M / 2.0 * r.sum_sigma_sq();
    const double id_err = std::abs(bound(r.mu, r.sigma, data.samples, 1.0 / M) - reduced) / std::max(1.0, reduced);
    out.max_identity_error = std::max(out.max_identity_error, id_err);
  }
  return out;
}

Fig5Report fig5_experiment(const Fig5Options& options, std::uint64_t seed) {
  const auto set = synthetic_set(options.data, seed);
  const double M = static_cast<double>(set.samples());
  const std::array<std::pair<const char*, double>, 3> etas{{{"1/(10M)", 1.0 / (10.0 * M)}, {"1", 1.0}, {"3/M", 3.0 / M}}};
  const std::array<arch::InitKind, 4> kinds{arch::InitKind::KaimingUniform, arch::InitKind::KaimingNormal,
                                            arch::InitKind::XavierUniform, arch::InitKind::XavierNormal};
  Fig5Report report;
  std::size_t run_id = 0;
  for (std::size_t e = 0; e < etas.size(); ++e) {
    std::mt19937_64 rng(arch::mix_seed(seed, 0xf5 + e));
    std::uniform_int_distribution<std::size_t> pick(0, kinds.size() - 1);
    Fig5Series series{etas[e].first, etas[e].second, 0.0, 0};
    std::vector<double> mus, losses;
    for (std::size_t i = 0; i < options.runs; ++i) {
      const auto kind = kinds[pick(rng)];
      const auto r = run_regressor(set, initial_weights(set.dims(), kind, rng()), series.eta);
      report.rows.push_back({run_id++, series.eta_label, series.eta, r.sum_mu_sq(), r.sum_sigma_sq(), r.loss, r.bound, kind});
      if (r.loss > r.bound + 1e-9 * std::max(1.0, r.bound)) ++series.bound_violations;
      mus.push_back(r.sum_mu_sq());
      losses.push_back(r.loss);
    }
    series.pearson = options.runs >= 2 ? stats::pearson_r(mus, losses) : 0.0;
    report.series.push_back(series);
  }
  return report;
}

void write_fig5_csv(const Fig5Report& report, std::ostream& out) {
  out << "run_id,eta,sum_mu_sq,sum_sigma_sq,loss,bound,init_strategy\n";
  for (const auto& r : report.rows) {
    out << r.run_id << ',' << format_number(r.eta) << ',' << format_number(r.sum_mu_sq) << ','
        << format_number(r.sum_sigma_sq) << ',' << format_number(r.loss) << ',' << format_number(r.bound) << ','
        << arch::to_string(r.init) << '\n';
  }
}

}  // namespace naslab::theorem
