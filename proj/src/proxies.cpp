#include "naslab/proxies.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "naslab/archspace.hpp"
#include "naslab/errors.hpp"

namespace naslab::proxy {

namespace {

// CPython float_floor_div.
double py_floordiv(double vx, double wx) {
  double mod = std::fmod(vx, wx);
  double div = (vx - mod) / wx;
  if (mod != 0.0) {
    if ((wx < 0) != (mod < 0)) div -= 1.0;
  }
  if (div == 0.0) return std::copysign(0.0, vx / wx);
  double floordiv = std::floor(div);
  if (div - floordiv > 0.5) floordiv += 1.0;
  return floordiv;
}

using Code = std::vector<std::uint64_t>;

// Appends one code per unit of `values` ([S, units...]).
void collect_codes(const Tensor& values, std::size_t S, std::vector<Code>& out) {
  const std::size_t units = values.numel() / S;
  const std::size_t words = (S + 63) / 64;
  const std::size_t first = out.size();
  out.resize(first + units, Code(words, 0));
  for (std::size_t s = 0; s < S; ++s) {
    const double* row = values.data() + s * units;
    const std::uint64_t bit = std::uint64_t{1} << (s % 64);
    for (std::size_t u = 0; u < units; ++u) {
      if (row[u] > 0.0) out[first + u][s / 64] |= bit;
    }
  }
}

std::size_t count_distinct(std::vector<Code>& codes) {
  std::sort(codes.begin(), codes.end());
  return static_cast<std::size_t>(std::unique(codes.begin(), codes.end()) - codes.begin());
}

double weight_sum(const ag::NetworkInstance& net, const ag::GradientRecord& rec,
                  double (*f)(double w, double g)) {
  double total = 0.0;
  for (const auto& e : rec.entries) {
    if (e.key.name != "weight") continue;
    const Tensor& w = net.node(e.key.node).params[0].value;
    for (std::size_t j = 0; j < w.numel(); ++j) total += f(w[j], e.grad[j]);
  }
  return total;
}

}  // namespace

int layer_percentile(int l, int depth, int n_bins) {
  if (depth < 1 || n_bins < 1) throw PreconditionError("layer_percentile needs depth >= 1 and n_bins >= 1");
  const double vx = static_cast<double>(l) / static_cast<double>(depth) * 100.0;
  const double wx = 100.0 / static_cast<double>(n_bins);
  return static_cast<int>(py_floordiv(vx, wx));
}

bool LayerWindow::contains_layer(int l, int depth) const {
  const int p = l < 1 ? 0 : layer_percentile(l, depth, n_bins);
  return lo <= p && p <= hi;
}

void LayerWindow::validate() const {
  if (n_bins < 1 || lo < 0 || lo > hi || hi > n_bins) {
    throw ConfigError("invalid layer window " + to_string(*this));
  }
}

std::string to_string(const LayerWindow& w) {
  if (w.is_full()) return "all";
  if (w.lo == w.hi) return std::to_string(w.lo);
  return std::to_string(w.lo) + "-" + std::to_string(w.hi);
}

LayerWindow parse_window(const std::string& text, int n_bins) {
  if (text == "all" || text == "ALL") return LayerWindow::full(n_bins);
  LayerWindow w{0, 0, n_bins};
  try {
    const auto dash = text.find('-');
    std::size_t used = 0;
    if (dash == std::string::npos) {
      w.lo = w.hi = std::stoi(text, &used);
      if (used != text.size()) throw ConfigError("");
    } else {
      w.lo = std::stoi(text.substr(0, dash), &used);
      if (used != dash) throw ConfigError("");
      const std::string rest = text.substr(dash + 1);
      w.hi = std::stoi(rest, &used);
      if (used != rest.size()) throw ConfigError("");
    }
  } catch (const std::exception&) {
    throw ConfigError("cannot parse layer window '" + text + "'");
  }
  w.validate();
  return w;
}

Term Term::bad(std::string why) { return {std::numeric_limits<double>::infinity(), true, std::move(why)}; }

bool ranks_above(double a, bool a_degenerate, std::size_t a_params, double b, bool b_degenerate,
                 std::size_t b_params) {
  if (a_degenerate != b_degenerate) return !a_degenerate;
  if (!a_degenerate && a != b) return a > b;
  return a_params < b_params;
}

std::vector<LayerGradStats> layer_grad_stats(const std::vector<ag::GradientRecord>& per_sample) {
  if (per_sample.size() < 2) throw PreconditionError("gradient statistics need at least two samples");
  const double S = static_cast<double>(per_sample.size());
  std::vector<LayerGradStats> out;
  const auto& first = per_sample.front().entries;
  for (std::size_t e = 0; e < first.size(); ++e) {
    if (first[e].key.name != "weight") continue;
    LayerGradStats st;
    st.depth_index = first[e].key.depth_index;
    st.weights = first[e].grad.numel();
    for (std::size_t j = 0; j < st.weights; ++j) {
      double sum = 0.0, sum_abs = 0.0;
      for (const auto& r : per_sample) {
        const double g = r.entries[e].grad[j];
        sum += g;
        sum_abs += std::abs(g);
      }
      const double mean = sum / S, mean_abs = sum_abs / S;
      double var = 0.0, var_abs = 0.0;
      for (const auto& r : per_sample) {
        const double g = r.entries[e].grad[j];
        var += (g - mean) * (g - mean);
        var_abs += (std::abs(g) - mean_abs) * (std::abs(g) - mean_abs);
      }
      var /= S;
      var_abs /= S;
      if (var_abs > 0.0) st.inv_std_abs += 1.0 / std::sqrt(var_abs + kEps);
      if (var > 0.0) {
        st.mu_over_sigma += std::abs(mean) / std::sqrt(var);
      } else {
        ++st.zero_variance;
      }
    }
    out.push_back(st);
  }
  return out;
}

Term lambda_layer(const LayerGradStats& s) {
  if (s.inv_std_abs == 0.0) return Term::bad("all gradient variances are zero in layer " + std::to_string(s.depth_index));
  return Term::ok(std::log(s.inv_std_abs + kEps));
}

Term mu_lambda_layer(const LayerGradStats& s) {
  if (s.zero_variance == s.weights) {
    return Term::bad("all gradient variances are zero in layer " + std::to_string(s.depth_index));
  }
  return Term::ok(std::log(s.mu_over_sigma + kEps));
}

namespace {

Term sum_layers(const std::vector<LayerGradStats>& stats, int depth, const LayerWindow* window, bool use_mu,
                const std::map<int, std::size_t>* psi) {
  double total = 0.0;
  std::size_t in_window = 0, healthy = 0;
  for (const auto& s : stats) {
    if (window && !window->contains_layer(s.depth_index, depth)) continue;
    ++in_window;
    const Term t = use_mu ? mu_lambda_layer(s) : lambda_layer(s);
    if (t.degenerate) continue;
    ++healthy;
    double weight = 1.0;
    if (psi) {
      const auto it = psi->find(s.depth_index);
      if (it != psi->end()) weight = static_cast<double>(it->second);
    }
    total += t.value * weight;
  }
  if (in_window == 0) return Term::bad("no parameterized layer in window");
  if (healthy == 0) return Term::bad("all in-window gradient variances are zero");
  return Term::ok(total);
}

int depth_of(const std::vector<ag::GradientRecord>& per_sample) {
  return per_sample.empty() ? 0 : per_sample.front().network_depth;
}

}  // namespace

Term lambda_term(const std::vector<ag::GradientRecord>& per_sample, const LayerWindow& window) {
  window.validate();
  return sum_layers(layer_grad_stats(per_sample), depth_of(per_sample), &window, false, nullptr);
}

Term psi_term(const ag::ActivationCache& cache, const LayerWindow& window) {
  window.validate();
  std::vector<Code> codes;
  bool any = false;
  for (const auto& layer : cache.layers) {
    if (!window.contains_layer(layer.depth_index, cache.network_depth)) continue;
    any = true;
    collect_codes(layer.values, cache.samples, codes);
  }
  if (!any) return Term::bad("no activation layer in window");
  return Term::ok(static_cast<double>(count_distinct(codes)));
}

std::map<int, std::size_t> psi_by_layer(const ag::ActivationCache& cache) {
  std::map<int, std::vector<Code>> by_depth;
  for (const auto& layer : cache.layers) collect_codes(layer.values, cache.samples, by_depth[layer.depth_index]);
  std::map<int, std::size_t> out;
  for (auto& [d, codes] : by_depth) out[d] = count_distinct(codes);
  return out;
}

namespace {

Term l_swag_from_stats(const std::vector<LayerGradStats>& stats, int depth, const ag::ActivationCache& cache,
                       const LSwagOptions& o) {
  o.window.validate();
  const LayerWindow* window = o.windowed ? &o.window : nullptr;
  if (o.composition == Composition::LayerWise) {
    if (!o.use_psi) return sum_layers(stats, depth, window, o.use_mu, nullptr);
    const auto psi = psi_by_layer(cache);
    return sum_layers(stats, depth, window, o.use_mu, &psi);
  }
  const Term lambda = sum_layers(stats, depth, window, o.use_mu, nullptr);
  if (lambda.degenerate || !o.use_psi) return lambda;
  const Term psi = psi_term(cache, o.windowed ? o.window : LayerWindow::full(o.window.n_bins));
  if (psi.degenerate) return psi;
  return Term::ok(lambda.value * psi.value);
}

}  // namespace

Term l_swag_term(const std::vector<ag::GradientRecord>& per_sample, const ag::ActivationCache& cache,
                 const LSwagOptions& options) {
  return l_swag_from_stats(layer_grad_stats(per_sample), depth_of(per_sample), cache, options);
}

ProxyContext::ProxyContext(const ag::NetworkInstance& net, Tensor batch, Tensor labels, ag::LossKind loss)
    : net_(&net), batch_(std::move(batch)), labels_(std::move(labels)), loss_(loss) {
  if (batch_.rank() == 0 || batch_.dim(0) == 0) throw PreconditionError("proxy batch is empty");
}

const std::vector<ag::GradientRecord>& ProxyContext::per_sample() {
  if (!per_sample_) per_sample_ = ag::per_sample_gradients(*net_, batch_, labels_, loss_);
  return *per_sample_;
}

const std::vector<LayerGradStats>& ProxyContext::grad_stats() {
  if (!stats_) stats_ = layer_grad_stats(per_sample());
  return *stats_;
}

const ag::GradientRecord& ProxyContext::batch_gradient() {
  if (!batch_grad_) batch_grad_ = ag::backward(ag::forward(*net_, batch_, labels_, loss_));
  return *batch_grad_;
}

const ag::ActivationCache& ProxyContext::activations() {
  if (!activations_) {
    activations_ = ag::forward(*net_, batch_, labels_, loss_, {.record = false}).activations();
  }
  return *activations_;
}

Term l_swag(ProxyContext& ctx, const LSwagOptions& options) {
  return l_swag_from_stats(ctx.grad_stats(), ctx.net().depth(), ctx.activations(), options);
}

Term zico(ProxyContext& ctx) {
  double total = 0.0;
  std::size_t healthy = 0;
  for (const auto& s : ctx.grad_stats()) {
    const Term t = mu_lambda_layer(s);
    if (t.degenerate) continue;
    total += t.value;
    ++healthy;
  }
  if (healthy == 0) return Term::bad("all gradient variances are zero");
  return Term::ok(total);
}

Term swap(ProxyContext& ctx) { return psi_term(ctx.activations(), LayerWindow::full()); }

Term nwot_from_codes(const std::vector<std::vector<bool>>& codes) {
  const std::size_t S = codes.size();
  if (S == 0) return Term::bad("no samples");
  const std::size_t units = codes.front().size();
  if (units == 0) return Term::bad("no activation units");
  Eigen::MatrixXd K(S, S);
  for (std::size_t a = 0; a < S; ++a) {
    for (std::size_t b = a; b < S; ++b) {
      std::size_t hamming = 0;
      for (std::size_t u = 0; u < units; ++u) hamming += codes[a][u] != codes[b][u];
      K(a, b) = K(b, a) = static_cast<double>(units - hamming);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double tol = 1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) <= tol) return Term::bad("singular activation kernel");
    logdet += std::log(ev(i));
  }
  return Term::ok(logdet);
}

Term nwot(ProxyContext& ctx) {
  const auto& cache = ctx.activations();
  const std::size_t S = cache.samples;
  std::vector<std::vector<bool>> codes(S);
  for (const auto& layer : cache.layers) {
    const std::size_t units = layer.values.numel() / S;
    for (std::size_t s = 0; s < S; ++s) {
      const double* row = layer.values.data() + s * units;
      for (std::size_t u = 0; u < units; ++u) codes[s].push_back(row[u] > 0.0);
    }
  }
  return nwot_from_codes(codes);
}

Term grad_norm(ProxyContext& ctx) {
  double total = 0.0;
  for (const auto& e : ctx.batch_gradient().entries) {
    if (e.key.name != "weight") continue;
    double sq = 0.0;
    for (double g : e.grad.values()) sq += g * g;
    total += std::sqrt(sq);
  }
  return Term::ok(total);
}

Term snip(ProxyContext& ctx) {
  return Term::ok(weight_sum(ctx.net(), ctx.batch_gradient(), [](double w, double g) { return std::abs(w * g); }));
}

Term plain(ProxyContext& ctx) {
  return Term::ok(weight_sum(ctx.net(), ctx.batch_gradient(), [](double w, double g) { return w * g; }));
}

Term synflow(const ag::NetworkInstance& net) {
  ag::NetworkInstance abs_net = net;
  for (std::size_t i = 0; i < abs_net.size(); ++i) {
    for (std::size_t slot = 0; slot < abs_net.node(i).params.size(); ++slot) {
      for (double& v : abs_net.param(i, slot).values()) v = std::abs(v);
    }
  }
  Shape shape{1};
  shape.insert(shape.end(), net.input_shape().begin(), net.input_shape().end());
  const auto pass = ag::forward(abs_net, Tensor(shape, 1.0), Tensor(), ag::LossKind::SumOutputs);
  const auto rec = ag::backward(pass);
  const double total = weight_sum(abs_net, rec, [](double w, double g) { return w * g; });
  if (!std::isfinite(total)) return Term::bad("synflow overflow");
  return Term::ok(total);
}

Term jacov(ProxyContext& ctx) {
  const std::size_t S = ctx.samples();
  if (S < 2) throw PreconditionError("jacov needs at least two samples");
  // Samples do not interact, so one backward of the summed outputs yields
  // every per-sample input Jacobian row.
  const auto pass = ag::forward(ctx.net(), ctx.batch(), Tensor(), ag::LossKind::SumOutputs);
  const Tensor J = ag::input_gradient(pass);
  const std::size_t n = J.numel() / S;
  Eigen::MatrixXd X(S, n);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t j = 0; j < n; ++j) X(s, j) = J[s * n + j];
  }
  X = X.colwise() - X.rowwise().mean();
  const Eigen::VectorXd norms = X.rowwise().norm();
  for (Eigen::Index s = 0; s < norms.size(); ++s) {
    if (!(norms(s) > 0.0)) return Term::bad("constant input Jacobian");
  }
  const Eigen::MatrixXd Z = norms.cwiseInverse().asDiagonal() * X;
  const Eigen::MatrixXd C = Z * Z.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C, Eigen::EigenvaluesOnly);
  constexpr double k = 1e-5;
  double score = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()(i);
    score += std::log(v + k) + 1.0 / (v + k);
  }
  if (!std::isfinite(score)) return Term::bad("jacov eigenvalue underflow");
  return Term::ok(-score);
}

ProxyRegistry& ProxyRegistry::instance() {
  static ProxyRegistry reg;
  return reg;
}

ProxyRegistry::ProxyRegistry() {
  fns_["l_swag"] = [](ProxyContext& c, const ProxyConfig& cfg) { return l_swag(c, cfg.l_swag); };
  fns_["zico"] = [](ProxyContext& c, const ProxyConfig&) { return zico(c); };
  fns_["swap"] = [](ProxyContext& c, const ProxyConfig&) { return swap(c); };
  fns_["nwot"] = [](ProxyContext& c, const ProxyConfig&) { return nwot(c); };
  fns_["grad_norm"] = [](ProxyContext& c, const ProxyConfig&) { return grad_norm(c); };
  fns_["snip"] = [](ProxyContext& c, const ProxyConfig&) { return snip(c); };
  fns_["plain"] = [](ProxyContext& c, const ProxyConfig&) { return plain(c); };
  fns_["synflow"] = [](ProxyContext& c, const ProxyConfig&) { return synflow(c.net()); };
  fns_["jacov"] = [](ProxyContext& c, const ProxyConfig&) { return jacov(c); };
  fns_["params"] = [](ProxyContext& c, const ProxyConfig&) {
    return Term::ok(static_cast<double>(arch::count_params(c.net())));
  };
  fns_["flops"] = [](ProxyContext& c, const ProxyConfig&) {
    return Term::ok(static_cast<double>(arch::count_flops(c.net(), c.net().input_shape())));
  };
}

void ProxyRegistry::add(const std::string& name, ProxyFn fn) {
  if (name.empty()) throw ConfigError("proxy name must not be empty");
  fns_[name] = std::move(fn);
}

bool ProxyRegistry::contains(const std::string& name) const { return fns_.count(name) > 0; }

const ProxyFn& ProxyRegistry::get(const std::string& name) const {
  const auto it = fns_.find(name);
  if (it == fns_.end()) throw ConfigError("unknown proxy '" + name + "'");
  return it->second;
}

std::vector<std::string> ProxyRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : fns_) out.push_back(name);
  return out;
}

ProxyScore evaluate(const std::string& name, ProxyContext& ctx, const ProxyConfig& config) {
  const Term t = ProxyRegistry::instance().get(name)(ctx, config);
  ProxyScore s;
  s.name = name;
  s.value = t.value;
  s.degenerate = t.degenerate;
  s.reason = t.reason;
  s.batch_size = ctx.samples();
  return s;
}

}  // namespace naslab::proxy
