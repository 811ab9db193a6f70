#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "naslab/autograd.hpp"
#include "naslab/network.hpp"

namespace naslab::proxy {

inline constexpr double kEps = 1e-12;
inline constexpr int kPercBins = 10;

// Python's int((l / D * 100) // (100 / n_bins)), bit for bit.
int layer_percentile(int l, int depth, int n_bins = kPercBins);

// Inclusive range of percentile buckets. Bucket 0 is reachable for shallow
// layers of deep networks, so the full window is [0, n_bins].
struct LayerWindow {
  int lo = 0;
  int hi = kPercBins;
  int n_bins = kPercBins;

  static LayerWindow full(int n_bins = kPercBins) { return {0, n_bins, n_bins}; }
  bool is_full() const { return lo == 0 && hi == n_bins; }
  bool contains_layer(int l, int depth) const;
  void validate() const;

  friend bool operator==(const LayerWindow&, const LayerWindow&) = default;
};

std::string to_string(const LayerWindow& w);
// "all" or "lo-hi" / "p" per bucket.
LayerWindow parse_window(const std::string& text, int n_bins = kPercBins);

// A term value or a flagged degenerate evaluation. Degenerate values hold
// +infinity as a sentinel.
struct Term {
  double value = 0.0;
  bool degenerate = false;
  std::string reason;

  static Term ok(double v) { return {v, false, {}}; }
  static Term bad(std::string why);
};

struct ProxyScore {
  std::string name;
  std::string arch_id;
  double value = 0.0;
  bool degenerate = false;
  std::string reason;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
};

// Ordering used wherever proxy scores are ranked: finite scores above
// degenerate ones, degenerate ones ordered by fewer parameters.
bool ranks_above(double a, bool a_degenerate, std::size_t a_params, double b, bool b_degenerate,
                 std::size_t b_params);

// Gradient statistics of one parameterized layer's weight tensor (biases
// are not included) over the per-sample gradients.
struct LayerGradStats {
  int depth_index = 0;
  std::size_t weights = 0;
  std::size_t zero_variance = 0;  // weights skipped because every sample agreed
  double inv_std_abs = 0.0;       // sum of 1/sqrt(Var(|g|) + eps) over varying weights
  double mu_over_sigma = 0.0;     // sum of |mean(g)| / std(g) over weights with std(g) > 0
};

std::vector<LayerGradStats> layer_grad_stats(const std::vector<ag::GradientRecord>& per_sample);

// No-mu trainability per layer: log(inv_std_abs + eps); degenerate when the
// layer has no varying weight.
Term lambda_layer(const LayerGradStats& s);
// Mean-over-std trainability per layer: log(mu_over_sigma + eps).
Term mu_lambda_layer(const LayerGradStats& s);

// Sum of lambda_layer over in-window layers.
Term lambda_term(const std::vector<ag::GradientRecord>& per_sample, const LayerWindow& window);

// Distinct firing codes (value > 0 across the S samples) over every unit of
// the in-window activation layers.
Term psi_term(const ag::ActivationCache& cache, const LayerWindow& window);
// Distinct codes per depth index, over activation layers with that index.
std::map<int, std::size_t> psi_by_layer(const ag::ActivationCache& cache);

enum class Composition { LayerWise, Aggregate };

struct LSwagOptions {
  LayerWindow window = LayerWindow::full();
  bool use_mu = false;   // replace the no-mu trainability with mean/std
  bool windowed = true;  // false: every layer regardless of `window`
  bool use_psi = true;   // false: Psi fixed to 1
  Composition composition = Composition::LayerWise;
};

// LayerWise: sum over in-window l of Lambda_l * Psi_l, Psi_l = 1 for layers
// without an activation. Aggregate: (sum of Lambda_l) * (union of codes).
Term l_swag_term(const std::vector<ag::GradientRecord>& per_sample, const ag::ActivationCache& cache,
                 const LSwagOptions& options);

// Input batch, labels and lazily computed per-network quantities shared by
// every proxy evaluated on the same network.
class ProxyContext {
 public:
  ProxyContext(const ag::NetworkInstance& net, Tensor batch, Tensor labels,
               ag::LossKind loss = ag::LossKind::CrossEntropy);

  const ag::NetworkInstance& net() const { return *net_; }
  const Tensor& batch() const { return batch_; }
  const Tensor& labels() const { return labels_; }
  ag::LossKind loss_kind() const { return loss_; }
  std::size_t samples() const { return batch_.dim(0); }

  const std::vector<ag::GradientRecord>& per_sample();
  const std::vector<LayerGradStats>& grad_stats();
  const ag::GradientRecord& batch_gradient();
  const ag::ActivationCache& activations();

 private:
  const ag::NetworkInstance* net_;
  Tensor batch_;
  Tensor labels_;
  ag::LossKind loss_;
  std::optional<std::vector<ag::GradientRecord>> per_sample_;
  std::optional<std::vector<LayerGradStats>> stats_;
  std::optional<ag::GradientRecord> batch_grad_;
  std::optional<ag::ActivationCache> activations_;
};

struct ProxyConfig {
  LSwagOptions l_swag;
};

Term l_swag(ProxyContext& ctx, const LSwagOptions& options);
Term zico(ProxyContext& ctx);
Term swap(ProxyContext& ctx);
Term nwot(ProxyContext& ctx);
Term grad_norm(ProxyContext& ctx);
Term snip(ProxyContext& ctx);
Term plain(ProxyContext& ctx);
Term synflow(const ag::NetworkInstance& net);
Term jacov(ProxyContext& ctx);

// Log-determinant of K[a,b] = units - Hamming(code_a, code_b) for the given
// per-sample codes (rows). Degenerate when K is singular.
Term nwot_from_codes(const std::vector<std::vector<bool>>& codes);

using ProxyFn = std::function<Term(ProxyContext&, const ProxyConfig&)>;

// Name -> proxy. Built-ins: l_swag, zico, swap, nwot, grad_norm, snip,
// plain, synflow, jacov, params, flops.
class ProxyRegistry {
 public:
  static ProxyRegistry& instance();

  void add(const std::string& name, ProxyFn fn);
  bool contains(const std::string& name) const;
  const ProxyFn& get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  ProxyRegistry();
  std::map<std::string, ProxyFn> fns_;
};

ProxyScore evaluate(const std::string& name, ProxyContext& ctx, const ProxyConfig& config = {});

}  // namespace naslab::proxy
