#include "naslab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "naslab/errors.hpp"

namespace naslab::stats {

bool ScoreVector::usable(std::size_t i) const {
  if (!std::isfinite(values[i])) return false;
  return degenerate.empty() || !degenerate[i];
}

void ScoreVector::validate() const {
  if (!ids.empty() && ids.size() != values.size()) throw StructuralError("score vector ids and values differ in length");
  if (!degenerate.empty() && degenerate.size() != values.size()) {
    throw StructuralError("score vector flags and values differ in length");
  }
}

std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw StructuralError("correlation of vectors with different lengths");
  if (a.size() < 2) throw PreconditionError("correlation needs at least two values");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedCorrelation("correlation undefined: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  return pearson_r(ra, rb);
}

namespace {

void check_aligned(const ScoreVector& a, const ScoreVector& b) {
  a.validate();
  b.validate();
  if (a.size() != b.size()) throw StructuralError("score vectors have different lengths");
  if (!a.ids.empty() && !b.ids.empty() && a.ids != b.ids) throw StructuralError("score vectors have misaligned ids");
}

template <class F>
Correlation pairwise(const ScoreVector& a, const ScoreVector& b, F&& f) {
  check_aligned(a, b);
  std::vector<double> xa, xb;
  Correlation c;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.usable(i) && b.usable(i)) {
      xa.push_back(a.values[i]);
      xb.push_back(b.values[i]);
    } else {
      ++c.excluded;
    }
  }
  c.used = xa.size();
  c.value = f(std::span<const double>(xa), std::span<const double>(xb));
  return c;
}

}  // namespace

Correlation pearson_r(const ScoreVector& a, const ScoreVector& b) {
  return pairwise(a, b, [](auto x, auto y) { return pearson_r(x, y); });
}

Correlation spearman_rho(const ScoreVector& a, const ScoreVector& b) {
  return pairwise(a, b, [](auto x, auto y) { return spearman_rho(x, y); });
}

int sturges_bins(std::size_t n) {
  if (n == 0) return 1;
  return std::max(1, static_cast<int>(std::lround(1.0 + 3.322 * std::log10(static_cast<double>(n)))));
}

BinnedVector bin_equal_width(std::span<const double> v, int n_bins) {
  if (v.empty()) throw PreconditionError("cannot bin an empty vector");
  if (n_bins < 1) throw PreconditionError("bin count must be >= 1");
  for (double x : v) {
    if (!std::isfinite(x)) throw PreconditionError("cannot bin non-finite values");
  }
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  BinnedVector out;
  out.bins.assign(v.size(), 0);
  if (lo == hi) {
    out.n_bins = 1;
    out.constant = true;
    out.edges = {lo, hi};
    return out;
  }
  out.n_bins = n_bins;
  const double width = (hi - lo) / n_bins;
  for (int k = 0; k <= n_bins; ++k) out.edges.push_back(k == n_bins ? hi : lo + width * k);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int b = static_cast<int>((v[i] - lo) / width);
    out.bins[i] = std::clamp(b, 0, n_bins - 1);
  }
  return out;
}

BinnedVector bin_sturges(std::span<const double> v, std::optional<int> n_bins) {
  return bin_equal_width(v, n_bins.value_or(sturges_bins(v.size())));
}

BinnedVector bin_sturges(const ScoreVector& v, std::optional<int> n_bins) {
  v.validate();
  auto out = bin_sturges(std::span<const double>(v.values), n_bins);
  out.ids = v.ids;
  return out;
}

namespace {

void check_aligned(std::span<const BinnedVector* const> vars) {
  for (const auto* v : vars) {
    if (v->bins.size() != vars[0]->bins.size()) throw StructuralError("binned vectors have different lengths");
    if (!v->ids.empty() && !vars[0]->ids.empty() && v->ids != vars[0]->ids) {
      throw StructuralError("binned vectors have misaligned ids");
    }
  }
}

}  // namespace

double joint_entropy(std::span<const BinnedVector* const> vars) {
  if (vars.empty()) return 0.0;
  check_aligned(vars);
  const std::size_t n = vars[0]->bins.size();
  if (n == 0) return 0.0;
  std::map<std::vector<int>, std::size_t> counts;
  std::vector<int> key(vars.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < vars.size(); ++k) key[k] = vars[k]->bins[i];
    ++counts[key];
  }
  double h = 0.0;
  const double total = static_cast<double>(n);
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

double entropy(const BinnedVector& y) {
  const BinnedVector* v[] = {&y};
  return joint_entropy(v);
}

namespace {

// -sum p(z, y) log(c(z, y) / c(z)) with z-major keys, so a y determined by
// z gives exactly 0 and a repeated conditioning variable leaves every term
// unchanged.
double conditional_entropy_of(const BinnedVector& y, std::span<const BinnedVector* const> zs) {
  std::vector<const BinnedVector*> all(zs.begin(), zs.end());
  all.push_back(&y);
  check_aligned(all);
  const std::size_t n = y.bins.size();
  if (n == 0) return 0.0;
  std::map<std::vector<int>, std::size_t> joint, marginal;
  std::vector<int> key(zs.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < zs.size(); ++k) key[k] = zs[k]->bins[i];
    ++marginal[key];
    key.push_back(y.bins[i]);
    ++joint[key];
    key.pop_back();
  }
  double h = 0.0;
  const double total = static_cast<double>(n);
  for (const auto& [k, c] : joint) {
    const std::vector<int> z(k.begin(), k.end() - 1);
    const double cz = static_cast<double>(marginal.at(z));
    h -= static_cast<double>(c) / total * std::log(static_cast<double>(c) / cz);
  }
  return std::max(0.0, h);
}

}  // namespace

double conditional_entropy(const BinnedVector& y, const BinnedVector& z) {
  const BinnedVector* zs[] = {&z};
  return conditional_entropy_of(y, zs);
}

double conditional_entropy(const BinnedVector& y, const BinnedVector& z1, const BinnedVector& z2) {
  const BinnedVector* zs[] = {&z1, &z2};
  return conditional_entropy_of(y, zs);
}

double information_gain(const BinnedVector& y, const BinnedVector& zi, const BinnedVector& zj) {
  return conditional_entropy(y, zi) - conditional_entropy(y, zi, zj);
}

double bias_of(std::span<const double> metric, std::span<const double> bias_source) {
  return pearson_r(fractional_ranks(metric), fractional_ranks(bias_source));
}

Correlation bias_of(const ScoreVector& metric, const ScoreVector& bias_source) {
  return pairwise(metric, bias_source, [](auto x, auto y) { return bias_of(x, y); });
}

}  // namespace naslab::stats
