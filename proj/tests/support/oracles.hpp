#pragma once

// Brute-force oracles shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "naslab/autograd.hpp"
#include "naslab/proxies.hpp"
#include "naslab/stats.hpp"

namespace naslab::testing {

inline stats::BinnedVector binned(std::vector<int> bins) {
  stats::BinnedVector b;
  b.bins = std::move(bins);
  b.n_bins = 1 + *std::max_element(b.bins.begin(), b.bins.end());
  return b;
}

// H(y | z) straight from -sum p(z, y) log(p(z, y) / p(z)).
inline double cond_entropy_oracle(const std::vector<int>& y, const std::vector<std::vector<int>>& zs) {
  std::map<std::vector<int>, double> joint, marg;
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::vector<int> z;
    for (const auto& col : zs) z.push_back(col[i]);
    marg[z] += 1.0;
    z.push_back(y[i]);
    joint[z] += 1.0;
  }
  const double n = static_cast<double>(y.size());
  double h = 0.0;
  for (const auto& [k, c] : joint) {
    std::vector<int> z(k.begin(), k.end() - 1);
    h -= (c / n) * std::log(c / marg[z]);
  }
  return h;
}

// Units of the in-window activation layers as strings of per-sample firing
// bits; the count of distinct strings.
inline std::size_t distinct_rows_oracle(const ag::ActivationCache& cache, const proxy::LayerWindow& w) {
  std::set<std::string> rows;
  for (const auto& layer : cache.layers) {
    if (!w.contains_layer(layer.depth_index, cache.network_depth)) continue;
    const std::size_t units = layer.values.numel() / cache.samples;
    for (std::size_t u = 0; u < units; ++u) {
      std::string bits;
      for (std::size_t s = 0; s < cache.samples; ++s) bits += layer.values[s * units + u] > 0.0 ? '1' : '0';
      rows.insert(bits);
    }
  }
  return rows.size();
}

// CPython's float floor division (float_floor_div in floatobject.c).
inline double python_floordiv(double vx, double wx) {
  double mod = std::fmod(vx, wx);
  double div = (vx - mod) / wx;
  if (mod != 0.0) {
    if ((wx < 0) != (mod < 0)) div -= 1.0;
  }
  if (div != 0.0) {
    double f = std::floor(div);
    if (div - f > 0.5) f += 1.0;
    return f;
  }
  return std::copysign(0.0, vx / wx);
}

// int((l / D * 100) // (100 / n_bins))
inline int percentile_expression(int l, int D, int n_bins) {
  return static_cast<int>(python_floordiv(static_cast<double>(l) / D * 100.0, 100.0 / n_bins));
}

}  // namespace naslab::testing
