#include "naslab/init.hpp"

#include <cmath>
#include <random>

namespace naslab::arch {

std::string_view to_string(InitKind kind) {
  switch (kind) {
    case InitKind::KaimingUniform: return "kaiming_uniform";
    case InitKind::KaimingNormal: return "kaiming_normal";
    case InitKind::XavierUniform: return "xavier_uniform";
    case InitKind::XavierNormal: return "xavier_normal";
    case InitKind::Gaussian: return "gaussian";
  }
  return "?";
}

std::optional<InitKind> parse_init_kind(std::string_view name) {
  for (auto k : {InitKind::KaimingUniform, InitKind::KaimingNormal, InitKind::XavierUniform, InitKind::XavierNormal,
                 InitKind::Gaussian}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL)); }

void initialize(ag::NetworkInstance& net, const InitStrategy& strategy) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& node = net.node(i);
    if (!ag::is_parameterized(node.kind)) continue;
    std::size_t fan_in = 0, fan_out = 0;
    if (node.kind == ag::LayerKind::Linear) {
      fan_in = node.attrs.in_features;
      fan_out = node.attrs.out_features;
    } else {
      const std::size_t rf = node.attrs.kernel * node.attrs.kernel;
      fan_in = node.attrs.in_channels * rf;
      fan_out = node.attrs.out_channels * rf;
    }
    std::mt19937_64 rng(mix_seed(strategy.seed, i));
    Tensor& w = net.param(i, 0);
    const auto fill_uniform = [&](double bound) {
      std::uniform_real_distribution<double> d(-bound, bound);
      for (double& v : w.values()) v = d(rng);
    };
    const auto fill_normal = [&](double stddev) {
      std::normal_distribution<double> d(0.0, stddev);
      for (double& v : w.values()) v = d(rng);
    };
    const double fi = static_cast<double>(fan_in), fo = static_cast<double>(fan_out);
    switch (strategy.kind) {
      case InitKind::KaimingUniform: fill_uniform(std::sqrt(6.0 / fi)); break;
      case InitKind::KaimingNormal: fill_normal(std::sqrt(2.0 / fi)); break;
      case InitKind::XavierUniform: fill_uniform(std::sqrt(6.0 / (fi + fo))); break;
      case InitKind::XavierNormal: fill_normal(std::sqrt(2.0 / (fi + fo))); break;
      case InitKind::Gaussian: fill_normal(strategy.gaussian_std); break;
    }
    if (node.attrs.bias) net.param(i, 1).fill(0.0);
  }
}

}  // namespace naslab::arch
