#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "naslab/network.hpp"

namespace naslab::arch {

enum class InitKind { KaimingUniform, KaimingNormal, XavierUniform, XavierNormal, Gaussian };

struct InitStrategy {
  InitKind kind = InitKind::KaimingUniform;
  std::uint64_t seed = 0;
  double gaussian_std = 0.1;  // Gaussian only
};

std::string_view to_string(InitKind kind);
std::optional<InitKind> parse_init_kind(std::string_view name);

// Fills every weight tensor per the strategy and zeroes every bias. Each
// node draws from its own stream derived from (seed, node index), so the
// result depends only on (strategy, seed, layer graph).
void initialize(ag::NetworkInstance& net, const InitStrategy& strategy);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace naslab::arch
