#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "naslab/stats.hpp"
#include "naslab/table.hpp"

namespace naslab::libra {

enum class Binning { Ranks, Raw };

struct LibraOptions {
  double tolerance = 0.1;
  double tolerance_step = 0.1;
  double max_tolerance = 0.3;
  Binning binning = Binning::Ranks;
  std::string bias_column = "params";
  std::vector<std::string> proxies;  // empty: every table column
};

struct LibraSelection {
  std::string benchmark;
  std::optional<std::string> z1, z2, z3;
  std::map<std::string, double> rho;        // every proxy with a defined correlation
  std::map<std::string, double> ig;         // candidate band
  std::map<std::string, double> bias_gap;   // candidate band without z2
  double bias_y = 0.0;
  double tolerance = 0.1;
  bool widened = false;
  std::vector<std::string> candidates;      // band members, z1 excluded
  std::vector<std::string> skipped;         // proxies with undefined correlation

  bool complete() const { return z1 && z2 && z3; }
  std::vector<std::string> selected() const;
};

// Proxies, near-best band, min-IG z2, bias-matched z3.
LibraSelection libra_select(const ProxyTable& table, const LibraOptions& options = {});

nlohmann::ordered_json to_json(const LibraSelection& s);

// IG(y, z_i -> z_j) on the rows where all three are usable, binned per
// `binning` with Sturges' rule.
double pair_information_gain(const ProxyTable& table, const std::string& zi, const std::string& zj,
                             Binning binning);

// Average of fractional ranks; unusable entries rank lowest. Higher = better.
stats::ScoreVector rank_aggregate(const std::vector<stats::ScoreVector>& scores);

// Known proxy families for the typed ablation strategies.
bool is_gradient_based(const std::string& proxy);
bool is_gradient_free(const std::string& proxy);

struct VariantResult {
  std::string strategy;
  std::vector<std::string> proxies;
  double rho = 0.0;  // RankAve Spearman vs val_acc; NaN when no proxy could be picked
};

// Strategies: libra, best_min_ig, best_max_ig, two_grad_free, two_grad_based,
// free_plus_based, two_random, without_bias, random_z3, bias_minimization.
std::vector<std::string> variant_names();
VariantResult run_variant(const ProxyTable& table, const std::string& strategy, std::uint64_t seed,
                          const LibraOptions& options = {});
std::vector<VariantResult> ablation_variants(const ProxyTable& table, std::uint64_t seed,
                                             const LibraOptions& options = {});

// Spearman of the RankAve of the listed columns against val_acc.
double rank_average_rho(const ProxyTable& table, const std::vector<std::string>& proxies);

}  // namespace naslab::libra
