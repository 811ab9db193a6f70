#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "naslab/archspace.hpp"
#include "naslab/init.hpp"
#include "naslab/proxies.hpp"

namespace naslab::profiling {

// Running count/mean/M2 of one percentile bucket.
struct Bucket {
  int index = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  bool empty() const { return count == 0; }
  double stddev() const;  // population convention
  void add(double v);
  void merge(const Bucket& other);
};

// One parameterized layer of one profiled network.
struct LayerEntry {
  std::size_t net = 0;  // global net index (seed stream)
  int depth_index = 0;
  int network_depth = 0;
  int bucket = 0;
  double value = 0.0;  // sum over weights of 1/sqrt(Var(|g|) + eps)
};

struct PercentileProfile {
  std::string space_id;
  int n_bins = proxy::kPercBins;
  std::size_t n_nets = 0;
  std::size_t batch_size = 0;
  std::uint64_t batch_seed = 0;
  std::uint64_t seed = 0;
  arch::InitKind init = arch::InitKind::KaimingUniform;
  std::vector<Bucket> buckets;     // n_bins + 1 entries, index 0..n_bins
  std::vector<LayerEntry> entries;  // not persisted

  std::size_t non_empty() const;
};

struct ProfileOptions {
  std::size_t n_nets = 100;
  std::size_t first_net = 0;  // nets first_net .. first_net + n_nets - 1
  std::size_t batch_size = 64;
  std::uint64_t batch_seed = 0;
  std::uint64_t seed = 0;  // genotype and init streams
  arch::InitKind init = arch::InitKind::KaimingUniform;
  bool shared_init = false;  // every net initialized from `seed` itself
  int n_bins = proxy::kPercBins;
};

// Genotype and init seeds of net k under a profile seed.
std::uint64_t net_genotype_seed(std::uint64_t seed, std::size_t k);
std::uint64_t net_init_seed(std::uint64_t seed, std::size_t k);

// Per-layer entries of one network on the given batch.
std::vector<LayerEntry> layer_entries(const ag::NetworkInstance& net, const arch::Batch& batch, std::size_t net_index,
                                      int n_bins);

PercentileProfile profile(const arch::SearchSpaceDef& space, const ProfileOptions& options);
// Accumulates the given entries into a fresh profile shell.
PercentileProfile profile_from_entries(const PercentileProfile& shell, const std::vector<LayerEntry>& entries,
                                       std::size_t n_nets);

// Combined profile of two runs over disjoint nets of the same configuration.
PercentileProfile merge(const PercentileProfile& a, const PercentileProfile& b);

// One profile per cluster of network depths; nets whose depth falls in no
// cluster are dropped.
std::vector<PercentileProfile> profile_by_depth(const arch::SearchSpaceDef& space,
                                                const std::vector<std::vector<int>>& depth_clusters,
                                                const ProfileOptions& options);

struct SpikeWindow {
  int lo = 0;
  int hi = proxy::kPercBins;
  bool no_spike = false;
  double k = 1.0;
  std::vector<std::optional<double>> z;  // per bucket z-score of its mean; empty buckets unset

  proxy::LayerWindow window(int n_bins) const { return {lo, hi, n_bins}; }
};

// Buckets whose mean exceeds mean + k * std of the non-empty bucket means.
// Returns the longest contiguous run of such buckets (an empty bucket breaks
// a run; ties go to the larger summed z-score, then the lower index), or the
// full range flagged no_spike when no bucket qualifies.
SpikeWindow detect_spikes(const PercentileProfile& profile, double k = 1.0);

nlohmann::ordered_json to_json(const PercentileProfile& profile, const std::optional<SpikeWindow>& window = {});
PercentileProfile profile_from_json(const nlohmann::json& j);
std::optional<SpikeWindow> window_from_json(const nlohmann::json& j);

}  // namespace naslab::profiling
