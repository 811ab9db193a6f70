#include "naslab/profiler.hpp"

#include <algorithm>
#include <cmath>

#include "naslab/errors.hpp"

namespace naslab::profiling {

double Bucket::stddev() const { return count == 0 ? 0.0 : std::sqrt(std::max(0.0, m2 / static_cast<double>(count))); }

void Bucket::add(double v) {
  ++count;
  const double d = v - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (v - mean);
}

void Bucket::merge(const Bucket& o) {
  if (o.count == 0) return;
  if (count == 0) {
    count = o.count;
    mean = o.mean;
    m2 = o.m2;
    return;
  }
  const double na = static_cast<double>(count), nb = static_cast<double>(o.count), n = na + nb;
  const double d = o.mean - mean;
  mean += d * nb / n;
  m2 += o.m2 + d * d * na * nb / n;
  count += o.count;
}

std::size_t PercentileProfile::non_empty() const {
  std::size_t n = 0;
  for (const auto& b : buckets) n += !b.empty();
  return n;
}

std::uint64_t net_genotype_seed(std::uint64_t seed, std::size_t k) { return arch::mix_seed(seed, 2 * k); }
std::uint64_t net_init_seed(std::uint64_t seed, std::size_t k) { return arch::mix_seed(seed, 2 * k + 1); }

std::vector<LayerEntry> layer_entries(const ag::NetworkInstance& net, const arch::Batch& batch, std::size_t net_index,
                                      int n_bins) {
  proxy::ProxyContext ctx(net, batch.inputs, batch.labels);
  std::vector<LayerEntry> out;
  for (const auto& s : ctx.grad_stats()) {
    out.push_back({net_index, s.depth_index, net.depth(), proxy::layer_percentile(s.depth_index, net.depth(), n_bins),
                   s.inv_std_abs});
  }
  return out;
}

namespace {

PercentileProfile shell_for(const arch::SearchSpaceDef& space, const ProfileOptions& o) {
  PercentileProfile p;
  p.space_id = space.id;
  p.n_bins = o.n_bins;
  p.batch_size = o.batch_size;
  p.batch_seed = o.batch_seed;
  p.seed = o.seed;
  p.init = o.init;
  return p;
}

void check_options(const ProfileOptions& o) {
  if (o.n_nets < 2) throw ConfigError("profiling needs at least 2 networks");
  if (o.n_bins < 1) throw ConfigError("n_bins must be positive");
  if (o.batch_size < 2) throw ConfigError("profiling needs a batch of at least 2 samples");
}

std::vector<LayerEntry> collect(const arch::SearchSpaceDef& space, const ProfileOptions& o,
                                std::vector<int>* net_depths = nullptr) {
  const auto batch = arch::make_batch(space, o.batch_size, o.batch_seed);
  std::vector<LayerEntry> entries;
  for (std::size_t k = o.first_net; k < o.first_net + o.n_nets; ++k) {
    const auto g = arch::sample_genotype(space, net_genotype_seed(o.seed, k));
    const auto net = arch::instantiate(space, g, {o.init, o.shared_init ? o.seed : net_init_seed(o.seed, k)});
    if (net_depths) net_depths->push_back(net.depth());
    auto e = layer_entries(net, batch, k, o.n_bins);
    entries.insert(entries.end(), e.begin(), e.end());
  }
  if (entries.empty()) throw ConfigError("space '" + space.id + "' produced only parameterless networks");
  return entries;
}

}  // namespace

PercentileProfile profile_from_entries(const PercentileProfile& shell, const std::vector<LayerEntry>& entries,
                                       std::size_t n_nets) {
  PercentileProfile p = shell;
  p.n_nets = n_nets;
  p.buckets.assign(static_cast<std::size_t>(p.n_bins) + 1, {});
  for (int i = 0; i <= p.n_bins; ++i) p.buckets[static_cast<std::size_t>(i)].index = i;
  p.entries = entries;
  for (const auto& e : entries) p.buckets.at(static_cast<std::size_t>(e.bucket)).add(e.value);
  return p;
}

PercentileProfile profile(const arch::SearchSpaceDef& space, const ProfileOptions& options) {
  check_options(options);
  return profile_from_entries(shell_for(space, options), collect(space, options), options.n_nets);
}

PercentileProfile merge(const PercentileProfile& a, const PercentileProfile& b) {
  if (a.space_id != b.space_id || a.n_bins != b.n_bins || a.batch_size != b.batch_size ||
      a.batch_seed != b.batch_seed || a.init != b.init || a.seed != b.seed) {
    throw PreconditionError("profiles to merge differ in configuration");
  }
  PercentileProfile m = a;
  m.n_nets += b.n_nets;
  for (std::size_t i = 0; i < m.buckets.size(); ++i) m.buckets[i].merge(b.buckets[i]);
  m.entries.insert(m.entries.end(), b.entries.begin(), b.entries.end());
  return m;
}

std::vector<PercentileProfile> profile_by_depth(const arch::SearchSpaceDef& space,
                                                const std::vector<std::vector<int>>& depth_clusters,
                                                const ProfileOptions& options) {
  check_options(options);
  std::vector<int> depths;
  const auto entries = collect(space, options, &depths);
  const auto shell = shell_for(space, options);
  std::vector<PercentileProfile> out;
  for (const auto& cluster : depth_clusters) {
    std::vector<LayerEntry> picked;
    std::size_t nets = 0;
    for (std::size_t k = 0; k < depths.size(); ++k) {
      nets += std::find(cluster.begin(), cluster.end(), depths[k]) != cluster.end();
    }
    for (const auto& e : entries) {
      if (std::find(cluster.begin(), cluster.end(), e.network_depth) != cluster.end()) picked.push_back(e);
    }
    out.push_back(profile_from_entries(shell, picked, nets));
  }
  return out;
}

SpikeWindow detect_spikes(const PercentileProfile& profile, double k) {
  if (profile.non_empty() < 3) throw PreconditionError("spike detection needs at least 3 non-empty buckets");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& b : profile.buckets) {
    if (b.empty()) continue;
    sum += b.mean;
    ++n;
  }
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const auto& b : profile.buckets) {
    if (!b.empty()) var += (b.mean - mean) * (b.mean - mean);
  }
  const double sd = std::sqrt(var / static_cast<double>(n));

  SpikeWindow w;
  w.k = k;
  w.lo = 0;
  w.hi = profile.n_bins;
  w.z.assign(profile.buckets.size(), std::nullopt);
  // relative guard: a flat profile must not turn rounding noise into spikes
  const bool flat = sd <= 1e-12 * std::max(1.0, std::abs(mean));
  for (std::size_t i = 0; i < profile.buckets.size(); ++i) {
    const auto& b = profile.buckets[i];
    if (!b.empty()) w.z[i] = flat ? 0.0 : (b.mean - mean) / sd;
  }
  int best_lo = -1, best_hi = -1;
  double best_score = 0.0;
  int run_lo = -1;
  double run_score = 0.0;
  for (std::size_t i = 0; i <= w.z.size(); ++i) {
    const bool above = i < w.z.size() && w.z[i] && !flat && *w.z[i] > k;
    if (above) {
      if (run_lo < 0) {
        run_lo = static_cast<int>(i);
        run_score = 0.0;
      }
      run_score += *w.z[i];
      continue;
    }
    if (run_lo >= 0) {
      const int hi = static_cast<int>(i) - 1;
      const int len = hi - run_lo, best_len = best_hi - best_lo;
      if (best_lo < 0 || len > best_len || (len == best_len && run_score > best_score)) {
        best_lo = run_lo;
        best_hi = hi;
        best_score = run_score;
      }
      run_lo = -1;
    }
  }
  if (best_lo < 0) {
    w.no_spike = true;
  } else {
    w.lo = best_lo;
    w.hi = best_hi;
  }
  return w;
}

nlohmann::ordered_json to_json(const PercentileProfile& p, const std::optional<SpikeWindow>& window) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["space_id"] = p.space_id;
  j["n_bins"] = p.n_bins;
  j["n_nets"] = p.n_nets;
  j["batch"] = {{"size", p.batch_size}, {"seed", p.batch_seed}};
  j["buckets"] = nlohmann::ordered_json::array();
  for (const auto& b : p.buckets) {
    nlohmann::ordered_json e;
    e["index"] = b.index;
    e["count"] = b.count;
    if (b.empty()) {
      e["mean"] = nullptr;
      e["std"] = nullptr;
    } else {
      e["mean"] = b.mean;
      e["std"] = b.stddev();
    }
    j["buckets"].push_back(e);
  }
  if (window) {
    j["window"] = {{"lo", window->lo}, {"hi", window->hi}, {"no_spike", window->no_spike}};
  } else {
    j["window"] = nullptr;
  }
  j["config"] = {{"seed", p.seed}, {"init", std::string(arch::to_string(p.init))}, {"k", window ? window->k : 1.0}};
  return j;
}

PercentileProfile profile_from_json(const nlohmann::json& j) {
  try {
    if (j.value("version", 0) != 1) throw DataError("unsupported profile version");
    PercentileProfile p;
    p.space_id = j.at("space_id").get<std::string>();
    p.n_bins = j.at("n_bins").get<int>();
    p.n_nets = j.at("n_nets").get<std::size_t>();
    p.batch_size = j.at("batch").at("size").get<std::size_t>();
    p.batch_seed = j.at("batch").at("seed").get<std::uint64_t>();
    const auto& cfg = j.at("config");
    p.seed = cfg.at("seed").get<std::uint64_t>();
    const auto init = arch::parse_init_kind(cfg.at("init").get<std::string>());
    if (!init) throw DataError("unknown init strategy in profile");
    p.init = *init;
    for (const auto& e : j.at("buckets")) {
      Bucket b;
      b.index = e.at("index").get<int>();
      b.count = e.at("count").get<std::size_t>();
      if (b.count > 0) {
        b.mean = e.at("mean").get<double>();
        const double sd = e.at("std").get<double>();
        b.m2 = sd * sd * static_cast<double>(b.count);
      }
      p.buckets.push_back(b);
    }
    if (p.buckets.size() != static_cast<std::size_t>(p.n_bins) + 1) throw DataError("profile bucket count mismatch");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed profile: ") + e.what());
  }
}

std::optional<SpikeWindow> window_from_json(const nlohmann::json& j) {
  if (!j.contains("window") || j.at("window").is_null()) return std::nullopt;
  try {
    SpikeWindow w;
    const auto& x = j.at("window");
    w.lo = x.at("lo").get<int>();
    w.hi = x.at("hi").get<int>();
    w.no_spike = x.value("no_spike", false);
    if (j.contains("config")) w.k = j.at("config").value("k", 1.0);
    w.window(j.at("n_bins").get<int>()).validate();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed profile window: ") + e.what());
  }
}

}  // namespace naslab::profiling
