#include "naslab/libra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "naslab/errors.hpp"
#include "naslab/init.hpp"

namespace naslab::libra {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool usable(double v) { return std::isfinite(v); }

// Higher rho first, then lexicographic name.
struct ByRho {
  const std::map<std::string, double>& rho;
  bool operator()(const std::string& a, const std::string& b) const {
    if (rho.at(a) != rho.at(b)) return rho.at(a) > rho.at(b);
    return a < b;
  }
};

// argmin of key over names, ties broken by ByRho.
std::string argmin_by(const std::vector<std::string>& names, const std::map<std::string, double>& key,
                      const std::map<std::string, double>& rho) {
  std::string best = names.front();
  for (const auto& n : names) {
    const double kn = key.at(n), kb = key.at(best);
    if (kn < kb || (kn == kb && ByRho{rho}(n, best))) best = n;
  }
  return best;
}

std::string argmax_by(const std::vector<std::string>& names, const std::map<std::string, double>& key,
                      const std::map<std::string, double>& rho) {
  std::map<std::string, double> neg;
  for (const auto& n : names) neg[n] = -key.at(n);
  return argmin_by(names, neg, rho);
}

std::vector<std::string> proxy_list(const ProxyTable& t, const LibraOptions& o) {
  if (o.proxies.empty()) return t.columns;
  for (const auto& p : o.proxies) {
    if (!t.has(p)) throw ConfigError("proxy '" + p + "' is not a table column");
  }
  return o.proxies;
}

std::map<std::string, double> correlations(const ProxyTable& t, const std::vector<std::string>& names,
                                           std::vector<std::string>* skipped) {
  std::map<std::string, double> rho;
  const auto y = t.accuracy();
  for (const auto& n : names) {
    try {
      rho[n] = stats::spearman_rho(t.score(n), y).value;
    } catch (const stats::UndefinedCorrelation&) {
      if (skipped) skipped->push_back(n);
    } catch (const PreconditionError&) {
      if (skipped) skipped->push_back(n);
    }
  }
  return rho;
}

double bias_or_nan(const std::vector<double>& metric, const std::vector<double>& bias) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < metric.size(); ++i) {
    if (usable(metric[i]) && usable(bias[i])) {
      a.push_back(metric[i]);
      b.push_back(bias[i]);
    }
  }
  try {
    return stats::bias_of(a, b);
  } catch (const std::exception&) {
    return kNaN;
  }
}

std::vector<std::string> band(const std::map<std::string, double>& rho, const std::string& z1, double tol) {
  std::vector<std::string> c;
  const double r1 = rho.at(z1);
  for (const auto& [n, r] : rho) {
    if (n != z1 && r1 - tol < r && r <= r1) c.push_back(n);
  }
  std::sort(c.begin(), c.end(), ByRho{rho});
  return c;
}

}  // namespace

std::vector<std::string> LibraSelection::selected() const {
  std::vector<std::string> out;
  for (const auto* z : {&z1, &z2, &z3}) {
    if (*z) out.push_back(**z);
  }
  return out;
}

double pair_information_gain(const ProxyTable& table, const std::string& zi, const std::string& zj,
                             Binning binning) {
  const auto& a = table.column(zi);
  const auto& b = table.column(zj);
  std::vector<double> y, va, vb;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (usable(a[i]) && usable(b[i])) {
      y.push_back(table.val_acc[i]);
      va.push_back(a[i]);
      vb.push_back(b[i]);
    }
  }
  if (y.size() < 2) return kNaN;
  if (binning == Binning::Ranks) {
    y = stats::fractional_ranks(y);
    va = stats::fractional_ranks(va);
    vb = stats::fractional_ranks(vb);
  }
  const auto by = stats::bin_sturges(std::span<const double>(y));
  const auto ba = stats::bin_sturges(std::span<const double>(va));
  const auto bb = stats::bin_sturges(std::span<const double>(vb));
  return stats::information_gain(by, ba, bb);
}

LibraSelection libra_select(const ProxyTable& table, const LibraOptions& o) {
  table.validate();
  if (o.tolerance <= 0.0 || o.tolerance_step <= 0.0 || o.max_tolerance < o.tolerance) {
    throw ConfigError("invalid LIBRA tolerance settings");
  }
  const auto names = proxy_list(table, o);
  if (names.size() < 3) throw PreconditionError("LIBRA needs at least three proxies");
  if (!table.has(o.bias_column)) throw ConfigError("bias column '" + o.bias_column + "' missing from table");

  LibraSelection s;
  s.benchmark = table.benchmark;
  s.rho = correlations(table, names, &s.skipped);
  if (s.rho.empty()) return s;

  std::vector<std::string> ranked;
  for (const auto& [n, r] : s.rho) ranked.push_back(n);
  std::sort(ranked.begin(), ranked.end(), ByRho{s.rho});
  s.z1 = ranked.front();

  s.tolerance = o.tolerance;
  s.candidates = band(s.rho, *s.z1, s.tolerance);
  for (int k = 1; s.candidates.size() < 2; ++k) {
    const double next = o.tolerance + k * o.tolerance_step;
    if (next > o.max_tolerance + 1e-12) break;
    s.tolerance = next;
    s.widened = true;
    s.candidates = band(s.rho, *s.z1, s.tolerance);
  }
  if (s.candidates.empty()) return s;

  for (const auto& c : s.candidates) {
    const double ig = pair_information_gain(table, *s.z1, c, o.binning);
    s.ig[c] = std::isnan(ig) ? std::numeric_limits<double>::infinity() : ig;
  }
  s.z2 = argmin_by(s.candidates, s.ig, s.rho);

  const auto& bias = table.column(o.bias_column);
  s.bias_y = bias_or_nan(table.val_acc, bias);
  std::vector<std::string> pool;
  for (const auto& c : s.candidates) {
    if (c == *s.z2) continue;
    const double bz = bias_or_nan(table.column(c), bias);
    const double gap = std::abs(s.bias_y - bz);
    s.bias_gap[c] = std::isnan(gap) ? std::numeric_limits<double>::infinity() : gap;
    pool.push_back(c);
  }
  if (!pool.empty()) s.z3 = argmin_by(pool, s.bias_gap, s.rho);
  return s;
}

nlohmann::ordered_json to_json(const LibraSelection& s) {
  const auto opt = [](const std::optional<std::string>& z) -> nlohmann::ordered_json {
    return z ? nlohmann::ordered_json(*z) : nlohmann::ordered_json(nullptr);
  };
  const auto finite_map = [](const std::map<std::string, double>& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m) j[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
    return j;
  };
  nlohmann::ordered_json j;
  j["benchmark"] = s.benchmark;
  j["z1"] = opt(s.z1);
  j["z2"] = opt(s.z2);
  j["z3"] = opt(s.z3);
  j["rho"] = finite_map(s.rho);
  j["ig"] = finite_map(s.ig);
  j["bias_gap"] = finite_map(s.bias_gap);
  j["tolerance"] = s.tolerance;
  j["widened"] = s.widened;
  j["bias_y"] = std::isfinite(s.bias_y) ? nlohmann::ordered_json(s.bias_y) : nlohmann::ordered_json(nullptr);
  j["candidates"] = s.candidates;
  j["skipped"] = s.skipped;
  j["complete"] = s.complete();
  return j;
}

stats::ScoreVector rank_aggregate(const std::vector<stats::ScoreVector>& scores) {
  if (scores.empty()) throw PreconditionError("rank aggregation needs at least one score vector");
  const std::size_t n = scores.front().size();
  stats::ScoreVector out{scores.front().ids, std::vector<double>(n, 0.0), {}};
  for (const auto& s : scores) {
    if (s.size() != n) throw StructuralError("rank aggregation over vectors of different lengths");
    if (!s.ids.empty() && !out.ids.empty() && s.ids != out.ids) {
      throw StructuralError("rank aggregation over misaligned ids");
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = s.usable(i) ? s.values[i] : -std::numeric_limits<double>::infinity();
    const auto r = stats::fractional_ranks(v);
    for (std::size_t i = 0; i < n; ++i) out.values[i] += r[i];
  }
  for (double& v : out.values) v /= static_cast<double>(scores.size());
  return out;
}

bool is_gradient_based(const std::string& p) {
  static const std::set<std::string> names{"l_swag", "zico", "grad_norm", "snip",  "plain",
                                           "synflow", "jacov", "fisher",   "grasp", "epe_nas"};
  return names.count(p) > 0;
}

bool is_gradient_free(const std::string& p) {
  static const std::set<std::string> names{"nwot", "swap", "params", "flops", "zen", "l2_norm"};
  return names.count(p) > 0;
}

double rank_average_rho(const ProxyTable& table, const std::vector<std::string>& proxies) {
  if (proxies.empty()) return kNaN;
  std::vector<stats::ScoreVector> cols;
  for (const auto& p : proxies) cols.push_back(table.score(p));
  const auto agg = rank_aggregate(cols);
  try {
    return stats::spearman_rho(std::span<const double>(agg.values), std::span<const double>(table.val_acc));
  } catch (const stats::UndefinedCorrelation&) {
    return kNaN;
  }
}

std::vector<std::string> variant_names() {
  return {"libra",     "best_min_ig", "best_max_ig",  "two_grad_free", "two_grad_based",
          "free_plus_based", "two_random", "without_bias", "random_z3", "bias_minimization"};
}

VariantResult run_variant(const ProxyTable& table, const std::string& strategy, std::uint64_t seed,
                          const LibraOptions& o) {
  VariantResult r;
  r.strategy = strategy;
  const auto sel = libra_select(table, o);
  std::vector<std::string> by_rho;
  for (const auto& [n, v] : sel.rho) by_rho.push_back(n);
  std::sort(by_rho.begin(), by_rho.end(), ByRho{sel.rho});
  const auto top = [&](auto pred, std::size_t k) {
    std::vector<std::string> out;
    for (const auto& n : by_rho) {
      if (out.size() < k && pred(n)) out.push_back(n);
    }
    return out;
  };
  std::mt19937_64 rng(arch::mix_seed(seed, 0x11b7a));

  if (strategy == "libra") {
    r.proxies = sel.selected();
  } else if (strategy == "best_min_ig" || strategy == "without_bias") {
    if (sel.z1) r.proxies.push_back(*sel.z1);
    if (sel.z2) r.proxies.push_back(*sel.z2);
  } else if (strategy == "best_max_ig") {
    if (sel.z1) r.proxies.push_back(*sel.z1);
    if (!sel.candidates.empty()) r.proxies.push_back(argmax_by(sel.candidates, sel.ig, sel.rho));
  } else if (strategy == "two_grad_free") {
    r.proxies = top(is_gradient_free, 2);
  } else if (strategy == "two_grad_based") {
    r.proxies = top(is_gradient_based, 2);
  } else if (strategy == "free_plus_based") {
    r.proxies = top(is_gradient_free, 1);
    for (const auto& n : top(is_gradient_based, 1)) r.proxies.push_back(n);
  } else if (strategy == "two_random") {
    if (by_rho.size() >= 2) {
      auto pool = by_rho;
      std::sort(pool.begin(), pool.end());
      std::shuffle(pool.begin(), pool.end(), rng);
      r.proxies = {pool[0], pool[1]};
    }
  } else if (strategy == "random_z3") {
    if (sel.z1) r.proxies.push_back(*sel.z1);
    if (sel.z2) r.proxies.push_back(*sel.z2);
    std::vector<std::string> pool;
    for (const auto& c : sel.candidates) {
      if (c != sel.z2) pool.push_back(c);
    }
    if (!pool.empty()) {
      std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
      r.proxies.push_back(pool[d(rng)]);
    }
  } else if (strategy == "bias_minimization") {
    if (sel.z1) r.proxies.push_back(*sel.z1);
    if (sel.z2) r.proxies.push_back(*sel.z2);
    std::vector<std::string> pool;
    std::map<std::string, double> b;
    const auto& bias = table.column(o.bias_column);
    for (const auto& c : sel.candidates) {
      if (c == sel.z2) continue;
      const double v = bias_or_nan(table.column(c), bias);
      b[c] = std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
      pool.push_back(c);
    }
    if (!pool.empty()) r.proxies.push_back(argmin_by(pool, b, sel.rho));
  } else {
    throw ConfigError("unknown LIBRA variant '" + strategy + "'");
  }
  r.rho = rank_average_rho(table, r.proxies);
  return r;
}

std::vector<VariantResult> ablation_variants(const ProxyTable& table, std::uint64_t seed, const LibraOptions& o) {
  std::vector<VariantResult> out;
  for (const auto& n : variant_names()) out.push_back(run_variant(table, n, seed, o));
  return out;
}

}  // namespace naslab::libra
