#include "naslab/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "naslab/errors.hpp"
#include "naslab/libra.hpp"
#include "naslab/stats.hpp"

namespace naslab::bench {

RunSeeds run_seeds(std::uint64_t master, std::size_t run) {
  const std::uint64_t r = arch::mix_seed(master, 0x7275 + run);
  return {arch::mix_seed(r, 1), arch::mix_seed(r, 2), arch::mix_seed(r, 3)};
}

std::uint64_t genotype_init_seed(std::uint64_t run_init_seed, const arch::ArchGenotype& g) {
  return arch::mix_seed(run_init_seed, g.hash());
}

std::vector<arch::ArchGenotype> sample_distinct(const arch::SearchSpaceDef& space, std::size_t n, std::uint64_t seed) {
  const double size = space.size();
  if (static_cast<double>(n) >= size) return arch::enumerate_space(space);
  std::vector<arch::ArchGenotype> out;
  std::set<std::string> seen;
  const std::size_t max_attempts = 50 * n + 1000;
  for (std::size_t i = 0; out.size() < n && i < max_attempts; ++i) {
    auto g = arch::sample_genotype(space, arch::mix_seed(seed, i));
    if (seen.insert(arch::serialize(g)).second) out.push_back(std::move(g));
  }
  if (out.size() < n) {
    // n is close to the space size: shuffle the enumeration instead
    auto all = arch::enumerate_space(space);
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(n);
    return all;
  }
  return out;
}

namespace {

struct ArchEval {
  std::vector<proxy::Term> terms;
  std::size_t params = 0;
  std::size_t flops = 0;
};

proxy::Term run_proxy(const std::string& name, const arch::SearchSpaceDef& space, const arch::ArchGenotype& g,
                      proxy::ProxyContext& ctx, const proxy::ProxyConfig& config) {
  if (name == kOracle) return proxy::Term::ok(arch::synthetic_accuracy(space, g));
  return proxy::ProxyRegistry::instance().get(name)(ctx, config);
}

ArchEval evaluate_arch(const arch::SearchSpaceDef& space, const arch::ArchGenotype& g, const arch::Batch& batch,
                       const arch::InitStrategy& init, const std::vector<std::string>& proxies,
                       const proxy::ProxyConfig& config) {
  const auto net = arch::instantiate(space, g, init);
  proxy::ProxyContext ctx(net, batch.inputs, batch.labels);
  ArchEval e;
  e.params = arch::count_params(net);
  e.flops = arch::count_flops(net, space.input_shape);
  for (const auto& p : proxies) e.terms.push_back(run_proxy(p, space, g, ctx, config));
  return e;
}

void check_proxy_names(const std::vector<std::string>& proxies) {
  for (const auto& p : proxies) {
    if (p != kOracle && !proxy::ProxyRegistry::instance().contains(p)) throw ConfigError("unknown proxy '" + p + "'");
  }
}

// NaN when fewer than two rows are usable or either side is constant.
stats::Correlation rho_vs(const std::vector<double>& scores, const std::vector<double>& y) {
  stats::Correlation c;
  for (std::size_t i = 0; i < scores.size(); ++i) c.excluded += !std::isfinite(scores[i]) || !std::isfinite(y[i]);
  c.used = scores.size() - c.excluded;
  c.value = NAN;
  if (c.used < 2) return c;
  try {
    return stats::spearman_rho(stats::ScoreVector{{}, scores, {}}, stats::ScoreVector{{}, y, {}});
  } catch (const stats::UndefinedCorrelation&) {
    return c;
  }
}

double value_or_nan(const proxy::Term& t) { return t.degenerate ? NAN : t.value; }

nlohmann::ordered_json protocol_json(const EvalProtocol& p) {
  return {{"n_archs", p.n_archs},
          {"n_runs", p.n_runs},
          {"batch_size", p.batch_size},
          {"seed", p.seed},
          {"init", std::string(arch::to_string(p.init))}};
}

void check_protocol(const EvalProtocol& p) {
  if (p.n_runs < 1) throw ConfigError("n_runs must be at least 1");
  if (p.n_archs < 3) throw ConfigError("n_archs must be at least 3");
  if (p.batch_size < 2) throw ConfigError("batch_size must be at least 2");
}

}  // namespace

std::vector<proxy::Term> score_genotype(const arch::SearchSpaceDef& space, const arch::ArchGenotype& g,
                                        const arch::Batch& batch, const arch::InitStrategy& init,
                                        const std::vector<std::string>& proxies, const proxy::ProxyConfig& config) {
  check_proxy_names(proxies);
  return evaluate_arch(space, g, batch, init, proxies, config).terms;
}

ProxyTable build_table(const arch::SearchSpaceDef& space, const std::vector<arch::ArchGenotype>& genotypes,
                       const arch::Batch& batch, arch::InitKind init, std::uint64_t init_seed,
                       const std::vector<std::string>& proxies, const proxy::ProxyConfig& config,
                       std::map<std::string, std::size_t>* degenerate_counts) {
  check_proxy_names(proxies);
  ProxyTable t;
  t.benchmark = space.id;
  std::vector<double> params, flops;
  std::vector<std::vector<double>> cols(proxies.size());
  for (const auto& g : genotypes) {
    const auto e = evaluate_arch(space, g, batch, {init, genotype_init_seed(init_seed, g)}, proxies, config);
    t.ids.push_back(g.id());
    t.val_acc.push_back(arch::synthetic_accuracy(space, g));
    params.push_back(static_cast<double>(e.params));
    flops.push_back(static_cast<double>(e.flops));
    for (std::size_t i = 0; i < proxies.size(); ++i) {
      cols[i].push_back(value_or_nan(e.terms[i]));
      if (degenerate_counts && e.terms[i].degenerate) ++(*degenerate_counts)[proxies[i]];
    }
  }
  t.set_column("params", params);
  t.set_column("flops", flops);
  for (std::size_t i = 0; i < proxies.size(); ++i) t.set_column(proxies[i], cols[i]);
  t.validate();
  return t;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  }
  if (n == 0) return {NAN, NAN};
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) var += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

EvalReport evaluate_proxies(const arch::SearchSpaceDef& space, const EvalProtocol& protocol,
                            const std::vector<std::string>& proxies, const proxy::ProxyConfig& config) {
  check_protocol(protocol);
  check_proxy_names(proxies);
  if (proxies.empty()) throw ConfigError("no proxies to evaluate");
  EvalReport rep;
  rep.space_id = space.id;
  rep.protocol = protocol;
  rep.proxies = proxies;
  for (const auto& p : proxies) rep.results.push_back({p, {}, 0.0, 0.0, 0, 0});
  for (std::size_t run = 0; run < protocol.n_runs; ++run) {
    const auto seeds = run_seeds(protocol.seed, run);
    const auto genotypes = sample_distinct(space, protocol.n_archs, seeds.genotypes);
    const auto batch = arch::make_batch(space, protocol.batch_size, seeds.batch);
    auto table = build_table(space, genotypes, batch, protocol.init, seeds.init, proxies, config);
    table.benchmark = space.id + "/run" + std::to_string(run);
    for (std::size_t i = 0; i < proxies.size(); ++i) {
      const auto c = rho_vs(table.column(proxies[i]), table.val_acc);
      rep.results[i].rho.push_back(c.value);
      rep.results[i].used += c.used;
      rep.results[i].excluded += c.excluded;
    }
    rep.tables.push_back(std::move(table));
  }
  for (auto& r : rep.results) std::tie(r.mean, r.std) = mean_std(r.rho);
  return rep;
}

// ---------------------------------------------------------------- search

void SearchConfig::validate() const {
  if (population < 2) throw ConfigError("population must be at least 2");
  if (budget < population) throw ConfigError("budget must be at least the population size");
  if (tournament < 1) throw ConfigError("tournament size must be positive");
  if (mutation_rate < 0.0 || mutation_rate > 1.0) throw ConfigError("mutation_rate must lie in [0, 1]");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (fitness == "libra") {
    if (libra_proxies.empty()) throw ConfigError("libra fitness needs libra_proxies");
    check_proxy_names(libra_proxies);
  } else {
    check_proxy_names({fitness});
  }
}

arch::ArchGenotype mutate(const arch::SearchSpaceDef& space, const arch::ArchGenotype& g, double rate,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<arch::Gene> genes = g.genes();
  const bool depth_slot = space.depth_range.first < space.depth_range.second;
  const auto slots_of = [&](const std::vector<arch::Gene>& gs) {
    std::vector<std::pair<std::size_t, int>> s;  // (position, 0 op / 1 width)
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (space.op_vocabulary.size() > 1) s.push_back({i, 0});
      if (space.widths_at(i).size() > 1) s.push_back({i, 1});
    }
    return s;
  };
  const auto slots = slots_of(genes);
  const std::size_t n_slots = slots.size() + (depth_slot ? 1 : 0);
  if (n_slots == 0) return g;
  if (rate <= 0.0) rate = 1.0 / static_cast<double>(n_slots);

  const auto pick_other = [&](const auto& choices, const auto& current) {
    std::vector<std::remove_cvref_t<decltype(current)>> others;
    for (const auto& c : choices) {
      if (!(c == current)) others.push_back(c);
    }
    std::uniform_int_distribution<std::size_t> d(0, others.size() - 1);
    return others[d(rng)];
  };
  const auto mutate_slot = [&](std::pair<std::size_t, int> slot) {
    auto& gene = genes[slot.first];
    if (slot.second == 0) gene.op = pick_other(space.op_vocabulary, gene.op);
    else gene.width = pick_other(space.widths_at(slot.first), gene.width);
  };
  const auto mutate_depth = [&]() {
    const int d = static_cast<int>(genes.size());
    bool grow = d == space.depth_range.first || (d < space.depth_range.second && (rng() & 1));
    if (grow) {
      std::uniform_int_distribution<std::size_t> where(0, genes.size());
      const std::size_t at = where(rng);
      std::uniform_int_distribution<std::size_t> op(0, space.op_vocabulary.size() - 1);
      const auto& ws = space.widths_at(at);
      std::uniform_int_distribution<std::size_t> w(0, ws.size() - 1);
      genes.insert(genes.begin() + static_cast<std::ptrdiff_t>(at), arch::Gene{space.op_vocabulary[op(rng)], ws[w(rng)]});
    } else {
      std::uniform_int_distribution<std::size_t> where(0, genes.size() - 1);
      genes.erase(genes.begin() + static_cast<std::ptrdiff_t>(where(rng)));
    }
    // positions shifted: keep every width legal for its new position
    for (std::size_t i = 0; i < genes.size(); ++i) {
      const auto& ws = space.widths_at(i);
      if (std::find(ws.begin(), ws.end(), genes[i].width) == ws.end()) {
        std::uniform_int_distribution<std::size_t> w(0, ws.size() - 1);
        genes[i].width = ws[w(rng)];
      }
    }
  };

  std::bernoulli_distribution hit(rate);
  bool changed = false;
  for (const auto& s : slots) {
    if (hit(rng)) {
      mutate_slot(s);
      changed = true;
    }
  }
  if (depth_slot && hit(rng)) {
    mutate_depth();
    changed = true;
  }
  if (!changed) {
    std::uniform_int_distribution<std::size_t> pick(0, n_slots - 1);
    const std::size_t i = pick(rng);
    if (i < slots.size()) mutate_slot(slots[i]);
    else mutate_depth();
  }
  return arch::ArchGenotype(space.id, std::move(genes));
}

FitnessFn make_fitness(const arch::SearchSpaceDef& space, const SearchConfig& config,
                       std::size_t* reference_evaluations) {
  config.validate();
  const auto batch = std::make_shared<arch::Batch>(arch::make_batch(space, config.batch_size, arch::mix_seed(config.seed, 0xba)));
  const std::uint64_t init_seed = arch::mix_seed(config.seed, 0x1417);
  const auto init = config.init;
  const auto pc = config.proxy_config;
  if (reference_evaluations) *reference_evaluations = 0;
  if (config.fitness != "libra") {
    const std::string name = config.fitness;
    return [space, batch, init_seed, init, pc, name](const arch::ArchGenotype& g) {
      return evaluate_arch(space, g, *batch, {init, genotype_init_seed(init_seed, g)}, {name}, pc).terms.front();
    };
  }
  const auto proxies = config.libra_proxies;
  auto pool = std::make_shared<std::vector<std::vector<double>>>(proxies.size());
  const auto ref = sample_distinct(space, config.population, arch::mix_seed(config.seed, 0x9e1));
  for (const auto& g : ref) {
    const auto e = evaluate_arch(space, g, *batch, {init, genotype_init_seed(init_seed, g)}, proxies, pc);
    for (std::size_t i = 0; i < proxies.size(); ++i) {
      if (!e.terms[i].degenerate && std::isfinite(e.terms[i].value)) (*pool)[i].push_back(e.terms[i].value);
    }
  }
  for (auto& v : *pool) std::sort(v.begin(), v.end());
  if (reference_evaluations) *reference_evaluations = ref.size();
  return [space, batch, init_seed, init, pc, proxies, pool](const arch::ArchGenotype& g) {
    const auto e = evaluate_arch(space, g, *batch, {init, genotype_init_seed(init_seed, g)}, proxies, pc);
    double sum = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < proxies.size(); ++i) {
      const auto& ref_values = (*pool)[i];
      const auto& t = e.terms[i];
      if (t.degenerate || !std::isfinite(t.value) || ref_values.empty()) continue;
      const auto lo = std::lower_bound(ref_values.begin(), ref_values.end(), t.value);
      const auto hi = std::upper_bound(ref_values.begin(), ref_values.end(), t.value);
      sum += (static_cast<double>(lo - ref_values.begin()) + 0.5 * static_cast<double>(hi - lo)) /
             static_cast<double>(ref_values.size());
      any = true;
    }
    if (!any) return proxy::Term::bad("every fitness proxy is degenerate");
    return proxy::Term::ok(sum / static_cast<double>(proxies.size()));
  };
}

SearchResult evolutionary_search(const arch::SearchSpaceDef& space, const SearchConfig& config,
                                 const FitnessFn& fitness) {
  config.validate();
  struct Eval {
    proxy::Term term;
    std::size_t params;
  };
  std::map<std::string, Eval> cache;
  SearchResult res;
  bool have_best = false;
  std::size_t best_params = 0;
  std::size_t generation = 0;
  std::mt19937_64 rng(arch::mix_seed(config.seed, 0x5e1));

  const auto better = [](const Eval& a, const Eval& b) {
    return proxy::ranks_above(a.term.value, a.term.degenerate, a.params, b.term.value, b.term.degenerate, b.params);
  };
  // Fitness of g, evaluating it if new and the budget allows.
  const auto evaluate = [&](const arch::ArchGenotype& g) -> const Eval* {
    const auto key = arch::serialize(g);
    if (auto it = cache.find(key); it != cache.end()) return &it->second;
    if (res.evaluations >= config.budget) return nullptr;
    Eval e{fitness(g), arch::count_params(arch::build_network(space, g))};
    if (e.term.degenerate) e.term.value = INFINITY;
    ++res.evaluations;
    if (!have_best || better(e, Eval{{res.best_fitness, res.best_degenerate, {}}, best_params})) {
      have_best = true;
      res.best = g;
      res.best_fitness = e.term.value;
      res.best_degenerate = e.term.degenerate;
      best_params = e.params;
    }
    res.trace.push_back({res.evaluations, generation, g.id(), e.term.value, e.term.degenerate, res.best.id(),
                         res.best_fitness, res.best_degenerate});
    return &cache.emplace(key, e).first->second;
  };

  std::vector<std::pair<arch::ArchGenotype, Eval>> pop;
  std::set<std::string> in_pop;
  for (std::size_t i = 0; pop.size() < config.population && i < 100 * config.population; ++i) {
    auto g = arch::sample_genotype(space, arch::mix_seed(config.seed, 0x1000 + i));
    if (!in_pop.insert(arch::serialize(g)).second) continue;
    const Eval* e = evaluate(g);
    if (!e) break;
    pop.emplace_back(std::move(g), *e);
  }
  // a space smaller than the population
  while (pop.size() < 2 && !pop.empty()) pop.push_back(pop.front());

  const auto tournament = [&]() -> const std::pair<arch::ArchGenotype, Eval>& {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    std::size_t best = pick(rng);
    for (std::size_t k = 1; k < config.tournament; ++k) {
      const std::size_t c = pick(rng);
      if (better(pop[c].second, pop[best].second)) best = c;
    }
    return pop[best];
  };

  std::size_t stale = 0;
  while (res.evaluations < config.budget && (config.generations == 0 || generation < config.generations)) {
    ++generation;
    const std::size_t before = res.evaluations;
    std::size_t elite = 0;
    for (std::size_t i = 1; i < pop.size(); ++i) {
      if (better(pop[i].second, pop[elite].second)) elite = i;
    }
    std::vector<std::pair<arch::ArchGenotype, Eval>> next{pop[elite]};
    while (next.size() < config.population) {
      const auto& parent = tournament();
      auto child = mutate(space, parent.first, config.mutation_rate, rng());
      const Eval* e = evaluate(child);
      if (!e) break;
      next.emplace_back(std::move(child), *e);
    }
    if (next.size() >= 2) pop = std::move(next);
    stale = res.evaluations == before ? stale + 1 : 0;
    if (stale >= 50) break;
  }
  res.generations = generation;
  return res;
}

SearchResult evolutionary_search(const arch::SearchSpaceDef& space, const SearchConfig& config) {
  std::size_t refs = 0;
  const auto fit = make_fitness(space, config, &refs);
  auto r = evolutionary_search(space, config, fit);
  r.reference_evaluations = refs;
  return r;
}

// --------------------------------------------------------------- reports

const Cell& Report::at(std::size_t row, const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw PreconditionError("report '" + name + "' has no column '" + column + "'");
  return rows.at(row).at(static_cast<std::size_t>(it - columns.begin()));
}

double Report::number(std::size_t row, const std::string& column) const {
  const auto& c = at(row, column);
  if (const double* d = std::get_if<double>(&c)) return *d;
  throw PreconditionError("report column '" + column + "' is not numeric");
}

std::vector<std::string> ablation_names() {
  return {"no_mu", "layer_window", "psi", "percentile_sweep", "batch_sweep", "init_robustness", "libra_variants"};
}

std::vector<std::string> default_libra_proxies() {
  return {"l_swag", "zico", "swap", "nwot", "grad_norm", "snip", "synflow", "jacov"};
}

namespace {

using TermFn = std::function<proxy::Term(proxy::ProxyContext&)>;

struct ComponentRow {
  bool no_mu, window, psi;
};

// Row order: none, single components, pairs, all three.
const std::vector<ComponentRow> kComponentRows{{false, false, false}, {true, false, false}, {false, true, false},
                                               {false, false, true},  {true, true, false},  {true, false, true},
                                               {false, true, true},   {true, true, true}};

// Per-run Spearman of each variant against synthetic accuracy; variants
// share one network and context per genotype.
struct VariantRuns {
  std::vector<std::vector<double>> rho;       // [variant][run]
  std::vector<std::size_t> excluded;          // [variant]
  std::vector<std::vector<std::vector<double>>> scores;  // [run][variant][arch]
};

VariantRuns run_variants(const arch::SearchSpaceDef& space, const EvalProtocol& p, const std::vector<TermFn>& fns) {
  check_protocol(p);
  VariantRuns out;
  out.rho.assign(fns.size(), {});
  out.excluded.assign(fns.size(), 0);
  for (std::size_t run = 0; run < p.n_runs; ++run) {
    const auto seeds = run_seeds(p.seed, run);
    const auto genotypes = sample_distinct(space, p.n_archs, seeds.genotypes);
    const auto batch = arch::make_batch(space, p.batch_size, seeds.batch);
    std::vector<std::vector<double>> scores(fns.size());
    std::vector<double> y;
    for (const auto& g : genotypes) {
      const auto net = arch::instantiate(space, g, {p.init, genotype_init_seed(seeds.init, g)});
      proxy::ProxyContext ctx(net, batch.inputs, batch.labels);
      y.push_back(arch::synthetic_accuracy(space, g));
      for (std::size_t v = 0; v < fns.size(); ++v) scores[v].push_back(value_or_nan(fns[v](ctx)));
    }
    for (std::size_t v = 0; v < fns.size(); ++v) {
      const auto c = rho_vs(scores[v], y);
      out.rho[v].push_back(c.value);
      out.excluded[v] += c.excluded;
    }
    out.scores.push_back(std::move(scores));
  }
  return out;
}

nlohmann::ordered_json window_json(const proxy::LSwagOptions& o) {
  return {{"window", proxy::to_string(o.window)},
          {"composition", o.composition == proxy::Composition::LayerWise ? "layerwise" : "aggregate"}};
}

Report component_grid(const arch::SearchSpaceDef& space, const std::string& name, const AblationConfig& cfg) {
  std::vector<TermFn> fns;
  for (const auto& row : kComponentRows) {
    proxy::LSwagOptions o = cfg.l_swag;
    o.use_mu = !row.no_mu;
    o.windowed = row.window;
    o.use_psi = row.psi;
    fns.push_back([o](proxy::ProxyContext& c) { return proxy::l_swag(c, o); });
  }
  const auto runs = run_variants(space, cfg.protocol, fns);
  Report r;
  r.name = name;
  r.columns = {"no_mu", "window", "psi", "rho_mean", "rho_std", "excluded"};
  for (std::size_t i = 0; i < kComponentRows.size(); ++i) {
    const auto [m, s] = mean_std(runs.rho[i]);
    const auto& row = kComponentRows[i];
    r.rows.push_back({row.no_mu ? 1.0 : 0.0, row.window ? 1.0 : 0.0, row.psi ? 1.0 : 0.0, m, s,
                      static_cast<double>(runs.excluded[i])});
  }
  return r;
}

Report percentile_sweep(const arch::SearchSpaceDef& space, const AblationConfig& cfg) {
  std::vector<TermFn> fns;
  std::vector<std::string> labels;
  const int bins = cfg.l_swag.window.n_bins;
  for (int p = 1; p <= bins; ++p) {
    proxy::LSwagOptions o = cfg.l_swag;
    o.window = {p, p, bins};
    o.windowed = true;
    labels.push_back(proxy::to_string(o.window));
    fns.push_back([o](proxy::ProxyContext& c) { return proxy::l_swag(c, o); });
  }
  proxy::LSwagOptions all = cfg.l_swag;
  all.window = proxy::LayerWindow::full(bins);
  labels.push_back("all");
  fns.push_back([all](proxy::ProxyContext& c) { return proxy::l_swag(c, all); });
  const auto runs = run_variants(space, cfg.protocol, fns);
  Report r;
  r.name = "percentile_sweep";
  r.columns = {"window", "rho_mean", "rho_std", "excluded"};
  for (std::size_t i = 0; i < fns.size(); ++i) {
    const auto [m, s] = mean_std(runs.rho[i]);
    r.rows.push_back({labels[i], m, s, static_cast<double>(runs.excluded[i])});
  }
  r.plot = PlotSpec{"window", "rho_mean", ""};
  return r;
}

double ranking_agreement(const std::vector<double>& a, const std::vector<double>& b) {
  return rho_vs(a, b).value;
}

Report batch_sweep(const arch::SearchSpaceDef& space, const AblationConfig& cfg) {
  check_protocol(cfg.protocol);
  if (cfg.batch_sizes.empty()) throw ConfigError("batch_sweep needs batch sizes");
  const std::size_t ref = *std::max_element(cfg.batch_sizes.begin(), cfg.batch_sizes.end());
  const std::vector<std::string> names{"l_swag", "zico", "swap"};
  // [batch][proxy][run]
  std::vector<std::vector<std::vector<double>>> rho(cfg.batch_sizes.size(), std::vector<std::vector<double>>(names.size()));
  std::vector<std::vector<double>> agree(cfg.batch_sizes.size());
  proxy::ProxyConfig pc;
  pc.l_swag = cfg.l_swag;
  for (std::size_t run = 0; run < cfg.protocol.n_runs; ++run) {
    const auto seeds = run_seeds(cfg.protocol.seed, run);
    const auto genotypes = sample_distinct(space, cfg.protocol.n_archs, seeds.genotypes);
    std::vector<double> y;
    for (const auto& g : genotypes) y.push_back(arch::synthetic_accuracy(space, g));
    std::vector<std::vector<std::vector<double>>> scores(cfg.batch_sizes.size(), std::vector<std::vector<double>>(names.size()));
    for (std::size_t b = 0; b < cfg.batch_sizes.size(); ++b) {
      const auto batch = arch::make_batch(space, cfg.batch_sizes[b], seeds.batch);
      for (const auto& g : genotypes) {
        const auto e = evaluate_arch(space, g, batch, {cfg.protocol.init, genotype_init_seed(seeds.init, g)}, names, pc);
        for (std::size_t k = 0; k < names.size(); ++k) scores[b][k].push_back(value_or_nan(e.terms[k]));
      }
      for (std::size_t k = 0; k < names.size(); ++k) rho[b][k].push_back(rho_vs(scores[b][k], y).value);
    }
    const std::size_t ref_b = static_cast<std::size_t>(
        std::find(cfg.batch_sizes.begin(), cfg.batch_sizes.end(), ref) - cfg.batch_sizes.begin());
    for (std::size_t b = 0; b < cfg.batch_sizes.size(); ++b) agree[b].push_back(ranking_agreement(scores[b][0], scores[ref_b][0]));
  }
  Report r;
  r.name = "batch_sweep";
  r.columns = {"batch", "proxy", "rho_mean", "rho_std", "agreement_with_ref"};
  r.meta["reference_batch"] = ref;
  for (std::size_t b = 0; b < cfg.batch_sizes.size(); ++b) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto [m, s] = mean_std(rho[b][k]);
      const double a = k == 0 ? mean_std(agree[b]).first : NAN;
      r.rows.push_back({static_cast<double>(cfg.batch_sizes[b]), names[k], m, s, a});
    }
  }
  r.plot = PlotSpec{"batch", "rho_mean", "proxy"};
  return r;
}

Report init_robustness(const arch::SearchSpaceDef& space, const AblationConfig& cfg) {
  check_protocol(cfg.protocol);
  if (cfg.inits.size() < 2) throw ConfigError("init_robustness needs at least two strategies");
  const std::size_t K = cfg.inits.size();
  std::vector<std::vector<double>> rho(K);
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> pair_rho;
  proxy::ProxyConfig pc;
  pc.l_swag = cfg.l_swag;
  for (std::size_t run = 0; run < cfg.protocol.n_runs; ++run) {
    const auto seeds = run_seeds(cfg.protocol.seed, run);
    const auto genotypes = sample_distinct(space, cfg.protocol.n_archs, seeds.genotypes);
    const auto batch = arch::make_batch(space, cfg.protocol.batch_size, seeds.batch);
    std::vector<double> y;
    for (const auto& g : genotypes) y.push_back(arch::synthetic_accuracy(space, g));
    std::vector<std::vector<double>> scores(K);
    for (std::size_t k = 0; k < K; ++k) {
      for (const auto& g : genotypes) {
        const auto e = evaluate_arch(space, g, batch, {cfg.inits[k], genotype_init_seed(seeds.init, g)}, {"l_swag"}, pc);
        scores[k].push_back(value_or_nan(e.terms[0]));
      }
      rho[k].push_back(rho_vs(scores[k], y).value);
    }
    for (std::size_t a = 0; a < K; ++a) {
      for (std::size_t b = a + 1; b < K; ++b) pair_rho[{a, b}].push_back(ranking_agreement(scores[a], scores[b]));
    }
  }
  Report r;
  r.name = "init_robustness";
  r.columns = {"item", "kind", "rho_mean", "rho_std"};
  for (std::size_t k = 0; k < K; ++k) {
    const auto [m, s] = mean_std(rho[k]);
    r.rows.push_back({std::string(arch::to_string(cfg.inits[k])), std::string("vs_accuracy"), m, s});
  }
  for (const auto& [ab, v] : pair_rho) {
    const auto [m, s] = mean_std(v);
    r.rows.push_back({std::string(arch::to_string(cfg.inits[ab.first])) + "~" + std::string(arch::to_string(cfg.inits[ab.second])),
                      std::string("ranking_agreement"), m, s});
  }
  return r;
}

Report libra_variants(const arch::SearchSpaceDef& space, const AblationConfig& cfg) {
  check_protocol(cfg.protocol);
  const auto proxies = cfg.libra_proxies.empty() ? default_libra_proxies() : cfg.libra_proxies;
  proxy::ProxyConfig pc;
  pc.l_swag = cfg.l_swag;
  std::map<std::string, std::vector<double>> rho;
  std::map<std::string, std::string> chosen;
  for (std::size_t run = 0; run < cfg.protocol.n_runs; ++run) {
    const auto seeds = run_seeds(cfg.protocol.seed, run);
    const auto genotypes = sample_distinct(space, cfg.protocol.n_archs, seeds.genotypes);
    const auto batch = arch::make_batch(space, cfg.protocol.batch_size, seeds.batch);
    const auto table = build_table(space, genotypes, batch, cfg.protocol.init, seeds.init, proxies, pc);
    for (const auto& v : libra::ablation_variants(table, seeds.genotypes)) {
      rho[v.strategy].push_back(v.rho);
      if (run == 0) {
        std::string joined;
        for (const auto& p : v.proxies) joined += (joined.empty() ? "" : "+") + p;
        chosen[v.strategy] = joined;
      }
    }
  }
  Report r;
  r.name = "libra_variants";
  r.columns = {"strategy", "proxies_run0", "rho_mean", "rho_std"};
  for (const auto& s : libra::variant_names()) {
    const auto [m, sd] = mean_std(rho[s]);
    r.rows.push_back({s, chosen[s], m, sd});
  }
  return r;
}

}  // namespace

Report run_ablation(const arch::SearchSpaceDef& space, const std::string& name, const AblationConfig& config) {
  Report r;
  if (name == "no_mu" || name == "layer_window" || name == "psi") r = component_grid(space, name, config);
  else if (name == "percentile_sweep") r = percentile_sweep(space, config);
  else if (name == "batch_sweep") r = batch_sweep(space, config);
  else if (name == "init_robustness") r = init_robustness(space, config);
  else if (name == "libra_variants") r = libra_variants(space, config);
  else throw ConfigError("unknown ablation '" + name + "'");
  r.meta["space"] = space.id;
  r.meta["protocol"] = protocol_json(config.protocol);
  r.meta["l_swag"] = window_json(config.l_swag);
  return r;
}

Report eval_report(const EvalReport& e) {
  Report r;
  r.name = "eval";
  r.meta["space"] = e.space_id;
  r.meta["protocol"] = protocol_json(e.protocol);
  r.columns = {"proxy", "rho_mean", "rho_std", "used", "excluded"};
  for (std::size_t run = 0; run < e.protocol.n_runs; ++run) r.columns.push_back("run" + std::to_string(run));
  for (const auto& p : e.results) {
    std::vector<Cell> row{p.proxy, p.mean, p.std, static_cast<double>(p.used), static_cast<double>(p.excluded)};
    for (double v : p.rho) row.push_back(v);
    r.rows.push_back(std::move(row));
  }
  return r;
}

Report search_report(const SearchResult& res, const SearchConfig& c, const arch::SearchSpaceDef& space) {
  Report r;
  r.name = "search";
  r.meta["space"] = space.id;
  r.meta["config"] = {{"fitness", c.fitness},
                      {"libra_proxies", c.libra_proxies},
                      {"population", c.population},
                      {"generations", c.generations},
                      {"mutation_rate", c.mutation_rate},
                      {"tournament", c.tournament},
                      {"elitism", 1},
                      {"budget", c.budget},
                      {"batch_size", c.batch_size},
                      {"seed", c.seed},
                      {"init", std::string(arch::to_string(c.init))}};
  r.meta["best"] = {{"id", res.best.id()},
                    {"genotype", arch::serialize(res.best)},
                    {"fitness", res.best_degenerate ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(res.best_fitness)},
                    {"synthetic_accuracy", arch::synthetic_accuracy(space, res.best)}};
  r.meta["evaluations"] = res.evaluations;
  r.meta["reference_evaluations"] = res.reference_evaluations;
  r.meta["generations"] = res.generations;
  r.columns = {"evaluation", "generation", "id", "fitness", "degenerate", "best_id", "best_fitness"};
  for (const auto& t : res.trace) {
    r.rows.push_back({static_cast<double>(t.evaluation), static_cast<double>(t.generation), t.id,
                      t.degenerate ? NAN : t.fitness, t.degenerate ? 1.0 : 0.0, t.best_id,
                      t.best_degenerate ? NAN : t.best_fitness});
  }
  r.plot = PlotSpec{"evaluation", "best_fitness", ""};
  return r;
}

std::optional<ReportKind> parse_report_kind(const std::string& name) {
  if (name == "csv") return ReportKind::Csv;
  if (name == "json") return ReportKind::Json;
  if (name == "plotdata") return ReportKind::Plotdata;
  return std::nullopt;
}

namespace {

std::string csv_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_number(*d);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

nlohmann::ordered_json json_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return std::isfinite(*d) ? nlohmann::ordered_json(*d) : nlohmann::ordered_json(nullptr);
  return std::get<std::string>(c);
}

}  // namespace

std::string render_report(const Report& r, ReportKind kind) {
  std::ostringstream out;
  switch (kind) {
    case ReportKind::Csv: {
      for (std::size_t i = 0; i < r.columns.size(); ++i) out << (i ? "," : "") << csv_cell(r.columns[i]);
      if (!r.columns.empty()) out << '\n';
      for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
        out << '\n';
      }
      break;
    }
    case ReportKind::Json: {
      nlohmann::ordered_json j;
      j["name"] = r.name;
      j["meta"] = r.meta;
      j["columns"] = r.columns;
      j["rows"] = nlohmann::ordered_json::array();
      for (const auto& row : r.rows) {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (const auto& c : row) a.push_back(json_cell(c));
        j["rows"].push_back(a);
      }
      if (r.plot) j["plot"] = {{"x", r.plot->x}, {"y", r.plot->y}, {"series", r.plot->series}};
      out << j.dump(2) << '\n';
      break;
    }
    case ReportKind::Plotdata: {
      out << "x,y,series\n";
      if (!r.plot) break;
      for (std::size_t i = 0; i < r.rows.size(); ++i) {
        out << csv_cell(r.at(i, r.plot->x)) << ',' << csv_cell(r.at(i, r.plot->y)) << ','
            << (r.plot->series.empty() ? csv_cell(Cell{r.name}) : csv_cell(r.at(i, r.plot->series))) << '\n';
      }
      break;
    }
  }
  return out.str();
}

void emit_report(const Report& r, const std::string& path, ReportKind kind) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write report '" + path + "'");
  f << render_report(r, kind);
  if (!f) throw DataError("failed writing report '" + path + "'");
}

Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    r.name = j.at("name").get<std::string>();
    r.meta = nlohmann::ordered_json::parse(j.at("meta").dump());
    r.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      std::vector<Cell> cells;
      for (const auto& c : row) {
        if (c.is_null()) cells.emplace_back(NAN);
        else if (c.is_number()) cells.emplace_back(c.get<double>());
        else cells.emplace_back(c.get<std::string>());
      }
      r.rows.push_back(std::move(cells));
    }
    if (j.contains("plot")) {
      const auto& p = j.at("plot");
      r.plot = PlotSpec{p.at("x").get<std::string>(), p.at("y").get<std::string>(), p.at("series").get<std::string>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace naslab::bench
