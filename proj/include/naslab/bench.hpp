#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "naslab/archspace.hpp"
#include "naslab/proxies.hpp"
#include "naslab/table.hpp"

namespace naslab::bench {

// Harness-level score: the synthetic accuracy itself. Not a registry proxy.
inline constexpr const char* kOracle = "oracle";

struct EvalProtocol {
  std::size_t n_archs = 1000;
  std::size_t n_runs = 5;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  arch::InitKind init = arch::InitKind::KaimingUniform;
};

// Per-run seed streams.
struct RunSeeds {
  std::uint64_t genotypes;
  std::uint64_t batch;
  std::uint64_t init;
};
RunSeeds run_seeds(std::uint64_t master, std::size_t run);

// Initialization seed of one genotype within a run; independent of the
// order genotypes are visited in.
std::uint64_t genotype_init_seed(std::uint64_t run_init_seed, const arch::ArchGenotype& g);

// n distinct genotypes: the whole space in enumeration order when n covers
// it, otherwise seeded uniform draws without replacement.
std::vector<arch::ArchGenotype> sample_distinct(const arch::SearchSpaceDef& space, std::size_t n, std::uint64_t seed);

// Scores of the named proxies (or kOracle) for one genotype.
std::vector<proxy::Term> score_genotype(const arch::SearchSpaceDef& space, const arch::ArchGenotype& g,
                                        const arch::Batch& batch, const arch::InitStrategy& init,
                                        const std::vector<std::string>& proxies, const proxy::ProxyConfig& config);

// Table of genotypes x proxies with val_acc = synthetic accuracy and
// params/flops columns always present. Degenerate scores are stored as NaN;
// `degenerate_counts` (if given) receives per-proxy counts.
ProxyTable build_table(const arch::SearchSpaceDef& space, const std::vector<arch::ArchGenotype>& genotypes,
                       const arch::Batch& batch, arch::InitKind init, std::uint64_t init_seed,
                       const std::vector<std::string>& proxies, const proxy::ProxyConfig& config,
                       std::map<std::string, std::size_t>* degenerate_counts = nullptr);

struct ProxyCorrelation {
  std::string proxy;
  std::vector<double> rho;  // per run; NaN when undefined
  double mean = 0.0;
  double std = 0.0;  // population std over runs
  std::size_t used = 0;
  std::size_t excluded = 0;  // summed over runs
};

struct EvalReport {
  std::string space_id;
  EvalProtocol protocol;
  std::vector<std::string> proxies;
  std::vector<ProxyCorrelation> results;
  std::vector<ProxyTable> tables;  // one per run
};

EvalReport evaluate_proxies(const arch::SearchSpaceDef& space, const EvalProtocol& protocol,
                            const std::vector<std::string>& proxies, const proxy::ProxyConfig& config = {});

// Mean and population std over finite entries; NaN mean when none.
std::pair<double, double> mean_std(const std::vector<double>& v);

struct SearchConfig {
  std::string fitness = "l_swag";  // registry proxy, kOracle or "libra"
  std::vector<std::string> libra_proxies;  // "libra": rank-averaged proxies
  std::size_t population = 64;
  std::size_t generations = 0;  // 0: run until the budget is spent
  double mutation_rate = 0.0;   // 0: 1 / number of mutable gene slots
  std::size_t tournament = 4;
  std::size_t budget = 640;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  arch::InitKind init = arch::InitKind::KaimingUniform;
  proxy::ProxyConfig proxy_config;

  void validate() const;
};

struct TraceEntry {
  std::size_t evaluation = 0;  // 1-based count of fitness evaluations
  std::size_t generation = 0;
  std::string id;
  double fitness = 0.0;
  bool degenerate = false;
  std::string best_id;
  double best_fitness = 0.0;
  bool best_degenerate = false;
};

struct SearchResult {
  arch::ArchGenotype best;
  double best_fitness = 0.0;
  bool best_degenerate = false;
  std::size_t evaluations = 0;
  std::size_t reference_evaluations = 0;  // "libra" normalization pool
  std::size_t generations = 0;
  std::vector<TraceEntry> trace;
};

using FitnessFn = std::function<proxy::Term(const arch::ArchGenotype&)>;

// Fitness of `config` on `space`: a fixed batch per search, per-genotype
// init seeds. "libra" averages, over libra_proxies, each proxy's percentile
// within a reference pool of `population` random genotypes. The pool's size
// is reported through `reference_evaluations`.
FitnessFn make_fitness(const arch::SearchSpaceDef& space, const SearchConfig& config,
                       std::size_t* reference_evaluations = nullptr);

// Tournament selection, point mutation of op/width/depth genes and elitism
// of 1. Repeated genotypes reuse cached fitness and do not count toward the
// budget.
SearchResult evolutionary_search(const arch::SearchSpaceDef& space, const SearchConfig& config, const FitnessFn& fitness);
SearchResult evolutionary_search(const arch::SearchSpaceDef& space, const SearchConfig& config);

arch::ArchGenotype mutate(const arch::SearchSpaceDef& space, const arch::ArchGenotype& g, double rate,
                          std::uint64_t seed);

// Tabular result shared by every report writer.
using Cell = std::variant<std::string, double>;

struct PlotSpec {
  std::string x, y, series;  // column names; series may be empty
};

struct Report {
  std::string name;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::optional<PlotSpec> plot;

  const Cell& at(std::size_t row, const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;
};

struct AblationConfig {
  EvalProtocol protocol;
  proxy::LSwagOptions l_swag;           // window used for the windowed rows
  std::vector<std::string> libra_proxies;  // libra_variants; empty = default set
  std::vector<std::size_t> batch_sizes{8, 16, 32, 64};
  std::vector<arch::InitKind> inits{arch::InitKind::XavierNormal, arch::InitKind::KaimingNormal,
                                    arch::InitKind::Gaussian};
};

std::vector<std::string> ablation_names();
std::vector<std::string> default_libra_proxies();

// no_mu / layer_window / psi: the 8 on/off combinations of the three L-SWAG
// components; percentile_sweep: windows (p, p) for p = 1..n_bins plus all;
// batch_sweep: each batch size; init_robustness: each init strategy and
// each pair's ranking agreement; libra_variants: every LIBRA strategy.
Report run_ablation(const arch::SearchSpaceDef& space, const std::string& name, const AblationConfig& config);

Report eval_report(const EvalReport& r);
Report search_report(const SearchResult& r, const SearchConfig& config, const arch::SearchSpaceDef& space);

enum class ReportKind { Csv, Json, Plotdata };
std::optional<ReportKind> parse_report_kind(const std::string& name);

std::string render_report(const Report& r, ReportKind kind);
void emit_report(const Report& r, const std::string& path, ReportKind kind);
Report report_from_json(const nlohmann::json& j);

}  // namespace naslab::bench
