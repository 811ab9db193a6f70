#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "naslab/bench.hpp"
#include "naslab/errors.hpp"
#include "naslab/libra.hpp"
#include "naslab/stats.hpp"

using namespace naslab;
using namespace naslab::bench;

namespace {

arch::SearchSpaceDef tiny_macro() {
  return arch::space_from_json(nlohmann::json::parse(R"({"base":"toy-macro","id":"tiny","depth":[3,3],"widths":[4]})"));
}

// One linear layer whose width drives both params and accuracy.
arch::SearchSpaceDef width_line() {
  nlohmann::json j = nlohmann::json::parse(R"({"base":"planted-dense","id":"line","depth":[1,1],"position_widths":[],
                                                "accuracy":{"noise_std":0.02,"position_weights":[1]}})");
  std::vector<int> w;
  for (int i = 1; i <= 250; ++i) w.push_back(i);
  j["widths"] = w;
  return arch::space_from_json(j);
}

void register_noise_proxy() {
  proxy::ProxyRegistry::instance().add("test_noise", [](proxy::ProxyContext& ctx, const proxy::ProxyConfig&) {
    for (std::size_t i = 0; i < ctx.net().size(); ++i) {
      const auto& node = ctx.net().node(i);
      if (!node.params.empty()) return proxy::Term::ok(node.params[0].value.values()[0]);
    }
    return proxy::Term::bad("no parameters");
  });
}

double quantile_rank(const arch::SearchSpaceDef& space, const arch::ArchGenotype& g) {
  const double y = arch::synthetic_accuracy(space, g);
  std::size_t better = 0;
  const auto all = arch::enumerate_space(space);
  for (const auto& h : all) better += arch::synthetic_accuracy(space, h) > y;
  return static_cast<double>(better) / static_cast<double>(all.size());
}

}  // namespace

TEST(Eval, OracleGivesPerfectCorrelation) {
  EvalProtocol p;
  p.n_archs = 60;
  p.n_runs = 3;
  p.batch_size = 8;
  const auto rep = evaluate_proxies(arch::builtin_space("toy-macro"), p, {kOracle});
  ASSERT_EQ(rep.results.size(), 1u);
  for (double r : rep.results[0].rho) EXPECT_DOUBLE_EQ(r, 1.0);
  EXPECT_EQ(rep.tables.size(), 3u);
  EXPECT_EQ(rep.results[0].excluded, 0u);
}

TEST(Eval, NoiseProxyIsUncorrelated) {
  register_noise_proxy();
  EvalProtocol p;
  p.n_archs = 1000;
  p.n_runs = 3;
  p.batch_size = 2;
  const auto rep = evaluate_proxies(arch::builtin_space("toy-micro"), p, {"test_noise"});
  for (double r : rep.results[0].rho) EXPECT_LT(std::abs(r), 0.1);
}

TEST(Eval, ParamsTrackMonotoneAccuracy) {
  EvalProtocol p;
  p.n_archs = 200;
  p.n_runs = 2;
  p.batch_size = 4;
  const auto rep = evaluate_proxies(width_line(), p, {"params"});
  for (double r : rep.results[0].rho) EXPECT_GT(r, 0.95);
}

TEST(Eval, FullSizeSampleEqualsExhaustiveEvaluation) {
  const auto space = tiny_macro();
  ASSERT_EQ(space.size(), 27.0);
  EvalProtocol p;
  p.n_archs = 27;
  p.n_runs = 1;
  p.batch_size = 8;
  const auto rep = evaluate_proxies(space, p, {"l_swag", "zico"});

  const auto seeds = run_seeds(p.seed, 0);
  const auto batch = arch::make_batch(space, p.batch_size, seeds.batch);
  std::vector<double> ls, zc, y;
  for (const auto& g : arch::enumerate_space(space)) {
    const auto t = score_genotype(space, g, batch, {p.init, genotype_init_seed(seeds.init, g)}, {"l_swag", "zico"}, {});
    ls.push_back(t[0].degenerate ? NAN : t[0].value);
    zc.push_back(t[1].degenerate ? NAN : t[1].value);
    y.push_back(arch::synthetic_accuracy(space, g));
  }
  EXPECT_EQ(rep.tables[0].column("l_swag"), ls);
  const auto rho = stats::spearman_rho({{}, ls, {}}, {{}, y, {}}).value;
  EXPECT_DOUBLE_EQ(rep.results[0].rho[0], rho);
  EXPECT_EQ(rep.tables[0].column("zico"), zc);

  p.n_archs = 500;
  const auto over = evaluate_proxies(space, p, {"l_swag"});
  EXPECT_EQ(over.tables[0].column("l_swag"), ls);
}

TEST(Eval, SampleDistinctHasNoRepeats) {
  const auto space = arch::builtin_space("toy-micro-4op");
  for (std::size_t n : {10u, 1000u, 4000u}) {
    const auto gs = sample_distinct(space, n, 3);
    std::set<std::string> ids;
    for (const auto& g : gs) ids.insert(arch::serialize(g));
    EXPECT_EQ(ids.size(), n);
  }
  EXPECT_EQ(sample_distinct(space, 9999, 3).size(), 4096u);
}

TEST(Eval, TableHasSchemaColumns) {
  const auto space = tiny_macro();
  const auto gs = arch::enumerate_space(space);
  const auto t = build_table(space, gs, arch::make_batch(space, 4, 1), arch::InitKind::KaimingNormal, 9, {"nwot"}, {});
  EXPECT_EQ(t.size(), 27u);
  EXPECT_NO_THROW(t.column("params"));
  EXPECT_NO_THROW(t.column("flops"));
  EXPECT_NO_THROW(t.column("nwot"));
  EXPECT_THROW(build_table(space, gs, arch::make_batch(space, 4, 1), arch::InitKind::KaimingNormal, 9, {"nope"}, {}),
               ConfigError);
}

TEST(Eval, ProtocolValidation) {
  EvalProtocol p;
  p.n_runs = 0;
  EXPECT_THROW(evaluate_proxies(tiny_macro(), p, {kOracle}), ConfigError);
}

TEST(Mutation, ChildrenStayInSpaceAndDiffer) {
  for (const auto& name : arch::builtin_space_names()) {
    const auto space = arch::builtin_space(name);
    bool depth_changed = false;
    for (std::uint64_t s = 0; s < 300; ++s) {
      const auto g = arch::sample_genotype(space, s);
      const auto c = mutate(space, g, 0.0, s + 1000);
      EXPECT_TRUE(arch::contains(space, c)) << name;
      EXPECT_FALSE(c == g) << name;
      depth_changed |= c.depth() != g.depth();
    }
    EXPECT_EQ(depth_changed, space.depth_range.first < space.depth_range.second) << name;
  }
}

TEST(Search, BudgetEqualToPopulationReturnsBestInitial) {
  SearchConfig c;
  c.fitness = kOracle;
  c.population = 16;
  c.budget = 16;
  c.seed = 5;
  const auto space = arch::builtin_space("toy-micro-4op");
  const auto r = evolutionary_search(space, c);
  ASSERT_EQ(r.trace.size(), 16u);
  double best = -INFINITY;
  for (const auto& t : r.trace) {
    EXPECT_EQ(t.generation, 0u);
    best = std::max(best, t.fitness);
  }
  EXPECT_EQ(r.best_fitness, best);
  EXPECT_EQ(r.evaluations, 16u);
}

TEST(Search, FixedSeedGivesIdenticalTrace) {
  SearchConfig c;
  c.fitness = "l_swag";
  c.population = 8;
  c.budget = 40;
  c.batch_size = 8;
  c.seed = 11;
  const auto space = arch::builtin_space("toy-macro");
  const auto a = evolutionary_search(space, c);
  const auto b = evolutionary_search(space, c);
  EXPECT_EQ(render_report(search_report(a, c, space), ReportKind::Csv),
            render_report(search_report(b, c, space), ReportKind::Csv));
  c.seed = 12;
  const auto d = evolutionary_search(space, c);
  EXPECT_NE(render_report(search_report(a, c, space), ReportKind::Csv),
            render_report(search_report(d, c, space), ReportKind::Csv));
}

TEST(Search, TraceIsMonotoneAndWithinBudget) {
  SearchConfig c;
  c.fitness = kOracle;
  c.budget = 300;
  const auto space = arch::builtin_space("toy-micro");
  const auto r = evolutionary_search(space, c);
  EXPECT_LE(r.evaluations, 300u);
  EXPECT_EQ(r.trace.size(), r.evaluations);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i].best_fitness, r.trace[i - 1].best_fitness);
  std::set<std::string> seen;
  for (const auto& t : r.trace) EXPECT_TRUE(seen.insert(t.id).second);
  EXPECT_EQ(r.trace.back().best_fitness, r.best_fitness);
}

TEST(Search, OracleFitnessReachesTopPercent) {
  const auto space = arch::builtin_space("toy-micro-4op");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SearchConfig c;
    c.fitness = kOracle;
    c.budget = 409;
    c.seed = seed;
    const auto r = evolutionary_search(space, c);
    EXPECT_LE(quantile_rank(space, r.best), 0.01) << seed;
  }
}

TEST(Search, SmallSpaceStopsWhenExhausted) {
  SearchConfig c;
  c.fitness = kOracle;
  c.population = 8;
  c.budget = 1000;
  const auto space = tiny_macro();
  const auto r = evolutionary_search(space, c);
  EXPECT_EQ(r.evaluations, 27u);
  EXPECT_EQ(quantile_rank(space, r.best), 0.0);
}

TEST(Search, LibraFitnessUsesReferencePool) {
  SearchConfig c;
  c.fitness = "libra";
  c.libra_proxies = {"params", "flops"};
  c.population = 8;
  c.budget = 24;
  const auto space = arch::builtin_space("toy-macro");
  const auto r = evolutionary_search(space, c);
  EXPECT_EQ(r.reference_evaluations, 8u);
  for (const auto& t : r.trace) {
    EXPECT_GE(t.fitness, 0.0);
    EXPECT_LE(t.fitness, 1.0);
  }
}

TEST(Search, ConfigValidation) {
  SearchConfig c;
  c.budget = c.population - 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.fitness = "libra";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.fitness = "nope";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Search, DegenerateFitnessRanksLast) {
  const auto space = tiny_macro();
  SearchConfig c;
  c.population = 4;
  c.budget = 27;
  const auto all = arch::enumerate_space(space);
  const auto keep = all[5];
  const auto r = evolutionary_search(space, c, [&](const arch::ArchGenotype& g) {
    return g == keep ? proxy::Term::ok(1.0) : proxy::Term::bad("x");
  });
  EXPECT_TRUE(r.best == keep);
  EXPECT_FALSE(r.best_degenerate);
}

TEST(Ablation, ComponentGridHasBaselineRow) {
  AblationConfig a;
  a.protocol.n_archs = 30;
  a.protocol.n_runs = 1;
  a.protocol.batch_size = 8;
  const auto space = arch::builtin_space("toy-macro");
  const auto r = run_ablation(space, "no_mu", a);
  ASSERT_EQ(r.rows.size(), 8u);
  EXPECT_EQ(r.number(0, "no_mu") + r.number(0, "window") + r.number(0, "psi"), 0.0);
  EXPECT_EQ(r.number(7, "no_mu") + r.number(7, "window") + r.number(7, "psi"), 3.0);

  const auto z = evaluate_proxies(space, a.protocol, {"zico"});
  EXPECT_NEAR(r.number(0, "rho_mean"), z.results[0].mean, 1e-12);
  EXPECT_THROW(run_ablation(space, "bogus", a), ConfigError);
}

TEST(Ablation, PercentileSweepCoversAllWindows) {
  AblationConfig a;
  a.protocol.n_archs = 20;
  a.protocol.n_runs = 1;
  a.protocol.batch_size = 8;
  const auto r = run_ablation(arch::builtin_space("planted-dense"), "percentile_sweep", a);
  ASSERT_EQ(r.rows.size(), 11u);
  EXPECT_EQ(std::get<std::string>(r.at(0, "window")), "1");
  EXPECT_EQ(std::get<std::string>(r.at(9, "window")), "10");
  EXPECT_EQ(std::get<std::string>(r.at(10, "window")), "all");
}

TEST(Ablation, BatchAndInitSweeps) {
  AblationConfig a;
  a.protocol.n_archs = 20;
  a.protocol.n_runs = 1;
  const auto space = arch::builtin_space("toy-macro");
  const auto b = run_ablation(space, "batch_sweep", a);
  std::set<double> sizes;
  for (std::size_t i = 0; i < b.rows.size(); ++i) sizes.insert(b.number(i, "batch"));
  EXPECT_EQ(sizes, (std::set<double>{8, 16, 32, 64}));
  EXPECT_DOUBLE_EQ(b.number(b.rows.size() - 3, "agreement_with_ref"), 1.0);

  const auto ir = run_ablation(space, "init_robustness", a);
  EXPECT_EQ(ir.rows.size(), 6u);  // three strategies, three pairs
}

TEST(Ablation, LibraVariantsListEveryStrategy) {
  AblationConfig a;
  a.protocol.n_archs = 30;
  a.protocol.n_runs = 1;
  a.protocol.batch_size = 8;
  a.libra_proxies = {"l_swag", "zico", "nwot", "synflow"};
  const auto r = run_ablation(arch::builtin_space("toy-macro"), "libra_variants", a);
  EXPECT_EQ(r.rows.size(), libra::variant_names().size());
}

TEST(Reports, JsonRoundTrip) {
  Report r;
  r.name = "x";
  r.meta["k"] = 3;
  r.columns = {"a", "b"};
  r.rows = {{std::string("p,q"), 1.5}, {std::string("r"), NAN}};
  r.plot = PlotSpec{"a", "b", ""};
  const auto text = render_report(r, ReportKind::Json);
  const auto back = report_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(render_report(back, ReportKind::Json), text);
  EXPECT_TRUE(std::isnan(back.number(1, "b")));
  EXPECT_EQ(render_report(r, ReportKind::Csv), "a,b\n\"p,q\",1.5\nr,nan\n");
  EXPECT_EQ(render_report(r, ReportKind::Plotdata), "x,y,series\n\"p,q\",1.5,x\nr,nan,x\n");
  EXPECT_THROW(report_from_json(nlohmann::json::parse("{}")), DataError);
}

TEST(Reports, EmptyResultsAreValidDocuments) {
  Report r;
  r.name = "empty";
  EXPECT_EQ(render_report(r, ReportKind::Csv), "");
  EXPECT_EQ(render_report(r, ReportKind::Plotdata), "x,y,series\n");
  EXPECT_NO_THROW(nlohmann::json::parse(render_report(r, ReportKind::Json)));
}

TEST(Reports, EvalCsvSchema) {
  EvalProtocol p;
  p.n_archs = 10;
  p.n_runs = 2;
  const auto rep = evaluate_proxies(tiny_macro(), p, {kOracle});
  const auto csv = render_report(eval_report(rep), ReportKind::Csv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "proxy,rho_mean,rho_std,used,excluded,run0,run1");
  EXPECT_EQ(parse_report_kind("plotdata"), ReportKind::Plotdata);
  EXPECT_EQ(parse_report_kind("xml"), std::nullopt);
}

TEST(Ablation, UnreachableWindowGivesNanRow) {
  AblationConfig a;
  a.protocol.n_archs = 20;
  a.protocol.n_runs = 1;
  a.protocol.batch_size = 8;
  const auto r = run_ablation(arch::builtin_space("toy-macro"), "percentile_sweep", a);
  // depth 4-5 networks never place a layer in bucket 7
  EXPECT_TRUE(std::isnan(r.number(6, "rho_mean")));
  EXPECT_EQ(r.number(6, "excluded"), 20.0);
}
