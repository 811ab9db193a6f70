#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "naslab/bench.hpp"
#include "naslab/errors.hpp"
#include "naslab/libra.hpp"
#include "naslab/profiler.hpp"
#include "naslab/theorem.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace naslab;

namespace {

struct Invocation {
  fs::path config_path;
  fs::path out = ".";
  std::optional<std::uint64_t> seed;
  json cfg;

  std::uint64_t master_seed() const {
    if (seed) return *seed;
    return cfg.value("seed", std::uint64_t{0});
  }
  fs::path output(const std::string& name) const { return out / name; }
};

json read_json_file(const fs::path& path, bool is_config) {
  std::ifstream f(path);
  if (!f) {
    const std::string msg = "cannot read '" + path.string() + "'";
    if (is_config) throw ConfigError(msg);
    throw DataError(msg);
  }
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    const std::string msg = "'" + path.string() + "' is not valid JSON: " + e.what();
    if (is_config) throw ConfigError(msg);
    throw DataError(msg);
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
}

void emit_all(const bench::Report& r, const Invocation& inv, const std::string& stem) {
  bench::emit_report(r, inv.output(stem + ".csv").string(), bench::ReportKind::Csv);
  bench::emit_report(r, inv.output(stem + ".json").string(), bench::ReportKind::Json);
  if (r.plot) bench::emit_report(r, inv.output(stem + "_plot.csv").string(), bench::ReportKind::Plotdata);
}

arch::InitKind init_of(const json& j, const std::string& key, arch::InitKind fallback) {
  if (!j.contains(key)) return fallback;
  const auto k = arch::parse_init_kind(j.at(key).get<std::string>());
  if (!k) throw ConfigError("unknown init strategy '" + j.at(key).get<std::string>() + "'");
  return *k;
}

proxy::LSwagOptions lswag_of(const json& cfg, const Invocation& inv) {
  proxy::LSwagOptions o;
  if (!cfg.contains("l_swag")) return o;
  const auto& j = cfg.at("l_swag");
  check_keys(j, {"window", "window_from", "k", "use_mu", "windowed", "use_psi", "composition"}, "l_swag");
  const int bins = o.window.n_bins;
  if (j.contains("window") && j.contains("window_from")) throw ConfigError("give either window or window_from");
  if (j.contains("window")) o.window = proxy::parse_window(j.at("window").get<std::string>(), bins);
  if (j.contains("window_from")) {
    const auto pj = read_json_file(fs::path(j.at("window_from").get<std::string>()), false);
    const auto stored = profiling::window_from_json(pj);
    if (stored) {
      o.window = stored->window(bins);
    } else {
      o.window = profiling::detect_spikes(profiling::profile_from_json(pj), j.value("k", 1.0)).window(bins);
    }
  }
  o.use_mu = j.value("use_mu", o.use_mu);
  o.windowed = j.value("windowed", o.windowed);
  o.use_psi = j.value("use_psi", o.use_psi);
  if (j.contains("composition")) {
    const auto c = j.at("composition").get<std::string>();
    if (c == "layerwise") o.composition = proxy::Composition::LayerWise;
    else if (c == "aggregate") o.composition = proxy::Composition::Aggregate;
    else throw ConfigError("unknown composition '" + c + "'");
  }
  return o;
}

arch::SearchSpaceDef space_of(const json& cfg) {
  if (!cfg.contains("space")) throw ConfigError("config needs a 'space'");
  return arch::space_from_json(cfg.at("space"));
}

bench::EvalProtocol protocol_of(const json& cfg, const Invocation& inv) {
  bench::EvalProtocol p;
  p.n_archs = cfg.value("n_archs", p.n_archs);
  p.n_runs = cfg.value("n_runs", p.n_runs);
  p.batch_size = cfg.value("batch_size", p.batch_size);
  p.init = init_of(cfg, "init", p.init);
  p.seed = inv.master_seed();
  return p;
}

int cmd_profile(const Invocation& inv) {
  const auto& c = inv.cfg;
  check_keys(c, {"space", "n_nets", "first_net", "batch_size", "batch_seed", "init", "shared_init", "n_bins", "k",
                 "depth_clusters", "seed"},
             "profile config");
  const auto space = space_of(c);
  profiling::ProfileOptions o;
  o.n_nets = c.value("n_nets", o.n_nets);
  o.first_net = c.value("first_net", o.first_net);
  o.batch_size = c.value("batch_size", o.batch_size);
  o.batch_seed = c.value("batch_seed", inv.master_seed());
  o.seed = inv.master_seed();
  o.init = init_of(c, "init", o.init);
  o.shared_init = c.value("shared_init", o.shared_init);
  o.n_bins = c.value("n_bins", o.n_bins);
  const double k = c.value("k", 1.0);

  const auto write = [&](const profiling::PercentileProfile& p, const std::string& stem) {
    const auto w = profiling::detect_spikes(p, k);
    write_text(inv.output(stem + ".json"), profiling::to_json(p, w).dump(2) + "\n");
    bench::Report r;
    r.name = stem;
    r.meta = profiling::to_json(p, w);
    r.columns = {"bucket", "count", "mean", "std", "z", "in_window"};
    for (const auto& b : p.buckets) {
      const auto z = b.index < static_cast<int>(w.z.size()) ? w.z[static_cast<std::size_t>(b.index)] : std::nullopt;
      r.rows.push_back({static_cast<double>(b.index), static_cast<double>(b.count), b.empty() ? NAN : b.mean,
                        b.empty() ? NAN : b.stddev(), z ? *z : NAN,
                        b.index >= w.lo && b.index <= w.hi ? 1.0 : 0.0});
    }
    r.plot = bench::PlotSpec{"bucket", "mean", ""};
    bench::emit_report(r, inv.output(stem + ".csv").string(), bench::ReportKind::Csv);
    bench::emit_report(r, inv.output(stem + "_plot.csv").string(), bench::ReportKind::Plotdata);
    std::cout << stem << ": window " << w.lo << "-" << w.hi << (w.no_spike ? " (no spike)" : "") << "\n";
  };
  write(profiling::profile(space, o), "profile");
  if (c.contains("depth_clusters")) {
    const auto clusters = c.at("depth_clusters").get<std::vector<std::vector<int>>>();
    const auto profiles = profiling::profile_by_depth(space, clusters, o);
    for (std::size_t i = 0; i < profiles.size(); ++i) write(profiles[i], "profile_cluster" + std::to_string(i));
  }
  return 0;
}

int cmd_eval(const Invocation& inv) {
  const auto& c = inv.cfg;
  check_keys(c, {"space", "n_archs", "n_runs", "batch_size", "init", "proxies", "l_swag", "write_tables", "seed"},
             "eval config");
  const auto space = space_of(c);
  const auto protocol = protocol_of(c, inv);
  proxy::ProxyConfig pc;
  pc.l_swag = lswag_of(c, inv);
  const auto proxies = c.value("proxies", bench::default_libra_proxies());
  const auto rep = bench::evaluate_proxies(space, protocol, proxies, pc);
  auto r = bench::eval_report(rep);
  r.meta["l_swag_window"] = proxy::to_string(pc.l_swag.window);
  emit_all(r, inv, "eval");
  if (c.value("write_tables", true)) {
    for (std::size_t i = 0; i < rep.tables.size(); ++i) {
      save_table(rep.tables[i], inv.output("table_run" + std::to_string(i) + ".csv").string(), TableFormat::Csv);
    }
  }
  for (const auto& p : rep.results) std::cout << p.proxy << ": rho " << p.mean << " +- " << p.std << "\n";
  return 0;
}

int cmd_libra(const Invocation& inv) {
  const auto& c = inv.cfg;
  check_keys(c, {"table", "tolerance", "tolerance_step", "max_tolerance", "binning", "bias_column", "proxies",
                 "variants", "seed"},
             "libra config");
  if (!c.contains("table")) throw ConfigError("libra config needs a 'table'");
  const fs::path table_path = fs::path(c.at("table").get<std::string>());
  auto table = load_table(table_path.string());
  if (table.benchmark.empty()) table.benchmark = table_path.stem().string();
  libra::LibraOptions o;
  o.tolerance = c.value("tolerance", o.tolerance);
  o.tolerance_step = c.value("tolerance_step", o.tolerance_step);
  o.max_tolerance = c.value("max_tolerance", o.max_tolerance);
  o.bias_column = c.value("bias_column", o.bias_column);
  o.proxies = c.value("proxies", o.proxies);
  if (c.contains("binning")) {
    const auto b = c.at("binning").get<std::string>();
    if (b == "ranks") o.binning = libra::Binning::Ranks;
    else if (b == "raw") o.binning = libra::Binning::Raw;
    else throw ConfigError("unknown binning '" + b + "'");
  }
  const auto sel = libra::libra_select(table, o);
  auto j = libra::to_json(sel);
  const auto chosen = sel.selected();
  j["rank_average_rho"] = chosen.empty() ? json(nullptr) : json(libra::rank_average_rho(table, chosen));
  if (c.value("variants", false)) {
    nlohmann::ordered_json vs = nlohmann::ordered_json::array();
    for (const auto& v : libra::ablation_variants(table, inv.master_seed(), o)) {
      vs.push_back({{"strategy", v.strategy},
                    {"proxies", v.proxies},
                    {"rho", std::isfinite(v.rho) ? nlohmann::ordered_json(v.rho) : nlohmann::ordered_json(nullptr)}});
    }
    j["variants"] = vs;
  }
  write_text(inv.output("libra.json"), j.dump(2) + "\n");
  std::cout << "selected:";
  for (const auto& p : chosen) std::cout << " " << p;
  std::cout << "\n";
  return 0;
}

int cmd_search(const Invocation& inv) {
  const auto& c = inv.cfg;
  check_keys(c, {"space", "fitness", "libra_proxies", "libra_result", "population", "generations", "mutation_rate",
                 "tournament", "budget", "batch_size", "init", "l_swag", "seed"},
             "search config");
  const auto space = space_of(c);
  bench::SearchConfig s;
  s.fitness = c.value("fitness", s.fitness);
  s.libra_proxies = c.value("libra_proxies", s.libra_proxies);
  if (c.contains("libra_result")) {
    if (c.contains("libra_proxies")) throw ConfigError("give either libra_proxies or libra_result");
    const auto lj = read_json_file(fs::path(c.at("libra_result").get<std::string>()), false);
    s.libra_proxies.clear();
    for (const char* key : {"z1", "z2", "z3"}) {
      if (lj.contains(key) && lj.at(key).is_string()) s.libra_proxies.push_back(lj.at(key).get<std::string>());
    }
    if (s.libra_proxies.empty()) throw DataError("libra result selects no proxies");
  }
  s.population = c.value("population", s.population);
  s.generations = c.value("generations", s.generations);
  s.mutation_rate = c.value("mutation_rate", s.mutation_rate);
  s.tournament = c.value("tournament", s.tournament);
  s.budget = c.value("budget", s.budget);
  s.batch_size = c.value("batch_size", s.batch_size);
  s.init = init_of(c, "init", s.init);
  s.proxy_config.l_swag = lswag_of(c, inv);
  s.seed = inv.master_seed();
  const auto res = bench::evolutionary_search(space, s);
  emit_all(bench::search_report(res, s, space), inv, "search");
  std::cout << "best " << arch::serialize(res.best) << " fitness " << res.best_fitness << " after "
            << res.evaluations << " evaluations\n";
  return 0;
}

int cmd_ablate(const Invocation& inv) {
  const auto& c = inv.cfg;
  check_keys(c, {"space", "ablations", "n_archs", "n_runs", "batch_size", "init", "l_swag", "libra_proxies",
                 "batch_sizes", "inits", "seed"},
             "ablate config");
  const auto space = space_of(c);
  bench::AblationConfig a;
  a.protocol = protocol_of(c, inv);
  a.l_swag = lswag_of(c, inv);
  a.libra_proxies = c.value("libra_proxies", a.libra_proxies);
  a.batch_sizes = c.value("batch_sizes", a.batch_sizes);
  if (c.contains("inits")) {
    a.inits.clear();
    for (const auto& n : c.at("inits")) {
      const auto k = arch::parse_init_kind(n.get<std::string>());
      if (!k) throw ConfigError("unknown init strategy '" + n.get<std::string>() + "'");
      a.inits.push_back(*k);
    }
  }
  const auto names = c.value("ablations", bench::ablation_names());
  for (const auto& n : names) {
    const auto r = bench::run_ablation(space, n, a);
    emit_all(r, inv, "ablate_" + n);
    std::cout << n << ": " << r.rows.size() << " rows\n";
  }
  return 0;
}

int cmd_theorem(const Invocation& inv) {
  const auto& c = inv.cfg;
  check_keys(c, {"sweep", "fig5", "seed"}, "theorem config");
  const auto seed = inv.master_seed();
  if (c.contains("sweep") || !c.contains("fig5")) {
    const auto sj = c.value("sweep", json::object());
    check_keys(sj, {"runs", "min_m", "max_m", "max_d", "slack"}, "sweep");
    theorem::SweepOptions o;
    o.runs = sj.value("runs", o.runs);
    o.min_m = sj.value("min_m", o.min_m);
    o.max_m = sj.value("max_m", o.max_m);
    o.max_d = sj.value("max_d", o.max_d);
    o.slack = sj.value("slack", o.slack);
    const auto s = theorem::bound_sweep(o, seed);
    nlohmann::ordered_json j{{"runs", s.runs},
                             {"violations", s.violations},
                             {"max_excess", s.max_excess},
                             {"max_identity_error", s.max_identity_error},
                             {"config", {{"min_m", o.min_m}, {"max_m", o.max_m}, {"max_d", o.max_d}, {"slack", o.slack}, {"seed", seed}}}};
    write_text(inv.output("theorem_sweep.json"), j.dump(2) + "\n");
    std::cout << "bound sweep: " << s.violations << " violations in " << s.runs << " runs\n";
  }
  if (c.contains("fig5") || !c.contains("sweep")) {
    const auto fj = c.value("fig5", json::object());
    check_keys(fj, {"runs", "samples", "dims", "R", "labels"}, "fig5");
    theorem::Fig5Options o;
    o.runs = fj.value("runs", o.runs);
    o.data.samples = fj.value("samples", o.data.samples);
    o.data.dims = fj.value("dims", o.data.dims);
    o.data.R = fj.value("R", o.data.R);
    if (fj.contains("labels")) {
      const auto l = fj.at("labels").get<std::string>();
      if (l == "tanh") o.data.labels = theorem::LabelSource::Tanh;
      else if (l == "linear") o.data.labels = theorem::LabelSource::Linear;
      else throw ConfigError("unknown label source '" + l + "'");
    }
    const auto rep = theorem::fig5_experiment(o, seed);
    std::ostringstream csv;
    theorem::write_fig5_csv(rep, csv);
    write_text(inv.output("fig5.csv"), csv.str());
    bench::Report plot;
    plot.name = "fig5";
    plot.columns = {"sum_mu_sq", "loss", "eta"};
    for (const auto& r : rep.rows) plot.rows.push_back({r.sum_mu_sq, r.loss, r.eta_label});
    plot.plot = bench::PlotSpec{"sum_mu_sq", "loss", "eta"};
    bench::emit_report(plot, inv.output("fig5_plot.csv").string(), bench::ReportKind::Plotdata);
    nlohmann::ordered_json series = nlohmann::ordered_json::array();
    for (const auto& s : rep.series) {
      series.push_back({{"eta", s.eta_label}, {"eta_value", s.eta}, {"pearson", s.pearson}, {"bound_violations", s.bound_violations}});
      std::cout << "fig5 eta " << s.eta_label << ": r = " << s.pearson << "\n";
    }
    write_text(inv.output("fig5_summary.json"), nlohmann::ordered_json{{"series", series}, {"seed", seed}}.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-cost NAS proxy lab"};
  app.require_subcommand(1);
  Invocation inv;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string config;
  const std::vector<std::pair<std::string, int (*)(const Invocation&)>> commands{
      {"profile", cmd_profile}, {"eval", cmd_eval},     {"libra", cmd_libra},
      {"search", cmd_search},   {"ablate", cmd_ablate}, {"theorem", cmd_theorem}};
  std::map<CLI::App*, int (*)(const Invocation&)> handlers;
  std::vector<CLI::Option*> seed_opts;
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("config", config, "JSON config file")->required();
    seed_opts.push_back(sub->add_option("--seed", seed, "master seed (overrides the config)"));
    sub->add_option("--out", out, "output directory");
    handlers[sub] = fn;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    inv.config_path = config;
    inv.out = out;
    for (auto* o : seed_opts) {
      if (o->count() > 0) inv.seed = seed;
    }
    inv.cfg = read_json_file(inv.config_path, true);
    std::error_code ec;
    fs::create_directories(inv.out, ec);
    if (ec) throw DataError("cannot create output directory '" + inv.out.string() + "'");
    for (auto* sub : app.get_subcommands()) return handlers.at(sub)(inv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
