#include "naslab/archspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "naslab/errors.hpp"

namespace naslab::arch {

namespace {

const std::set<std::string>& ops_for(SpaceKind kind) {
  static const std::set<std::string> micro{"skip", "zeroize", "conv1x1", "conv3x3", "avgpool"};
  static const std::set<std::string> macro{"conv1x1", "conv3x3", "down3x3"};
  static const std::set<std::string> dense{"linear"};
  switch (kind) {
    case SpaceKind::Micro: return micro;
    case SpaceKind::Macro: return macro;
    case SpaceKind::Dense: return dense;
  }
  return dense;
}

std::string_view kind_name(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::Micro: return "micro";
    case SpaceKind::Macro: return "macro";
    case SpaceKind::Dense: return "dense";
  }
  return "?";
}

// Number of DAG nodes whose complete edge set has `edges` edges, or 0.
int cell_nodes_for(int edges) {
  for (int n = 2; n <= 16; ++n) {
    if (n * (n - 1) / 2 == edges) return n;
  }
  return 0;
}

}  // namespace

const std::vector<int>& SearchSpaceDef::widths_at(std::size_t position) const {
  if (position < position_widths.size() && !position_widths[position].empty()) return position_widths[position];
  return width_choices;
}

double SearchSpaceDef::count_at_depth(int depth) const {
  double n = 1.0;
  for (int i = 0; i < depth; ++i) {
    n *= static_cast<double>(op_vocabulary.size() * widths_at(static_cast<std::size_t>(i)).size());
  }
  return n;
}

double SearchSpaceDef::size() const {
  double total = 0.0;
  for (int d = depth_range.first; d <= depth_range.second; ++d) total += count_at_depth(d);
  return total;
}

void SearchSpaceDef::validate() const {
  if (op_vocabulary.empty()) throw ConfigError("space '" + id + "': empty op vocabulary");
  const auto& allowed = ops_for(kind);
  std::set<std::string> seen;
  for (const auto& op : op_vocabulary) {
    if (!allowed.count(op)) {
      throw ConfigError("space '" + id + "': op '" + op + "' not available in " + std::string(kind_name(kind)) +
                        " spaces");
    }
    if (!seen.insert(op).second) throw ConfigError("space '" + id + "': duplicate op '" + op + "'");
  }
  if (depth_range.first < 1 || depth_range.second < depth_range.first) {
    throw ConfigError("space '" + id + "': invalid depth range");
  }
  for (int d = 0; d < depth_range.second; ++d) {
    const auto& w = widths_at(static_cast<std::size_t>(d));
    if (w.empty()) throw ConfigError("space '" + id + "': no width choices");
    for (int v : w) {
      if (v < 1) throw ConfigError("space '" + id + "': widths must be positive");
    }
  }
  if (num_classes < 1 || stem_width < 1) throw ConfigError("space '" + id + "': invalid head/stem size");
  if (batch_size < 2) throw ConfigError("space '" + id + "': batch size must be >= 2");
  switch (kind) {
    case SpaceKind::Micro:
      if (depth_range.first != depth_range.second || cell_nodes_for(depth_range.first) == 0) {
        throw ConfigError("space '" + id + "': micro depth must be a fixed complete-DAG edge count (1, 3, 6, 10, ...)");
      }
      if (width_choices.size() != 1 || !position_widths.empty()) {
        throw ConfigError("space '" + id + "': micro cells use one fixed width");
      }
      if (cells < 1) throw ConfigError("space '" + id + "': cells must be >= 1");
      [[fallthrough]];
    case SpaceKind::Macro:
      if (input_shape.size() != 3) throw ConfigError("space '" + id + "': conv spaces need a CxHxW input");
      break;
    case SpaceKind::Dense:
      if (input_shape.size() != 1) throw ConfigError("space '" + id + "': dense spaces need a flat input");
      break;
  }
  if (shape_numel(input_shape) == 0) throw ConfigError("space '" + id + "': empty input shape");
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ArchGenotype::ArchGenotype(std::string space_id, std::vector<Gene> genes)
    : space_id_(std::move(space_id)), genes_(std::move(genes)) {
  hash_ = fnv1a64(serialize(*this));
}

std::string ArchGenotype::id() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
  return buf;
}

std::string serialize(const ArchGenotype& g) {
  nlohmann::ordered_json j;
  j["space"] = g.space_id();
  j["depth"] = g.depth();
  auto genes = nlohmann::ordered_json::array();
  for (const auto& gene : g.genes()) {
    nlohmann::ordered_json e;
    e["op"] = gene.op;
    e["width"] = gene.width;
    genes.push_back(std::move(e));
  }
  j["genes"] = std::move(genes);
  return j.dump();
}

ArchGenotype parse_genotype(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("genotype: ") + e.what());
  }
  try {
    std::vector<Gene> genes;
    for (const auto& e : j.at("genes")) genes.push_back({e.at("op").get<std::string>(), e.at("width").get<int>()});
    if (j.at("depth").get<int>() != static_cast<int>(genes.size())) {
      throw DataError("genotype: depth does not match gene count");
    }
    return ArchGenotype(j.at("space").get<std::string>(), std::move(genes));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("genotype: ") + e.what());
  }
}

std::vector<std::string> builtin_space_names() { return {"toy-micro", "toy-micro-4op", "toy-macro", "planted-dense"}; }

SearchSpaceDef builtin_space(const std::string& name) {
  SearchSpaceDef s;
  s.id = name;
  if (name == "toy-micro" || name == "toy-micro-4op") {
    s.kind = SpaceKind::Micro;
    s.op_vocabulary = name == "toy-micro" ? std::vector<std::string>{"skip", "zeroize", "conv1x1", "conv3x3", "avgpool"}
                                          : std::vector<std::string>{"zeroize", "skip", "conv1x1", "conv3x3"};
    s.depth_range = {6, 6};
    s.width_choices = {8};
    s.input_shape = {3, 4, 4};
    s.stem_width = 8;
    s.cells = 2;
    s.batch_size = 64;
    s.accuracy.noise_std = 0.6;
    s.accuracy.noise_seed = 201;
  } else if (name == "toy-macro") {
    s.kind = SpaceKind::Macro;
    s.op_vocabulary = {"conv1x1", "conv3x3", "down3x3"};
    s.depth_range = {3, 4};
    s.width_choices = {4, 8};
    s.input_shape = {3, 4, 4};
    s.stem_width = 4;
    s.batch_size = 32;
    s.accuracy.noise_std = 0.6;
    s.accuracy.noise_seed = 101;
  } else if (name == "planted-dense") {
    // Nine hidden layers plus the head give network depth 10, so the layer
    // producing hidden position p sits in percentile bucket p + 1. Accuracy
    // depends only on the widths of positions 5..7. Layers 7 and 8 connect
    // two planted positions and carry most of the gradient-statistic mass.
    s.kind = SpaceKind::Dense;
    s.op_vocabulary = {"linear"};
    s.depth_range = {9, 9};
    s.width_choices = {4, 8, 16, 32};
    s.position_widths.assign(9, {});
    for (std::size_t p = 5; p <= 7; ++p) s.position_widths[p] = {16, 24, 32, 48};
    s.input_shape = {16};
    s.stem_width = 16;
    s.batch_size = 64;
    s.accuracy.position_weights = {0, 0, 0, 0, 0, 1, 1, 1, 0};
    s.accuracy.noise_std = 0.3;
    s.accuracy.noise_seed = 77;
  } else {
    throw ConfigError("unknown built-in space '" + name + "'");
  }
  s.validate();
  return s;
}

namespace {

template <class J>
SearchSpaceDef apply_overrides(SearchSpaceDef s, const J& j) {
  if (j.contains("id")) s.id = j.at("id").template get<std::string>();
  if (j.contains("kind")) {
    const auto k = j.at("kind").template get<std::string>();
    if (k == "micro") s.kind = SpaceKind::Micro;
    else if (k == "macro") s.kind = SpaceKind::Macro;
    else if (k == "dense") s.kind = SpaceKind::Dense;
    else throw ConfigError("unknown space kind '" + k + "'");
  }
  if (j.contains("ops")) s.op_vocabulary = j.at("ops").template get<std::vector<std::string>>();
  if (j.contains("depth")) {
    const auto d = j.at("depth").template get<std::vector<int>>();
    if (d.size() != 2) throw ConfigError("space depth must be [min, max]");
    s.depth_range = {d[0], d[1]};
  }
  if (j.contains("widths")) s.width_choices = j.at("widths").template get<std::vector<int>>();
  if (j.contains("position_widths")) s.position_widths = j.at("position_widths").template get<std::vector<std::vector<int>>>();
  if (j.contains("activation")) {
    const auto a = j.at("activation").template get<std::string>();
    if (a == "relu") s.activation = ag::Activation::ReLU;
    else if (a == "gelu") s.activation = ag::Activation::GeLU;
    else throw ConfigError("unknown activation '" + a + "'");
  }
  if (j.contains("input_shape")) s.input_shape = j.at("input_shape").template get<Shape>();
  if (j.contains("classes")) s.num_classes = j.at("classes").template get<int>();
  if (j.contains("stem_width")) s.stem_width = j.at("stem_width").template get<int>();
  if (j.contains("cells")) s.cells = j.at("cells").template get<int>();
  if (j.contains("batch_size")) s.batch_size = j.at("batch_size").template get<int>();
  if (j.contains("accuracy")) {
    const auto& a = j.at("accuracy");
    if (a.contains("position_weights")) s.accuracy.position_weights = a.at("position_weights").template get<std::vector<double>>();
    if (a.contains("noise_std")) s.accuracy.noise_std = a.at("noise_std").template get<double>();
    if (a.contains("noise_seed")) s.accuracy.noise_seed = a.at("noise_seed").template get<std::uint64_t>();
  }
  return s;
}

}  // namespace

SearchSpaceDef space_from_json(const nlohmann::json& j) {
  try {
    if (j.is_string()) return builtin_space(j.get<std::string>());
    if (!j.is_object()) throw ConfigError("space must be a built-in name or an object");
    SearchSpaceDef base;
    if (j.contains("base")) {
      base = builtin_space(j.at("base").get<std::string>());
    } else {
      base.id = "custom";
    }
    SearchSpaceDef s = apply_overrides(std::move(base), j);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("space definition: ") + e.what());
  }
}

nlohmann::ordered_json space_to_json(const SearchSpaceDef& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["kind"] = std::string(kind_name(s.kind));
  j["ops"] = s.op_vocabulary;
  j["depth"] = {s.depth_range.first, s.depth_range.second};
  j["widths"] = s.width_choices;
  if (!s.position_widths.empty()) j["position_widths"] = s.position_widths;
  j["activation"] = s.activation == ag::Activation::ReLU ? "relu" : "gelu";
  j["input_shape"] = s.input_shape;
  j["classes"] = s.num_classes;
  j["stem_width"] = s.stem_width;
  j["cells"] = s.cells;
  j["batch_size"] = s.batch_size;
  j["accuracy"] = {{"position_weights", s.accuracy.position_weights},
                   {"noise_std", s.accuracy.noise_std},
                   {"noise_seed", s.accuracy.noise_seed}};
  return j;
}

ArchGenotype sample_genotype(const SearchSpaceDef& space, std::uint64_t seed) {
  space.validate();
  std::mt19937_64 rng(mix_seed(seed, 0x5a3f));
  std::vector<double> weights;
  for (int d = space.depth_range.first; d <= space.depth_range.second; ++d) weights.push_back(space.count_at_depth(d));
  std::discrete_distribution<int> pick_depth(weights.begin(), weights.end());
  const int depth = space.depth_range.first + pick_depth(rng);
  std::vector<Gene> genes;
  genes.reserve(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) {
    const auto& widths = space.widths_at(static_cast<std::size_t>(i));
    std::uniform_int_distribution<std::size_t> op(0, space.op_vocabulary.size() - 1);
    std::uniform_int_distribution<std::size_t> w(0, widths.size() - 1);
    const std::size_t oi = op(rng);
    const std::size_t wi = w(rng);
    genes.push_back({space.op_vocabulary[oi], widths[wi]});
  }
  return ArchGenotype(space.id, std::move(genes));
}

std::vector<ArchGenotype> enumerate_space(const SearchSpaceDef& space, double limit) {
  space.validate();
  if (space.size() > limit) throw ConfigError("space '" + space.id + "' too large to enumerate");
  std::vector<ArchGenotype> out;
  out.reserve(static_cast<std::size_t>(space.size()));
  for (int d = space.depth_range.first; d <= space.depth_range.second; ++d) {
    std::vector<std::size_t> radix(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < radix.size(); ++i) radix[i] = space.op_vocabulary.size() * space.widths_at(i).size();
    std::vector<std::size_t> digit(radix.size(), 0);
    while (true) {
      std::vector<Gene> genes;
      for (std::size_t i = 0; i < digit.size(); ++i) {
        const auto& widths = space.widths_at(i);
        genes.push_back({space.op_vocabulary[digit[i] / widths.size()], widths[digit[i] % widths.size()]});
      }
      out.emplace_back(space.id, std::move(genes));
      // last position varies fastest
      bool carry = true;
      for (std::size_t pos = digit.size(); carry && pos > 0;) {
        --pos;
        if (++digit[pos] < radix[pos]) carry = false;
        else digit[pos] = 0;
      }
      if (carry) break;
    }
  }
  return out;
}

bool contains(const SearchSpaceDef& space, const ArchGenotype& g) {
  if (g.space_id() != space.id) return false;
  if (g.depth() < space.depth_range.first || g.depth() > space.depth_range.second) return false;
  for (std::size_t i = 0; i < g.genes().size(); ++i) {
    const auto& gene = g.genes()[i];
    if (std::find(space.op_vocabulary.begin(), space.op_vocabulary.end(), gene.op) == space.op_vocabulary.end()) {
      return false;
    }
    const auto& widths = space.widths_at(i);
    if (std::find(widths.begin(), widths.end(), gene.width) == widths.end()) return false;
  }
  return true;
}

namespace {

int add_head(ag::NetworkBuilder& b, int from, const SearchSpaceDef& space) {
  int x = from;
  if (b.shape_of(x).size() == 3) {
    x = b.global_avg_pool(x, "head.pool");
    x = b.flatten(x, "head.flatten");
  }
  return b.linear(x, static_cast<std::size_t>(space.num_classes), true, "head.linear");
}

int micro_edge(ag::NetworkBuilder& b, int from, const std::string& op, std::size_t width, ag::Activation act,
               const std::string& name) {
  if (op == "skip") return from;
  if (op == "avgpool") return b.avg_pool(from, 3, 1, 1, name + ".avgpool");
  const std::size_t k = op == "conv3x3" ? 3 : 1;
  const int c = b.conv2d(from, width, k, 1, std::nullopt, true, name + "." + op);
  return b.activation(c, act, name + ".act");
}

}  // namespace

ag::NetworkInstance build_network(const SearchSpaceDef& space, const ArchGenotype& g) {
  space.validate();
  if (!contains(space, g)) throw StructuralError("genotype " + serialize(g) + " is not in space '" + space.id + "'");
  ag::NetworkBuilder b(space.input_shape);
  int x = ag::kNetworkInput;
  switch (space.kind) {
    case SpaceKind::Micro: {
      const auto width = static_cast<std::size_t>(space.width_choices[0]);
      x = b.conv2d(x, width, 3, 1, std::nullopt, true, "stem.conv3x3");
      x = b.activation(x, space.activation, "stem.act");
      const int n_nodes = cell_nodes_for(g.depth());
      for (int cell = 0; cell < space.cells; ++cell) {
        std::vector<int> node_ids{x};
        std::size_t edge = 0;
        for (int j = 1; j < n_nodes; ++j) {
          std::vector<int> parts;
          for (int i = 0; i < j; ++i, ++edge) {
            const auto& op = g.genes()[edge].op;
            if (op == "zeroize") continue;
            const std::string name = "c" + std::to_string(cell) + ".e" + std::to_string(i) + std::to_string(j);
            parts.push_back(micro_edge(b, node_ids[static_cast<std::size_t>(i)], op, width, space.activation, name));
          }
          const std::string node_name = "c" + std::to_string(cell) + ".n" + std::to_string(j);
          if (parts.empty()) node_ids.push_back(b.zero(node_ids[0], node_name + ".zero"));
          else if (parts.size() == 1) node_ids.push_back(parts[0]);
          else node_ids.push_back(b.add(parts, node_name + ".sum"));
        }
        x = node_ids.back();
      }
      break;
    }
    case SpaceKind::Macro: {
      x = b.conv2d(x, static_cast<std::size_t>(space.stem_width), 3, 1, std::nullopt, true, "stem.conv3x3");
      x = b.activation(x, space.activation, "stem.act");
      for (std::size_t i = 0; i < g.genes().size(); ++i) {
        const auto& gene = g.genes()[i];
        const std::size_t k = gene.op == "conv1x1" ? 1 : 3;
        const std::size_t stride = gene.op == "down3x3" ? 2 : 1;
        const std::string name = "l" + std::to_string(i) + "." + gene.op;
        x = b.conv2d(x, static_cast<std::size_t>(gene.width), k, stride, std::nullopt, true, name);
        x = b.activation(x, space.activation, "l" + std::to_string(i) + ".act");
      }
      break;
    }
    case SpaceKind::Dense: {
      for (std::size_t i = 0; i < g.genes().size(); ++i) {
        x = b.linear(x, static_cast<std::size_t>(g.genes()[i].width), true, "l" + std::to_string(i) + ".linear");
        x = b.activation(x, space.activation, "l" + std::to_string(i) + ".act");
      }
      break;
    }
  }
  add_head(b, x, space);
  return std::move(b).build();
}

ag::NetworkInstance instantiate(const SearchSpaceDef& space, const ArchGenotype& g, const InitStrategy& strategy) {
  auto net = build_network(space, g);
  initialize(net, strategy);
  return net;
}

std::size_t count_params(const ag::NetworkInstance& net) {
  std::size_t n = 0;
  for (const auto& node : net.nodes()) {
    for (const auto& p : node.params) n += p.value.numel();
  }
  return n;
}

std::size_t count_flops(const ag::NetworkInstance& net, const Shape& input_shape) {
  if (input_shape != net.input_shape()) {
    throw PreconditionError("count_flops: input shape " + shape_to_string(input_shape) +
                            " differs from the network's " + shape_to_string(net.input_shape()));
  }
  std::size_t macs = 0;
  for (const auto& node : net.nodes()) {
    if (node.kind == ag::LayerKind::Linear) {
      macs += node.attrs.in_features * node.attrs.out_features;
    } else if (node.kind == ag::LayerKind::Conv2d) {
      macs += node.attrs.out_channels * node.attrs.in_channels * node.attrs.kernel * node.attrs.kernel *
              node.output_shape[1] * node.output_shape[2];
    }
  }
  return macs;
}

namespace {

double noise_term(const SearchSpaceDef& space, const ArchGenotype& g) {
  if (space.accuracy.noise_std <= 0.0) return 0.0;
  std::mt19937_64 rng(mix_seed(space.accuracy.noise_seed, g.hash()));
  std::normal_distribution<double> d(0.0, space.accuracy.noise_std);
  return d(rng);
}

// NB201-flavoured response: capacity of the edges that lie on a live
// input-to-output path, a bonus for one residual edge, chance level for
// disconnected cells.
double micro_accuracy(const ArchGenotype& g) {
  const int n = cell_nodes_for(g.depth());
  struct Edge {
    int from, to;
    const std::string* op;
  };
  std::vector<Edge> edges;
  std::size_t e = 0;
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i < j; ++i, ++e) edges.push_back({i, j, &g.genes()[e].op});
  }
  std::vector<bool> fwd(static_cast<std::size_t>(n), false), bwd(static_cast<std::size_t>(n), false);
  fwd[0] = true;
  for (const auto& ed : edges) {
    if (*ed.op != "zeroize" && fwd[static_cast<std::size_t>(ed.from)]) fwd[static_cast<std::size_t>(ed.to)] = true;
  }
  bwd[static_cast<std::size_t>(n - 1)] = true;
  for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
    if (*it->op != "zeroize" && bwd[static_cast<std::size_t>(it->to)]) bwd[static_cast<std::size_t>(it->from)] = true;
  }
  if (!fwd[static_cast<std::size_t>(n - 1)]) return 10.0;
  double cap = 0.0;
  int skips = 0;
  std::vector<int> conv_depth(static_cast<std::size_t>(n), 0);
  for (const auto& ed : edges) {
    const bool live = *ed.op != "zeroize" && fwd[static_cast<std::size_t>(ed.from)] && bwd[static_cast<std::size_t>(ed.to)];
    if (!live) continue;
    const bool conv = *ed.op == "conv3x3" || *ed.op == "conv1x1";
    if (*ed.op == "conv3x3") cap += 1.0;
    else if (*ed.op == "conv1x1") cap += 0.5;
    else if (*ed.op == "avgpool") cap += 0.15;
    else if (*ed.op == "skip") ++skips;
    auto& d = conv_depth[static_cast<std::size_t>(ed.to)];
    d = std::max(d, conv_depth[static_cast<std::size_t>(ed.from)] + (conv ? 1 : 0));
  }
  const double path = std::min(conv_depth[static_cast<std::size_t>(n - 1)], 3) / 3.0;
  return 10.0 + 80.0 * (1.0 - std::exp(-0.55 * cap)) + (skips > 0 ? 1.5 : 0.0) - 1.0 * std::max(0, skips - 1) +
         2.0 * path;
}

double position_weight(const SearchSpaceDef& space, std::size_t i) {
  const auto& w = space.accuracy.position_weights;
  if (w.empty()) return 1.0;
  return i < w.size() ? w[i] : 0.0;
}

double macro_accuracy(const SearchSpaceDef& space, const ArchGenotype& g) {
  double cap = 0.0;
  int downs = 0;
  for (std::size_t i = 0; i < g.genes().size(); ++i) {
    const auto& gene = g.genes()[i];
    const double k = gene.op == "conv1x1" ? 0.55 : 1.0;
    cap += position_weight(space, i) * k * std::log2(static_cast<double>(gene.width));
    if (gene.op == "down3x3") ++downs;
  }
  return 20.0 + 70.0 * (1.0 - std::exp(-cap / 8.0)) + (downs >= 1 ? 2.0 : 0.0) - 3.0 * std::max(0, downs - 2);
}

double dense_accuracy(const SearchSpaceDef& space, const ArchGenotype& g) {
  double f = 0.0, total = 0.0;
  for (std::size_t i = 0; i < g.genes().size(); ++i) {
    const double w = position_weight(space, i);
    f += w * std::log2(static_cast<double>(g.genes()[i].width));
    total += w;
  }
  if (total > 0.0) f /= total;
  return 30.0 + 60.0 * (1.0 - std::exp(-f / 3.0));
}

}  // namespace

double synthetic_accuracy(const SearchSpaceDef& space, const ArchGenotype& g) {
  if (!contains(space, g)) throw StructuralError("genotype " + serialize(g) + " is not in space '" + space.id + "'");
  double base = 0.0;
  switch (space.kind) {
    case SpaceKind::Micro: base = micro_accuracy(g); break;
    case SpaceKind::Macro: base = macro_accuracy(space, g); break;
    case SpaceKind::Dense: base = dense_accuracy(space, g); break;
  }
  return base + noise_term(space, g);
}

Batch make_batch(const SearchSpaceDef& space, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ConfigError("batch size must be positive");
  Shape shape{samples};
  shape.insert(shape.end(), space.input_shape.begin(), space.input_shape.end());
  Batch b{Tensor(shape), Tensor({samples})};
  std::mt19937_64 rng(mix_seed(seed, 0xba7c));
  std::normal_distribution<double> N;
  for (double& v : b.inputs.values()) v = N(rng);
  std::uniform_int_distribution<int> cls(0, space.num_classes - 1);
  for (double& v : b.labels.values()) v = cls(rng);
  return b;
}

}  // namespace naslab::arch
