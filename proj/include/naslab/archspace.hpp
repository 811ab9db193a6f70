#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "naslab/init.hpp"
#include "naslab/network.hpp"

namespace naslab::arch {

// Structure template a space instantiates genes into.
//   Micro: genes are the edge ops of one DAG cell (NB201 edge order),
//          repeated `cells` times between a conv stem and a linear head.
//   Macro: genes are sequential conv layers (op, width).
//   Dense: genes are sequential linear layers (width).
enum class SpaceKind { Micro, Macro, Dense };

struct Gene {
  std::string op;
  int width = 0;

  friend bool operator==(const Gene&, const Gene&) = default;
};

// Coefficients of the synthetic ground-truth accuracy attached to a space.
struct AccuracyModel {
  std::vector<double> position_weights;  // Macro/Dense: per-gene weight (empty = uniform)
  double noise_std = 0.5;
  std::uint64_t noise_seed = 0;
};

struct SearchSpaceDef {
  std::string id;
  SpaceKind kind = SpaceKind::Micro;
  std::vector<std::string> op_vocabulary;
  std::pair<int, int> depth_range{6, 6};
  std::vector<int> width_choices;
  std::vector<std::vector<int>> position_widths;  // optional per-position override
  ag::Activation activation = ag::Activation::ReLU;
  Shape input_shape;
  int num_classes = 10;
  int stem_width = 8;
  int cells = 2;
  int batch_size = 64;  // default proxy batch for this space
  AccuracyModel accuracy;

  // Width choices available at a gene position.
  const std::vector<int>& widths_at(std::size_t position) const;
  // Number of distinct genotypes with the given depth.
  double count_at_depth(int depth) const;
  double size() const;
  void validate() const;
};

class ArchGenotype {
 public:
  ArchGenotype() = default;
  ArchGenotype(std::string space_id, std::vector<Gene> genes);

  const std::string& space_id() const { return space_id_; }
  const std::vector<Gene>& genes() const { return genes_; }
  int depth() const { return static_cast<int>(genes_.size()); }
  std::uint64_t hash() const { return hash_; }
  std::string id() const;  // 16 hex digits of hash()

  friend bool operator==(const ArchGenotype& a, const ArchGenotype& b) {
    return a.space_id_ == b.space_id_ && a.genes_ == b.genes_;
  }

 private:
  std::string space_id_;
  std::vector<Gene> genes_;
  std::uint64_t hash_ = 0;
};

// Canonical text form: compact JSON with fixed field order, e.g.
//   {"space":"toy-micro","depth":2,"genes":[{"op":"conv3x3","width":8},{"op":"skip","width":8}]}
std::string serialize(const ArchGenotype& g);
ArchGenotype parse_genotype(const std::string& text);

std::uint64_t fnv1a64(const std::string& text);

// Built-in spaces: "toy-micro", "toy-micro-4op", "toy-macro", "planted-dense".
SearchSpaceDef builtin_space(const std::string& name);
std::vector<std::string> builtin_space_names();
// Either a built-in name (string) or a full object; an object with "base"
// starts from that built-in and overrides the listed fields.
SearchSpaceDef space_from_json(const nlohmann::json& j);
nlohmann::ordered_json space_to_json(const SearchSpaceDef& space);

ArchGenotype sample_genotype(const SearchSpaceDef& space, std::uint64_t seed);
// All genotypes in enumeration order; throws ConfigError above `limit`.
std::vector<ArchGenotype> enumerate_space(const SearchSpaceDef& space, double limit = 1e6);
bool contains(const SearchSpaceDef& space, const ArchGenotype& g);

// Layer graph with zero parameters.
ag::NetworkInstance build_network(const SearchSpaceDef& space, const ArchGenotype& g);
ag::NetworkInstance instantiate(const SearchSpaceDef& space, const ArchGenotype& g, const InitStrategy& strategy);

std::size_t count_params(const ag::NetworkInstance& net);
// Multiply-accumulates of Linear/Conv2d nodes for one sample.
std::size_t count_flops(const ag::NetworkInstance& net, const Shape& input_shape);

// Proxy input batch: N(0, 1) inputs of the space's input shape and uniform
// class labels, both drawn from `seed`.
struct Batch {
  Tensor inputs;
  Tensor labels;
};
Batch make_batch(const SearchSpaceDef& space, std::size_t samples, std::uint64_t seed);

// Synthetic ground-truth validation accuracy (percent).
double synthetic_accuracy(const SearchSpaceDef& space, const ArchGenotype& g);

}  // namespace naslab::arch
