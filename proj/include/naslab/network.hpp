#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "naslab/tensor.hpp"

namespace naslab::ag {

enum class LayerKind { Linear, Conv2d, ReLU, GeLU, Flatten, Pool, Add, Zero };

std::string_view to_string(LayerKind kind);
bool is_activation(LayerKind kind);
bool is_parameterized(LayerKind kind);

enum class Activation { ReLU, GeLU };

// Sentinel producer id for the network input.
inline constexpr int kNetworkInput = -1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct LayerAttrs {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool global = false;  // Pool only: global average over spatial extent
  bool bias = true;
};

struct LayerNode {
  LayerKind kind = LayerKind::ReLU;
  std::string name;
  std::vector<int> inputs;
  LayerAttrs attrs;
  std::vector<NamedTensor> params;
  // Parameterized nodes are numbered 1..L in topological order; every other
  // node inherits the largest index among its producers (0 before the first
  // parameterized layer).
  int depth_index = 0;
  Shape output_shape;  // per sample, filled during validation
};

// Validated feed-forward DAG. The last node is the network output.
class NetworkInstance {
 public:
  NetworkInstance() = default;
  NetworkInstance(Shape input_shape, std::vector<LayerNode> nodes);

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return nodes_.back().output_shape; }
  std::span<const LayerNode> nodes() const { return nodes_; }
  const LayerNode& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const { return nodes_.size(); }

  // Mutable parameter access for explicit updates (init, synflow's |w|).
  Tensor& param(std::size_t node, std::size_t slot) { return nodes_.at(node).params.at(slot).value; }

  // Network depth L: number of parameterized layers.
  int depth() const { return depth_; }

  // Shape of a producer's per-sample output (kNetworkInput for the input).
  const Shape& producer_shape(int id) const;

 private:
  Shape input_shape_;
  std::vector<LayerNode> nodes_;
  int depth_ = 0;
};

// Incremental construction with shape inference; ids returned by each call
// are node indices usable as inputs of later calls.
class NetworkBuilder {
 public:
  explicit NetworkBuilder(Shape input_shape);

  int linear(int from, std::size_t out_features, bool bias = true, std::string name = {});
  int conv2d(int from, std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
             std::optional<std::size_t> padding = std::nullopt, bool bias = true, std::string name = {});
  int relu(int from, std::string name = {});
  int gelu(int from, std::string name = {});
  int activation(int from, Activation act, std::string name = {});
  int flatten(int from, std::string name = {});
  int avg_pool(int from, std::size_t kernel, std::size_t stride, std::size_t padding, std::string name = {});
  int global_avg_pool(int from, std::string name = {});
  int add(std::vector<int> from, std::string name = {});
  int zero(int like, std::string name = {});

  const Shape& shape_of(int id) const;
  NetworkInstance build() &&;

 private:
  int push(LayerNode node);

  Shape input_shape_;
  std::vector<LayerNode> nodes_;
};

}  // namespace naslab::ag
