#include "naslab/network.hpp"

#include <algorithm>

#include "naslab/errors.hpp"

namespace naslab::ag {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Linear: return "Linear";
    case LayerKind::Conv2d: return "Conv2d";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::GeLU: return "GeLU";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Pool: return "Pool";
    case LayerKind::Add: return "Add";
    case LayerKind::Zero: return "Zero";
  }
  return "?";
}

bool is_activation(LayerKind kind) { return kind == LayerKind::ReLU || kind == LayerKind::GeLU; }

bool is_parameterized(LayerKind kind) { return kind == LayerKind::Linear || kind == LayerKind::Conv2d; }

namespace {

std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < kernel) return 0;
  return (in + 2 * pad - kernel) / stride + 1;
}

std::string describe(const LayerNode& n) {
  return "'" + n.name + "' (" + std::string(to_string(n.kind)) + ")";
}

std::string producer_name(const std::vector<LayerNode>& nodes, int id) {
  return id == kNetworkInput ? std::string("'input'") : describe(nodes[static_cast<std::size_t>(id)]);
}

[[noreturn]] void mismatch(const std::vector<LayerNode>& nodes, const LayerNode& n, int from, const Shape& got,
                           const std::string& expected) {
  throw StructuralError("shape mismatch: layer " + describe(n) + " expects " + expected + " but " +
                        producer_name(nodes, from) + " produces " + shape_to_string(got));
}

Shape infer(const std::vector<LayerNode>& nodes, const LayerNode& n, const std::vector<Shape>& in) {
  const auto need_inputs = [&](std::size_t count) {
    if (n.inputs.size() != count) {
      throw StructuralError("layer " + describe(n) + " needs " + std::to_string(count) + " input(s), got " +
                            std::to_string(n.inputs.size()));
    }
  };
  switch (n.kind) {
    case LayerKind::Linear: {
      need_inputs(1);
      if (in[0].size() != 1 || in[0][0] != n.attrs.in_features) {
        mismatch(nodes, n, n.inputs[0], in[0], "[" + std::to_string(n.attrs.in_features) + "]");
      }
      return {n.attrs.out_features};
    }
    case LayerKind::Conv2d: {
      need_inputs(1);
      if (in[0].size() != 3 || in[0][0] != n.attrs.in_channels) {
        mismatch(nodes, n, n.inputs[0], in[0], "[" + std::to_string(n.attrs.in_channels) + "xHxW]");
      }
      const auto h = conv_extent(in[0][1], n.attrs.kernel, n.attrs.stride, n.attrs.padding);
      const auto w = conv_extent(in[0][2], n.attrs.kernel, n.attrs.stride, n.attrs.padding);
      if (h == 0 || w == 0) mismatch(nodes, n, n.inputs[0], in[0], "spatial extent >= kernel");
      return {n.attrs.out_channels, h, w};
    }
    case LayerKind::ReLU:
    case LayerKind::GeLU:
    case LayerKind::Zero:
      need_inputs(1);
      return in[0];
    case LayerKind::Flatten:
      need_inputs(1);
      return {shape_numel(in[0])};
    case LayerKind::Pool: {
      need_inputs(1);
      if (in[0].size() != 3) mismatch(nodes, n, n.inputs[0], in[0], "[CxHxW]");
      if (n.attrs.global) return {in[0][0], 1, 1};
      const auto h = conv_extent(in[0][1], n.attrs.kernel, n.attrs.stride, n.attrs.padding);
      const auto w = conv_extent(in[0][2], n.attrs.kernel, n.attrs.stride, n.attrs.padding);
      if (h == 0 || w == 0) mismatch(nodes, n, n.inputs[0], in[0], "spatial extent >= kernel");
      return {in[0][0], h, w};
    }
    case LayerKind::Add: {
      if (n.inputs.empty()) throw StructuralError("layer " + describe(n) + " has no inputs");
      for (std::size_t i = 1; i < in.size(); ++i) {
        if (in[i] != in[0]) mismatch(nodes, n, n.inputs[i], in[i], shape_to_string(in[0]));
      }
      return in[0];
    }
  }
  throw StructuralError("unknown layer kind");
}

void check_params(const LayerNode& n) {
  if (!is_parameterized(n.kind)) {
    if (!n.params.empty()) throw StructuralError("parameterless layer " + describe(n) + " carries parameters");
    return;
  }
  Shape weight;
  if (n.kind == LayerKind::Linear) {
    weight = {n.attrs.out_features, n.attrs.in_features};
  } else {
    weight = {n.attrs.out_channels, n.attrs.in_channels, n.attrs.kernel, n.attrs.kernel};
  }
  const std::size_t expected = n.attrs.bias ? 2 : 1;
  if (n.params.size() != expected || n.params[0].name != "weight" || n.params[0].value.shape() != weight) {
    throw StructuralError("layer " + describe(n) + " has malformed parameters");
  }
  if (n.attrs.bias) {
    const std::size_t out = n.kind == LayerKind::Linear ? n.attrs.out_features : n.attrs.out_channels;
    if (n.params[1].name != "bias" || n.params[1].value.shape() != Shape{out}) {
      throw StructuralError("layer " + describe(n) + " has malformed bias");
    }
  }
}

}  // namespace

NetworkInstance::NetworkInstance(Shape input_shape, std::vector<LayerNode> nodes)
    : input_shape_(std::move(input_shape)), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw StructuralError("network has no layers");
  if (input_shape_.empty() || shape_numel(input_shape_) == 0) throw StructuralError("network input shape is empty");
  int next_depth = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    LayerNode& n = nodes_[i];
    if (n.name.empty()) n.name = std::string(to_string(n.kind)) + "_" + std::to_string(i);
    std::vector<Shape> in;
    int inherited = 0;
    for (int from : n.inputs) {
      if (from != kNetworkInput && (from < 0 || static_cast<std::size_t>(from) >= i)) {
        throw StructuralError("layer " + describe(n) + " consumes a node that is not earlier in topological order");
      }
      in.push_back(producer_shape(from));
      if (from != kNetworkInput) inherited = std::max(inherited, nodes_[static_cast<std::size_t>(from)].depth_index);
    }
    n.output_shape = infer(nodes_, n, in);
    check_params(n);
    n.depth_index = is_parameterized(n.kind) ? ++next_depth : inherited;
  }
  depth_ = next_depth;
}

const Shape& NetworkInstance::producer_shape(int id) const {
  return id == kNetworkInput ? input_shape_ : nodes_.at(static_cast<std::size_t>(id)).output_shape;
}

NetworkBuilder::NetworkBuilder(Shape input_shape) : input_shape_(std::move(input_shape)) {}

const Shape& NetworkBuilder::shape_of(int id) const {
  return id == kNetworkInput ? input_shape_ : nodes_.at(static_cast<std::size_t>(id)).output_shape;
}

int NetworkBuilder::push(LayerNode node) {
  const std::size_t idx = nodes_.size();
  if (node.name.empty()) node.name = std::string(to_string(node.kind)) + "_" + std::to_string(idx);
  std::vector<Shape> in;
  for (int from : node.inputs) {
    if (from != kNetworkInput && (from < 0 || static_cast<std::size_t>(from) >= idx)) {
      throw StructuralError("layer '" + node.name + "' consumes an unknown node");
    }
    in.push_back(shape_of(from));
  }
  node.output_shape = infer(nodes_, node, in);
  nodes_.push_back(std::move(node));
  return static_cast<int>(idx);
}

int NetworkBuilder::linear(int from, std::size_t out_features, bool bias, std::string name) {
  const Shape& s = shape_of(from);
  if (s.size() != 1) {
    throw StructuralError("Linear layer '" + name + "' needs a flat input, got " + shape_to_string(s));
  }
  LayerNode n;
  n.kind = LayerKind::Linear;
  n.name = std::move(name);
  n.inputs = {from};
  n.attrs.in_features = s[0];
  n.attrs.out_features = out_features;
  n.attrs.bias = bias;
  n.params.push_back({"weight", Tensor({out_features, s[0]})});
  if (bias) n.params.push_back({"bias", Tensor({out_features})});
  return push(std::move(n));
}

int NetworkBuilder::conv2d(int from, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                           std::optional<std::size_t> padding, bool bias, std::string name) {
  const Shape& s = shape_of(from);
  if (s.size() != 3) {
    throw StructuralError("Conv2d layer '" + name + "' needs a CxHxW input, got " + shape_to_string(s));
  }
  LayerNode n;
  n.kind = LayerKind::Conv2d;
  n.name = std::move(name);
  n.inputs = {from};
  n.attrs.in_channels = s[0];
  n.attrs.out_channels = out_channels;
  n.attrs.kernel = kernel;
  n.attrs.stride = stride;
  n.attrs.padding = padding.value_or(kernel / 2);
  n.attrs.bias = bias;
  n.params.push_back({"weight", Tensor({out_channels, s[0], kernel, kernel})});
  if (bias) n.params.push_back({"bias", Tensor({out_channels})});
  return push(std::move(n));
}

int NetworkBuilder::relu(int from, std::string name) { return activation(from, Activation::ReLU, std::move(name)); }

int NetworkBuilder::gelu(int from, std::string name) { return activation(from, Activation::GeLU, std::move(name)); }

int NetworkBuilder::activation(int from, Activation act, std::string name) {
  LayerNode n;
  n.kind = act == Activation::ReLU ? LayerKind::ReLU : LayerKind::GeLU;
  n.name = std::move(name);
  n.inputs = {from};
  return push(std::move(n));
}

int NetworkBuilder::flatten(int from, std::string name) {
  LayerNode n;
  n.kind = LayerKind::Flatten;
  n.name = std::move(name);
  n.inputs = {from};
  return push(std::move(n));
}

int NetworkBuilder::avg_pool(int from, std::size_t kernel, std::size_t stride, std::size_t padding, std::string name) {
  LayerNode n;
  n.kind = LayerKind::Pool;
  n.name = std::move(name);
  n.inputs = {from};
  n.attrs.kernel = kernel;
  n.attrs.stride = stride;
  n.attrs.padding = padding;
  return push(std::move(n));
}

int NetworkBuilder::global_avg_pool(int from, std::string name) {
  LayerNode n;
  n.kind = LayerKind::Pool;
  n.name = std::move(name);
  n.inputs = {from};
  n.attrs.global = true;
  return push(std::move(n));
}

int NetworkBuilder::add(std::vector<int> from, std::string name) {
  LayerNode n;
  n.kind = LayerKind::Add;
  n.name = std::move(name);
  n.inputs = std::move(from);
  return push(std::move(n));
}

int NetworkBuilder::zero(int like, std::string name) {
  LayerNode n;
  n.kind = LayerKind::Zero;
  n.name = std::move(name);
  n.inputs = {like};
  return push(std::move(n));
}

NetworkInstance NetworkBuilder::build() && { return NetworkInstance(std::move(input_shape_), std::move(nodes_)); }

}  // namespace naslab::ag
