#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "naslab/network.hpp"
#include "naslab/tensor.hpp"

namespace naslab::ag {

// CrossEntropy: labels hold class indices, shape [S]; loss is the batch mean.
// MSE: labels match the output shape; loss = (1/2S) * sum of squared residuals.
// SumOutputs: loss = sum of every output entry, labels ignored.
enum class LossKind { CrossEntropy, MSE, SumOutputs };

struct ParamKey {
  int depth_index = 0;
  std::size_t node = 0;
  std::string name;

  friend bool operator==(const ParamKey&, const ParamKey&) = default;
};

struct ParamGrad {
  ParamKey key;
  Tensor grad;
};

struct GradientRecord {
  std::vector<ParamGrad> entries;  // network parameter order
  bool per_sample = false;
  int network_depth = 0;

  const Tensor* find(int depth_index, std::string_view name) const;
};

// Post-activation outputs of one ReLU/GeLU node, shape [S, ...].
struct ActivationLayer {
  std::size_t node = 0;
  int depth_index = 0;
  LayerKind kind = LayerKind::ReLU;
  Tensor values;
};

struct ActivationCache {
  int network_depth = 0;
  std::size_t samples = 0;
  std::vector<ActivationLayer> layers;
};

struct ForwardOptions {
  bool record = true;
  double loss_scale = 1.0;
};

// Result of a forward pass. Holds a reference to the network, which must
// outlive it.
class ForwardPass {
 public:
  ForwardPass() = default;

  double loss() const { return loss_; }
  bool recorded() const { return recorded_; }
  std::size_t samples() const { return input_.empty() ? 0 : input_.dim(0); }
  const Tensor& output() const { return outputs_.back(); }
  const Tensor& node_output(std::size_t node) const { return outputs_.at(node); }
  ActivationCache activations() const;

 private:
  friend ForwardPass forward(const NetworkInstance&, const Tensor&, const Tensor&, LossKind, ForwardOptions);
  friend struct BackwardEngine;

  const NetworkInstance* net_ = nullptr;
  std::vector<Tensor> outputs_;
  Tensor input_;
  Tensor labels_;
  LossKind loss_kind_ = LossKind::MSE;
  double loss_scale_ = 1.0;
  double loss_ = 0.0;
  bool recorded_ = false;
};

ForwardPass forward(const NetworkInstance& net, const Tensor& batch, const Tensor& labels, LossKind loss_kind,
                    ForwardOptions options = {});

// Exact reverse-mode gradient of the recorded loss w.r.t. every parameter.
GradientRecord backward(const ForwardPass& pass);

// Gradient of the recorded loss w.r.t. the input batch.
Tensor input_gradient(const ForwardPass& pass);

// One record per sample, each the gradient of that sample's own loss.
// Requires at least two samples.
std::vector<GradientRecord> per_sample_gradients(const NetworkInstance& net, const Tensor& batch,
                                                 const Tensor& labels, LossKind loss_kind);

// Exact Gaussian-CDF GeLU and its derivative.
double gelu(double x);
double gelu_derivative(double x);

}  // namespace naslab::ag
