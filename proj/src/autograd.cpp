#include "naslab/autograd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "naslab/errors.hpp"

namespace naslab::ag {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

const Tensor* GradientRecord::find(int depth_index, std::string_view name) const {
  for (const auto& e : entries) {
    if (e.key.depth_index == depth_index && e.key.name == name) return &e.grad;
  }
  return nullptr;
}

ActivationCache ForwardPass::activations() const {
  ActivationCache cache;
  if (net_ == nullptr) return cache;
  cache.network_depth = net_->depth();
  cache.samples = samples();
  for (std::size_t i = 0; i < net_->size(); ++i) {
    const LayerNode& n = net_->node(i);
    if (is_activation(n.kind)) cache.layers.push_back({i, n.depth_index, n.kind, outputs_[i]});
  }
  return cache;
}

namespace {

struct Spatial {
  std::size_t c, h, w;
};

Spatial spatial(const Shape& s) { return {s[0], s[1], s[2]}; }

void linear_forward(const LayerNode& n, const Tensor& x, Tensor& y, std::size_t S) {
  const std::size_t in = n.attrs.in_features, out = n.attrs.out_features;
  const double* W = n.params[0].value.data();
  const double* b = n.attrs.bias ? n.params[1].value.data() : nullptr;
  for (std::size_t s = 0; s < S; ++s) {
    const double* xs = x.data() + s * in;
    double* ys = y.data() + s * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = W + o * in;
      double acc = b ? b[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xs[i];
      ys[o] = acc;
    }
  }
}

void linear_backward(const LayerNode& n, const Tensor& x, const Tensor& dy, Tensor* dx, Tensor& dW, Tensor* db,
                     std::size_t S) {
  const std::size_t in = n.attrs.in_features, out = n.attrs.out_features;
  const double* W = n.params[0].value.data();
  for (std::size_t s = 0; s < S; ++s) {
    const double* xs = x.data() + s * in;
    const double* g = dy.data() + s * out;
    double* dxs = dx ? dx->data() + s * in : nullptr;
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g[o];
      if (db) (*db)[o] += go;
      if (go == 0.0) continue;
      double* dwr = dW.data() + o * in;
      const double* wr = W + o * in;
      for (std::size_t i = 0; i < in; ++i) dwr[i] += go * xs[i];
      if (dxs) {
        for (std::size_t i = 0; i < in; ++i) dxs[i] += go * wr[i];
      }
    }
  }
}

// Input offset (within one sample) read by column j = (ci, kh, kw) at output
// position q, or -1 where the tap falls into padding.
// Memoized per thread by geometry; per-sample passes hit the same few layers.
const std::vector<std::ptrdiff_t>& im2col_index(const LayerNode& n, const Shape& in_shape) {
  const auto [ci_n, ih, iw] = spatial(in_shape);
  const auto [co_n, oh, ow] = spatial(n.output_shape);
  const std::size_t k = n.attrs.kernel, st = n.attrs.stride, p = n.attrs.padding;
  const std::size_t K = ci_n * k * k, P = oh * ow;
  thread_local std::map<std::array<std::size_t, 8>, std::vector<std::ptrdiff_t>> cache;
  auto [it, fresh] = cache.try_emplace({ci_n, ih, iw, oh, ow, k, st, p});
  std::vector<std::ptrdiff_t>& idx = it->second;
  if (!fresh) return idx;
  idx.assign(K * P, -1);
  for (std::size_t ci = 0; ci < ci_n; ++ci) {
    for (std::size_t kh = 0; kh < k; ++kh) {
      for (std::size_t kw = 0; kw < k; ++kw) {
        const std::size_t j = (ci * k + kh) * k + kw;
        for (std::size_t r = 0; r < oh; ++r) {
          for (std::size_t c = 0; c < ow; ++c) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(r * st + kh) - static_cast<std::ptrdiff_t>(p);
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(c * st + kw) - static_cast<std::ptrdiff_t>(p);
            if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(ih) || x >= static_cast<std::ptrdiff_t>(iw)) continue;
            idx[j * P + r * ow + c] = static_cast<std::ptrdiff_t>(ci * ih * iw) + y * static_cast<std::ptrdiff_t>(iw) + x;
          }
        }
      }
    }
  }
  return idx;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void gather_columns(const std::vector<std::ptrdiff_t>& idx, const double* xs, RowMatrix& cols) {
  double* c = cols.data();
  for (std::size_t i = 0; i < idx.size(); ++i) c[i] = idx[i] < 0 ? 0.0 : xs[idx[i]];
}

void conv_forward(const LayerNode& n, const Shape& in_shape, const Tensor& x, Tensor& y, std::size_t S) {
  const auto [ci_n, ih, iw] = spatial(in_shape);
  const auto [co_n, oh, ow] = spatial(n.output_shape);
  const std::size_t k = n.attrs.kernel;
  const std::size_t K = ci_n * k * k, P = oh * ow;
  const auto& idx = im2col_index(n, in_shape);
  const Eigen::Map<const RowMatrix> W(n.params[0].value.data(), static_cast<Eigen::Index>(co_n), static_cast<Eigen::Index>(K));
  RowMatrix cols(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
  const std::size_t in_stride = ci_n * ih * iw, out_stride = co_n * P;
  for (std::size_t s = 0; s < S; ++s) {
    gather_columns(idx, x.data() + s * in_stride, cols);
    Eigen::Map<RowMatrix> ys(y.data() + s * out_stride, static_cast<Eigen::Index>(co_n), static_cast<Eigen::Index>(P));
    ys.noalias() = W * cols;
    if (n.attrs.bias) {
      const double* b = n.params[1].value.data();
      for (std::size_t co = 0; co < co_n; ++co) ys.row(static_cast<Eigen::Index>(co)).array() += b[co];
    }
  }
}

void conv_backward(const LayerNode& n, const Shape& in_shape, const Tensor& x, const Tensor& dy, Tensor* dx,
                   Tensor& dW, Tensor* db, std::size_t S) {
  const auto [ci_n, ih, iw] = spatial(in_shape);
  const auto [co_n, oh, ow] = spatial(n.output_shape);
  const std::size_t k = n.attrs.kernel;
  const std::size_t K = ci_n * k * k, P = oh * ow;
  const auto& idx = im2col_index(n, in_shape);
  const auto rows = static_cast<Eigen::Index>(co_n), kk = static_cast<Eigen::Index>(K), pp = static_cast<Eigen::Index>(P);
  const Eigen::Map<const RowMatrix> W(n.params[0].value.data(), rows, kk);
  Eigen::Map<RowMatrix> gW(dW.data(), rows, kk);
  RowMatrix cols(kk, pp), dcols(kk, pp);
  const std::size_t in_stride = ci_n * ih * iw, out_stride = co_n * P;
  for (std::size_t s = 0; s < S; ++s) {
    const double* xs = x.data() + s * in_stride;
    const Eigen::Map<const RowMatrix> g(dy.data() + s * out_stride, rows, pp);
    if (db) {
      for (std::size_t co = 0; co < co_n; ++co) (*db)[co] += g.row(static_cast<Eigen::Index>(co)).sum();
    }
    gather_columns(idx, xs, cols);
    gW.noalias() += g * cols.transpose();
    if (dx) {
      dcols.noalias() = W.transpose() * g;
      double* dxs = dx->data() + s * in_stride;
      const double* d = dcols.data();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= 0) dxs[idx[i]] += d[i];
      }
    }
  }
}

void pool_forward(const LayerNode& n, const Shape& in_shape, const Tensor& x, Tensor& y, std::size_t S) {
  const auto [c_n, ih, iw] = spatial(in_shape);
  const auto [_, oh, ow] = spatial(n.output_shape);
  const std::size_t in_stride = c_n * ih * iw, out_stride = c_n * oh * ow;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t c = 0; c < c_n; ++c) {
      const double* xc = x.data() + s * in_stride + c * ih * iw;
      double* yc = y.data() + s * out_stride + c * oh * ow;
      if (n.attrs.global) {
        double acc = 0.0;
        for (std::size_t i = 0; i < ih * iw; ++i) acc += xc[i];
        yc[0] = acc / static_cast<double>(ih * iw);
        continue;
      }
      const std::size_t k = n.attrs.kernel, st = n.attrs.stride, p = n.attrs.padding;
      for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t q = 0; q < ow; ++q) {
          double acc = 0.0;
          std::size_t count = 0;
          for (std::size_t kh = 0; kh < k; ++kh) {
            const std::size_t rr = r * st + kh;
            if (rr < p || rr - p >= ih) continue;
            for (std::size_t kw = 0; kw < k; ++kw) {
              const std::size_t cc = q * st + kw;
              if (cc < p || cc - p >= iw) continue;
              acc += xc[(rr - p) * iw + (cc - p)];
              ++count;
            }
          }
          yc[r * ow + q] = count ? acc / static_cast<double>(count) : 0.0;
        }
      }
    }
  }
}

void pool_backward(const LayerNode& n, const Shape& in_shape, const Tensor& dy, Tensor& dx, std::size_t S) {
  const auto [c_n, ih, iw] = spatial(in_shape);
  const auto [_, oh, ow] = spatial(n.output_shape);
  const std::size_t in_stride = c_n * ih * iw, out_stride = c_n * oh * ow;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t c = 0; c < c_n; ++c) {
      double* dxc = dx.data() + s * in_stride + c * ih * iw;
      const double* gc = dy.data() + s * out_stride + c * oh * ow;
      if (n.attrs.global) {
        const double g = gc[0] / static_cast<double>(ih * iw);
        for (std::size_t i = 0; i < ih * iw; ++i) dxc[i] += g;
        continue;
      }
      const std::size_t k = n.attrs.kernel, st = n.attrs.stride, p = n.attrs.padding;
      for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t q = 0; q < ow; ++q) {
          std::size_t count = 0;
          for (std::size_t kh = 0; kh < k; ++kh) {
            const std::size_t rr = r * st + kh;
            if (rr < p || rr - p >= ih) continue;
            for (std::size_t kw = 0; kw < k; ++kw) {
              const std::size_t cc = q * st + kw;
              if (cc >= p && cc - p < iw) ++count;
            }
          }
          if (count == 0) continue;
          const double g = gc[r * ow + q] / static_cast<double>(count);
          for (std::size_t kh = 0; kh < k; ++kh) {
            const std::size_t rr = r * st + kh;
            if (rr < p || rr - p >= ih) continue;
            for (std::size_t kw = 0; kw < k; ++kw) {
              const std::size_t cc = q * st + kw;
              if (cc < p || cc - p >= iw) continue;
              dxc[(rr - p) * iw + (cc - p)] += g;
            }
          }
        }
      }
    }
  }
}

Shape batched(std::size_t S, const Shape& per_sample) {
  Shape s{S};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

}  // namespace

ForwardPass forward(const NetworkInstance& net, const Tensor& batch, const Tensor& labels, LossKind loss_kind,
                    ForwardOptions options) {
  if (batch.rank() != net.input_shape().size() + 1 || batch.dim(0) == 0 ||
      !std::equal(net.input_shape().begin(), net.input_shape().end(), batch.shape().begin() + 1)) {
    throw StructuralError("shape mismatch: 'input' batch " + shape_to_string(batch.shape()) +
                          " does not match network input " + shape_to_string(net.input_shape()) + " feeding '" +
                          net.node(0).name + "'");
  }
  const std::size_t S = batch.dim(0);
  ForwardPass pass;
  pass.net_ = &net;
  pass.input_ = batch;
  pass.labels_ = labels;
  pass.loss_kind_ = loss_kind;
  pass.loss_scale_ = options.loss_scale;
  pass.recorded_ = options.record;
  pass.outputs_.reserve(net.size());

  for (std::size_t i = 0; i < net.size(); ++i) {
    const LayerNode& n = net.node(i);
    const auto input_of = [&](std::size_t slot) -> const Tensor& {
      const int from = n.inputs[slot];
      return from == kNetworkInput ? pass.input_ : pass.outputs_[static_cast<std::size_t>(from)];
    };
    Tensor y(batched(S, n.output_shape));
    switch (n.kind) {
      case LayerKind::Linear: linear_forward(n, input_of(0), y, S); break;
      case LayerKind::Conv2d: conv_forward(n, net.producer_shape(n.inputs[0]), input_of(0), y, S); break;
      case LayerKind::ReLU: {
        const Tensor& x = input_of(0);
        for (std::size_t j = 0; j < y.numel(); ++j) y[j] = x[j] > 0.0 ? x[j] : 0.0;
        break;
      }
      case LayerKind::GeLU: {
        const Tensor& x = input_of(0);
        for (std::size_t j = 0; j < y.numel(); ++j) y[j] = gelu(x[j]);
        break;
      }
      case LayerKind::Flatten: y = input_of(0).reshaped(y.shape()); break;
      case LayerKind::Pool: pool_forward(n, net.producer_shape(n.inputs[0]), input_of(0), y, S); break;
      case LayerKind::Add:
        for (std::size_t slot = 0; slot < n.inputs.size(); ++slot) {
          const Tensor& x = input_of(slot);
          for (std::size_t j = 0; j < y.numel(); ++j) y[j] += x[j];
        }
        break;
      case LayerKind::Zero: break;
    }
    pass.outputs_.push_back(std::move(y));
  }

  const Tensor& out = pass.outputs_.back();
  double loss = 0.0;
  switch (loss_kind) {
    case LossKind::CrossEntropy: {
      if (out.rank() != 2) throw StructuralError("cross-entropy needs a [S x classes] output");
      if (labels.numel() != S) throw PreconditionError("cross-entropy needs one class label per sample");
      const std::size_t K = out.dim(1);
      for (std::size_t s = 0; s < S; ++s) {
        const double* z = out.data() + s * K;
        const auto label = static_cast<std::size_t>(labels[s]);
        if (labels[s] < 0.0 || label >= K) throw PreconditionError("class label out of range");
        const double m = *std::max_element(z, z + K);
        double sum = 0.0;
        for (std::size_t c = 0; c < K; ++c) sum += std::exp(z[c] - m);
        loss += -(z[label] - m - std::log(sum));
      }
      loss /= static_cast<double>(S);
      break;
    }
    case LossKind::MSE: {
      if (labels.shape() != out.shape()) {
        throw PreconditionError("MSE labels " + shape_to_string(labels.shape()) + " do not match output " +
                                shape_to_string(out.shape()));
      }
      for (std::size_t j = 0; j < out.numel(); ++j) {
        const double r = out[j] - labels[j];
        loss += r * r;
      }
      loss /= 2.0 * static_cast<double>(S);
      break;
    }
    case LossKind::SumOutputs:
      for (double v : out.values()) loss += v;
      break;
  }
  pass.loss_ = options.loss_scale * loss;
  return pass;
}

struct BackwardEngine {
  static void run(const ForwardPass& pass, GradientRecord* record, Tensor* input_grad) {
    if (!pass.recorded_ || pass.net_ == nullptr) {
      throw StateError("backward requires a prior forward pass with gradient recording enabled");
    }
    const NetworkInstance& net = *pass.net_;
    const std::size_t S = pass.samples();
    std::vector<Tensor> grads(net.size());
    Tensor dinput;
    if (input_grad) dinput = Tensor(pass.input_.shape());

    // Seed with d(loss)/d(output).
    const Tensor& out = pass.outputs_.back();
    Tensor seed(out.shape());
    const double scale = pass.loss_scale_;
    switch (pass.loss_kind_) {
      case LossKind::CrossEntropy: {
        const std::size_t K = out.dim(1);
        for (std::size_t s = 0; s < S; ++s) {
          const double* z = out.data() + s * K;
          double* g = seed.data() + s * K;
          const double m = *std::max_element(z, z + K);
          double sum = 0.0;
          for (std::size_t c = 0; c < K; ++c) sum += std::exp(z[c] - m);
          for (std::size_t c = 0; c < K; ++c) g[c] = std::exp(z[c] - m) / sum;
          g[static_cast<std::size_t>(pass.labels_[s])] -= 1.0;
          for (std::size_t c = 0; c < K; ++c) g[c] *= scale / static_cast<double>(S);
        }
        break;
      }
      case LossKind::MSE:
        for (std::size_t j = 0; j < out.numel(); ++j) {
          seed[j] = scale * (out[j] - pass.labels_[j]) / static_cast<double>(S);
        }
        break;
      case LossKind::SumOutputs: seed.fill(scale); break;
    }
    grads.back() = std::move(seed);

    if (record) {
      record->entries.clear();
      record->network_depth = net.depth();
      record->per_sample = S == 1;
    }
    std::vector<std::vector<Tensor>> param_grads(net.size());

    for (std::size_t ri = net.size(); ri-- > 0;) {
      const LayerNode& n = net.node(ri);
      Tensor& dy = grads[ri];
      auto& pg = param_grads[ri];
      for (const auto& p : n.params) pg.emplace_back(p.value.shape());
      if (dy.empty()) {
        continue;  // output unused downstream
      }
      const auto grad_slot = [&](std::size_t slot) -> Tensor* {
        const int from = n.inputs[slot];
        if (from == kNetworkInput) return input_grad ? &dinput : nullptr;
        Tensor& g = grads[static_cast<std::size_t>(from)];
        if (g.empty()) g = Tensor(pass.outputs_[static_cast<std::size_t>(from)].shape());
        return &g;
      };
      const auto input_of = [&](std::size_t slot) -> const Tensor& {
        const int from = n.inputs[slot];
        return from == kNetworkInput ? pass.input_ : pass.outputs_[static_cast<std::size_t>(from)];
      };
      switch (n.kind) {
        case LayerKind::Linear:
          linear_backward(n, input_of(0), dy, grad_slot(0), pg[0], n.attrs.bias ? &pg[1] : nullptr, S);
          break;
        case LayerKind::Conv2d:
          conv_backward(n, net.producer_shape(n.inputs[0]), input_of(0), dy, grad_slot(0), pg[0],
                        n.attrs.bias ? &pg[1] : nullptr, S);
          break;
        case LayerKind::ReLU: {
          const Tensor& x = input_of(0);
          if (Tensor* dx = grad_slot(0)) {
            for (std::size_t j = 0; j < x.numel(); ++j) {
              if (x[j] > 0.0) (*dx)[j] += dy[j];
            }
          }
          break;
        }
        case LayerKind::GeLU: {
          const Tensor& x = input_of(0);
          if (Tensor* dx = grad_slot(0)) {
            for (std::size_t j = 0; j < x.numel(); ++j) (*dx)[j] += dy[j] * gelu_derivative(x[j]);
          }
          break;
        }
        case LayerKind::Flatten:
          if (Tensor* dx = grad_slot(0)) {
            for (std::size_t j = 0; j < dy.numel(); ++j) (*dx)[j] += dy[j];
          }
          break;
        case LayerKind::Pool:
          if (Tensor* dx = grad_slot(0)) pool_backward(n, net.producer_shape(n.inputs[0]), dy, *dx, S);
          break;
        case LayerKind::Add:
          for (std::size_t slot = 0; slot < n.inputs.size(); ++slot) {
            if (Tensor* dx = grad_slot(slot)) {
              for (std::size_t j = 0; j < dy.numel(); ++j) (*dx)[j] += dy[j];
            }
          }
          break;
        case LayerKind::Zero:
          grad_slot(0);  // zero map: producer receives an all-zero gradient
          break;
      }
      dy = Tensor();  // release
    }

    if (record) {
      for (std::size_t i = 0; i < net.size(); ++i) {
        const LayerNode& n = net.node(i);
        for (std::size_t slot = 0; slot < n.params.size(); ++slot) {
          record->entries.push_back({{n.depth_index, i, n.params[slot].name}, std::move(param_grads[i][slot])});
        }
      }
    }
    if (input_grad) *input_grad = std::move(dinput);
  }
};

GradientRecord backward(const ForwardPass& pass) {
  GradientRecord record;
  BackwardEngine::run(pass, &record, nullptr);
  return record;
}

Tensor input_gradient(const ForwardPass& pass) {
  Tensor g;
  BackwardEngine::run(pass, nullptr, &g);
  return g;
}

std::vector<GradientRecord> per_sample_gradients(const NetworkInstance& net, const Tensor& batch,
                                                 const Tensor& labels, LossKind loss_kind) {
  if (batch.rank() == 0 || batch.dim(0) < 2) {
    throw PreconditionError("per-sample gradients need at least two samples");
  }
  const std::size_t S = batch.dim(0);
  std::vector<GradientRecord> out;
  out.reserve(S);
  for (std::size_t s = 0; s < S; ++s) {
    Tensor x = batch.rows(s, 1);
    Tensor y = loss_kind == LossKind::SumOutputs || labels.empty() ? Tensor() : labels.rows(s, 1);
    auto pass = forward(net, x, y, loss_kind);
    auto rec = backward(pass);
    rec.per_sample = true;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace naslab::ag
