#include "dc/feature_net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dc {

Matrix LinearHead::apply(const Matrix& x) const {
  if (x.cols() != in_dim())
    throw std::invalid_argument("LinearHead: input has " + std::to_string(x.cols()) +
                                " columns, expected " + std::to_string(in_dim()));
  Matrix out = matmul_transposed(x, weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
  return out;
}

LinearHead LinearHead::gaussian(std::size_t out, std::size_t in, double stddev, Rng& rng) {
  LinearHead h(out, in);
  for (auto& w : h.weight.values()) w = rng.normal(0.0, stddev);
  return h;
}

void accumulate(LinearHead& dst, const LinearHead& src) {
  auto d = dst.weight.values();
  auto s = src.weight.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += src.bias[i];
}

void append_param_refs(std::vector<ParamRef>& out, const std::string& prefix, LinearHead& param,
                       const LinearHead& grad) {
  out.push_back({prefix + ".weight", param.weight.values(), grad.weight.values(), true});
  out.push_back({prefix + ".bias", param.bias, grad.bias, false});
}

FeatureNet::FeatureNet(const std::vector<std::size_t>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("FeatureNet: need input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(sizes[l]));
    layers_.push_back(LinearHead::gaussian(sizes[l + 1], sizes[l], stddev, rng));
  }
}

FeatureNet::FeatureNet(std::vector<LinearHead> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("FeatureNet: no layers");
  for (std::size_t l = 1; l < layers_.size(); ++l)
    if (layers_[l].in_dim() != layers_[l - 1].out_dim())
      throw std::invalid_argument("FeatureNet: layer " + std::to_string(l) +
                                  " input size does not match previous output");
}

FeatureNet FeatureNet::zeros(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("FeatureNet: need input and output sizes");
  std::vector<LinearHead> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) layers.emplace_back(sizes[l + 1], sizes[l]);
  return FeatureNet(std::move(layers));
}

std::size_t FeatureNet::input_dim() const { return layers_.front().in_dim(); }
std::size_t FeatureNet::output_dim() const { return layers_.back().out_dim(); }

std::vector<std::size_t> FeatureNet::sizes() const {
  std::vector<std::size_t> s{input_dim()};
  for (const auto& l : layers_) s.push_back(l.out_dim());
  return s;
}

Matrix FeatureNet::forward(const Matrix& batch) const {
  Matrix x = batch;
  for (const auto& layer : layers_) {
    x = layer.apply(x);
    for (auto& v : x.values()) v = v > 0.0 ? v : 0.0;
  }
  return x;
}

Matrix FeatureNet::forward_train(const Matrix& batch, std::span<const std::uint64_t> mask_seeds,
                                 double dropout_rate, Trace& trace) const {
  if (mask_seeds.size() != batch.rows())
    throw std::invalid_argument("forward_train: one mask seed per row required");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("forward_train: dropout rate must be in [0, 1)");
  trace = {};
  std::vector<Rng> mask_rngs;
  if (dropout_rate > 0.0)
    for (auto seed : mask_seeds) mask_rngs.emplace_back(seed);
  const double keep_scale = 1.0 / (1.0 - dropout_rate);

  Matrix x = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    trace.inputs.push_back(x);
    Matrix pre = layers_[l].apply(x);
    x = pre;
    for (auto& v : x.values()) v = v > 0.0 ? v : 0.0;
    Matrix mask;
    if (dropout_rate > 0.0 && l + 1 < layers_.size()) {
      mask = Matrix(x.rows(), x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto m = mask.row(r);
        auto v = x.row(r);
        for (std::size_t j = 0; j < m.size(); ++j) {
          m[j] = mask_rngs[r].uniform() < dropout_rate ? 0.0 : keep_scale;
          v[j] *= m[j];
        }
      }
    }
    trace.pre.push_back(std::move(pre));
    trace.masks.push_back(std::move(mask));
  }
  return x;
}

std::vector<LinearHead> FeatureNet::backward(const Trace& trace, const Matrix& grad_out,
                                             Matrix* grad_input) const {
  if (trace.pre.size() != layers_.size())
    throw std::invalid_argument("FeatureNet::backward: trace does not match network");
  std::vector<LinearHead> grads = zero_grads();
  Matrix g = grad_out;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Matrix& pre = trace.pre[li];
    const Matrix& mask = trace.masks[li];
    if (g.rows() != pre.rows() || g.cols() != pre.cols())
      throw std::invalid_argument("FeatureNet::backward: gradient shape mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = pre.values()[i] > 0.0 ? g.values()[i] : 0.0;
      if (!mask.empty()) v *= mask.values()[i];
      g.values()[i] = v;
    }
    const Matrix& in = trace.inputs[li];
    LinearHead& gl = grads[li];
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      auto xr = in.row(r);
      for (std::size_t o = 0; o < gr.size(); ++o) {
        if (gr[o] == 0.0) continue;
        auto w = gl.weight.row(o);
        for (std::size_t j = 0; j < xr.size(); ++j) w[j] += gr[o] * xr[j];
        gl.bias[o] += gr[o];
      }
    }
    if (li > 0 || grad_input) g = matmul(g, layers_[li].weight);
  }
  if (grad_input) *grad_input = std::move(g);
  return grads;
}

std::vector<LinearHead> FeatureNet::zero_grads() const {
  std::vector<LinearHead> grads;
  for (const auto& l : layers_) grads.emplace_back(l.out_dim(), l.in_dim());
  return grads;
}

void append_param_refs(std::vector<ParamRef>& out, FeatureNet& net,
                       const std::vector<LinearHead>& grads) {
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    append_param_refs(out, "net.layer" + std::to_string(l), net.layers()[l], grads[l]);
}

}  // namespace dc
