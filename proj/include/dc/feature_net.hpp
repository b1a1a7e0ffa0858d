#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dc/matrix.hpp"
#include "dc/rng.hpp"

namespace dc {

// Fully connected layer y = x·Wᵀ + b with W stored out × in.
struct LinearHead {
  Matrix weight;
  std::vector<double> bias;

  LinearHead() = default;
  LinearHead(std::size_t out, std::size_t in) : weight(out, in), bias(out, 0.0) {}

  std::size_t out_dim() const noexcept { return weight.rows(); }
  std::size_t in_dim() const noexcept { return weight.cols(); }

  Matrix apply(const Matrix& x) const;
  // Gaussian weights with the given stddev, zero bias.
  static LinearHead gaussian(std::size_t out, std::size_t in, double stddev, Rng& rng);
  bool operator==(const LinearHead&) const = default;
};

// Gradient accumulation: dst += src.
void accumulate(LinearHead& dst, const LinearHead& src);

// One mutable parameter block as seen by the optimizer.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<const double> grad;
  bool decay = true;  // weight decay applies to weights, not biases
};

// Appends "<prefix>.weight" and "<prefix>.bias" blocks.
void append_param_refs(std::vector<ParamRef>& out, const std::string& prefix, LinearHead& param,
                       const LinearHead& grad);

// Multilayer perceptron with a rectifier after every layer, including the
// last, so features are the post-ReLU activations of the final layer.
class FeatureNet {
 public:
  FeatureNet() = default;
  // He-normal weights, zero biases. sizes = {input, hidden..., feature_dim}.
  FeatureNet(const std::vector<std::size_t>& sizes, Rng& rng);
  explicit FeatureNet(std::vector<LinearHead> layers);

  static FeatureNet zeros(const std::vector<std::size_t>& sizes);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::vector<std::size_t> sizes() const;

  std::vector<LinearHead>& layers() noexcept { return layers_; }
  const std::vector<LinearHead>& layers() const noexcept { return layers_; }

  // Inference pass, no dropout.
  Matrix forward(const Matrix& batch) const;

  struct Trace {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    std::vector<Matrix> masks;   // inverted-dropout scale per hidden unit, empty if unused
  };

  // Training pass. Hidden-layer outputs (all but the last layer) get inverted
  // dropout; row i draws its mask from Rng(mask_seeds[i]), so a row's mask does
  // not depend on which batch it is in.
  Matrix forward_train(const Matrix& batch, std::span<const std::uint64_t> mask_seeds,
                       double dropout_rate, Trace& trace) const;

  // Gradients for every layer given dLoss/dOutput; optionally dLoss/dInput.
  std::vector<LinearHead> backward(const Trace& trace, const Matrix& grad_out,
                                   Matrix* grad_input = nullptr) const;

  std::vector<LinearHead> zero_grads() const;

  bool operator==(const FeatureNet&) const = default;

 private:
  std::vector<LinearHead> layers_;
};

void append_param_refs(std::vector<ParamRef>& out, FeatureNet& net,
                       const std::vector<LinearHead>& grads);

}  // namespace dc
