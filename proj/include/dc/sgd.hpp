#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dc/feature_net.hpp"

namespace dc {

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double dropout_rate = 0.5;
  std::size_t batch_size = 64;

  void validate() const;
};

// Mini-batch SGD with momentum and L2 weight decay:
//   buffer ← momentum·buffer + grad + weight_decay·param
//   param  ← param − lr·buffer
// Momentum buffers are keyed by block name and start at zero.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg);

  const SgdConfig& config() const noexcept { return cfg_; }

  // All gradients are checked before any parameter changes; a non-finite
  // gradient throws NumericalError naming its block.
  void step(std::span<const ParamRef> blocks);

  // Drops the buffers of every block whose name starts with `prefix`.
  void reset(std::string_view prefix = {});

  const std::map<std::string, std::vector<double>>& buffers() const noexcept { return buffers_; }
  void set_buffer(const std::string& name, std::vector<double> values);

 private:
  SgdConfig cfg_;
  std::map<std::string, std::vector<double>> buffers_;
};

}  // namespace dc
