#include "dc/sgd.hpp"

#include <stdexcept>

#include "dc/error.hpp"

namespace dc {

void SgdConfig::validate() const {
  if (!(learning_rate >= 0.0))
    throw ConfigError("learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout rate must be in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
}

SgdOptimizer::SgdOptimizer(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SgdOptimizer::step(std::span<const ParamRef> blocks) {
  for (const auto& b : blocks) {
    if (b.value.size() != b.grad.size())
      throw std::invalid_argument("sgd step: block '" + b.name + "' has " +
                                  std::to_string(b.value.size()) + " values but " +
                                  std::to_string(b.grad.size()) + " gradients");
    if (!all_finite(b.grad))
      throw NumericalError("sgd step: non-finite gradient in block '" + b.name + "'");
  }
  for (const auto& b : blocks) {
    auto& buf = buffers_[b.name];
    if (buf.size() != b.value.size()) buf.assign(b.value.size(), 0.0);
    const double wd = b.decay ? cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      buf[i] = cfg_.momentum * buf[i] + b.grad[i] + wd * b.value[i];
      b.value[i] -= cfg_.learning_rate * buf[i];
    }
  }
}

void SgdOptimizer::reset(std::string_view prefix) {
  for (auto it = buffers_.begin(); it != buffers_.end();) {
    if (it->first.starts_with(prefix))
      it = buffers_.erase(it);
    else
      ++it;
  }
}

void SgdOptimizer::set_buffer(const std::string& name, std::vector<double> values) {
  buffers_[name] = std::move(values);
}

}  // namespace dc
