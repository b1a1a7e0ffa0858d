#include "dc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dc {
namespace {

double resolve_normalizer(double normalizer, std::size_t rows) {
  if (normalizer == 0.0) return static_cast<double>(rows);
  if (!(normalizer > 0.0)) throw std::invalid_argument("loss normalizer must be positive");
  return normalizer;
}

// Logits for one row and the gradient back into that row's features and head.
double head_row(const LinearHead& head, std::span<const double> f, std::size_t label,
                double scale, LinearHead& d_head, std::span<double> d_f,
                std::vector<double>& logits, std::vector<double>& dlogits) {
  const std::size_t out = head.out_dim();
  logits.resize(out);
  dlogits.resize(out);
  for (std::size_t j = 0; j < out; ++j) logits[j] = dot(head.weight.row(j), f) + head.bias[j];
  const double loss = softmax_cross_entropy(logits, label, dlogits, scale);
  for (std::size_t j = 0; j < out; ++j) {
    const double g = dlogits[j];
    auto w = head.weight.row(j);
    auto dw = d_head.weight.row(j);
    for (std::size_t t = 0; t < f.size(); ++t) {
      dw[t] += g * f[t];
      d_f[t] += g * w[t];
    }
    d_head.bias[j] += g;
  }
  return loss;
}

}  // namespace

double softmax_cross_entropy(std::span<const double> logits, std::size_t label,
                             std::span<double> dlogits, double scale) {
  if (label >= logits.size())
    throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(logits.size()) + " classes");
  const double shift = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - shift);
  const double log_z = std::log(z) + shift;
  if (!dlogits.empty()) {
    for (std::size_t j = 0; j < logits.size(); ++j)
      dlogits[j] = scale * (std::exp(logits[j] - log_z) - (j == label ? 1.0 : 0.0));
  }
  return std::max(0.0, log_z - logits[label]);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) z += p[j] = std::exp(logits[j] - shift);
  for (auto& v : p) v /= z;
  return p;
}

Classifiers init_classifiers(std::size_t num_super, std::size_t sub_per_super,
                             std::size_t feature_dim, Rng& rng, double stddev) {
  Classifiers cls;
  cls.super = LinearHead::gaussian(num_super, feature_dim, stddev, rng);
  for (std::size_t s = 0; s < num_super; ++s)
    cls.sub.push_back(LinearHead::gaussian(sub_per_super, feature_dim, stddev, rng));
  return cls;
}

HierLossResult hierarchical_loss(const Classifiers& cls, const Matrix& features,
                                 std::span<const HierTarget> targets, double normalizer) {
  if (targets.size() != features.rows())
    throw std::invalid_argument("hierarchical_loss: one target per feature row required");
  if (features.cols() != cls.feature_dim())
    throw std::invalid_argument("hierarchical_loss: feature dimension mismatch");
  const double norm = resolve_normalizer(normalizer, features.rows());
  const double scale = 1.0 / norm;

  HierLossResult out;
  out.d_super = LinearHead(cls.super.out_dim(), cls.super.in_dim());
  out.d_features = Matrix(features.rows(), features.cols());
  std::vector<double> logits, dlogits;
  for (std::size_t n = 0; n < features.rows(); ++n) {
    const auto [s, z] = targets[n];
    if (s >= cls.num_super())
      throw std::out_of_range("hierarchical_loss: super-class " + std::to_string(s) +
                              " out of range for " + std::to_string(cls.num_super()));
    const LinearHead& w = cls.sub[s];
    if (z >= w.out_dim())
      throw std::out_of_range("hierarchical_loss: sub-class " + std::to_string(z) +
                              " out of range for super-class " + std::to_string(s));
    auto f = features.row(n);
    auto df = out.d_features.row(n);
    out.loss_sum += head_row(cls.super, f, s, scale, out.d_super, df, logits, dlogits);
    auto [it, inserted] = out.d_sub.try_emplace(s);
    if (inserted) it->second = LinearHead(w.out_dim(), w.in_dim());
    out.loss_sum += head_row(w, f, z, scale, it->second, df, logits, dlogits);
  }
  out.loss = out.loss_sum / norm;
  return out;
}

std::vector<HierTarget> hierarchical_targets(const HierarchicalPartition& part,
                                             std::span<const std::size_t> images,
                                             std::span<const RotationLabel> rotations) {
  if (images.size() != rotations.size())
    throw std::invalid_argument("hierarchical_targets: images and rotations differ in length");
  std::vector<HierTarget> t(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    t[i] = {part.super_label(images[i], rotations[i]), part.sub.at(images[i])};
  return t;
}

FlatLossResult cartesian_loss(const LinearHead& flat, const Matrix& features,
                              std::span<const std::size_t> joint_labels, double normalizer) {
  if (joint_labels.size() != features.rows())
    throw std::invalid_argument("cartesian_loss: one label per feature row required");
  if (features.cols() != flat.in_dim())
    throw std::invalid_argument("cartesian_loss: feature dimension mismatch");
  const double norm = resolve_normalizer(normalizer, features.rows());

  FlatLossResult out;
  out.d_head = LinearHead(flat.out_dim(), flat.in_dim());
  out.d_features = Matrix(features.rows(), features.cols());
  std::vector<double> logits, dlogits;
  for (std::size_t n = 0; n < features.rows(); ++n) {
    if (joint_labels[n] >= flat.out_dim())
      throw std::out_of_range("cartesian_loss: joint label " + std::to_string(joint_labels[n]) +
                              " out of range for " + std::to_string(flat.out_dim()));
    out.loss_sum += head_row(flat, features.row(n), joint_labels[n], 1.0 / norm, out.d_head,
                             out.d_features.row(n), logits, dlogits);
  }
  out.loss = out.loss_sum / norm;
  return out;
}

}  // namespace dc
