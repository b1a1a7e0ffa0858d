#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "dc/feature_net.hpp"
#include "dc/hierarchical.hpp"
#include "dc/matrix.hpp"
#include "dc/rng.hpp"

namespace dc {

// Negative log-softmax of logits at `label`, computed with the max shift.
// If dlogits is non-empty it receives scale · (softmax − onehot).
double softmax_cross_entropy(std::span<const double> logits, std::size_t label,
                             std::span<double> dlogits = {}, double scale = 1.0);

std::vector<double> softmax(std::span<const double> logits);

// Super-class classifier V (S outputs) and one sub-class classifier W_s per
// super-class (k_s outputs each).
struct Classifiers {
  LinearHead super;
  std::vector<LinearHead> sub;

  std::size_t num_super() const noexcept { return super.out_dim(); }
  std::size_t feature_dim() const noexcept { return super.in_dim(); }

  bool operator==(const Classifiers&) const = default;
};

inline constexpr double kClassifierInitStd = 0.01;

Classifiers init_classifiers(std::size_t num_super, std::size_t sub_per_super,
                             std::size_t feature_dim, Rng& rng,
                             double stddev = kClassifierInitStd);

// Target of one batch row: its super-class and its sub-class within it.
struct HierTarget {
  std::size_t super = 0;
  std::size_t sub = 0;
};

struct HierLossResult {
  double loss = 0.0;      // sum of per-row losses divided by the normalizer
  double loss_sum = 0.0;  // unnormalized sum of per-row losses
  LinearHead d_super;
  // Gradients only for sub-classifiers that received at least one row; every
  // other W_t has exactly zero gradient.
  std::map<std::size_t, LinearHead> d_sub;
  Matrix d_features;
};

// (1/normalizer) Σ_n [ℓ(V f_n, y_n) + ℓ(W_{y_n} f_n, z_n)], ℓ = negative
// log-softmax. normalizer defaults to the number of rows; a larger value lets
// several partial batches add up to one batch mean.
HierLossResult hierarchical_loss(const Classifiers& cls, const Matrix& features,
                                 std::span<const HierTarget> targets, double normalizer = 0.0);

// Targets for (image, rotation) rows under a partition.
std::vector<HierTarget> hierarchical_targets(const HierarchicalPartition& part,
                                             std::span<const std::size_t> images,
                                             std::span<const RotationLabel> rotations);

struct FlatLossResult {
  double loss = 0.0;
  double loss_sum = 0.0;
  LinearHead d_head;
  Matrix d_features;
};

// Softmax cross-entropy over the joint rotation × cluster label space; the
// joint label of (y, z) is y·|Z| + z.
FlatLossResult cartesian_loss(const LinearHead& flat, const Matrix& features,
                              std::span<const std::size_t> joint_labels, double normalizer = 0.0);

inline std::size_t joint_label(std::size_t y, std::size_t z, std::size_t num_z) noexcept {
  return y * num_z + z;
}

}  // namespace dc
