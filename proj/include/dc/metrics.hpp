#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dc/feature_net.hpp"
#include "dc/image.hpp"
#include "dc/matrix.hpp"

namespace dc {

// Labels in [0, num_classes).
struct Partition {
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  Partition() = default;
  Partition(std::vector<std::size_t> l, std::size_t classes);
  // num_classes = max label + 1.
  static Partition from_labels(std::vector<std::size_t> l);

  std::size_t size() const noexcept { return labels.size(); }
};

// I(a;b) / sqrt(H(a)·H(b)) with natural logs. Two single-class partitions
// give 1; a single-class partition against a multi-class one gives 0.
double nmi(const Partition& a, const Partition& b);

// Entropy of the cluster-size distribution divided by log(num_classes), in
// [0, 1]. A single-class partition is perfectly balanced (1).
double balance_entropy(const Partition& a);

struct ColorStdResult {
  std::vector<std::size_t> clusters;  // non-empty clusters, ascending id
  std::vector<double> stddev;         // aligned with clusters
  std::vector<double> sorted;         // stddev values, ascending
};

// For every non-empty cluster: the root-mean-square Euclidean distance of the
// members' mean colors (per-channel pixel means) to the cluster's mean color.
ColorStdResult cluster_color_std(std::span<const Image> images, const Partition& a);

struct ProbeConfig {
  double learning_rate = 0.5;
  std::size_t epochs = 500;
  double l2 = 0.0;

  void validate() const;
};

// Multinomial logistic regression trained by full-batch gradient descent.
struct ProbeModel {
  LinearHead head;

  Matrix predict_proba(const Matrix& features) const;
  std::vector<std::size_t> predict(const Matrix& features) const;
};

ProbeModel fit_probe(const Matrix& features, std::span<const std::size_t> labels,
                     std::size_t num_classes, const ProbeConfig& cfg);

// Fits on the train rows, returns top-1 accuracy on the test rows.
double linear_probe(const Matrix& features, const Partition& labels, const ProbeConfig& cfg,
                    std::span<const std::size_t> train, std::span<const std::size_t> test);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Every `period`-th row (starting at offset period-1) goes to the test set.
Split interleaved_split(std::size_t n, std::size_t period);

}  // namespace dc
