#include "dc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "dc/error.hpp"
#include "dc/losses.hpp"

namespace dc {
namespace {

double entropy(const std::vector<std::size_t>& counts, std::size_t n) {
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

std::vector<std::size_t> class_counts(const Partition& a) {
  std::vector<std::size_t> counts(a.num_classes, 0);
  for (auto l : a.labels) ++counts[l];
  return counts;
}

}  // namespace

Partition::Partition(std::vector<std::size_t> l, std::size_t classes)
    : labels(std::move(l)), num_classes(classes) {
  for (auto x : labels)
    if (x >= num_classes)
      throw std::invalid_argument("Partition: label " + std::to_string(x) +
                                  " out of range for " + std::to_string(num_classes) + " classes");
}

Partition Partition::from_labels(std::vector<std::size_t> l) {
  const std::size_t classes = l.empty() ? 0 : *std::max_element(l.begin(), l.end()) + 1;
  return Partition(std::move(l), classes);
}

double nmi(const Partition& a, const Partition& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("nmi: partitions have " + std::to_string(a.size()) + " and " +
                                std::to_string(b.size()) + " items");
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("nmi: empty partitions");

  // Exact integer contingency table; probabilities are formed once at the end.
  std::vector<std::size_t> joint(a.num_classes * b.num_classes, 0);
  for (std::size_t i = 0; i < n; ++i) ++joint[a.labels[i] * b.num_classes + b.labels[i]];
  const auto ca = class_counts(a);
  const auto cb = class_counts(b);

  const double ha = entropy(ca, n);
  const double hb = entropy(cb, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;

  const double dn = static_cast<double>(n);
  double mi = 0.0;
  for (std::size_t i = 0; i < a.num_classes; ++i) {
    for (std::size_t j = 0; j < b.num_classes; ++j) {
      const auto c = joint[i * b.num_classes + j];
      if (c == 0) continue;
      const double pij = static_cast<double>(c) / dn;
      mi += pij * std::log(static_cast<double>(c) * dn /
                           (static_cast<double>(ca[i]) * static_cast<double>(cb[j])));
    }
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

double balance_entropy(const Partition& a) {
  if (a.num_classes <= 1 || a.size() == 0) return 1.0;
  return entropy(class_counts(a), a.size()) / std::log(static_cast<double>(a.num_classes));
}

ColorStdResult cluster_color_std(std::span<const Image> images, const Partition& a) {
  if (images.size() != a.size())
    throw std::invalid_argument("cluster_color_std: one label per image required");
  if (images.empty()) return {};
  const std::size_t channels = images.front().channels;
  if (channels == 0) throw std::invalid_argument("cluster_color_std: images have no channels");

  Matrix colors(images.size(), channels);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    if (img.channels != channels)
      throw DataError("cluster_color_std: images have differing channel counts");
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t p = 0; p < img.plane_size(); ++p) s += img.pixels[c * img.plane_size() + p];
      colors(i, c) = s / static_cast<double>(img.plane_size());
    }
  }

  Matrix means(a.num_classes, channels);
  std::vector<std::size_t> counts(a.num_classes, 0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    ++counts[a.labels[i]];
    for (std::size_t c = 0; c < channels; ++c) means(a.labels[i], c) += colors(i, c);
  }
  for (std::size_t k = 0; k < a.num_classes; ++k)
    for (std::size_t c = 0; c < channels; ++c)
      if (counts[k] > 0) means(k, c) /= static_cast<double>(counts[k]);

  std::vector<double> sq(a.num_classes, 0.0);
  for (std::size_t i = 0; i < images.size(); ++i)
    sq[a.labels[i]] += squared_distance(colors.row(i), means.row(a.labels[i]));

  ColorStdResult out;
  for (std::size_t k = 0; k < a.num_classes; ++k) {
    if (counts[k] == 0) continue;
    out.clusters.push_back(k);
    out.stddev.push_back(std::sqrt(sq[k] / static_cast<double>(counts[k])));
  }
  out.sorted = out.stddev;
  std::sort(out.sorted.begin(), out.sorted.end());
  return out;
}

void ProbeConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("probe learning rate must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("probe l2 penalty must be non-negative");
}

Matrix ProbeModel::predict_proba(const Matrix& features) const {
  Matrix logits = head.apply(features);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto p = softmax(logits.row(r));
    std::copy(p.begin(), p.end(), logits.row(r).begin());
  }
  return logits;
}

std::vector<std::size_t> ProbeModel::predict(const Matrix& features) const {
  const Matrix logits = head.apply(features);
  std::vector<std::size_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

ProbeModel fit_probe(const Matrix& features, std::span<const std::size_t> labels,
                     std::size_t num_classes, const ProbeConfig& cfg) {
  cfg.validate();
  if (labels.size() != features.rows())
    throw std::invalid_argument("fit_probe: one label per feature row required");
  std::unordered_set<std::size_t> seen(labels.begin(), labels.end());
  if (seen.size() < 2) throw DataError("linear probe: training set contains a single class");

  ProbeModel model{LinearHead(num_classes, features.cols())};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto loss = cartesian_loss(model.head, features, labels);
    auto w = model.head.weight.values();
    auto gw = loss.d_head.weight.values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * (gw[i] + cfg.l2 * w[i]);
    for (std::size_t j = 0; j < num_classes; ++j)
      model.head.bias[j] -= cfg.learning_rate * loss.d_head.bias[j];
  }
  return model;
}

double linear_probe(const Matrix& features, const Partition& labels, const ProbeConfig& cfg,
                    std::span<const std::size_t> train, std::span<const std::size_t> test) {
  if (labels.size() != features.rows())
    throw std::invalid_argument("linear_probe: one label per feature row required");
  if (test.empty()) throw std::invalid_argument("linear_probe: empty test split");
  std::unordered_set<std::size_t> train_set(train.begin(), train.end());
  for (auto t : test)
    if (train_set.count(t)) throw std::invalid_argument("linear_probe: train and test overlap");

  std::vector<std::size_t> train_labels, test_labels;
  for (auto i : train) train_labels.push_back(labels.labels.at(i));
  for (auto i : test) test_labels.push_back(labels.labels.at(i));
  const auto model = fit_probe(select_rows(features, train), train_labels, labels.num_classes, cfg);
  const auto pred = model.predict(select_rows(features, test));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test_labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

Split interleaved_split(std::size_t n, std::size_t period) {
  if (period < 2) throw std::invalid_argument("interleaved_split: period must be at least 2");
  Split s;
  for (std::size_t i = 0; i < n; ++i) (i % period == period - 1 ? s.test : s.train).push_back(i);
  return s;
}

}  // namespace dc
