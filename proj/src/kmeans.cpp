#include "dc/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dc/error.hpp"

namespace dc {
namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kRepairStream = 1;
constexpr double kRepairNoise = 1e-7;

// Relative slack for the Lloyd monotonicity check; rounding in the centroid
// means can nudge an unchanged objective by a few ulps.
constexpr double kMonotoneSlack = 1e-9;

void check_monotone(const std::vector<double>& trace, const std::vector<bool>& repaired) {
  const std::size_t n = trace.size();
  if (n < 2 || repaired[n - 2]) return;
  const double prev = trace[n - 2];
  if (trace[n - 1] > prev + kMonotoneSlack * (1.0 + std::abs(prev)))
    throw std::logic_error("k-means objective increased between Lloyd iterations: " +
                           std::to_string(prev) + " -> " + std::to_string(trace[n - 1]));
}

double max_movement(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    m = std::max(m, std::sqrt(squared_distance(a.row(i), b.row(i))));
  return m;
}

bool converged(double movement, double tolerance) {
  return movement == 0.0 || movement < tolerance;
}

// Shards viewed as one concatenated row sequence. A single shard is the serial case.
struct ShardView {
  std::span<const Matrix> shards;
  std::vector<Assignment>& labels;
};

// Serial and distributed repair share this so both consume the generator identically.
// The donor is located by global row order: per-shard counts of the donor
// cluster tell which shard holds the j-th member.
void repair_in_view(ShardView view, Matrix& centroids, Rng& rng) {
  const std::size_t k = centroids.rows();
  const std::size_t d = centroids.cols();
  std::vector<std::vector<std::size_t>> shard_counts(view.shards.size(),
                                                     std::vector<std::size_t>(k, 0));
  std::vector<std::size_t> counts(k, 0);
  std::size_t total = 0;
  for (std::size_t s = 0; s < view.shards.size(); ++s) {
    for (std::size_t label : view.labels[s]) {
      ++shard_counts[s][label];
      ++counts[label];
    }
    total += view.labels[s].size();
  }
  if (k > total)
    throw DataError("repair_empty_clusters: " + std::to_string(k) + " clusters for " +
                    std::to_string(total) + " points cannot all be non-empty");

  for (std::size_t empty = 0; empty < k; ++empty) {
    if (counts[empty] > 0) continue;
    const auto largest = static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    std::size_t j = rng.uniform_index(counts[largest]);

    std::size_t shard = 0;
    while (j >= shard_counts[shard][largest]) j -= shard_counts[shard++][largest];
    Assignment& local = view.labels[shard];
    std::size_t row = 0;
    for (;; ++row) {
      if (local[row] == largest && j-- == 0) break;
    }

    local[row] = empty;
    --counts[largest];
    --shard_counts[shard][largest];
    ++counts[empty];
    ++shard_counts[shard][empty];

    auto donor = view.shards[shard].row(row);
    auto c = centroids.row(empty);
    for (std::size_t t = 0; t < d; ++t)
      c[t] = donor[t] + kRepairNoise * (1.0 + std::abs(donor[t])) * rng.uniform(-1.0, 1.0);
  }
}

bool has_empty(const std::vector<std::size_t>& counts) {
  return std::find(counts.begin(), counts.end(), std::size_t{0}) != counts.end();
}

std::vector<std::size_t> count_labels(const Assignment& labels, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t l : labels) ++counts[l];
  return counts;
}

void validate_init(const Matrix& init, std::size_t k, std::size_t d) {
  if (init.rows() != k || init.cols() != d)
    throw std::invalid_argument("k-means: initial centroids have shape " +
                                std::to_string(init.rows()) + "x" + std::to_string(init.cols()) +
                                ", expected " + std::to_string(k) + "x" + std::to_string(d));
  require_finite(init, "k-means initial centroids");
}

}  // namespace

void KMeansConfig::validate() const {
  if (k < 1) throw std::invalid_argument("KMeansConfig: k must be at least 1");
  if (max_iters < 1) throw std::invalid_argument("KMeansConfig: max_iters must be at least 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("KMeansConfig: tolerance must be >= 0");
}

Assignment assign_nearest(const Matrix& x, const Matrix& centroids) {
  if (x.cols() != centroids.cols())
    throw std::invalid_argument("assign_nearest: dimension mismatch");
  const std::size_t k = centroids.rows();
  std::vector<double> norms(k);
  for (std::size_t c = 0; c < k; ++c) norms[c] = squared_norm(centroids.row(c));

  Assignment labels(x.rows(), 0);
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto row = x.row(n);
    const double xn = squared_norm(row);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double dist = xn - 2.0 * dot(row, centroids.row(c)) + norms[c];
      if (dist < best) {
        best = dist;
        labels[n] = c;
      }
    }
  }
  return labels;
}

double kmeans_objective(const Matrix& x, const Matrix& centroids, const Assignment& labels) {
  if (x.cols() != centroids.cols())
    throw std::invalid_argument("kmeans_objective: dimension mismatch");
  if (labels.size() != x.rows())
    throw std::invalid_argument("kmeans_objective: assignment length differs from row count");
  double total = 0.0;
  for (std::size_t n = 0; n < x.rows(); ++n) {
    if (labels[n] >= centroids.rows())
      throw std::invalid_argument("kmeans_objective: label out of range");
    total += squared_distance(x.row(n), centroids.row(labels[n]));
  }
  return total;
}

std::vector<std::size_t> initial_centroid_rows(std::size_t n, const KMeansConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kInitStream));
  return sample_without_replacement(rng, n, cfg.k);
}

void repair_empty_clusters(const Matrix& x, Matrix& centroids, Assignment& labels, Rng& rng) {
  if (labels.size() != x.rows())
    throw std::invalid_argument("repair_empty_clusters: assignment length differs from row count");
  std::vector<Assignment> one{std::move(labels)};
  const Matrix* shard = &x;
  try {
    repair_in_view({std::span<const Matrix>(shard, 1), one}, centroids, rng);
  } catch (...) {
    labels = std::move(one.front());
    throw;
  }
  labels = std::move(one.front());
}

KMeansResult kmeans_fit(const Matrix& x, const KMeansConfig& cfg) {
  cfg.validate();
  if (x.rows() < cfg.k)
    throw std::invalid_argument("kmeans_fit: " + std::to_string(x.rows()) + " points for k=" +
                                std::to_string(cfg.k));
  const auto rows = initial_centroid_rows(x.rows(), cfg);
  return kmeans_fit(x, cfg, select_rows(x, rows));
}

KMeansResult kmeans_fit(const Matrix& x, const KMeansConfig& cfg, Matrix init) {
  cfg.validate();
  const std::size_t k = cfg.k;
  const std::size_t d = x.cols();
  if (x.rows() < k)
    throw std::invalid_argument("kmeans_fit: " + std::to_string(x.rows()) + " points for k=" +
                                std::to_string(k));
  require_finite(x, "kmeans_fit input");
  validate_init(init, k, d);

  Rng repair_rng(derive_seed(cfg.seed, kRepairStream));
  KMeansResult result;
  Matrix centroids = std::move(init);

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    Assignment labels = assign_nearest(x, centroids);
    result.objective_trace.push_back(kmeans_objective(x, centroids, labels));
    check_monotone(result.objective_trace, result.repaired);

    const bool repair = has_empty(count_labels(labels, k));
    if (repair) repair_empty_clusters(x, centroids, labels, repair_rng);
    result.repaired.push_back(repair);

    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t n = 0; n < x.rows(); ++n) {
      auto s = sums.row(labels[n]);
      auto row = x.row(n);
      for (std::size_t t = 0; t < d; ++t) s[t] += row[t];
      ++counts[labels[n]];
    }
    Matrix next(k, d);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t t = 0; t < d; ++t)
        next(c, t) = sums(c, t) / static_cast<double>(counts[c]);

    const double movement = max_movement(centroids, next);
    centroids = std::move(next);
    ++result.iterations;
    if (converged(movement, cfg.tolerance)) break;
  }

  result.labels = assign_nearest(x, centroids);
  const double last = kmeans_objective(x, centroids, result.labels);
  result.objective_trace.push_back(last);
  check_monotone(result.objective_trace, result.repaired);
  const bool repair = has_empty(count_labels(result.labels, k));
  if (repair) repair_empty_clusters(x, centroids, result.labels, repair_rng);
  result.repaired.push_back(repair);
  result.objective = repair ? kmeans_objective(x, centroids, result.labels) : last;
  result.centroids = std::move(centroids);
  return result;
}

ShardStats ShardStats::from_assignment(const Matrix& shard, const Assignment& labels,
                                       std::size_t k) {
  ShardStats stats(k, shard.cols());
  for (std::size_t n = 0; n < shard.rows(); ++n) {
    auto s = stats.sums.row(labels[n]);
    auto row = shard.row(n);
    for (std::size_t t = 0; t < row.size(); ++t) s[t] += row[t];
    ++stats.counts[labels[n]];
  }
  return stats;
}

void ShardStats::merge(const ShardStats& other) {
  if (other.counts.size() != counts.size() || other.sums.cols() != sums.cols())
    throw std::invalid_argument("ShardStats::merge: shape mismatch");
  for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += other.counts[c];
  auto dst = sums.values();
  auto src = other.sums.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::size_t ShardStats::total() const noexcept {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::vector<Matrix> split_rows(const Matrix& x, std::size_t num_shards) {
  if (num_shards == 0) throw std::invalid_argument("split_rows: need at least one shard");
  std::vector<Matrix> out;
  const std::size_t n = x.rows();
  std::size_t begin = 0;
  for (std::size_t s = 0; s < num_shards; ++s) {
    const std::size_t len = n / num_shards + (s < n % num_shards ? 1 : 0);
    std::vector<std::size_t> idx(len);
    for (std::size_t i = 0; i < len; ++i) idx[i] = begin + i;
    out.push_back(select_rows(x, idx));
    begin += len;
  }
  return out;
}

DistributedKMeansResult distributed_kmeans_fit(std::span<const Matrix> shards,
                                               const KMeansConfig& cfg) {
  if (shards.empty()) throw std::invalid_argument("distributed_kmeans_fit: empty shard list");
  std::size_t total = 0;
  for (const auto& s : shards) total += s.rows();
  cfg.validate();
  if (total < cfg.k)
    throw std::invalid_argument("distributed_kmeans_fit: " + std::to_string(total) +
                                " points for k=" + std::to_string(cfg.k));

  // The coordinator draws global row ids; each owning shard contributes its row.
  const auto rows = initial_centroid_rows(total, cfg);
  Matrix init(cfg.k, shards.front().cols());
  for (std::size_t c = 0; c < rows.size(); ++c) {
    std::size_t r = rows[c];
    std::size_t s = 0;
    while (r >= shards[s].rows()) r -= shards[s++].rows();
    auto src = shards[s].row(r);
    std::copy(src.begin(), src.end(), init.row(c).begin());
  }
  return distributed_kmeans_fit(shards, cfg, std::move(init));
}

DistributedKMeansResult distributed_kmeans_fit(std::span<const Matrix> shards,
                                               const KMeansConfig& cfg, Matrix init) {
  if (shards.empty()) throw std::invalid_argument("distributed_kmeans_fit: empty shard list");
  cfg.validate();
  const std::size_t k = cfg.k;
  const std::size_t d = shards.front().cols();
  std::size_t total = 0;
  for (std::size_t s = 0; s < shards.size(); ++s) {
    if (shards[s].cols() != d)
      throw std::invalid_argument("distributed_kmeans_fit: shard " + std::to_string(s) + " has " +
                                  std::to_string(shards[s].cols()) + " columns, expected " +
                                  std::to_string(d));
    require_finite(shards[s], "distributed_kmeans_fit shard " + std::to_string(s));
    total += shards[s].rows();
  }
  if (total < k)
    throw std::invalid_argument("distributed_kmeans_fit: " + std::to_string(total) +
                                " points for k=" + std::to_string(k));
  validate_init(init, k, d);

  Rng repair_rng(derive_seed(cfg.seed, kRepairStream));
  DistributedKMeansResult result;
  Matrix centroids = std::move(init);
  std::vector<Assignment> labels(shards.size());

  // Assignment phase: every shard works only on its own rows.
  auto assign_all = [&] {
    double objective = 0.0;
    for (std::size_t s = 0; s < shards.size(); ++s) {
      labels[s] = assign_nearest(shards[s], centroids);
      objective += kmeans_objective(shards[s], centroids, labels[s]);
    }
    return objective;
  };
  // Reduction phase: ascending shard order, left fold from zero.
  auto reduce = [&] {
    ShardStats global(k, d);
    for (std::size_t s = 0; s < shards.size(); ++s)
      global.merge(ShardStats::from_assignment(shards[s], labels[s], k));
    return global;
  };
  auto total_objective = [&] {
    double objective = 0.0;
    for (std::size_t s = 0; s < shards.size(); ++s)
      objective += kmeans_objective(shards[s], centroids, labels[s]);
    return objective;
  };

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    result.objective_trace.push_back(assign_all());
    check_monotone(result.objective_trace, result.repaired);

    ShardStats global = reduce();
    const bool repair = has_empty(global.counts);
    if (repair) {
      repair_in_view({shards, labels}, centroids, repair_rng);
      global = reduce();
    }
    result.repaired.push_back(repair);

    Matrix next(k, d);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t t = 0; t < d; ++t)
        next(c, t) = global.sums(c, t) / static_cast<double>(global.counts[c]);

    const double movement = max_movement(centroids, next);
    centroids = std::move(next);
    ++result.iterations;
    if (converged(movement, cfg.tolerance)) break;
  }

  const double last = assign_all();
  result.objective_trace.push_back(last);
  check_monotone(result.objective_trace, result.repaired);
  const bool repair = has_empty(reduce().counts);
  if (repair) repair_in_view({shards, labels}, centroids, repair_rng);
  result.repaired.push_back(repair);
  result.objective = repair ? total_objective() : last;
  result.centroids = std::move(centroids);
  result.labels = std::move(labels);
  return result;
}

}  // namespace dc
