#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dc/matrix.hpp"
#include "dc/rng.hpp"

namespace dc {

struct KMeansConfig {
  std::size_t k = 1;
  std::size_t max_iters = 10;
  std::uint64_t seed = 0;
  // Stop once no centroid moves farther than this between iterations.
  double tolerance = 1e-7;

  void validate() const;
};

using Assignment = std::vector<std::size_t>;

struct KMeansResult {
  Matrix centroids;  // k × d
  Assignment labels;
  double objective = 0.0;
  // Objective after every assignment step, the final one included.
  std::vector<double> objective_trace;
  // repaired[i] is true when empty clusters were repaired right after step i.
  std::vector<bool> repaired;
  std::size_t iterations = 0;
};

// Nearest centroid per row, ties to the lowest index. Distances use
// ‖x‖² − 2x·c + ‖c‖² with cached centroid norms.
Assignment assign_nearest(const Matrix& x, const Matrix& centroids);

// Σ_n ‖centroid(a_n) − x_n‖², computed directly.
double kmeans_objective(const Matrix& x, const Matrix& centroids, const Assignment& labels);

// Row indices used as initial centroids: k distinct rows sampled uniformly.
std::vector<std::size_t> initial_centroid_rows(std::size_t n, const KMeansConfig& cfg);

// Moves one point into every empty cluster. The donor is a uniformly random
// member of the currently largest cluster (lowest index on ties), and the empty
// cluster's centroid becomes that point plus a tiny random perturbation.
// Throws if some cluster cannot be filled (k > N).
void repair_empty_clusters(const Matrix& x, Matrix& centroids, Assignment& labels, Rng& rng);

// Lloyd's algorithm from k distinct seeded rows.
KMeansResult kmeans_fit(const Matrix& x, const KMeansConfig& cfg);
// Lloyd's algorithm from the given initial centroids.
KMeansResult kmeans_fit(const Matrix& x, const KMeansConfig& cfg, Matrix init);

// Per-cluster (count, feature-sum) pairs for one shard.
struct ShardStats {
  std::vector<std::size_t> counts;
  Matrix sums;  // k × d

  ShardStats() = default;
  ShardStats(std::size_t k, std::size_t d) : counts(k, 0), sums(k, d) {}

  static ShardStats from_assignment(const Matrix& shard, const Assignment& labels, std::size_t k);
  // this += other, cluster by cluster.
  void merge(const ShardStats& other);
  std::size_t total() const noexcept;
};

struct DistributedKMeansResult {
  Matrix centroids;
  std::vector<Assignment> labels;  // one per shard
  double objective = 0.0;
  std::vector<double> objective_trace;
  std::vector<bool> repaired;
  std::size_t iterations = 0;
};

// Lloyd's algorithm over row shards. Each shard assigns its own rows and
// reports ShardStats; stats are reduced in ascending shard order and only the
// reduced statistics update the centroids. Initialization draws the same global
// rows as kmeans_fit over the concatenated shards.
DistributedKMeansResult distributed_kmeans_fit(std::span<const Matrix> shards,
                                               const KMeansConfig& cfg);
DistributedKMeansResult distributed_kmeans_fit(std::span<const Matrix> shards,
                                               const KMeansConfig& cfg, Matrix init);

// Contiguous near-equal row split.
std::vector<Matrix> split_rows(const Matrix& x, std::size_t num_shards);

}  // namespace dc
