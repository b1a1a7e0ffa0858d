#pragma once

#include <cstddef>
#include <vector>

#include "dc/image.hpp"
#include "dc/kmeans.hpp"
#include "dc/matrix.hpp"

namespace dc {

// Two-level targets. Level 1 splits images into m coarse clusters; the
// super-class of (image, rotation r) is r·m + coarse. Level 2 splits each
// coarse cluster into k sub-clusters, shared by the four rotations of that
// coarse cluster.
struct HierarchicalPartition {
  std::size_t m = 0;
  std::size_t k = 0;
  static constexpr std::size_t kNumRotations = RotationLabel::kCount;

  std::vector<std::size_t> coarse;  // per image, in [0, m)
  std::vector<std::size_t> sub;     // per image, in [0, k)
  Matrix coarse_centroids;          // m × d
  std::vector<Matrix> sub_centroids;  // per coarse cluster, k × d

  std::size_t num_images() const noexcept { return coarse.size(); }
  std::size_t num_super_classes() const noexcept { return kNumRotations * m; }
  std::size_t sub_classes_per_super() const noexcept { return k; }
  // Distinct clusters produced by the hierarchical k-means (m·k).
  std::size_t total_sub_clusters() const noexcept { return m * k; }

  std::size_t super_label(std::size_t image, RotationLabel r) const {
    return encode_super(r, coarse.at(image));
  }
  std::size_t encode_super(RotationLabel r, std::size_t coarse_cluster) const noexcept {
    return r.index() * m + coarse_cluster;
  }
  RotationLabel rotation_of(std::size_t super) const { return RotationLabel(super / m); }
  std::size_t coarse_of(std::size_t super) const noexcept { return super % m; }

  // Single flat cluster id (coarse·k + sub), used for metrics.
  std::size_t fine_label(std::size_t image) const { return coarse.at(image) * k + sub.at(image); }
  std::vector<std::size_t> fine_labels() const;
};

struct HierarchicalOptions {
  std::size_t m = 4;
  std::size_t k = 1;
  KMeansConfig kmeans;  // k is overridden per level; seed is the base seed
  // Run each level with distributed_kmeans_fit over this many row shards;
  // 1 uses the serial kmeans_fit.
  std::size_t num_shards = 1;
};

// Features must come from non-rotated images. Throws DataError when a coarse
// cluster ends up smaller than k.
HierarchicalPartition hierarchical_fit(const Matrix& features, const HierarchicalOptions& opts);

// Renumbers the coarse clusters of `next` (labels and centroids) so that they
// overlap `prev` as much as possible: pairs are matched greedily by largest
// shared image count, ties broken by lower (new, old) index. Sub-cluster
// labels are unchanged. Both partitions must cover the same images with the
// same m. Returns the mapping old new id -> renumbered id.
std::vector<std::size_t> align_coarse_labels(HierarchicalPartition& next,
                                             const HierarchicalPartition& prev);

}  // namespace dc
