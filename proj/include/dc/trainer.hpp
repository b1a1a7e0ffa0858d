#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dc/dataset.hpp"
#include "dc/feature_net.hpp"
#include "dc/hierarchical.hpp"
#include "dc/losses.hpp"
#include "dc/matrix.hpp"
#include "dc/rng.hpp"
#include "dc/sgd.hpp"
#include "dc/whitening.hpp"

namespace dc {

struct TrainConfig {
  std::size_t m = 4;
  std::size_t k = 2;
  std::size_t reassign_period = 3;
  std::size_t epochs = 0;
  // Communication groups; the protocol fixes this to 4m. 0 means "derive".
  std::size_t num_worker_groups = 0;
  SgdConfig sgd;
  std::uint64_t seed = 0;

  bool whitening = true;
  std::size_t whitening_dim = 0;  // 0 keeps the full dimension
  double whitening_epsilon = kDefaultWhiteningEpsilon;
  bool refit_whitening = true;  // refit at every reassignment, else fit once
  bool sobel = true;
  bool augment = false;  // random crops/flips are not implemented

  std::vector<std::size_t> hidden{64};
  std::size_t feature_dim = 16;

  std::size_t kmeans_iters = 10;
  double kmeans_tolerance = 1e-7;
  std::size_t kmeans_shards = 1;

  std::size_t groups() const noexcept { return RotationLabel::kCount * m; }
  void validate() const;
};

// Network inputs for every (image, rotation): row n of by_rotation[r] is image
// n rotated by r quarter turns, Sobel-filtered if requested, then flattened.
struct PretextInputs {
  std::array<Matrix, RotationLabel::kCount> by_rotation;

  static PretextInputs build(std::span<const Image> images, bool sobel);
  std::size_t num_images() const noexcept { return by_rotation[0].rows(); }
  std::size_t input_dim() const noexcept { return by_rotation[0].cols(); }
};

// Features of the non-rotated inputs with dropout off, then whitening (when
// enabled) and row ℓ2 normalization. `whitening_state` carries the transform
// between calls; it is refit when empty or when cfg.refit_whitening is set.
Matrix extract_all_features(const FeatureNet& net, const PretextInputs& inputs,
                            const TrainConfig& cfg,
                            std::optional<WhiteningTransform>* whitening_state = nullptr);

// Uniform over non-empty clusters, then uniform over that cluster's members.
class ClusterSampler {
 public:
  ClusterSampler() = default;
  // items[i] belongs to cluster labels[i].
  ClusterSampler(std::span<const std::size_t> items, std::span<const std::size_t> labels,
                 std::size_t num_clusters);

  std::size_t draw(Rng& rng) const;
  bool empty() const noexcept { return nonempty_.empty(); }
  const std::vector<std::vector<std::size_t>>& members() const noexcept { return members_; }

 private:
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> nonempty_;
};

// One communication group: the images and rotation of super-class `id`. The
// feature network and V are shared by all groups; W_id is private to this group.
struct GroupState {
  std::size_t id = 0;
  RotationLabel rotation;
  std::size_t coarse = 0;
  std::vector<std::size_t> images;
  ClusterSampler sampler;  // over the sub-clusters of `images`
};

std::vector<GroupState> build_groups(const HierarchicalPartition& part);

struct BatchItem {
  std::size_t image = 0;
  std::size_t group = 0;
  RotationLabel rotation;
  HierTarget target;
  std::uint64_t mask_seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::vector<double> group_loss_sum;
  std::vector<std::size_t> group_items;

  double group_mean_loss(std::size_t g) const;
};

struct MetricsRow {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double balance_entropy = 0.0;
  std::optional<double> nmi_prev;
  std::optional<double> nmi_truth;
};

// The alternating procedure: hierarchical k-means on the current features
// every reassign_period epochs, SGD epochs on the hierarchical loss between.
class Trainer {
 public:
  Trainer(const Dataset& data, TrainConfig cfg);
  Trainer(const Dataset& data, TrainConfig cfg, FeatureNet warm_start);

  const TrainConfig& config() const noexcept { return cfg_; }
  const PretextInputs& inputs() const noexcept { return inputs_; }
  const FeatureNet& net() const noexcept { return net_; }
  const Classifiers& classifiers() const noexcept { return cls_; }
  const SgdOptimizer& shared_optimizer() const noexcept { return shared_opt_; }
  const std::vector<SgdOptimizer>& group_optimizers() const noexcept { return group_opts_; }
  const std::vector<GroupState>& groups() const noexcept { return groups_; }
  const HierarchicalPartition& partition() const;
  const std::optional<HierarchicalPartition>& previous_partition() const noexcept { return prev_; }
  std::size_t epochs_done() const noexcept { return epoch_; }
  std::size_t reassignments() const noexcept { return reassign_count_; }

  // Clusters the current features, rebuilds the groups and re-initializes
  // every W_s (and its momentum).
  const HierarchicalPartition& reassign();

  // Partition the next reassign() would produce; does not change state.
  HierarchicalPartition compute_partition() const;

  std::vector<BatchItem> draw_batch(std::size_t step) const;
  std::size_t steps_per_epoch() const noexcept;

  // Groups compute gradients separately; θ and V gradients are summed in
  // ascending group order before one shared update, each W_s is updated by its
  // own group.
  EpochStats run_epoch();
  // Single-process reference: every batch as one concatenated forward/backward
  // and one optimizer step over all parameters.
  EpochStats run_epoch_reference();

  // Initial reassignment, then `epochs` epochs; one metrics row per epoch.
  std::vector<MetricsRow> train();

  MetricsRow metrics_row(const EpochStats& stats, bool reassigned) const;

 private:
  HierarchicalPartition compute_partition(std::optional<WhiteningTransform>& whitening) const;
  EpochStats run_epoch_impl(bool reference);
  void step_grouped(std::span<const BatchItem> items, EpochStats& stats);
  void step_reference(std::span<const BatchItem> items, EpochStats& stats);
  Matrix gather_inputs(std::span<const BatchItem> items) const;

  TrainConfig cfg_;
  PretextInputs inputs_;
  std::optional<std::vector<std::size_t>> truth_;
  FeatureNet net_;
  Classifiers cls_;
  SgdOptimizer shared_opt_;
  std::vector<SgdOptimizer> group_opts_;
  std::optional<HierarchicalPartition> part_;
  std::optional<HierarchicalPartition> prev_;
  std::vector<GroupState> groups_;
  std::optional<WhiteningTransform> whitening_;
  std::size_t epoch_ = 0;
  std::size_t reassign_count_ = 0;
};

// Rotation accuracy of the super-class head: the predicted rotation is the
// argmax over r of Σ_c p(super = r·m + c).
double rotation_accuracy(const FeatureNet& net, const Classifiers& cls, std::size_t m,
                         const PretextInputs& inputs);

}  // namespace dc
