#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dc/config.hpp"
#include "dc/dataset.hpp"
#include "dc/hierarchical.hpp"
#include "dc/metrics.hpp"

namespace dc {

// Writes the IMG1 images to `out` and the IVEC1 class labels to `labels_out`.
void cmd_gen_data(const SyntheticSpec& spec, const std::filesystem::path& out,
                  const std::filesystem::path& labels_out);

// Default labels path for a generated dataset: "<out>.labels.ivec".
std::filesystem::path default_labels_path(const std::filesystem::path& images);

// Run directory layout.
inline constexpr const char* kManifestFile = "manifest.txt";
inline constexpr const char* kInitCheckpoint = "init.ckpt";
inline constexpr const char* kFinalCheckpoint = "final.ckpt";
inline constexpr const char* kPartitionFile = "partition.ivec";
inline constexpr const char* kPrevPartitionFile = "partition_prev.ivec";
inline constexpr const char* kMetricsFile = "metrics.csv";

// Trains into cfg.out_dir and writes the manifest, checkpoints, partitions and
// metrics CSV there. Returns the rows written to the CSV.
std::vector<MetricsRow> cmd_train(const RunConfig& cfg);

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);

struct ClusterOptions {
  std::filesystem::path features;
  std::size_t m = 1;
  std::size_t k = 1;
  std::size_t shards = 1;
  std::uint64_t seed = 0;
  std::size_t iters = 10;
  double tolerance = 1e-7;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> truth;
};

// Hierarchical k-means over an FMAT1 feature file. Writes coarse.ivec,
// sub.ivec, labels.ivec (coarse·k + sub), coarse_centroids.fmat and
// sub_centroids.fmat (m·k rows) into out_dir. Prints the NMI against the
// truth labels to `log` when given.
HierarchicalPartition cmd_cluster(const ClusterOptions& opts, std::ostream& log);

struct EvalOptions {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> truth;
  std::optional<std::filesystem::path> reference;
  ProbeConfig probe;
  std::size_t probe_test_period = 5;
};

// One CSV row on `out`; columns that need missing inputs are left empty.
void cmd_eval(const EvalOptions& opts, std::ostream& out);

// Frozen features used by the linear probe: the clustering features of the
// unrotated images under the run's preprocessing.
Matrix probe_features(const FeatureNet& net, const PretextInputs& inputs, const TrainConfig& cfg);

}  // namespace dc
