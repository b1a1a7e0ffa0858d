#include "dc/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "dc/checkpoint.hpp"
#include "dc/error.hpp"
#include "dc/io.hpp"
#include "dc/kmeans.hpp"

namespace dc {
namespace fs = std::filesystem;
namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw DataError("cannot create directory '" + dir.string() + "'");
}

fs::path absolute_or_empty(const fs::path& p) { return p.empty() ? p : fs::absolute(p); }

// Checkpoint of the whole trainer state, including every group's momentum.
Checkpoint trainer_checkpoint(const Trainer& t) {
  SgdOptimizer all(t.config().sgd);
  for (const auto& [name, buf] : t.shared_optimizer().buffers()) all.set_buffer(name, buf);
  for (const auto& opt : t.group_optimizers())
    for (const auto& [name, buf] : opt.buffers()) all.set_buffer(name, buf);
  return make_checkpoint(t.net(), t.classifiers(), &all);
}

Partition read_partition(const fs::path& path, std::size_t classes) {
  if (!fs::exists(path)) throw DataError("missing partition file '" + path.string() + "'");
  try {
    return Partition(io::read_labels(path), classes);
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

double probe_accuracy(const FeatureNet& net, const PretextInputs& inputs, const TrainConfig& cfg,
                      const Partition& truth, const EvalOptions& opts) {
  const Split split = interleaved_split(inputs.num_images(), opts.probe_test_period);
  return linear_probe(probe_features(net, inputs, cfg), truth, opts.probe, split.train, split.test);
}

}  // namespace

fs::path default_labels_path(const fs::path& images) {
  return fs::path(images.string() + ".labels.ivec");
}

void cmd_gen_data(const SyntheticSpec& spec, const fs::path& out, const fs::path& labels_out) {
  if (spec.classes < 1) throw ConfigError("classes must be at least 1");
  if (spec.n < spec.classes)
    throw ConfigError("n (" + std::to_string(spec.n) + ") must be at least classes (" +
                      std::to_string(spec.classes) + ")");
  const Dataset data = make_synthetic(spec);
  io::write_images(out, data.images);
  io::write_labels(labels_out, *data.truth);
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "epoch,mean_loss,balance_entropy,nmi_prev,nmi_truth\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + fmt(r.mean_loss) + "," + fmt(r.balance_entropy) + "," +
           fmt(r.nmi_prev) + "," + fmt(r.nmi_truth) + "\n";
  return out;
}

std::vector<MetricsRow> cmd_train(const RunConfig& cfg) {
  cfg.train.validate();
  if (cfg.dataset.empty()) throw ConfigError("no dataset given");
  if (cfg.out_dir.empty()) throw ConfigError("no out_dir given");
  const Dataset data = load_dataset(cfg.dataset, cfg.truth);

  std::optional<Trainer> trainer;
  if (cfg.warm_start)
    trainer.emplace(data, cfg.train, restore_net(read_checkpoint(*cfg.warm_start)));
  else
    trainer.emplace(data, cfg.train);

  ensure_dir(cfg.out_dir);
  RunConfig snapshot = cfg;
  snapshot.dataset = absolute_or_empty(cfg.dataset);
  if (snapshot.truth) snapshot.truth = absolute_or_empty(*snapshot.truth);
  if (snapshot.warm_start) snapshot.warm_start = absolute_or_empty(*snapshot.warm_start);
  snapshot.out_dir = absolute_or_empty(cfg.out_dir);
  snapshot.run_keys = {
      {"run.seed", std::to_string(cfg.train.seed)},
      {"run.checkpoint_init", kInitCheckpoint},
      {"run.checkpoint_final", cfg.train.epochs > 0 ? kFinalCheckpoint : ""},
      {"run.partition", kPartitionFile},
      {"run.partition_prev", kPrevPartitionFile},
      {"run.metrics", kMetricsFile},
      {"run.format.images", "IMG1"},
      {"run.format.labels", "IVEC1"},
      {"run.format.matrix", "FMAT1"},
      {"run.format.checkpoint", "CKPT1 v" + std::to_string(Checkpoint::kVersion)},
  };
  write_text(cfg.out_dir / kManifestFile, format_config(snapshot));
  fs::remove(cfg.out_dir / kFinalCheckpoint);
  fs::remove(cfg.out_dir / kPrevPartitionFile);

  trainer->reassign();
  write_checkpoint(cfg.out_dir / kInitCheckpoint, trainer_checkpoint(*trainer));
  const auto rows = trainer->train();
  write_text(cfg.out_dir / kMetricsFile, format_metrics_csv(rows));
  io::write_labels(cfg.out_dir / kPartitionFile, trainer->partition().fine_labels());
  if (const auto& prev = trainer->previous_partition())
    io::write_labels(cfg.out_dir / kPrevPartitionFile, prev->fine_labels());
  if (cfg.train.epochs > 0)
    write_checkpoint(cfg.out_dir / kFinalCheckpoint, trainer_checkpoint(*trainer));
  return rows;
}

HierarchicalPartition cmd_cluster(const ClusterOptions& opts, std::ostream& log) {
  if (opts.out_dir.empty()) throw ConfigError("no output directory given");
  const Matrix features = io::read_fmat(opts.features);
  HierarchicalOptions h;
  h.m = opts.m;
  h.k = opts.k;
  h.num_shards = opts.shards;
  h.kmeans.seed = opts.seed;
  h.kmeans.max_iters = opts.iters;
  h.kmeans.tolerance = opts.tolerance;
  if (opts.m < 1 || opts.k < 1) throw ConfigError("m and k must be at least 1");
  if (opts.shards < 1) throw ConfigError("shards must be at least 1");
  std::optional<std::vector<std::size_t>> truth;
  if (opts.truth) {
    truth = io::read_labels(*opts.truth);
    if (truth->size() != features.rows())
      throw DataError("truth labels: " + std::to_string(truth->size()) + " entries for " +
                      std::to_string(features.rows()) + " feature rows");
  }
  const HierarchicalPartition part = hierarchical_fit(features, h);

  ensure_dir(opts.out_dir);
  io::write_labels(opts.out_dir / "coarse.ivec", part.coarse);
  io::write_labels(opts.out_dir / "sub.ivec", part.sub);
  io::write_labels(opts.out_dir / "labels.ivec", part.fine_labels());
  io::write_fmat(opts.out_dir / "coarse_centroids.fmat", part.coarse_centroids);
  io::write_fmat(opts.out_dir / "sub_centroids.fmat", concat_rows(part.sub_centroids));

  if (truth) {
    const double v = nmi(Partition(part.fine_labels(), part.total_sub_clusters()),
                         Partition::from_labels(*truth));
    log << "nmi_truth," << fmt(v) << "\n";
  }
  return part;
}

Matrix probe_features(const FeatureNet& net, const PretextInputs& inputs, const TrainConfig& cfg) {
  return extract_all_features(net, inputs, cfg);
}

void cmd_eval(const EvalOptions& opts, std::ostream& out) {
  const fs::path manifest = opts.run_dir / kManifestFile;
  if (!fs::exists(manifest)) throw DataError("missing manifest '" + manifest.string() + "'");
  const RunConfig cfg = load_config(manifest);
  const std::size_t classes = cfg.train.m * cfg.train.k;

  const fs::path init_path = opts.run_dir / kInitCheckpoint;
  fs::path final_path = opts.run_dir / kFinalCheckpoint;
  if (!fs::exists(init_path)) throw DataError("missing checkpoint '" + init_path.string() + "'");
  if (!fs::exists(final_path)) {
    if (cfg.train.epochs > 0) throw DataError("missing checkpoint '" + final_path.string() + "'");
    final_path = init_path;
  }
  const Partition part = read_partition(opts.run_dir / kPartitionFile, classes);
  const Dataset data = load_dataset(cfg.dataset, opts.truth);
  if (data.size() != part.size())
    throw DataError("partition has " + std::to_string(part.size()) + " labels for " +
                    std::to_string(data.size()) + " images");

  std::optional<double> nmi_prev, nmi_truth, nmi_ref, probe, probe_init;
  if (fs::exists(opts.run_dir / kPrevPartitionFile))
    nmi_prev = nmi(read_partition(opts.run_dir / kPrevPartitionFile, classes), part);
  if (opts.reference) {
    auto ref = io::read_labels(*opts.reference);
    if (ref.size() != part.size())
      throw DataError("reference partition has " + std::to_string(ref.size()) + " labels, run has " +
                      std::to_string(part.size()));
    nmi_ref = nmi(Partition::from_labels(std::move(ref)), part);
  }
  if (data.truth) {
    const Partition truth = Partition::from_labels(*data.truth);
    nmi_truth = nmi(part, truth);
    const PretextInputs inputs = PretextInputs::build(data.images, cfg.train.sobel);
    probe = probe_accuracy(restore_net(read_checkpoint(final_path)), inputs, cfg.train, truth, opts);
    probe_init = probe_accuracy(restore_net(read_checkpoint(init_path)), inputs, cfg.train, truth, opts);
  }
  const ColorStdResult color = cluster_color_std(data.images, part);
  std::optional<double> cmin, cmed, cmax;
  if (!color.sorted.empty()) {
    cmin = color.sorted.front();
    const auto n = color.sorted.size();
    cmed = n % 2 ? color.sorted[n / 2] : 0.5 * (color.sorted[n / 2 - 1] + color.sorted[n / 2]);
    cmax = color.sorted.back();
  }

  out << "nmi_prev,nmi_truth,nmi_reference,balance_entropy,color_std_min,color_std_median,"
         "color_std_max,probe_acc,probe_acc_init\n";
  out << fmt(nmi_prev) << "," << fmt(nmi_truth) << "," << fmt(nmi_ref) << ","
      << fmt(balance_entropy(part)) << "," << fmt(cmin) << "," << fmt(cmed) << "," << fmt(cmax)
      << "," << fmt(probe) << "," << fmt(probe_init) << "\n";
}

}  // namespace dc
