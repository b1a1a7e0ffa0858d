// dcluster: data generation, training, clustering and evaluation runs.
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dc/commands.hpp"
#include "dc/error.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical clustering with a rotation pretext task"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic IMG1 dataset and IVEC1 labels");
  std::string gen_kind = "blobs";
  dc::SyntheticSpec spec;
  std::string gen_out, gen_labels;
  gen->add_option("--kind", gen_kind, "blobs or edges")->capture_default_str();
  gen->add_option("--n", spec.n, "Number of images")->capture_default_str();
  gen->add_option("--classes", spec.classes, "Number of classes")->capture_default_str();
  gen->add_option("--dims", spec.side, "Image side length")->capture_default_str();
  gen->add_option("--seed", spec.seed, "Random seed")->required();
  gen->add_option("--out", gen_out, "Output IMG1 path")->required();
  gen->add_option("--labels", gen_labels, "Output IVEC1 labels (default <out>.labels.ivec)");

  // train
  auto* train = app.add_subcommand("train", "Run the alternating clustering/training loop");
  std::string train_config, train_manifest;
  std::map<std::string, std::string> overrides;
  train->add_option("config,--config", train_config, "Config file (key = value)");
  train->add_option("--manifest", train_manifest, "Re-run from a run manifest");
  for (const auto& key : dc::config_keys())
    train->add_option("--" + key, overrides[key], "Overrides config key '" + key + "'");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Hierarchical k-means on an FMAT1 feature file");
  dc::ClusterOptions copts;
  std::string cluster_features, cluster_out, cluster_truth;
  cluster->add_option("--features", cluster_features, "FMAT1 features")->required();
  cluster->add_option("--m", copts.m, "Level-1 clusters")->capture_default_str();
  cluster->add_option("--k", copts.k, "Level-2 clusters per level-1 cluster")->capture_default_str();
  cluster->add_option("--shards", copts.shards, "Row shards")->capture_default_str();
  cluster->add_option("--seed", copts.seed, "Random seed")->required();
  cluster->add_option("--iters", copts.iters, "Lloyd iterations")->capture_default_str();
  cluster->add_option("--tolerance", copts.tolerance, "Centroid movement tolerance")->capture_default_str();
  cluster->add_option("--out", cluster_out, "Output directory")->required();
  cluster->add_option("--truth", cluster_truth, "IVEC1 labels; prints NMI against them");

  // eval
  auto* eval = app.add_subcommand("eval", "Print run metrics as CSV");
  dc::EvalOptions eopts;
  std::string eval_run, eval_truth, eval_reference;
  eval->add_option("run_dir", eval_run, "Run directory")->required();
  eval->add_option("--truth", eval_truth, "IVEC1 ground-truth labels");
  eval->add_option("--reference", eval_reference, "IVEC1 partition to compare against");
  eval->add_option("--probe-epochs", eopts.probe.epochs, "Linear probe epochs")->capture_default_str();
  eval->add_option("--probe-lr", eopts.probe.learning_rate, "Linear probe learning rate")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      spec.kind = dc::parse_synthetic_kind(gen_kind);
      const std::filesystem::path out = gen_out;
      cmd_gen_data(spec, out, gen_labels.empty() ? dc::default_labels_path(out) : std::filesystem::path(gen_labels));
    } else if (*train) {
      if (!train_config.empty() && !train_manifest.empty())
        throw dc::ConfigError("give either a config or a manifest, not both");
      dc::RunConfig cfg;
      if (!train_config.empty()) cfg = dc::load_config(train_config);
      if (!train_manifest.empty()) cfg = dc::load_config(train_manifest);
      for (const auto& key : dc::config_keys())
        if (train->count("--" + key) > 0) dc::set_config_key(cfg, key, overrides[key]);
      dc::cmd_train(cfg);
    } else if (*cluster) {
      copts.features = cluster_features;
      copts.out_dir = cluster_out;
      copts.truth = opt_path(cluster_truth);
      dc::cmd_cluster(copts, std::cout);
    } else if (*eval) {
      eopts.run_dir = eval_run;
      eopts.truth = opt_path(eval_truth);
      eopts.reference = opt_path(eval_reference);
      dc::cmd_eval(eopts, std::cout);
    }
  } catch (const dc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const dc::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const dc::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
