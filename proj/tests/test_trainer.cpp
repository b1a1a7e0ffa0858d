#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dc/dataset.hpp"
#include "dc/error.hpp"
#include "dc/metrics.hpp"
#include "dc/trainer.hpp"

using namespace dc;

namespace {

Dataset blobs(std::size_t n, std::uint64_t seed, std::size_t side = 16) {
  SyntheticSpec spec;
  spec.n = n;
  spec.side = side;
  spec.seed = seed;
  spec.classes = std::min<std::size_t>(4, n);
  return make_synthetic(spec);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.m = 2;
  cfg.k = 2;
  cfg.hidden = {16};
  cfg.feature_dim = 8;
  cfg.sgd.batch_size = 16;
  return cfg;
}

double max_rel_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i])));
  return worst;
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_EQ(cfg.m, 4u);
  EXPECT_EQ(cfg.reassign_period, 3u);
  EXPECT_EQ(cfg.groups(), 16u);
  EXPECT_NO_THROW(cfg.validate());
  cfg.num_worker_groups = 16;
  EXPECT_NO_THROW(cfg.validate());
  cfg.num_worker_groups = 8;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.reassign_period = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.augment = true;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.whitening_dim = cfg.feature_dim + 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PretextInputs, RotationsAndSobel) {
  const Dataset d = blobs(4, 1, 8);
  const auto raw = PretextInputs::build(d.images, false);
  EXPECT_EQ(raw.input_dim(), 64u);
  const Image r1 = rotate(d.images[2], RotationLabel(1));
  for (std::size_t p = 0; p < 64; ++p) EXPECT_EQ(raw.by_rotation[1](2, p), r1.pixels[p]);
  const auto sob = PretextInputs::build(d.images, true);
  EXPECT_EQ(sob.input_dim(), 128u);
  const Image s3 = sobel(rotate(d.images[0], RotationLabel(3)));
  for (std::size_t p = 0; p < 128; ++p) EXPECT_EQ(sob.by_rotation[3](0, p), s3.pixels[p]);
  std::vector<Image> mixed{Image(1, 4, 4), Image(1, 5, 5)};
  EXPECT_THROW(PretextInputs::build(mixed, false), DataError);
  std::vector<Image> wide{Image(1, 4, 6)};
  EXPECT_THROW(PretextInputs::build(wide, false), DataError);
}

TEST(ExtractFeatures, UnitRowsAndOrderEquivariance) {
  const Dataset d = blobs(40, 2);
  TrainConfig cfg = small_config();
  const Trainer t(d, cfg);
  const Matrix f = extract_all_features(t.net(), t.inputs(), cfg);
  EXPECT_EQ(f.rows(), 40u);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    double s = 0;
    for (double v : f.row(i)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
  }
  // Whitening off: rows depend only on their own image.
  cfg.whitening = false;
  const Matrix g = extract_all_features(t.net(), t.inputs(), cfg);
  std::vector<std::size_t> perm(40);
  for (std::size_t i = 0; i < 40; ++i) perm[i] = (i * 7) % 40;
  const Dataset pd = d.subset(perm);
  const auto pin = PretextInputs::build(pd.images, cfg.sobel);
  const Matrix h = extract_all_features(t.net(), pin, cfg);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t c = 0; c < g.cols(); ++c) EXPECT_EQ(h(i, c), g(perm[i], c));

  const Dataset one = blobs(1, 3);
  const auto oin = PretextInputs::build(one.images, cfg.sobel);
  const Matrix o = extract_all_features(t.net(), oin, cfg);
  EXPECT_EQ(o.rows(), 1u);
  double s = 0;
  for (double v : o.row(0)) s += v * v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(ClusterSampler, UniformOverClusters) {
  // Very unequal cluster sizes; draws should still be even per cluster.
  std::vector<std::size_t> items, labels;
  const std::size_t sizes[4] = {1, 5, 50, 500};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      items.push_back(items.size());
      labels.push_back(c);
    }
  const ClusterSampler s(items, labels, 5);  // cluster 4 empty
  const std::size_t b = 400;
  std::vector<std::size_t> counts(5, 0);
  Rng rng(4);
  for (std::size_t i = 0; i < b * 4; ++i) ++counts[labels[s.draw(rng)]];
  for (std::size_t c = 0; c < 4; ++c) EXPECT_LE(std::abs(double(counts[c]) - b), 3 * std::sqrt(double(b)));
  EXPECT_EQ(counts[4], 0u);
  EXPECT_TRUE(ClusterSampler().empty());
}

TEST(Groups, DisjointCoverAndCount) {
  const Dataset d = blobs(120, 5);
  TrainConfig cfg = small_config();
  cfg.m = 4;
  cfg.k = 2;
  Trainer t(d, cfg);
  t.reassign();
  EXPECT_EQ(t.groups().size(), 16u);
  EXPECT_EQ(t.classifiers().sub.size(), 16u);
  std::vector<std::set<std::size_t>> per_rotation(4);
  for (const auto& g : t.groups()) {
    EXPECT_EQ(g.rotation, t.partition().rotation_of(g.id));
    EXPECT_EQ(g.coarse, t.partition().coarse_of(g.id));
    for (auto i : g.images) {
      EXPECT_TRUE(per_rotation[g.rotation.index()].insert(i).second);
      EXPECT_EQ(t.partition().coarse[i], g.coarse);
    }
  }
  for (const auto& s : per_rotation) EXPECT_EQ(s.size(), 120u);
}

TEST(Reassign, DeterministicWithUnchangedNet) {
  const Dataset d = blobs(80, 6);
  Trainer t(d, small_config());
  const auto a = t.compute_partition();
  const auto b = t.compute_partition();
  EXPECT_EQ(a.coarse, b.coarse);
  EXPECT_EQ(a.sub, b.sub);
  t.reassign();
  EXPECT_EQ(t.partition().fine_labels(), a.fine_labels());
  EXPECT_EQ(t.reassignments(), 1u);
}

TEST(Reassign, RecoversBlobClasses) {
  // Identity network over raw pixels, so the partition reflects the data alone.
  const Dataset d = blobs(400, 7);
  TrainConfig cfg;
  cfg.m = 2;
  cfg.k = 2;
  cfg.sobel = false;
  cfg.whitening = false;
  cfg.hidden = {};
  cfg.feature_dim = 256;
  LinearHead id(256, 256);
  for (std::size_t i = 0; i < 256; ++i) id.weight(i, i) = 1.0;
  Trainer t(d, cfg, FeatureNet({id}));
  t.reassign();
  EXPECT_GE(nmi(Partition(t.partition().fine_labels(), 4), Partition(*d.truth, 4)), 0.9);
}

TEST(Reassign, ReinitializesSubClassifiers) {
  const Dataset d = blobs(64, 8);
  Trainer t(d, small_config());
  t.reassign();
  t.run_epoch();
  const auto before = t.classifiers();
  EXPECT_FALSE(t.shared_optimizer().buffers().empty());
  t.reassign();
  EXPECT_EQ(t.classifiers().super, before.super);
  EXPECT_NE(t.classifiers().sub, before.sub);
  for (const auto& [name, buf] : t.shared_optimizer().buffers()) EXPECT_NE(name[0], 'W');
  for (const auto& opt : t.group_optimizers()) EXPECT_TRUE(opt.buffers().empty());
}

TEST(RunEpoch, GroupedMatchesSingleProcessReference) {
  const Dataset d = blobs(64, 9);
  TrainConfig cfg = small_config();
  cfg.m = 1;
  cfg.num_worker_groups = 4;
  cfg.seed = 3;
  Trainer grouped(d, cfg), reference(d, cfg);
  grouped.reassign();
  reference.reassign();
  for (int e = 0; e < 3; ++e) {
    const auto a = grouped.run_epoch();
    const auto b = reference.run_epoch_reference();
    EXPECT_NEAR(a.mean_loss, b.mean_loss, 1e-9 * std::max(1.0, b.mean_loss));
  }
  for (std::size_t l = 0; l < grouped.net().num_layers(); ++l) {
    EXPECT_LE(max_rel_diff(grouped.net().layers()[l].weight.values(),
                           reference.net().layers()[l].weight.values()), 1e-6);
    EXPECT_LE(max_rel_diff(grouped.net().layers()[l].bias, reference.net().layers()[l].bias), 1e-6);
  }
  EXPECT_LE(max_rel_diff(grouped.classifiers().super.weight.values(),
                         reference.classifiers().super.weight.values()), 1e-6);
  for (std::size_t s = 0; s < 4; ++s)
    EXPECT_LE(max_rel_diff(grouped.classifiers().sub[s].weight.values(),
                           reference.classifiers().sub[s].weight.values()), 1e-6);
}

TEST(RunEpoch, BatchesCoverGroupsAndLossIsFinite) {
  const Dataset d = blobs(64, 10);
  Trainer t(d, small_config());
  t.reassign();
  EXPECT_EQ(t.steps_per_epoch(), 4u * 64 / 16);
  const auto batch = t.draw_batch(0);
  EXPECT_EQ(batch.size(), 16u);
  for (std::size_t j = 1; j < batch.size(); ++j) EXPECT_LE(batch[j - 1].group, batch[j].group);
  for (const auto& it : batch) {
    const auto& g = t.groups()[it.group];
    EXPECT_EQ(it.rotation, g.rotation);
    EXPECT_EQ(it.target.super, g.id);
    EXPECT_EQ(t.partition().coarse[it.image], g.coarse);
  }
  const auto s = t.run_epoch();
  EXPECT_TRUE(std::isfinite(s.mean_loss));
  EXPECT_GE(s.mean_loss, 0.0);
  EXPECT_EQ(t.epochs_done(), 1u);
}

TEST(RunEpoch, EmptyGroupContributesNothing) {
  // Batch smaller than the group count: some groups draw no items in a step.
  const Dataset d = blobs(32, 11);
  TrainConfig cfg = small_config();
  cfg.m = 4;
  cfg.k = 1;
  cfg.sgd.batch_size = 5;
  Trainer t(d, cfg);
  t.reassign();
  const auto s = t.run_epoch();
  EXPECT_TRUE(std::isfinite(s.mean_loss));
}

TEST(Train, EpochsZeroReassignsOnce) {
  const Dataset d = blobs(40, 12);
  TrainConfig cfg = small_config();
  cfg.epochs = 0;
  Trainer t(d, cfg);
  const auto rows = t.train();
  EXPECT_TRUE(rows.empty());
  EXPECT_EQ(t.reassignments(), 1u);
  EXPECT_EQ(t.epochs_done(), 0u);
}

TEST(Train, ReproducibleMetricsAndReassignSchedule) {
  const Dataset d = blobs(64, 13);
  TrainConfig cfg = small_config();
  cfg.epochs = 7;
  cfg.reassign_period = 3;
  Trainer a(d, cfg), b(d, cfg);
  const auto ra = a.train();
  const auto rb = b.train();
  ASSERT_EQ(ra.size(), 7u);
  EXPECT_EQ(a.reassignments(), 3u);  // before epochs 0, 3, 6
  for (std::size_t e = 0; e < 7; ++e) {
    EXPECT_EQ(ra[e].epoch, e);
    EXPECT_EQ(ra[e].mean_loss, rb[e].mean_loss);
    EXPECT_EQ(ra[e].balance_entropy, rb[e].balance_entropy);
    EXPECT_EQ(ra[e].nmi_prev, rb[e].nmi_prev);
    EXPECT_EQ(ra[e].nmi_prev.has_value(), e == 3 || e == 6);
    EXPECT_TRUE(ra[e].nmi_truth.has_value());
  }
  EXPECT_EQ(a.net(), b.net());
}

TEST(Train, WarmStartShapeMismatchIsConfigError) {
  const Dataset d = blobs(16, 14);
  TrainConfig cfg = small_config();
  Rng rng(1);
  EXPECT_THROW(Trainer(d, cfg, FeatureNet({10, 8}, rng)), ConfigError);
  const Trainer base(d, cfg);
  const Trainer warm(d, cfg, base.net());
  EXPECT_EQ(warm.net(), base.net());
}

TEST(RotationAccuracy, InRange) {
  const Dataset d = blobs(32, 15);
  Trainer t(d, small_config());
  t.reassign();
  const double acc = rotation_accuracy(t.net(), t.classifiers(), 2, t.inputs());
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
}
