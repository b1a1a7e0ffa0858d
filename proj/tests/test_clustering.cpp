#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "dc/error.hpp"
#include "dc/hierarchical.hpp"
#include "dc/io.hpp"
#include "dc/kmeans.hpp"
#include "dc/metrics.hpp"
#include "dc/rng.hpp"

using namespace dc;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

// Gaussian blobs around the given centers, `per` points each, labels in order.
Matrix blobs(const std::vector<std::vector<double>>& centers, std::size_t per, double sd,
             std::uint64_t seed, std::vector<std::size_t>* truth = nullptr) {
  Rng rng(seed);
  const std::size_t d = centers.front().size();
  Matrix x(centers.size() * per, d);
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t i = 0; i < per; ++i) {
      for (std::size_t t = 0; t < d; ++t) x(c * per + i, t) = centers[c][t] + rng.normal(0.0, sd);
      if (truth) truth->push_back(c);
    }
  return x;
}

double naive_objective(const Matrix& x, const Matrix& c, const Assignment& a) {
  double s = 0.0;
  for (std::size_t n = 0; n < x.rows(); ++n)
    for (std::size_t t = 0; t < x.cols(); ++t) s += std::pow(x(n, t) - c(a[n], t), 2);
  return s;
}

struct Optimum {
  double objective = std::numeric_limits<double>::infinity();
  Matrix centroids;
};

// Exhaustive search over every assignment with all k clusters non-empty.
Optimum brute_force(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows(), d = x.cols();
  Optimum best;
  Assignment a(n, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= k;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i, c /= k) a[i] = c % k;
    Matrix mean(k, d);
    std::vector<double> cnt(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      cnt[a[i]] += 1.0;
      for (std::size_t t = 0; t < d; ++t) mean(a[i], t) += x(i, t);
    }
    if (std::find(cnt.begin(), cnt.end(), 0.0) != cnt.end()) continue;
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t t = 0; t < d; ++t) mean(j, t) /= cnt[j];
    const double obj = naive_objective(x, mean, a);
    if (obj < best.objective) best = {obj, mean};
  }
  return best;
}

}  // namespace

TEST(KMeansConfig, Validation) {
  KMeansConfig cfg;
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.k = 1;
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.max_iters = 10;
  cfg.tolerance = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(KMeansConfig{}.max_iters, 10u);
}

TEST(AssignNearest, MatchesNaiveDistanceWithLowestIndexTies) {
  const Matrix x = random_matrix(60, 3, 1);
  const Matrix c = random_matrix(5, 3, 2);
  const Assignment a = assign_nearest(x, c);
  for (std::size_t n = 0; n < x.rows(); ++n) {
    std::size_t best = 0;
    double bd = squared_distance(x.row(n), c.row(0));
    for (std::size_t j = 1; j < c.rows(); ++j) {
      const double dj = squared_distance(x.row(n), c.row(j));
      if (dj < bd) {
        bd = dj;
        best = j;
      }
    }
    EXPECT_EQ(a[n], best);
  }
  Matrix dup(3, 2, std::vector<double>{1, 1, 1, 1, 5, 5});
  Matrix point(1, 2, std::vector<double>{1, 1});
  EXPECT_EQ(assign_nearest(point, dup)[0], 0u);
}

TEST(KMeansObjective, Examples) {
  Matrix x(2, 2, std::vector<double>{0, 0, 2, 0});
  Matrix c(1, 2, std::vector<double>{0, 0});
  EXPECT_EQ(kmeans_objective(x, c, {0, 0}), 4.0);
  EXPECT_EQ(kmeans_objective(x, x, {0, 1}), 0.0);
  const Matrix y = random_matrix(30, 4, 3);
  const Matrix cc = random_matrix(3, 4, 4);
  const Assignment a = assign_nearest(y, cc);
  EXPECT_NEAR(kmeans_objective(y, cc, a), naive_objective(y, cc, a), 1e-10);
  EXPECT_THROW(kmeans_objective(y, cc, Assignment(29, 0)), std::invalid_argument);
  EXPECT_THROW(kmeans_objective(y, Matrix(3, 2), a), std::invalid_argument);
}

TEST(KMeansFit, KEqualsN) {
  const Matrix x = random_matrix(6, 2, 5);
  KMeansConfig cfg;
  cfg.k = 6;
  const auto r = kmeans_fit(x, cfg);
  EXPECT_EQ(r.objective, 0.0);
  EXPECT_EQ(std::set<std::size_t>(r.labels.begin(), r.labels.end()).size(), 6u);
  for (std::size_t n = 0; n < 6; ++n)
    for (std::size_t t = 0; t < 2; ++t) EXPECT_EQ(r.centroids(r.labels[n], t), x(n, t));
}

TEST(KMeansFit, SeparatedPairs) {
  Matrix x(4, 1, std::vector<double>{0.0, 1.0, 100.0, 102.0});
  KMeansConfig cfg;
  cfg.k = 2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const auto r = kmeans_fit(x, cfg);
    EXPECT_EQ(r.labels[0], r.labels[1]);
    EXPECT_EQ(r.labels[2], r.labels[3]);
    EXPECT_NE(r.labels[0], r.labels[2]);
    EXPECT_DOUBLE_EQ(r.centroids(r.labels[0], 0), 0.5);
    EXPECT_DOUBLE_EQ(r.centroids(r.labels[2], 0), 101.0);
    EXPECT_DOUBLE_EQ(r.objective, 0.5 + 2.0);
  }
}

TEST(KMeansFit, SingleClusterIsGlobalMean) {
  const Matrix x = random_matrix(25, 3, 6);
  KMeansConfig cfg;
  const auto r = kmeans_fit(x, cfg);
  double total = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    double mean = 0.0;
    for (std::size_t n = 0; n < 25; ++n) mean += x(n, t) / 25.0;
    EXPECT_NEAR(r.centroids(0, t), mean, 1e-12);
    for (std::size_t n = 0; n < 25; ++n) total += std::pow(x(n, t) - mean, 2);
  }
  EXPECT_NEAR(r.objective, total, 1e-10);
}

TEST(KMeansFit, Errors) {
  KMeansConfig cfg;
  cfg.k = 4;
  EXPECT_THROW(kmeans_fit(random_matrix(3, 2, 1), cfg), std::invalid_argument);
  Matrix bad = random_matrix(5, 2, 1);
  bad(2, 1) = std::numeric_limits<double>::infinity();
  cfg.k = 2;
  EXPECT_THROW(kmeans_fit(bad, cfg), NumericalError);
}

TEST(KMeansFit, ObjectiveNonIncreasingOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 20 + rng.uniform_index(80), k = 1 + rng.uniform_index(8);
    KMeansConfig cfg;
    cfg.k = k;
    cfg.seed = seed;
    cfg.max_iters = 30;
    const auto r = kmeans_fit(random_matrix(n, 1 + rng.uniform_index(5), seed + 100), cfg);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      if (!r.repaired[i - 1]) {
        EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] * (1 + 1e-12) + 1e-12);
      }
    EXPECT_EQ(std::set<std::size_t>(r.labels.begin(), r.labels.end()).size(), k);
  }
}

TEST(KMeansFit, NeverBelowBruteForceOptimumAndExactFromOptimum) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const std::size_t n = 3 + rng.uniform_index(6);
    const std::size_t k = 1 + rng.uniform_index(3);
    const Matrix x = random_matrix(n, 1 + rng.uniform_index(2), seed + 7);
    const Optimum opt = brute_force(x, k);
    KMeansConfig cfg;
    cfg.k = k;
    cfg.seed = seed;
    EXPECT_GE(kmeans_fit(x, cfg).objective, opt.objective - 1e-12);
    EXPECT_NEAR(kmeans_fit(x, cfg, opt.centroids).objective, opt.objective, 1e-12);
  }
}

TEST(Repair, NoEmptyIsIdentity) {
  const Matrix x = random_matrix(6, 2, 8);
  Matrix c = select_rows(x, std::vector<std::size_t>{0, 1, 2});
  Assignment a = assign_nearest(x, c);
  const Matrix c0 = c;
  const Assignment a0 = a;
  Rng rng(1);
  repair_empty_clusters(x, c, a, rng);
  EXPECT_EQ(c, c0);
  EXPECT_EQ(a, a0);
}

TEST(Repair, CollapsedIdenticalPoints) {
  Matrix x(3, 2, 1.0);
  KMeansConfig cfg;
  cfg.k = 3;
  const auto r = kmeans_fit(x, cfg);
  EXPECT_EQ(std::set<std::size_t>(r.labels.begin(), r.labels.end()).size(), 3u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) EXPECT_NE(squared_distance(r.centroids.row(i), r.centroids.row(j)), 0.0);

  Matrix c(3, 2, 1.0);
  Assignment a{0, 0, 0};
  Rng rng(2);
  repair_empty_clusters(x, c, a, rng);
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 3u);
  for (double v : c.values()) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Repair, KEqualsNWithDuplicate) {
  Matrix x(4, 1, std::vector<double>{0.0, 3.0, 3.0, 7.0});
  KMeansConfig cfg;
  cfg.k = 4;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto r = kmeans_fit(x, cfg);
    std::vector<int> sizes(4, 0);
    for (auto l : r.labels) ++sizes[l];
    for (int s : sizes) EXPECT_EQ(s, 1);
  }
}

TEST(Repair, DonorComesFromLargestCluster) {
  Matrix x(5, 1, std::vector<double>{0, 1, 2, 10, 11});
  Matrix c(3, 1, std::vector<double>{1, 10.5, 50});
  Assignment a{0, 0, 0, 1, 1};
  Rng rng(3);
  repair_empty_clusters(x, c, a, rng);
  std::size_t moved = 5;
  for (std::size_t i = 0; i < 5; ++i)
    if (a[i] == 2) moved = i;
  ASSERT_LT(moved, 3u);
  EXPECT_NEAR(c(2, 0), x(moved, 0), 1e-6);
  EXPECT_NE(c(2, 0), x(moved, 0) + 0.0 * 1);  // perturbed
}

TEST(Repair, UnreparableThrows) {
  Matrix x(2, 1, std::vector<double>{0, 1});
  Matrix c(3, 1, std::vector<double>{0, 1, 2});
  Assignment a{0, 1};
  Rng rng(4);
  EXPECT_THROW(repair_empty_clusters(x, c, a, rng), DataError);
}

TEST(ShardStats, InvariantsAndMerge) {
  const Matrix x = random_matrix(10, 3, 9);
  Assignment a{0, 2, 2, 0, 0, 2, 0, 2, 2, 2};
  const auto s = ShardStats::from_assignment(x, a, 3);
  EXPECT_EQ(s.total(), 10u);
  EXPECT_EQ(s.counts[1], 0u);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(s.sums(1, t), 0.0);
  ShardStats acc(3, 3);
  acc.merge(s);
  acc.merge(s);
  EXPECT_EQ(acc.counts[2], 12u);
  EXPECT_NEAR(acc.sums(0, 1), 2 * s.sums(0, 1), 1e-12);
}

TEST(SplitRows, ContiguousNearEqual) {
  const Matrix x = random_matrix(10, 2, 10);
  const auto parts = split_rows(x, 4);
  ASSERT_EQ(parts.size(), 4u);
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) sizes.push_back(p.rows());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 2, 2}));
  EXPECT_EQ(concat_rows(parts), x);
}

TEST(DistributedKMeans, OneShardIsBitIdentical) {
  const Matrix x = random_matrix(200, 4, 11);
  KMeansConfig cfg;
  cfg.k = 7;
  cfg.seed = 3;
  const auto serial = kmeans_fit(x, cfg);
  const std::vector<Matrix> shards{x};
  const auto dist = distributed_kmeans_fit(shards, cfg);
  EXPECT_EQ(dist.centroids, serial.centroids);
  EXPECT_EQ(dist.labels.front(), serial.labels);
  EXPECT_EQ(dist.objective, serial.objective);
  EXPECT_EQ(dist.objective_trace, serial.objective_trace);
}

TEST(DistributedKMeans, ShardCountsAgreeWithSerial) {
  const Matrix x = random_matrix(2000, 5, 12);
  KMeansConfig cfg;
  cfg.k = 10;
  cfg.seed = 5;
  const auto serial = kmeans_fit(x, cfg);
  for (std::size_t shards : {2u, 4u, 8u}) {
    const auto parts = split_rows(x, shards);
    const auto dist = distributed_kmeans_fit(parts, cfg);
    Assignment flat;
    for (const auto& l : dist.labels) flat.insert(flat.end(), l.begin(), l.end());
    EXPECT_EQ(flat, serial.labels) << shards;
    for (std::size_t i = 0; i < serial.centroids.size(); ++i) {
      const double a = serial.centroids.values()[i], b = dist.centroids.values()[i];
      EXPECT_LE(std::abs(a - b), 1e-6 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(DistributedKMeans, RepairsMatchSerial) {
  // Many duplicate rows force empty clusters and repairs.
  Matrix x(40, 2);
  for (std::size_t i = 0; i < 40; ++i) x(i, 0) = static_cast<double>(i % 3);
  KMeansConfig cfg;
  cfg.k = 6;
  cfg.seed = 2;
  const auto serial = kmeans_fit(x, cfg);
  const auto dist = distributed_kmeans_fit(split_rows(x, 3), cfg);
  Assignment flat;
  for (const auto& l : dist.labels) flat.insert(flat.end(), l.begin(), l.end());
  EXPECT_EQ(flat, serial.labels);
  EXPECT_EQ(dist.repaired, serial.repaired);
}

TEST(DistributedKMeans, Errors) {
  KMeansConfig cfg;
  cfg.k = 2;
  EXPECT_THROW(distributed_kmeans_fit(std::vector<Matrix>{}, cfg), std::invalid_argument);
  const std::vector<Matrix> mixed{random_matrix(3, 2, 1), random_matrix(3, 3, 2)};
  EXPECT_THROW(distributed_kmeans_fit(mixed, cfg), std::invalid_argument);
}

TEST(Hierarchical, FullScaleBookkeeping) {
  HierarchicalPartition p;
  p.m = 4;
  p.k = 80000;
  EXPECT_EQ(p.num_super_classes(), 16u);
  EXPECT_EQ(p.total_sub_clusters(), 320000u);
}

TEST(Hierarchical, SuperLabelEncodingIsBijective) {
  HierarchicalPartition p;
  p.m = 3;
  std::set<std::size_t> seen;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t s = p.encode_super(RotationLabel(r), c);
      EXPECT_EQ(s, r * 3 + c);
      EXPECT_EQ(p.rotation_of(s), RotationLabel(r));
      EXPECT_EQ(p.coarse_of(s), c);
      seen.insert(s);
    }
  EXPECT_EQ(seen.size(), 12u);
}

TEST(Hierarchical, SingleCoarseSingleSub) {
  HierarchicalOptions opts;
  opts.m = 1;
  opts.k = 1;
  const auto p = hierarchical_fit(random_matrix(20, 3, 13), opts);
  EXPECT_EQ(p.num_super_classes(), 4u);
  for (std::size_t n = 0; n < 20; ++n) {
    EXPECT_EQ(p.coarse[n], 0u);
    EXPECT_EQ(p.sub[n], 0u);
    EXPECT_EQ(p.super_label(n, RotationLabel(2)), 2u);
  }
}

TEST(Hierarchical, FourBlobsInTwoPairs) {
  std::vector<std::size_t> truth;
  const Matrix x = blobs({{0, 0}, {0, 4}, {30, 0}, {30, 4}}, 50, 0.3, 14, &truth);
  HierarchicalOptions opts;
  opts.m = 2;
  opts.k = 2;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    opts.kmeans.seed = seed;
    const auto p = hierarchical_fit(x, opts);
    EXPECT_DOUBLE_EQ(nmi(Partition(p.fine_labels(), 4), Partition(truth, 4)), 1.0);
    for (std::size_t n = 0; n < x.rows(); ++n)
      EXPECT_EQ(p.coarse[n], p.coarse[n / 100 * 100]);
  }
}

TEST(Hierarchical, ShardedMatchesSerial) {
  const Matrix x = random_matrix(300, 3, 15);
  HierarchicalOptions opts;
  opts.m = 3;
  opts.k = 4;
  const auto serial = hierarchical_fit(x, opts);
  opts.num_shards = 4;
  const auto sharded = hierarchical_fit(x, opts);
  EXPECT_EQ(serial.coarse, sharded.coarse);
  EXPECT_EQ(serial.sub, sharded.sub);
}

TEST(Hierarchical, DistributedDeploymentShapeAtDeskScale) {
  const Matrix x = random_matrix(2000, 4, 16);
  HierarchicalOptions opts;
  opts.m = 4;
  opts.k = 16;
  opts.num_shards = 4;
  const auto p = hierarchical_fit(x, opts);
  EXPECT_EQ(p.total_sub_clusters(), 64u);
  EXPECT_EQ(p.sub_centroids.size(), 4u);
  const auto labels = p.fine_labels();
  const std::set<std::size_t> fine(labels.begin(), labels.end());
  EXPECT_EQ(fine.size(), 64u);
}

TEST(Hierarchical, SmallCoarseClusterErrors) {
  Matrix x(6, 1, std::vector<double>{0, 0.1, 0.2, 0.3, 0.4, 100});
  HierarchicalOptions opts;
  opts.m = 2;
  opts.k = 2;
  try {
    hierarchical_fit(x, opts);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("smaller k"), std::string::npos);
  }
}

TEST(Hierarchical, AlignCoarseLabelsFollowsOverlap) {
  const Matrix x = blobs({{0, 0}, {10, 0}, {0, 10}}, 20, 0.5, 17);
  HierarchicalOptions opts;
  opts.m = 3;
  opts.k = 1;
  opts.kmeans.seed = 1;
  const auto a = hierarchical_fit(x, opts);
  HierarchicalPartition b = a;
  const std::vector<std::size_t> perm{2, 0, 1};
  for (auto& c : b.coarse) c = perm[c];
  Matrix shuffled(3, 2);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 2; ++t) shuffled(perm[c], t) = a.coarse_centroids(c, t);
  b.coarse_centroids = shuffled;
  const auto map = align_coarse_labels(b, a);
  EXPECT_EQ(b.coarse, a.coarse);
  EXPECT_EQ(b.coarse_centroids, a.coarse_centroids);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(map[perm[c]], c);
}

TEST(FormatIo, FmatAndIvecRoundTrip) {
  Matrix m(2, 3, std::vector<double>{0.5, -1.25, 3.0, 1e-3f, 7.0, -0.0});
  std::stringstream ss;
  io::write_fmat(ss, m);
  EXPECT_EQ(ss.str().substr(0, 6), std::string("FMAT1\0", 6));
  EXPECT_EQ(io::read_fmat(ss), m);
  std::stringstream iv;
  const std::vector<std::int64_t> v{0, -3, 1ll << 40};
  io::write_ivec(iv, v);
  EXPECT_EQ(io::read_ivec(iv), v);
  std::stringstream bad("FMAT2");
  EXPECT_THROW(io::read_fmat(bad), DataError);
  std::string s;
  {
    std::stringstream t;
    io::write_fmat(t, m);
    s = t.str();
  }
  std::stringstream truncated(s.substr(0, s.size() - 1));
  EXPECT_THROW(io::read_fmat(truncated), DataError);
}
