#include "dc/hierarchical.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dc/error.hpp"

namespace dc {
namespace {

struct LevelResult {
  Matrix centroids;
  Assignment labels;
};

LevelResult fit_level(const Matrix& x, KMeansConfig cfg, std::size_t num_shards) {
  if (num_shards <= 1) {
    auto r = kmeans_fit(x, cfg);
    return {std::move(r.centroids), std::move(r.labels)};
  }
  const auto shards = split_rows(x, num_shards);
  auto r = distributed_kmeans_fit(shards, cfg);
  Assignment labels;
  labels.reserve(x.rows());
  for (const auto& part : r.labels) labels.insert(labels.end(), part.begin(), part.end());
  return {std::move(r.centroids), std::move(labels)};
}

}  // namespace

std::vector<std::size_t> HierarchicalPartition::fine_labels() const {
  std::vector<std::size_t> out(coarse.size());
  for (std::size_t n = 0; n < coarse.size(); ++n) out[n] = coarse[n] * k + sub[n];
  return out;
}

HierarchicalPartition hierarchical_fit(const Matrix& features, const HierarchicalOptions& opts) {
  if (opts.m < 1 || opts.k < 1)
    throw std::invalid_argument("hierarchical_fit: m and k must be at least 1");
  if (features.rows() < opts.m)
    throw DataError("hierarchical_fit: " + std::to_string(features.rows()) +
                    " images cannot form " + std::to_string(opts.m) + " coarse clusters");

  HierarchicalPartition part;
  part.m = opts.m;
  part.k = opts.k;

  KMeansConfig level1 = opts.kmeans;
  level1.k = opts.m;
  level1.seed = derive_seed(opts.kmeans.seed, 0);
  auto coarse = fit_level(features, level1, opts.num_shards);
  part.coarse = std::move(coarse.labels);
  part.coarse_centroids = std::move(coarse.centroids);

  std::vector<std::vector<std::size_t>> members(opts.m);
  for (std::size_t n = 0; n < part.coarse.size(); ++n) members[part.coarse[n]].push_back(n);

  part.sub.assign(features.rows(), 0);
  part.sub_centroids.resize(opts.m);
  for (std::size_t c = 0; c < opts.m; ++c) {
    if (members[c].size() < opts.k)
      throw DataError("hierarchical_fit: coarse cluster " + std::to_string(c) + " has " +
                      std::to_string(members[c].size()) + " images, fewer than k=" +
                      std::to_string(opts.k) + "; use a smaller k");
    KMeansConfig level2 = opts.kmeans;
    level2.k = opts.k;
    level2.seed = derive_seed(opts.kmeans.seed, 1 + c);
    auto sub = fit_level(select_rows(features, members[c]), level2, opts.num_shards);
    for (std::size_t i = 0; i < members[c].size(); ++i) part.sub[members[c][i]] = sub.labels[i];
    part.sub_centroids[c] = std::move(sub.centroids);
  }
  return part;
}

std::vector<std::size_t> align_coarse_labels(HierarchicalPartition& next,
                                             const HierarchicalPartition& prev) {
  if (next.m != prev.m || next.num_images() != prev.num_images())
    throw std::invalid_argument("align_coarse_labels: partitions differ in m or image count");
  const std::size_t m = next.m;
  std::vector<std::size_t> overlap(m * m, 0);
  for (std::size_t n = 0; n < next.num_images(); ++n) ++overlap[next.coarse[n] * m + prev.coarse[n]];

  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> map(m, kUnset);
  std::vector<bool> taken(m, false);
  for (std::size_t round = 0; round < m; ++round) {
    std::size_t best_a = kUnset, best_b = kUnset, best = 0;
    for (std::size_t a = 0; a < m; ++a) {
      if (map[a] != kUnset) continue;
      for (std::size_t b = 0; b < m; ++b) {
        if (taken[b]) continue;
        if (best_a == kUnset || overlap[a * m + b] > best) {
          best_a = a;
          best_b = b;
          best = overlap[a * m + b];
        }
      }
    }
    map[best_a] = best_b;
    taken[best_b] = true;
  }

  for (auto& c : next.coarse) c = map[c];
  Matrix centroids(next.coarse_centroids.rows(), next.coarse_centroids.cols());
  std::vector<Matrix> subs(m);
  for (std::size_t a = 0; a < m; ++a) {
    if (a < next.coarse_centroids.rows()) {
      auto src = next.coarse_centroids.row(a);
      std::copy(src.begin(), src.end(), centroids.row(map[a]).begin());
    }
    if (a < next.sub_centroids.size()) subs[map[a]] = std::move(next.sub_centroids[a]);
  }
  next.coarse_centroids = std::move(centroids);
  next.sub_centroids = std::move(subs);
  return map;
}

}  // namespace dc
