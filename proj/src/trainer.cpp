#include "dc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dc/error.hpp"
#include "dc/metrics.hpp"

namespace dc {
namespace {

// Seed streams derived from TrainConfig::seed.
constexpr std::uint64_t kNetStream = 1;
constexpr std::uint64_t kSuperHeadStream = 2;
constexpr std::uint64_t kBatchStream = 3;
constexpr std::uint64_t kSubHeadStream = 4;
constexpr std::uint64_t kClusterStream = 5;

std::string sub_prefix(std::size_t s) { return "W" + std::to_string(s); }

}  // namespace

void TrainConfig::validate() const {
  if (m < 1) throw ConfigError("m must be at least 1");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (reassign_period < 1) throw ConfigError("reassign_period must be at least 1");
  if (num_worker_groups != 0 && num_worker_groups != groups())
    throw ConfigError("num_worker_groups must equal 4m = " + std::to_string(groups()) +
                      ", got " + std::to_string(num_worker_groups));
  sgd.validate();
  if (!(whitening_epsilon > 0.0)) throw ConfigError("whitening_epsilon must be positive");
  if (whitening_dim > feature_dim)
    throw ConfigError("whitening_dim exceeds feature_dim");
  if (augment) throw ConfigError("augment: random crops and flips are not supported");
  if (feature_dim < 1) throw ConfigError("feature_dim must be at least 1");
  for (auto h : hidden)
    if (h < 1) throw ConfigError("hidden layer sizes must be positive");
  if (kmeans_iters < 1) throw ConfigError("kmeans_iters must be at least 1");
  if (!(kmeans_tolerance >= 0.0)) throw ConfigError("kmeans_tolerance must be non-negative");
  if (kmeans_shards < 1) throw ConfigError("kmeans_shards must be at least 1");
}

PretextInputs PretextInputs::build(std::span<const Image> images, bool use_sobel) {
  if (images.empty()) throw DataError("dataset is empty");
  const Image& first = images.front();
  if (first.height != first.width)
    throw DataError("training needs square images, got " + std::to_string(first.height) + "x" +
                    std::to_string(first.width));
  PretextInputs out;
  for (std::size_t r = 0; r < RotationLabel::kCount; ++r) {
    std::vector<double> data;
    std::size_t dim = 0;
    for (std::size_t n = 0; n < images.size(); ++n) {
      const Image& img = images[n];
      if (img.channels != first.channels || img.height != first.height || img.width != first.width)
        throw DataError("image " + std::to_string(n) + " differs in shape from image 0");
      Image x = rotate(img, RotationLabel(r));
      if (use_sobel) x = sobel(x);
      dim = x.pixels.size();
      data.insert(data.end(), x.pixels.begin(), x.pixels.end());
    }
    out.by_rotation[r] = Matrix(images.size(), dim, std::move(data));
  }
  return out;
}

Matrix extract_all_features(const FeatureNet& net, const PretextInputs& inputs,
                            const TrainConfig& cfg,
                            std::optional<WhiteningTransform>* whitening_state) {
  Matrix features = net.forward(inputs.by_rotation[0]);
  if (cfg.whitening) {
    std::optional<WhiteningTransform> local;
    auto& state = whitening_state ? *whitening_state : local;
    if (!state || cfg.refit_whitening)
      state = fit_whitening(features, cfg.whitening_dim, cfg.whitening_epsilon);
    features = apply_whitening(*state, features);
  }
  features = l2_normalize_rows(std::move(features));
  require_finite(features, "extracted features");
  return features;
}

ClusterSampler::ClusterSampler(std::span<const std::size_t> items,
                               std::span<const std::size_t> labels, std::size_t num_clusters)
    : members_(num_clusters) {
  if (items.size() != labels.size())
    throw std::invalid_argument("ClusterSampler: one label per item required");
  for (std::size_t i = 0; i < items.size(); ++i) members_.at(labels[i]).push_back(items[i]);
  for (std::size_t c = 0; c < num_clusters; ++c)
    if (!members_[c].empty()) nonempty_.push_back(c);
}

std::size_t ClusterSampler::draw(Rng& rng) const {
  if (nonempty_.empty()) throw std::logic_error("ClusterSampler: no non-empty cluster");
  const auto& m = members_[nonempty_[rng.uniform_index(nonempty_.size())]];
  return m[rng.uniform_index(m.size())];
}

std::vector<GroupState> build_groups(const HierarchicalPartition& part) {
  std::vector<std::vector<std::size_t>> images(part.m);
  std::vector<std::vector<std::size_t>> subs(part.m);
  for (std::size_t n = 0; n < part.num_images(); ++n) {
    images[part.coarse[n]].push_back(n);
    subs[part.coarse[n]].push_back(part.sub[n]);
  }
  std::vector<GroupState> groups;
  for (std::size_t s = 0; s < part.num_super_classes(); ++s) {
    GroupState g;
    g.id = s;
    g.rotation = part.rotation_of(s);
    g.coarse = part.coarse_of(s);
    g.images = images[g.coarse];
    g.sampler = ClusterSampler(g.images, subs[g.coarse], part.k);
    groups.push_back(std::move(g));
  }
  return groups;
}

double EpochStats::group_mean_loss(std::size_t g) const {
  return group_items[g] == 0 ? 0.0 : group_loss_sum[g] / static_cast<double>(group_items[g]);
}

Trainer::Trainer(const Dataset& data, TrainConfig cfg)
    : cfg_(std::move(cfg)), shared_opt_(cfg_.sgd) {
  cfg_.validate();
  inputs_ = PretextInputs::build(data.images, cfg_.sobel);
  truth_ = data.truth;
  std::vector<std::size_t> sizes{inputs_.input_dim()};
  sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  sizes.push_back(cfg_.feature_dim);
  Rng net_rng(derive_seed(cfg_.seed, kNetStream));
  net_ = FeatureNet(sizes, net_rng);
  Rng head_rng(derive_seed(cfg_.seed, kSuperHeadStream));
  cls_.super = LinearHead::gaussian(cfg_.groups(), cfg_.feature_dim, kClassifierInitStd, head_rng);
}

Trainer::Trainer(const Dataset& data, TrainConfig cfg, FeatureNet warm_start)
    : Trainer(data, std::move(cfg)) {
  if (warm_start.input_dim() != inputs_.input_dim())
    throw ConfigError("warm start network expects " + std::to_string(warm_start.input_dim()) +
                      " inputs, dataset provides " + std::to_string(inputs_.input_dim()));
  if (warm_start.output_dim() != cfg_.feature_dim)
    throw ConfigError("warm start network has feature dimension " +
                      std::to_string(warm_start.output_dim()) + ", config expects " +
                      std::to_string(cfg_.feature_dim));
  net_ = std::move(warm_start);
}

const HierarchicalPartition& Trainer::partition() const {
  if (!part_) throw std::logic_error("Trainer: no partition yet; call reassign() first");
  return *part_;
}

HierarchicalPartition Trainer::compute_partition() const {
  auto whitening = whitening_;
  return compute_partition(whitening);
}

HierarchicalPartition Trainer::compute_partition(std::optional<WhiteningTransform>& whitening) const {
  const Matrix features = extract_all_features(net_, inputs_, cfg_, &whitening);
  HierarchicalOptions opts;
  opts.m = cfg_.m;
  opts.k = cfg_.k;
  opts.kmeans.max_iters = cfg_.kmeans_iters;
  opts.kmeans.tolerance = cfg_.kmeans_tolerance;
  opts.kmeans.seed = derive_seed(derive_seed(cfg_.seed, kClusterStream), reassign_count_);
  opts.num_shards = cfg_.kmeans_shards;
  HierarchicalPartition next = hierarchical_fit(features, opts);
  // V is kept, so keep each coarse cluster's super-class ids where possible.
  if (part_) align_coarse_labels(next, *part_);
  return next;
}

const HierarchicalPartition& Trainer::reassign() {
  HierarchicalPartition next = compute_partition(whitening_);

  prev_ = std::move(part_);
  part_ = std::move(next);
  groups_ = build_groups(*part_);

  Rng rng(derive_seed(derive_seed(cfg_.seed, kSubHeadStream), reassign_count_));
  cls_.sub.clear();
  for (std::size_t s = 0; s < cfg_.groups(); ++s)
    cls_.sub.push_back(LinearHead::gaussian(cfg_.k, cfg_.feature_dim, kClassifierInitStd, rng));
  group_opts_.assign(cfg_.groups(), SgdOptimizer(cfg_.sgd));
  shared_opt_.reset("W");
  ++reassign_count_;
  return *part_;
}

std::size_t Trainer::steps_per_epoch() const noexcept {
  // One epoch visits as many (image, rotation) items as there are.
  return std::max<std::size_t>(1, RotationLabel::kCount * inputs_.num_images() / cfg_.sgd.batch_size);
}

std::vector<BatchItem> Trainer::draw_batch(std::size_t step) const {
  const std::size_t groups = groups_.size();
  const std::size_t batch = cfg_.sgd.batch_size;
  // Round-robin slots so groups share the batch evenly over consecutive steps.
  std::vector<std::size_t> per_group(groups, 0);
  for (std::size_t j = 0; j < batch; ++j) ++per_group[(step * batch + j) % groups];

  const Rng step_rng(derive_seed(derive_seed(derive_seed(cfg_.seed, kBatchStream), epoch_), step));
  std::vector<BatchItem> items;
  items.reserve(batch);
  for (const auto& g : groups_) {
    if (g.sampler.empty()) continue;
    Rng rng = step_rng.split(g.id);
    for (std::size_t i = 0; i < per_group[g.id]; ++i) {
      BatchItem item;
      item.image = g.sampler.draw(rng);
      item.group = g.id;
      item.rotation = g.rotation;
      item.target = {g.id, part_->sub[item.image]};
      item.mask_seed = rng.next_u64();
      items.push_back(item);
    }
  }
  return items;
}

Matrix Trainer::gather_inputs(std::span<const BatchItem> items) const {
  Matrix x(items.size(), inputs_.input_dim());
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto src = inputs_.by_rotation[items[i].rotation.index()].row(items[i].image);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  return x;
}

void Trainer::step_grouped(std::span<const BatchItem> items, EpochStats& stats) {
  const double total = static_cast<double>(items.size());
  std::vector<LinearHead> net_grad = net_.zero_grads();
  LinearHead super_grad(cls_.super.out_dim(), cls_.super.in_dim());
  std::vector<std::optional<LinearHead>> sub_grads(groups_.size());

  // Items arrive sorted by group; each group sees only its own slice.
  std::size_t begin = 0;
  while (begin < items.size()) {
    const std::size_t g = items[begin].group;
    std::size_t end = begin;
    while (end < items.size() && items[end].group == g) ++end;
    const auto slice = items.subspan(begin, end - begin);

    std::vector<std::uint64_t> seeds;
    std::vector<HierTarget> targets;
    for (const auto& it : slice) {
      seeds.push_back(it.mask_seed);
      targets.push_back(it.target);
    }
    FeatureNet::Trace trace;
    const Matrix feats = net_.forward_train(gather_inputs(slice), seeds, cfg_.sgd.dropout_rate, trace);
    HierLossResult loss = hierarchical_loss(cls_, feats, targets, total);
    const auto g_net = net_.backward(trace, loss.d_features);

    for (std::size_t l = 0; l < net_grad.size(); ++l) accumulate(net_grad[l], g_net[l]);
    accumulate(super_grad, loss.d_super);
    sub_grads[g] = std::move(loss.d_sub.at(g));
    stats.group_loss_sum[g] += loss.loss_sum;
    stats.group_items[g] += slice.size();
    begin = end;
  }

  std::vector<ParamRef> shared;
  append_param_refs(shared, net_, net_grad);
  append_param_refs(shared, "V", cls_.super, super_grad);
  shared_opt_.step(shared);

  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const LinearHead zero(cls_.sub[g].out_dim(), cls_.sub[g].in_dim());
    std::vector<ParamRef> local;
    append_param_refs(local, sub_prefix(g), cls_.sub[g], sub_grads[g] ? *sub_grads[g] : zero);
    group_opts_[g].step(local);
  }
}

void Trainer::step_reference(std::span<const BatchItem> items, EpochStats& stats) {
  std::vector<std::uint64_t> seeds;
  std::vector<HierTarget> targets;
  for (const auto& it : items) {
    seeds.push_back(it.mask_seed);
    targets.push_back(it.target);
  }
  FeatureNet::Trace trace;
  const Matrix feats = net_.forward_train(gather_inputs(items), seeds, cfg_.sgd.dropout_rate, trace);
  const HierLossResult loss = hierarchical_loss(cls_, feats, targets);
  const auto g_net = net_.backward(trace, loss.d_features);

  // Per-group loss bookkeeping needs the per-row split; recompute it cheaply.
  for (const auto& it : items) ++stats.group_items[it.group];
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].group == g) rows.push_back(i);
    if (rows.empty()) continue;
    std::vector<HierTarget> t;
    for (auto r : rows) t.push_back(targets[r]);
    stats.group_loss_sum[g] += hierarchical_loss(cls_, select_rows(feats, rows), t).loss_sum;
  }

  std::vector<ParamRef> all;
  append_param_refs(all, net_, g_net);
  append_param_refs(all, "V", cls_.super, loss.d_super);
  std::vector<LinearHead> zeros;
  zeros.reserve(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g)
    zeros.emplace_back(cls_.sub[g].out_dim(), cls_.sub[g].in_dim());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    auto it = loss.d_sub.find(g);
    append_param_refs(all, sub_prefix(g), cls_.sub[g], it != loss.d_sub.end() ? it->second : zeros[g]);
  }
  shared_opt_.step(all);
}

EpochStats Trainer::run_epoch_impl(bool reference) {
  if (!part_) throw std::logic_error("Trainer: run_epoch before the first reassignment");
  EpochStats stats;
  stats.epoch = epoch_;
  stats.group_loss_sum.assign(groups_.size(), 0.0);
  stats.group_items.assign(groups_.size(), 0);
  for (std::size_t step = 0; step < steps_per_epoch(); ++step) {
    const auto items = draw_batch(step);
    if (items.empty()) continue;
    if (reference)
      step_reference(items, stats);
    else
      step_grouped(items, stats);
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    sum += stats.group_loss_sum[g];
    count += stats.group_items[g];
  }
  stats.mean_loss = count == 0 ? 0.0 : sum / static_cast<double>(count);
  if (!std::isfinite(stats.mean_loss))
    throw NumericalError("non-finite loss at epoch " + std::to_string(epoch_));
  ++epoch_;
  return stats;
}

EpochStats Trainer::run_epoch() { return run_epoch_impl(false); }
EpochStats Trainer::run_epoch_reference() { return run_epoch_impl(true); }

MetricsRow Trainer::metrics_row(const EpochStats& stats, bool reassigned) const {
  const auto& part = partition();
  const Partition fine(part.fine_labels(), part.total_sub_clusters());
  MetricsRow row;
  row.epoch = stats.epoch;
  row.mean_loss = stats.mean_loss;
  row.balance_entropy = balance_entropy(fine);
  if (reassigned && prev_)
    row.nmi_prev = nmi(Partition(prev_->fine_labels(), prev_->total_sub_clusters()), fine);
  if (truth_) row.nmi_truth = nmi(fine, Partition::from_labels(*truth_));
  return row;
}

std::vector<MetricsRow> Trainer::train() {
  std::vector<MetricsRow> rows;
  if (!part_) reassign();
  const std::size_t end = epoch_ + cfg_.epochs;
  while (epoch_ < end) {
    bool reassigned = false;
    if (epoch_ > 0 && epoch_ % cfg_.reassign_period == 0) {
      reassign();
      reassigned = true;
    }
    const EpochStats stats = run_epoch();
    rows.push_back(metrics_row(stats, reassigned));
  }
  return rows;
}

double rotation_accuracy(const FeatureNet& net, const Classifiers& cls, std::size_t m,
                         const PretextInputs& inputs) {
  if (cls.num_super() != RotationLabel::kCount * m)
    throw std::invalid_argument("rotation_accuracy: classifier has " +
                                std::to_string(cls.num_super()) + " super-classes, expected 4m");
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t r = 0; r < RotationLabel::kCount; ++r) {
    const Matrix logits = cls.super.apply(net.forward(inputs.by_rotation[r]));
    for (std::size_t n = 0; n < logits.rows(); ++n) {
      const auto p = softmax(logits.row(n));
      std::size_t best = 0;
      double best_p = -1.0;
      for (std::size_t rr = 0; rr < RotationLabel::kCount; ++rr) {
        double pr = 0.0;
        for (std::size_t c = 0; c < m; ++c) pr += p[rr * m + c];
        if (pr > best_p) {
          best_p = pr;
          best = rr;
        }
      }
      correct += best == r;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace dc
