#include "dc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dc/error.hpp"
#include "dc/io.hpp"
#include "dc/rng.hpp"

namespace dc {
namespace {

// Generator shape constants, as fractions of the image side.
constexpr double kBlobRegionLoX = 0.04;
constexpr double kBlobRegionSpanX = 0.3;
constexpr double kBlobRegionLoY = 0.0;
constexpr double kBlobRegionSpanY = 0.5;
constexpr double kRowMarkerX = 0.42;
constexpr double kRowMarkerAmp = 0.8;
constexpr double kBlobSigma = 0.06;
constexpr double kBlobJitter = 0.025;
constexpr double kDistractorLo = 0.1;
constexpr double kDistractorHi = 0.3;
constexpr double kBlobNoise = 0.06;

constexpr double kEdgeOffset = 0.2;
constexpr double kEdgeWidth = 0.06;
constexpr double kEdgeAngleJitterDeg = 3.0;
constexpr double kEdgeNoise = 0.03;

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

double bump(double px, double py, double x, double y, double two_sigma2) {
  return std::exp(-((px - x) * (px - x) + (py - y) * (py - y)) / two_sigma2);
}

Image make_blob(std::size_t cls, std::size_t classes, std::size_t side, Rng& rng) {
  const auto grid = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(classes))));
  const double s = static_cast<double>(side);
  const double cx =
      s * (kBlobRegionLoX + (static_cast<double>(cls % grid) + 0.5) / grid * kBlobRegionSpanX);
  const double cy =
      s * (kBlobRegionLoY + (static_cast<double>(cls / grid) + 0.5) / grid * kBlobRegionSpanY);
  // One jitter shifts the class bump and its row marker together.
  const double dx = rng.normal(0.0, kBlobJitter * s);
  const double dy = rng.normal(0.0, kBlobJitter * s);
  const double amp = rng.uniform(0.8, 1.0);
  const double qx = rng.uniform(0.0, s);
  const double qy = rng.uniform(0.0, s);
  const double qamp = rng.uniform(kDistractorLo, kDistractorHi);
  const double two_sigma2 = 2.0 * std::pow(kBlobSigma * s, 2);

  Image img(1, side, side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      const double py = static_cast<double>(y) + 0.5;
      const double v = amp * bump(px, py, cx + dx, cy + dy, two_sigma2) +
                       kRowMarkerAmp * bump(px, py, s * kRowMarkerX + dx, cy + dy, two_sigma2) +
                       qamp * bump(px, py, qx, qy, two_sigma2);
      img.at(0, y, x) = clamp01(v + rng.normal(0.0, kBlobNoise));
    }
  }
  return img;
}

Image make_edge(std::size_t cls, std::size_t classes, std::size_t side, Rng& rng) {
  const double s = static_cast<double>(side);
  const double deg = (static_cast<double>(cls) + 0.5) * 90.0 / static_cast<double>(classes) +
                     rng.normal(0.0, kEdgeAngleJitterDeg);
  const double phi = deg * std::numbers::pi / 180.0;
  const double nx = std::cos(phi);
  const double ny = std::sin(phi);
  const double offset = rng.uniform(-kEdgeOffset, kEdgeOffset) * s;
  const double width = kEdgeWidth * s;

  Image img(1, side, side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double px = static_cast<double>(x) + 0.5 - s / 2;
      const double py = static_cast<double>(y) + 0.5 - s / 2;
      const double t = px * nx + py * ny - offset;
      img.at(0, y, x) = clamp01(0.5 + 0.45 * std::tanh(t / width) + rng.normal(0.0, kEdgeNoise));
    }
  }
  return img;
}

}  // namespace

std::size_t Dataset::num_truth_classes() const {
  if (!truth || truth->empty()) return 0;
  return *std::max_element(truth->begin(), truth->end()) + 1;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.images.reserve(indices.size());
  if (truth) out.truth.emplace();
  for (std::size_t i : indices) {
    if (i >= images.size()) throw std::out_of_range("Dataset::subset: index out of range");
    out.images.push_back(images[i]);
    if (truth) out.truth->push_back((*truth)[i]);
  }
  return out;
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "blobs") return SyntheticKind::kBlobs;
  if (name == "edges") return SyntheticKind::kEdges;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "' (expected blobs|edges)");
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes == 0) throw ConfigError("gen-data: classes must be positive");
  if (spec.n < spec.classes) throw ConfigError("gen-data: n must be at least classes");
  if (spec.side < 3) throw ConfigError("gen-data: image side must be at least 3");

  Rng rng(spec.seed);
  Dataset ds;
  ds.truth.emplace();
  ds.images.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t cls = i % spec.classes;
    ds.images.push_back(spec.kind == SyntheticKind::kBlobs
                            ? make_blob(cls, spec.classes, spec.side, rng)
                            : make_edge(cls, spec.classes, spec.side, rng));
    ds.truth->push_back(cls);
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& images,
                     const std::optional<std::filesystem::path>& truth_labels) {
  Dataset ds;
  ds.images = io::read_images(images);
  if (truth_labels) {
    ds.truth = io::read_labels(*truth_labels);
    if (ds.truth->size() != ds.images.size())
      throw DataError("truth labels '" + truth_labels->string() + "' have " +
                      std::to_string(ds.truth->size()) + " entries for " +
                      std::to_string(ds.images.size()) + " images");
  }
  return ds;
}

}  // namespace dc
