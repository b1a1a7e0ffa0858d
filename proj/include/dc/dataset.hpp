#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dc/image.hpp"

namespace dc {

struct Dataset {
  std::vector<Image> images;
  // Ground-truth classes; used by metrics only, never by training.
  std::optional<std::vector<std::size_t>> truth;

  std::size_t size() const noexcept { return images.size(); }
  std::size_t num_truth_classes() const;

  Dataset subset(std::span<const std::size_t> indices) const;
};

enum class SyntheticKind { kBlobs, kEdges };

SyntheticKind parse_synthetic_kind(std::string_view name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kBlobs;
  std::size_t n = 400;
  std::size_t classes = 4;
  std::size_t side = 16;  // images are side × side, one channel
  std::uint64_t seed = 0;
};

// Balanced labels (image i has class i % classes).
//
// Blobs: classes sit on a grid inside the top-left quadrant, so no class is
// a rotation of another. Each class has a Gaussian bump at its grid cell and a
// marker bump shared by its grid row, which gives the classes a two-level
// structure (rows, then columns). Images add a common positional jitter,
// amplitude jitter, a weaker distractor bump at a random location, and pixel
// noise.
//
// Edges: each class is a soft step edge whose gradient direction lies in its
// own slice of [0°, 90°), with random offset, angle jitter and pixel noise.
// Quarter-turn rotations move the gradient direction into a different
// quadrant, so the rotation is identifiable from the image.
Dataset make_synthetic(const SyntheticSpec& spec);

Dataset load_dataset(const std::filesystem::path& images,
                     const std::optional<std::filesystem::path>& truth_labels);

}  // namespace dc
