#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dc/feature_net.hpp"
#include "dc/losses.hpp"
#include "dc/matrix.hpp"
#include "dc/sgd.hpp"

namespace dc {

// CKPT1: "CKPT1\0", version (u32 LE), block count (u64 LE), then per block a
// name (u32 LE length + bytes) and an FMAT1 payload. Momentum buffers are
// stored as "momentum/<block name>" rows.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::vector<std::pair<std::string, Matrix>> blocks;

  const Matrix* find(const std::string& name) const;
  const Matrix& at(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const FeatureNet& net, const Classifiers& cls,
                           const SgdOptimizer* optimizer = nullptr);

FeatureNet restore_net(const Checkpoint& ckpt);
// Empty classifiers when the checkpoint has none.
Classifiers restore_classifiers(const Checkpoint& ckpt);
void restore_momentum(const Checkpoint& ckpt, SgdOptimizer& optimizer);

}  // namespace dc
