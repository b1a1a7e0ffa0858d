#include "dc/checkpoint.hpp"

#include <fstream>
#include <string>

#include "dc/error.hpp"
#include "dc/io.hpp"

namespace dc {
namespace {

constexpr std::string_view kMomentumPrefix = "momentum/";

Matrix as_row(std::span<const double> v) {
  return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
}

void add_head(Checkpoint& ckpt, const std::string& prefix, const LinearHead& h) {
  ckpt.blocks.emplace_back(prefix + ".weight", h.weight);
  ckpt.blocks.emplace_back(prefix + ".bias", as_row(h.bias));
}

std::optional<LinearHead> find_head(const Checkpoint& ckpt, const std::string& prefix) {
  const Matrix* w = ckpt.find(prefix + ".weight");
  if (!w) return std::nullopt;
  const Matrix& b = ckpt.at(prefix + ".bias");
  if (b.size() != w->rows())
    throw DataError("checkpoint: bias of '" + prefix + "' does not match its weight");
  LinearHead h;
  h.weight = *w;
  h.bias.assign(b.values().begin(), b.values().end());
  return h;
}

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : blocks)
    if (n == name) return &m;
  return nullptr;
}

const Matrix& Checkpoint::at(const std::string& name) const {
  if (const Matrix* m = find(name)) return *m;
  throw DataError("checkpoint: missing block '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  io::write_magic(out, "CKPT1");
  io::write_u32(out, Checkpoint::kVersion);
  io::write_u64(out, ckpt.blocks.size());
  for (const auto& [name, m] : ckpt.blocks) {
    io::write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_fmat(out, m);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  io::expect_magic(in, "CKPT1");
  const std::uint32_t version = io::read_u32(in);
  if (version != Checkpoint::kVersion)
    throw DataError("CKPT1: unsupported version " + std::to_string(version));
  const std::uint64_t count = io::read_u64(in);
  Checkpoint ckpt;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t len = io::read_u32(in);
    if (len > 4096) throw DataError("CKPT1: implausible block name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw DataError("unexpected end of file");
    ckpt.blocks.emplace_back(std::move(name), io::read_fmat(in));
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, ckpt);
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  try {
    return read_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(const FeatureNet& net, const Classifiers& cls,
                           const SgdOptimizer* optimizer) {
  Checkpoint ckpt;
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    add_head(ckpt, "net.layer" + std::to_string(l), net.layers()[l]);
  if (cls.super.out_dim() > 0) {
    add_head(ckpt, "V", cls.super);
    for (std::size_t s = 0; s < cls.sub.size(); ++s) add_head(ckpt, "W" + std::to_string(s), cls.sub[s]);
  }
  if (optimizer)
    for (const auto& [name, buf] : optimizer->buffers())
      ckpt.blocks.emplace_back(std::string(kMomentumPrefix) + name, as_row(buf));
  return ckpt;
}

FeatureNet restore_net(const Checkpoint& ckpt) {
  std::vector<LinearHead> layers;
  for (std::size_t l = 0;; ++l) {
    auto h = find_head(ckpt, "net.layer" + std::to_string(l));
    if (!h) break;
    layers.push_back(std::move(*h));
  }
  if (layers.empty()) throw DataError("checkpoint: no feature network layers");
  return FeatureNet(std::move(layers));
}

Classifiers restore_classifiers(const Checkpoint& ckpt) {
  Classifiers cls;
  auto v = find_head(ckpt, "V");
  if (!v) return cls;
  cls.super = std::move(*v);
  for (std::size_t s = 0; s < cls.super.out_dim(); ++s)
    cls.sub.push_back(find_head(ckpt, "W" + std::to_string(s)).value_or(LinearHead{}));
  return cls;
}

void restore_momentum(const Checkpoint& ckpt, SgdOptimizer& optimizer) {
  for (const auto& [name, m] : ckpt.blocks)
    if (name.starts_with(kMomentumPrefix))
      optimizer.set_buffer(name.substr(kMomentumPrefix.size()),
                           std::vector<double>(m.values().begin(), m.values().end()));
}

}  // namespace dc
