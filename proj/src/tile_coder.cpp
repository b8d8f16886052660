#include "gvfswitch/tile_coder.hpp"

#include <algorithm>
#include <cmath>

#include "gvfswitch/random.hpp"

namespace gvfswitch {

int active_count(const TileCoderConfig& config) {
  int n = 1;
  for (const auto& g : config.groups) n += g.num_tilings;
  return n;
}

std::uint32_t tile_hash(std::uint64_t seed, int hash_bits, int group, int tiling,
                        std::span<const std::int64_t> coords) {
  std::uint64_t h = mix64(seed ^ 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ static_cast<std::uint64_t>(group));
  h = mix64(h ^ static_cast<std::uint64_t>(tiling));
  for (std::int64_t c : coords) h = mix64(h ^ static_cast<std::uint64_t>(c));
  const std::uint64_t mask = (std::uint64_t{1} << hash_bits) - 1;
  return static_cast<std::uint32_t>(1 + (h & mask));
}

TileCoder::TileCoder(TileCoderConfig config, std::shared_ptr<const StateLayout> layout)
    : config_(std::move(config)), layout_(std::move(layout)) {
  if (!layout_) throw ConfigError("tile coder needs a state layout");
  if (config_.hash_bits < 10 || config_.hash_bits > 26) throw ConfigError("hash_bits must lie in [10, 26]");
  const int ndims = static_cast<int>(layout_->size());
  for (std::size_t g = 0; g < config_.groups.size(); ++g) {
    const auto& grp = config_.groups[g];
    if (grp.num_tilings < 1) throw ConfigError("num_tilings must be >= 1 (group " + std::to_string(g) + ")");
    if (grp.dims.empty()) throw ConfigError("tiling group " + std::to_string(g) + " has no dims");
    if (grp.tiles_per_dim.size() != grp.dims.size()) {
      throw ConfigError("tiles_per_dim length mismatch in group " + std::to_string(g));
    }
    for (std::size_t d = 0; d < grp.dims.size(); ++d) {
      if (grp.dims[d] < 0 || grp.dims[d] >= ndims) {
        throw ConfigError("dim index " + std::to_string(grp.dims[d]) + " out of bounds in group " +
                          std::to_string(g));
      }
      if (grp.tiles_per_dim[d] < 1) throw ConfigError("tiles_per_dim must be >= 1");
    }
  }
}

std::vector<std::int64_t> TileCoder::coordinates(std::span<const double> values, int group, int tiling) const {
  const auto& grp = config_.groups.at(static_cast<std::size_t>(group));
  const double offset = static_cast<double>(tiling) / static_cast<double>(grp.num_tilings);
  std::vector<std::int64_t> coords(grp.dims.size());
  for (std::size_t d = 0; d < grp.dims.size(); ++d) {
    const auto& range = (*layout_)[static_cast<std::size_t>(grp.dims[d])];
    const double u = std::clamp((values[static_cast<std::size_t>(grp.dims[d])] - range.lo) / (range.hi - range.lo), 0.0, 1.0);
    const int tiles = grp.tiles_per_dim[d];
    auto c = static_cast<std::int64_t>(std::floor(tiles * u + offset));
    if (grp.wrap) c %= tiles;
    coords[d] = c;
  }
  return coords;
}

FeatureVector TileCoder::encode(const StateVector& state) const { return encode(std::span<const double>(state.values)); }

FeatureVector TileCoder::encode(std::span<const double> values) const {
  if (values.size() != layout_->size()) throw ConfigError("state length does not match tile coder layout");
  FeatureVector fv;
  fv.num_features_total = num_features();
  fv.active.reserve(static_cast<std::size_t>(active_count()));
  fv.active.push_back(0);
  for (std::size_t g = 0; g < config_.groups.size(); ++g) {
    for (int k = 0; k < config_.groups[g].num_tilings; ++k) {
      const auto coords = coordinates(values, static_cast<int>(g), k);
      fv.active.push_back(tile_hash(config_.seed, config_.hash_bits, static_cast<int>(g), k, coords));
    }
  }
  std::sort(fv.active.begin(), fv.active.end());
  fv.active.erase(std::unique(fv.active.begin(), fv.active.end()), fv.active.end());
  return fv;
}

TileCoderConfig TileCoderSpec::resolve(const StateLayout& layout) const {
  TileCoderConfig cfg;
  cfg.hash_bits = hash_bits;
  cfg.seed = seed;
  for (const auto& spec : groups) {
    TilingGroup g;
    for (const auto& name : spec.dims) g.dims.push_back(layout_index(layout, name));
    g.tiles_per_dim = spec.tiles_per_dim;
    g.num_tilings = spec.num_tilings;
    g.wrap = spec.wrap;
    cfg.groups.push_back(std::move(g));
  }
  return cfg;
}

TileCoderSpec default_tile_spec(const StateLayout& layout) {
  TileCoderSpec spec;
  TilingGroupSpec arm;
  for (int j = 0; j < kNumJoints; ++j) {
    arm.dims.push_back("joint_pos[" + std::to_string(j) + "]");
    arm.tiles_per_dim.push_back(8);
  }
  arm.num_tilings = 8;
  spec.groups.push_back(arm);
  spec.groups.push_back({{"ch_drive", "ch_switch"}, {8, 8}, 8, false});
  for (const auto& dim : layout) {
    if (dim.name.rfind("trace:", 0) == 0) spec.groups.push_back({{dim.name}, {8}, 4, false});
  }
  return spec;
}

}  // namespace gvfswitch
