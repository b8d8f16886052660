#ifndef GVFSWITCH_TILE_CODER_HPP
#define GVFSWITCH_TILE_CODER_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gvfswitch/signal_pipeline.hpp"

namespace gvfswitch {

struct TilingGroup {
  std::vector<int> dims;           // StateVector indices
  std::vector<int> tiles_per_dim;  // one entry per dim, each >= 1
  int num_tilings = 1;
  bool wrap = false;               // coordinates taken modulo tiles_per_dim
};

struct TileCoderConfig {
  std::vector<TilingGroup> groups;
  int hash_bits = 20;
  std::uint64_t seed = 0x5eedULL;
};

/// Sparse binary features. Index 0 is the bias and is always active.
struct FeatureVector {
  std::vector<std::uint32_t> active;  // strictly increasing
  std::uint32_t num_features_total = 0;

  bool operator==(const FeatureVector&) const = default;
};

/// 1 + sum of num_tilings over groups: the collision-free active count.
int active_count(const TileCoderConfig& config);

/// The documented tile hash. Starting from h = mix64(seed ^ 0x9e3779b97f4a7c15),
/// each word w in (group, tiling, coord_0, ..., coord_{d-1}) is folded in as
/// h = mix64(h ^ w) (coordinates as two's-complement 64-bit words); the result
/// is 1 + (h mod 2^hash_bits).
std::uint32_t tile_hash(std::uint64_t seed, int hash_bits, int group, int tiling,
                        std::span<const std::int64_t> coords);

/// Hashed grid tile coder over a fixed state layout.
class TileCoder {
 public:
  /// Validates the configuration against the layout; throws ConfigError.
  TileCoder(TileCoderConfig config, std::shared_ptr<const StateLayout> layout);

  FeatureVector encode(const StateVector& state) const;
  FeatureVector encode(std::span<const double> values) const;

  /// Per-dim grid coordinates of one tiling, before hashing.
  std::vector<std::int64_t> coordinates(std::span<const double> values, int group, int tiling) const;

  const TileCoderConfig& config() const { return config_; }
  int active_count() const { return gvfswitch::active_count(config_); }
  std::uint32_t num_features() const { return (1u << config_.hash_bits) + 1u; }

 private:
  TileCoderConfig config_;
  std::shared_ptr<const StateLayout> layout_;
};

/// Named-dimension form used by the configuration file; resolved against a
/// layout with resolve().
struct TilingGroupSpec {
  std::vector<std::string> dims;
  std::vector<int> tiles_per_dim;
  int num_tilings = 1;
  bool wrap = false;
};

struct TileCoderSpec {
  std::vector<TilingGroupSpec> groups;
  int hash_bits = 20;
  std::uint64_t seed = 0x5eedULL;

  TileCoderConfig resolve(const StateLayout& layout) const;
};

/// Default grouping: the four joint positions jointly (8 tiles per dim, 8
/// tilings); the two control channels jointly (8x8, 8 tilings); each trace
/// dim alone (8 tiles, 4 tilings).
TileCoderSpec default_tile_spec(const StateLayout& layout);

}  // namespace gvfswitch

#endif
