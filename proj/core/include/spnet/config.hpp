#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spnet/attention.hpp"
#include "spnet/feature_propagation.hpp"

namespace spnet {

// Radii of one encoder level, all derived from v_l = 2^l v_0.
struct LevelConfig {
  std::size_t level = 0;
  double v = 0.0;             // kernel influence
  double query_radius = 0.0;  // R = 4 v
  double r2 = 0.0;            // 1.5 v
  double r3 = 0.0;            // 3 v
  double pds_radius = 0.0;    // 0.75 v
  std::size_t channels = 0;
};

// Throws ParameterError for v0 <= 0.
LevelConfig level_config(std::size_t level, double v0, std::size_t base_channels = 64);

enum class Sampler { pds, grid };
std::string_view to_string(Sampler s);
Sampler parse_sampler(std::string_view name);

struct NetworkSpec {
  std::size_t input_features = 7;  // RGB, normal, constant 1
  std::size_t num_classes = 3;
  std::size_t levels = 5;
  double v0 = 0.04;
  std::size_t base_channels = 64;   // C_l = base_channels * 2^l
  std::size_t encoder_blocks = 2;   // per level, the first of level l > 0 is strided
  std::size_t decoder_blocks = 1;
  std::size_t bottleneck_ratio = 4; // C_mid = C_out / ratio (rounded up to even)
  std::size_t num_shells = 3;
  std::size_t points_per_shell = 14;
  std::uint64_t layout_seed = 42;
  AttentionVariant attention = AttentionVariant::mlp3;
  std::size_t attention_hidden = 8;
  std::size_t fp_k = 3;
  FpWeighting fp_weighting = FpWeighting::inverse_square;
  Sampler sampler = Sampler::pds;
  std::uint64_t sampler_seed = 0;
  double leaky_slope = 0.1;
  double bn_momentum = 0.1;

  LevelConfig level(std::size_t l) const { return level_config(l, v0, base_channels); }
  std::size_t mid_channels(std::size_t out_channels) const;
  // Shell radii of level l (r_2, r_3, ... spread linearly up to 3 v when
  // more shells are configured).
  std::vector<double> shell_radii(std::size_t l) const;

  void validate() const;

  // `key = value` lines, stable key order.
  std::string to_text() const;
  static NetworkSpec from_text(std::string_view text);
  // Applies one key; returns false for an unknown key.
  bool set(std::string_view key, std::string_view value);
};

// Parses `key = value` lines with `#` comments into an ordered map. Throws
// InputError naming the line on malformed input.
std::map<std::string, std::string> parse_key_values(std::string_view text);

}  // namespace spnet
