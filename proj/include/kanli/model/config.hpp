// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace kanli::model {

struct PoolSpec {
  std::size_t size = 2;
  std::size_t stride = 2;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

/// Parallel same-padded convolutions over E, concatenated on channels, then a
/// stack of max pools; each pooled cell becomes one feature row projected to
/// projection_dim.
struct ExtractorConfig {
  std::vector<std::size_t> kernel_sizes = {3, 5, 7, 9};
  std::size_t channels_per_layer = 16;
  std::vector<PoolSpec> pool_specs = {{2, 2}, {5, 3}};
  std::size_t projection_dim = 64;

  /// Spatial extent after the pool stack for an n x n input; 0 if a window
  /// no longer fits.
  std::size_t pooled_extent(std::size_t n) const;
  /// Number of feature rows produced for an n x n input.
  std::size_t num_features(std::size_t n) const { return pooled_extent(n) * pooled_extent(n); }
  std::size_t total_channels() const { return kernel_sizes.size() * channels_per_layer; }

  friend bool operator==(const ExtractorConfig&, const ExtractorConfig&) = default;
};

struct EncoderConfig {
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t d_model = 64;
  std::size_t ff_dim = 128;
  std::size_t seq_len = 32;
  std::size_t vocab_size = 64;
  /// Topmost blocks that receive M1/M2.
  std::size_t knowledge_top_layers = 2;
  bool m1_enabled = false;
  bool m2_enabled = false;
  bool m3_enabled = false;
  bool m3_residual = true;
  ExtractorConfig m2_extractor;
  ExtractorConfig m3_extractor = {{3, 5, 7}, 16, {{2, 2}, {5, 3}}, 64};

  std::size_t d_k() const { return d_model / num_heads; }
  bool any_knowledge() const { return m1_enabled || m2_enabled || m3_enabled; }
  /// True if block l (0 = bottom) is one of the knowledge blocks.
  bool is_knowledge_block(std::size_t l) const {
    return l + knowledge_top_layers >= num_layers;
  }

  /// Throws ConfigError on the first violated constraint.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::size_t kKnowledgeDim = 5;

nlohmann::json to_json(const ExtractorConfig& cfg);
nlohmann::json to_json(const EncoderConfig& cfg);
/// Missing keys keep their defaults (knowledge_top_layers defaults to half
/// of num_layers); unknown keys and wrong types are ConfigErrors. The result
/// is validated.
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
ExtractorConfig extractor_config_from_json(const nlohmann::json& j);

}  // namespace kanli::model
