// SPDX-License-Identifier: Apache-2.0
#include "kanli/model/config.hpp"

#include <set>

#include "kanli/errors.hpp"

namespace kanli::model {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown " + std::string(what) + " key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(std::string("'") + key + "' must be a boolean");
  } else {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
    }
  }
  out = v.get<T>();
}

void validate_extractor(const ExtractorConfig& e, std::size_t n, std::size_t d_model,
                        const std::string& which) {
  if (e.kernel_sizes.empty()) throw ConfigError(which + ": kernel_sizes is empty");
  for (std::size_t k : e.kernel_sizes) {
    if (k == 0 || k % 2 == 0) {
      throw ConfigError(which + ": kernel sizes must be odd, got " + std::to_string(k));
    }
  }
  if (e.channels_per_layer == 0) throw ConfigError(which + ": channels_per_layer must be >= 1");
  for (const PoolSpec& p : e.pool_specs) {
    if (p.size == 0 || p.stride == 0) {
      throw ConfigError(which + ": pool size and stride must be >= 1");
    }
  }
  if (e.pooled_extent(n) == 0) {
    throw ConfigError(which + ": pool stack exhausts a " + std::to_string(n) + "x" +
                      std::to_string(n) + " knowledge map");
  }
  if (e.projection_dim != d_model) {
    throw ConfigError(which + ": projection_dim " + std::to_string(e.projection_dim) +
                      " must equal d_model " + std::to_string(d_model));
  }
}

}  // namespace

std::size_t ExtractorConfig::pooled_extent(std::size_t n) const {
  std::size_t extent = n;
  for (const PoolSpec& p : pool_specs) {
    if (p.size == 0 || p.stride == 0 || p.size > extent) return 0;
    extent = (extent - p.size) / p.stride + 1;
  }
  return extent;
}

void EncoderConfig::validate() const {
  if (num_layers == 0) throw ConfigError("num_layers must be >= 1");
  if (num_heads == 0) throw ConfigError("num_heads must be >= 1");
  if (d_model == 0 || d_model % num_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " must be a positive multiple of " +
                      "num_heads " + std::to_string(num_heads));
  }
  if (ff_dim == 0) throw ConfigError("ff_dim must be >= 1");
  if (seq_len < 5) throw ConfigError("seq_len must be >= 5");
  if (vocab_size == 0) throw ConfigError("vocab_size must be >= 1");
  if (knowledge_top_layers > num_layers) {
    throw ConfigError("knowledge_top_layers exceeds num_layers");
  }
  if ((m1_enabled || m2_enabled) && knowledge_top_layers == 0) {
    throw ConfigError("M1/M2 enabled but knowledge_top_layers is 0");
  }
  if (m2_enabled) validate_extractor(m2_extractor, seq_len, d_model, "m2_extractor");
  if (m3_enabled) validate_extractor(m3_extractor, seq_len, d_model, "m3_extractor");
}

json to_json(const ExtractorConfig& cfg) {
  json pools = json::array();
  for (const PoolSpec& p : cfg.pool_specs) pools.push_back({p.size, p.stride});
  return {{"kernel_sizes", cfg.kernel_sizes},
          {"channels_per_layer", cfg.channels_per_layer},
          {"pool_specs", pools},
          {"projection_dim", cfg.projection_dim}};
}

json to_json(const EncoderConfig& cfg) {
  return {{"num_layers", cfg.num_layers},
          {"num_heads", cfg.num_heads},
          {"d_model", cfg.d_model},
          {"ff_dim", cfg.ff_dim},
          {"seq_len", cfg.seq_len},
          {"vocab_size", cfg.vocab_size},
          {"k", kKnowledgeDim},
          {"knowledge_top_layers", cfg.knowledge_top_layers},
          {"m1_enabled", cfg.m1_enabled},
          {"m2_enabled", cfg.m2_enabled},
          {"m3_enabled", cfg.m3_enabled},
          {"m3_residual", cfg.m3_residual},
          {"m2_extractor", to_json(cfg.m2_extractor)},
          {"m3_extractor", to_json(cfg.m3_extractor)}};
}

ExtractorConfig extractor_config_from_json(const json& j) {
  check_keys(j, {"kernel_sizes", "channels_per_layer", "pool_specs", "projection_dim"},
             "extractor");
  ExtractorConfig cfg;
  try {
    if (j.contains("kernel_sizes")) {
      cfg.kernel_sizes = j.at("kernel_sizes").get<std::vector<std::size_t>>();
    }
    if (j.contains("pool_specs")) {
      cfg.pool_specs.clear();
      for (const json& p : j.at("pool_specs")) {
        if (!p.is_array() || p.size() != 2) {
          throw ConfigError("pool_specs entries must be [size, stride]");
        }
        cfg.pool_specs.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>()});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("extractor config: ") + e.what());
  }
  read(j, "channels_per_layer", cfg.channels_per_layer);
  read(j, "projection_dim", cfg.projection_dim);
  return cfg;
}

EncoderConfig encoder_config_from_json(const json& j) {
  check_keys(j,
             {"num_layers", "num_heads", "d_model", "ff_dim", "seq_len", "vocab_size", "k",
              "knowledge_top_layers", "m1_enabled", "m2_enabled", "m3_enabled",
              "m3_residual", "m2_extractor", "m3_extractor"},
             "encoder");
  EncoderConfig cfg;
  read(j, "num_layers", cfg.num_layers);
  read(j, "num_heads", cfg.num_heads);
  read(j, "d_model", cfg.d_model);
  read(j, "ff_dim", cfg.ff_dim);
  read(j, "seq_len", cfg.seq_len);
  read(j, "vocab_size", cfg.vocab_size);
  std::size_t k = kKnowledgeDim;
  read(j, "k", k);
  if (k != kKnowledgeDim) throw ConfigError("k must be 5");
  cfg.knowledge_top_layers = cfg.num_layers / 2;
  read(j, "knowledge_top_layers", cfg.knowledge_top_layers);
  read(j, "m1_enabled", cfg.m1_enabled);
  read(j, "m2_enabled", cfg.m2_enabled);
  read(j, "m3_enabled", cfg.m3_enabled);
  read(j, "m3_residual", cfg.m3_residual);
  // Extractors project to d_model unless told otherwise.
  cfg.m2_extractor.projection_dim = cfg.d_model;
  cfg.m3_extractor.projection_dim = cfg.d_model;
  if (j.contains("m2_extractor")) {
    const json& e = j.at("m2_extractor");
    cfg.m2_extractor = extractor_config_from_json(e);
    if (!e.contains("projection_dim")) cfg.m2_extractor.projection_dim = cfg.d_model;
  }
  if (j.contains("m3_extractor")) {
    const json& e = j.at("m3_extractor");
    const ExtractorConfig defaults = cfg.m3_extractor;
    cfg.m3_extractor = extractor_config_from_json(e);
    if (!e.contains("kernel_sizes")) cfg.m3_extractor.kernel_sizes = defaults.kernel_sizes;
    if (!e.contains("projection_dim")) cfg.m3_extractor.projection_dim = cfg.d_model;
  }
  cfg.validate();
  return cfg;
}

}  // namespace kanli::model
