// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kanli/autograd.hpp"
#include "kanli/model/config.hpp"
#include "kanli/param_store.hpp"

namespace kanli::model {

// ---- building blocks -------------------------------------------------------

struct AttentionResult {
  Var H;  ///< [n x d_k]
  Var A;  ///< [n x n] softmax weights before any adjustment
  Var A_used;  ///< weights that produced H (A, or A' under M1)
};

/// One head: A = softmax(X Wq (X Wk)^T / sqrt(d_k)) with key columns at or
/// beyond valid_len masked out (0 = none masked). If e_prime is given, A is
/// replaced by m1_adjust(A, e_prime) before H = A V.
AttentionResult self_attention_head(const Var& X, const Var& wq, const Var& wk, const Var& wv,
                                    std::size_t valid_len, const Var* e_prime = nullptr);

/// A + A * E', cellwise. DimensionError if shapes differ.
Var m1_adjust(const Var& A, const Var& e_prime);

/// [n x n x 5] -> [n x n], mean over relations.
Var transform_knowledge(const Var& E);

/// Parameters of one CNN knowledge extractor live under `prefix`.
class KnowledgeExtractor {
 public:
  KnowledgeExtractor() = default;
  KnowledgeExtractor(std::string prefix, ExtractorConfig cfg, std::size_t seq_len);

  void create_params(ParamStore& store) const;
  /// Parallel convolutions with bias, concatenated: [n x n x channels].
  Var conv_stage(const ParamStore& store, const Var& E) const;
  /// C = project(flatten(pool(conv_stage(E)))): [m x projection_dim].
  Var forward(const ParamStore& store, const Var& E) const;

  std::size_t num_features() const { return cfg_.num_features(seq_len_); }
  const ExtractorConfig& config() const { return cfg_; }
  std::string conv_weight(std::size_t i) const;
  std::string conv_bias(std::size_t i) const;
  std::string proj_weight() const { return prefix_ + ".proj.w"; }
  std::string proj_bias() const { return prefix_ + ".proj.b"; }

 private:
  std::string prefix_;
  ExtractorConfig cfg_;
  std::size_t seq_len_ = 0;
};

/// Knowledge attention: P = softmax(H C^T / sqrt(d_k)) C, output LN(H + P).
Var m2_layer(const Var& H, const Var& C, const Var& ln_gain, const Var& ln_bias,
             std::size_t d_k);

/// h0 [1 x d], M [d x p'] (columns are features). w = softmax(M^T h0 /
/// sqrt(d)), attended = M w. Returns LN(h0 + attended) if residual, else
/// attended; both as [1 x d].
Var m3_global(const Var& h0, const Var& M, const Var& ln_gain, const Var& ln_bias,
              bool residual);

inline constexpr double kLayerNormEps = kernels::kDefaultLayerNormEps;

// ---- full model ------------------------------------------------------------

struct EncoderInput {
  std::vector<std::size_t> token_ids;
  std::vector<int> segment_ids;
  std::size_t attention_len = 0;
  Tensor E;  ///< [n x n x 5]
};

/// Intermediate values of one forward pass, for inspection in tests.
struct ForwardTrace {
  Var embeddings;
  std::vector<Var> block_outputs;
  Var h0;
  Var h_final;
  Var logits;
};

class Encoder {
 public:
  /// Validates cfg and initializes every parameter from seed.
  Encoder(EncoderConfig cfg, std::uint64_t seed);

  /// Logits [3].
  Var forward(const EncoderInput& input) const;
  ForwardTrace trace(const EncoderInput& input) const;
  /// Cross-entropy of forward(input) against label.
  Var loss(const EncoderInput& input, std::size_t label) const;
  std::size_t predict(const EncoderInput& input) const;

  const EncoderConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Name prefix of block l's parameters.
  static std::string block_prefix(std::size_t l);

 private:
  void check_input(const EncoderInput& input) const;
  Var block(std::size_t l, const Var& X, std::size_t valid_len, const Var* e_prime,
            const Var* knowledge) const;

  EncoderConfig cfg_;
  ParamStore params_;
  std::vector<KnowledgeExtractor> m2_extractors_;  // one per block; unused slots empty
  KnowledgeExtractor m3_extractor_;
};

}  // namespace kanli::model
