// SPDX-License-Identifier: Apache-2.0
#include "kanli/model/encoder.hpp"

#include <cmath>

#include "kanli/errors.hpp"

namespace kanli::model {

namespace {

std::string head_prefix(std::size_t l, std::size_t h) {
  return Encoder::block_prefix(l) + ".head" + std::to_string(h);
}

}  // namespace

AttentionResult self_attention_head(const Var& X, const Var& wq, const Var& wk, const Var& wv,
                                    std::size_t valid_len, const Var* e_prime) {
  const Var Q = ops::matmul(X, wq);
  const Var K = ops::matmul(X, wk);
  const Var V = ops::matmul(X, wv);
  const double d_k = static_cast<double>(wq.shape()[1]);
  const Var scores = ops::scale(ops::matmul(Q, K, false, true), 1.0 / std::sqrt(d_k));
  AttentionResult r;
  r.A = ops::softmax_rows(scores, valid_len);
  r.A_used = e_prime ? m1_adjust(r.A, *e_prime) : r.A;
  r.H = ops::matmul(r.A_used, V);
  return r;
}

Var m1_adjust(const Var& A, const Var& e_prime) { return ops::scale_by_one_plus(A, e_prime); }

Var transform_knowledge(const Var& E) { return ops::avg_pool_last_axis(E); }

KnowledgeExtractor::KnowledgeExtractor(std::string prefix, ExtractorConfig cfg,
                                       std::size_t seq_len)
    : prefix_(std::move(prefix)), cfg_(std::move(cfg)), seq_len_(seq_len) {
  if (cfg_.pooled_extent(seq_len_) == 0) {
    throw ConfigError(prefix_ + ": pool stack exhausts the knowledge map");
  }
}

std::string KnowledgeExtractor::conv_weight(std::size_t i) const {
  return prefix_ + ".conv" + std::to_string(i) + ".w";
}

std::string KnowledgeExtractor::conv_bias(std::size_t i) const {
  return prefix_ + ".conv" + std::to_string(i) + ".b";
}

void KnowledgeExtractor::create_params(ParamStore& store) const {
  const std::size_t ch = cfg_.channels_per_layer;
  for (std::size_t i = 0; i < cfg_.kernel_sizes.size(); ++i) {
    const std::size_t k = cfg_.kernel_sizes[i];
    store.create(conv_weight(i), {k, k, kKnowledgeDim, ch}, Init::kGlorotUniform,
                 k * k * kKnowledgeDim, k * k * ch);
    store.create(conv_bias(i), {ch}, Init::kZeros);
  }
  store.create(proj_weight(), {cfg_.total_channels(), cfg_.projection_dim},
               Init::kGlorotUniform, cfg_.total_channels(), cfg_.projection_dim);
  store.create(proj_bias(), {cfg_.projection_dim}, Init::kZeros);
}

Var KnowledgeExtractor::conv_stage(const ParamStore& store, const Var& E) const {
  std::vector<Var> maps;
  for (std::size_t i = 0; i < cfg_.kernel_sizes.size(); ++i) {
    const Var c = ops::conv2d(E, store.get(conv_weight(i)), 1, kernels::Padding::kSame);
    maps.push_back(ops::add_channel_bias(c, store.get(conv_bias(i))));
  }
  return maps.size() == 1 ? maps.front() : ops::concat_last(maps);
}

Var KnowledgeExtractor::forward(const ParamStore& store, const Var& E) const {
  Var x = conv_stage(store, E);
  for (const PoolSpec& p : cfg_.pool_specs) x = ops::max_pool2d(x, p.size, p.stride);
  const std::size_t cells = x.shape()[0] * x.shape()[1];
  x = ops::reshape(x, {cells, x.shape()[2]});
  return ops::add_row_bias(ops::matmul(x, store.get(proj_weight())), store.get(proj_bias()));
}

Var m2_layer(const Var& H, const Var& C, const Var& ln_gain, const Var& ln_bias,
             std::size_t d_k) {
  const Var scores =
      ops::scale(ops::matmul(H, C, false, true), 1.0 / std::sqrt(static_cast<double>(d_k)));
  const Var P = ops::matmul(ops::softmax_rows(scores), C);
  return ops::layer_norm(ops::add(H, P), ln_gain, ln_bias, kLayerNormEps);
}

Var m3_global(const Var& h0, const Var& M, const Var& ln_gain, const Var& ln_bias,
              bool residual) {
  const double d = static_cast<double>(M.shape()[0]);
  const Var w = ops::softmax_rows(ops::scale(ops::matmul(h0, M), 1.0 / std::sqrt(d)));
  const Var attended = ops::matmul(w, M, false, true);
  if (!residual) return attended;
  return ops::layer_norm(ops::add(h0, attended), ln_gain, ln_bias, kLayerNormEps);
}

std::string Encoder::block_prefix(std::size_t l) { return "block" + std::to_string(l); }

Encoder::Encoder(EncoderConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), params_(seed) {
  cfg_.validate();
  const std::size_t d = cfg_.d_model, dk = cfg_.d_k(), ff = cfg_.ff_dim;
  params_.create("emb.tok", {cfg_.vocab_size, d}, Init::kGlorotUniform, d, d);
  params_.create("emb.pos", {cfg_.seq_len, d}, Init::kGlorotUniform, d, d);
  params_.create("emb.seg", {2, d}, Init::kGlorotUniform, d, d);
  m2_extractors_.resize(cfg_.num_layers);
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const std::string b = block_prefix(l);
    for (std::size_t h = 0; h < cfg_.num_heads; ++h) {
      for (const char* w : {".wq", ".wk", ".wv"}) {
        params_.create(head_prefix(l, h) + w, {d, dk}, Init::kGlorotUniform, d, dk);
      }
    }
    params_.create(b + ".attn.wo", {d, d}, Init::kGlorotUniform, d, d);
    params_.create(b + ".attn.bo", {d}, Init::kZeros);
    params_.create(b + ".ln1.g", {d}, Init::kOnes);
    params_.create(b + ".ln1.b", {d}, Init::kZeros);
    params_.create(b + ".ffn.w1", {d, ff}, Init::kGlorotUniform, d, ff);
    params_.create(b + ".ffn.b1", {ff}, Init::kZeros);
    params_.create(b + ".ffn.w2", {ff, d}, Init::kGlorotUniform, ff, d);
    params_.create(b + ".ffn.b2", {d}, Init::kZeros);
    params_.create(b + ".ln2.g", {d}, Init::kOnes);
    params_.create(b + ".ln2.b", {d}, Init::kZeros);
    if (cfg_.m2_enabled && cfg_.is_knowledge_block(l)) {
      m2_extractors_[l] = KnowledgeExtractor(b + ".m2.ext", cfg_.m2_extractor, cfg_.seq_len);
      m2_extractors_[l].create_params(params_);
      params_.create(b + ".m2.ln.g", {d}, Init::kOnes);
      params_.create(b + ".m2.ln.b", {d}, Init::kZeros);
    }
  }
  if (cfg_.m3_enabled) {
    m3_extractor_ = KnowledgeExtractor("m3.ext", cfg_.m3_extractor, cfg_.seq_len);
    m3_extractor_.create_params(params_);
    if (cfg_.m3_residual) {
      params_.create("m3.ln.g", {d}, Init::kOnes);
      params_.create("m3.ln.b", {d}, Init::kZeros);
    }
  }
  params_.create("cls.w", {d, kNumClasses}, Init::kGlorotUniform, d, kNumClasses);
  params_.create("cls.b", {kNumClasses}, Init::kZeros);
}

void Encoder::check_input(const EncoderInput& in) const {
  const std::size_t n = cfg_.seq_len;
  if (in.token_ids.size() != n || in.segment_ids.size() != n) {
    throw DimensionError("encoder input must have " + std::to_string(n) + " positions");
  }
  if (in.attention_len == 0 || in.attention_len > n) {
    throw ContractError("attention_len must lie in [1, seq_len]");
  }
  for (std::size_t id : in.token_ids) {
    if (id >= cfg_.vocab_size) throw ContractError("token id out of vocabulary range");
  }
  for (int s : in.segment_ids) {
    if (s != 0 && s != 1) throw ContractError("segment ids must be 0 or 1");
  }
  if (cfg_.any_knowledge() && in.E.shape() != Shape{n, n, kKnowledgeDim}) {
    throw DimensionError("knowledge matrix must be " + std::to_string(n) + "x" +
                         std::to_string(n) + "x5, got " + shape_to_string(in.E.shape()));
  }
}

Var Encoder::block(std::size_t l, const Var& X, std::size_t valid_len, const Var* e_prime,
                   const Var* knowledge) const {
  const std::string b = block_prefix(l);
  const ParamStore& p = params_;
  std::vector<Var> heads;
  for (std::size_t h = 0; h < cfg_.num_heads; ++h) {
    const std::string hp = head_prefix(l, h);
    heads.push_back(
        self_attention_head(X, p.get(hp + ".wq"), p.get(hp + ".wk"), p.get(hp + ".wv"),
                            valid_len, e_prime)
            .H);
  }
  const Var concat = heads.size() == 1 ? heads.front() : ops::concat_last(heads);
  const Var attn = ops::add_row_bias(ops::matmul(concat, p.get(b + ".attn.wo")),
                                     p.get(b + ".attn.bo"));
  Var x = ops::layer_norm(ops::add(X, attn), p.get(b + ".ln1.g"), p.get(b + ".ln1.b"),
                          kLayerNormEps);
  if (knowledge) {
    const Var C = m2_extractors_[l].forward(p, *knowledge);
    x = m2_layer(x, C, p.get(b + ".m2.ln.g"), p.get(b + ".m2.ln.b"), cfg_.d_k());
  }
  const Var hidden = ops::gelu(
      ops::add_row_bias(ops::matmul(x, p.get(b + ".ffn.w1")), p.get(b + ".ffn.b1")));
  const Var ffn = ops::add_row_bias(ops::matmul(hidden, p.get(b + ".ffn.w2")),
                                    p.get(b + ".ffn.b2"));
  return ops::layer_norm(ops::add(x, ffn), p.get(b + ".ln2.g"), p.get(b + ".ln2.b"),
                         kLayerNormEps);
}

ForwardTrace Encoder::trace(const EncoderInput& in) const {
  check_input(in);
  const ParamStore& p = params_;
  ForwardTrace t;
  std::vector<std::size_t> seg(in.segment_ids.begin(), in.segment_ids.end());
  std::vector<std::size_t> pos(cfg_.seq_len);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  t.embeddings = ops::add(ops::add(ops::gather_rows(p.get("emb.tok"), in.token_ids),
                                   ops::gather_rows(p.get("emb.pos"), pos)),
                          ops::gather_rows(p.get("emb.seg"), seg));

  Var E;
  Var e_prime;
  if (cfg_.any_knowledge()) E = constant(in.E);
  if (cfg_.m1_enabled) e_prime = transform_knowledge(E);

  Var x = t.embeddings;
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const bool kb = cfg_.is_knowledge_block(l);
    x = block(l, x, in.attention_len, kb && cfg_.m1_enabled ? &e_prime : nullptr,
              kb && cfg_.m2_enabled ? &E : nullptr);
    t.block_outputs.push_back(x);
  }
  t.h0 = ops::row(x, 0);
  t.h_final = t.h0;
  if (cfg_.m3_enabled) {
    const Var M = ops::transpose(m3_extractor_.forward(p, E));
    const Var g = cfg_.m3_residual ? p.get("m3.ln.g") : Var{};
    const Var bias = cfg_.m3_residual ? p.get("m3.ln.b") : Var{};
    t.h_final = m3_global(t.h0, M, g, bias, cfg_.m3_residual);
  }
  const Var z = ops::add_row_bias(ops::matmul(t.h_final, p.get("cls.w")), p.get("cls.b"));
  t.logits = ops::reshape(z, {kNumClasses});
  return t;
}

Var Encoder::forward(const EncoderInput& input) const { return trace(input).logits; }

Var Encoder::loss(const EncoderInput& input, std::size_t label) const {
  return ops::cross_entropy(forward(input), label);
}

std::size_t Encoder::predict(const EncoderInput& input) const {
  const Tensor z = forward(input).value();
  std::size_t best = 0;
  for (std::size_t c = 1; c < z.size(); ++c) {
    if (z[c] > z[best]) best = c;
  }
  return best;
}

}  // namespace kanli::model
