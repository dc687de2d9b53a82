// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kanli/kb/lexicon.hpp"
#include "kanli/tensor.hpp"

namespace kanli::matrix {

inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";

bool is_special(std::string_view token);

/// Lowercases, splits on whitespace, and emits each ASCII punctuation
/// character as its own token.
std::vector<std::string> word_tokenize(std::string_view text);

struct TokenizedPair {
  std::vector<std::string> tokens;
  std::vector<int> segment_ids;
  /// Number of non-padding positions (a prefix of the sequence).
  std::size_t attention_len = 0;

  std::size_t size() const { return tokens.size(); }
  /// True for premise/hypothesis tokens, false for markers and padding.
  bool is_word(std::size_t i) const;
};

/// [CLS] premise [SEP] hypothesis [SEP] [PAD]... of length exactly n.
/// Over-long input is trimmed one token at a time from the end of the
/// currently longer side (the hypothesis on ties). Segment 1 covers the
/// hypothesis and its closing [SEP]; everything else is segment 0.
/// Throws InputError for an empty side, ContractError for n < 5.
TokenizedPair tokenize_pair(std::string_view premise, std::string_view hypothesis,
                            std::size_t n);

/// n x n x 5. E[i,j,:] = lexicon(tok_i, tok_j) where i and j are words in
/// different segments; every other cell is zero.
Tensor build_E(const TokenizedPair& pair, const kb::RelationLexicon& lexicon);

/// KAT1 bytes; deserialize_E also checks the tensor is n x n x 5.
std::string serialize_E(const Tensor& E);
Tensor deserialize_E(const std::string& bytes);

/// u64 count, then that many KAT1 tensors.
void write_batch(std::ostream& out, const std::vector<Tensor>& matrices);
std::vector<Tensor> read_batch(std::istream& in);

}  // namespace kanli::matrix
