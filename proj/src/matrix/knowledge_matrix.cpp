// SPDX-License-Identifier: Apache-2.0
#include "kanli/matrix/knowledge_matrix.hpp"

#include <cctype>
#include <istream>
#include <sstream>

#include "kanli/binary_io.hpp"
#include "kanli/errors.hpp"

namespace kanli::matrix {

namespace {

void check_E_shape(const Tensor& E) {
  if (E.rank() != 3 || E.dim(0) != E.dim(1) || E.dim(2) != kb::kRelationDim) {
    throw FormatError("knowledge matrix must be n x n x 5, got " + shape_to_string(E.shape()));
  }
}

}  // namespace

bool is_special(std::string_view token) {
  return token == kCls || token == kSep || token == kPad;
}

bool TokenizedPair::is_word(std::size_t i) const {
  return i < attention_len && !is_special(tokens[i]);
}

std::vector<std::string> word_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return out;
}

TokenizedPair tokenize_pair(std::string_view premise, std::string_view hypothesis,
                            std::size_t n) {
  if (n < 5) throw ContractError("sequence length must be >= 5, got " + std::to_string(n));
  std::vector<std::string> p = word_tokenize(premise);
  std::vector<std::string> h = word_tokenize(hypothesis);
  if (p.empty()) throw InputError("empty premise");
  if (h.empty()) throw InputError("empty hypothesis");
  while (p.size() + h.size() + 3 > n) {
    (p.size() > h.size() ? p : h).pop_back();
  }

  TokenizedPair out;
  out.tokens.reserve(n);
  out.tokens.emplace_back(kCls);
  out.tokens.insert(out.tokens.end(), p.begin(), p.end());
  out.tokens.emplace_back(kSep);
  out.segment_ids.assign(out.tokens.size(), 0);
  out.tokens.insert(out.tokens.end(), h.begin(), h.end());
  out.tokens.emplace_back(kSep);
  out.segment_ids.resize(out.tokens.size(), 1);
  out.attention_len = out.tokens.size();
  out.tokens.resize(n, std::string(kPad));
  out.segment_ids.resize(n, 0);
  return out;
}

Tensor build_E(const TokenizedPair& pair, const kb::RelationLexicon& lexicon) {
  const std::size_t n = pair.size();
  Tensor E({n, n, kb::kRelationDim});
  for (std::size_t i = 0; i < n; ++i) {
    if (!pair.is_word(i)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!pair.is_word(j) || pair.segment_ids[i] == pair.segment_ids[j]) continue;
      const auto* entry = lexicon.find(pair.tokens[i], pair.tokens[j]);
      if (!entry) continue;
      for (std::size_t r = 0; r < kb::kRelationDim; ++r) {
        E.at(i, j, r) = entry->vector.values[r];
      }
    }
  }
  return E;
}

std::string serialize_E(const Tensor& E) {
  check_E_shape(E);
  return serialize_tensor(E);
}

Tensor deserialize_E(const std::string& bytes) {
  Tensor E = deserialize_tensor(bytes);
  check_E_shape(E);
  return E;
}

void write_batch(std::ostream& out, const std::vector<Tensor>& matrices) {
  io::write_u64(out, matrices.size());
  for (const Tensor& E : matrices) {
    check_E_shape(E);
    write_tensor(out, E);
  }
}

std::vector<Tensor> read_batch(std::istream& in) {
  const std::uint64_t count = io::read_u64(in);
  std::vector<Tensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    out.push_back(read_tensor(in));
    check_E_shape(out.back());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after knowledge matrix batch");
  }
  return out;
}

}  // namespace kanli::matrix
