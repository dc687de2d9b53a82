// SPDX-License-Identifier: Apache-2.0
#include "kanli/harness/dataset.hpp"

#include <set>

#include "kanli/errors.hpp"
#include "kanli/matrix/knowledge_matrix.hpp"

namespace kanli::harness {

Vocabulary::Vocabulary() {
  for (std::string_view s : {matrix::kPad, matrix::kUnk, matrix::kCls, matrix::kSep}) {
    add(std::string(s));
  }
}

void Vocabulary::add(const std::string& token) {
  if (ids_.emplace(token, tokens_.size()).second) tokens_.push_back(token);
}

Vocabulary Vocabulary::from_examples(const std::vector<NliExample>& examples) {
  std::set<std::string> words;
  for (const NliExample& ex : examples) {
    for (const std::string* s : {&ex.premise, &ex.hypothesis}) {
      for (std::string& tok : matrix::word_tokenize(*s)) words.insert(std::move(tok));
    }
  }
  Vocabulary v;
  for (const std::string& w : words) v.add(w);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  if (tokens.size() < v.size() || !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin())) {
    throw FormatError("vocabulary must begin with [PAD] [UNK] [CLS] [SEP]");
  }
  for (const std::string& t : tokens) v.add(t);
  if (v.size() != tokens.size()) throw FormatError("vocabulary contains duplicate tokens");
  return v;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

EncodedExample encode_example(const NliExample& example, const Vocabulary& vocab,
                              const kb::RelationLexicon& lexicon, std::size_t n) {
  const matrix::TokenizedPair pair = matrix::tokenize_pair(example.premise, example.hypothesis, n);
  EncodedExample out;
  out.label = static_cast<std::size_t>(example.label);
  out.input.attention_len = pair.attention_len;
  out.input.segment_ids = pair.segment_ids;
  for (const std::string& tok : pair.tokens) out.input.token_ids.push_back(vocab.id(tok));
  out.input.E = matrix::build_E(pair, lexicon);
  return out;
}

std::vector<EncodedExample> encode_examples(const std::vector<NliExample>& examples,
                                            const Vocabulary& vocab,
                                            const kb::RelationLexicon& lexicon, std::size_t n) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const NliExample& ex : examples) out.push_back(encode_example(ex, vocab, lexicon, n));
  return out;
}

}  // namespace kanli::harness
