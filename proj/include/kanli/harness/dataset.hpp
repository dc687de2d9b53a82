// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "kanli/harness/task.hpp"
#include "kanli/kb/lexicon.hpp"
#include "kanli/model/encoder.hpp"

namespace kanli::harness {

/// Token ids: [PAD]=0, [UNK]=1, [CLS]=2, [SEP]=3, then words in sorted order.
class Vocabulary {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kUnkId = 1;

  Vocabulary();
  /// Every token that appears in the examples' sentences.
  static Vocabulary from_examples(const std::vector<NliExample>& examples);
  /// Inverse of tokens(); FormatError if the specials are not in place.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_[id]; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct EncodedExample {
  model::EncoderInput input;
  std::size_t label = 0;
};

/// Tokenizes to length n, maps tokens through vocab and builds E from the
/// surface tokens, so out-of-vocabulary words still carry knowledge.
EncodedExample encode_example(const NliExample& example, const Vocabulary& vocab,
                              const kb::RelationLexicon& lexicon, std::size_t n);
std::vector<EncodedExample> encode_examples(const std::vector<NliExample>& examples,
                                            const Vocabulary& vocab,
                                            const kb::RelationLexicon& lexicon, std::size_t n);

}  // namespace kanli::harness
