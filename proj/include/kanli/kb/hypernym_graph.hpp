// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kanli/kb/relation.hpp"

namespace kanli::kb {

/// Lemma-level hypernym edges plus synset membership, over interned words.
class HypernymGraph {
 public:
  using WordId = std::uint32_t;

  /// Adds word -> immediate hypernym. Self-loops are ignored.
  void add_hypernym(std::string_view word, std::string_view hypernym);
  void add_synset_member(std::string_view word, std::string_view synset);

  /// Builds from WordNet-style triples:
  ///   w  InSynset   s   (w belongs to synset s)
  ///   w  Hypernym   h   (h is an immediate hypernym of w)
  ///   w  Hyponym    h   (w is an immediate hypernym of h)
  /// Other relations are left to build_lexicon.
  static HypernymGraph from_wordnet(const std::vector<RelationTriple>& triples);

  std::optional<WordId> find(std::string_view word) const;
  const std::string& word(WordId id) const { return words_[id]; }
  std::size_t num_words() const { return words_.size(); }

  /// Immediate hypernyms / hyponyms (sorted ids).
  const std::vector<WordId>& hypernyms(WordId id) const { return up_[id]; }
  const std::vector<WordId>& hyponyms(WordId id) const { return down_[id]; }
  const std::vector<std::uint32_t>& synsets(WordId id) const { return synsets_[id]; }

  bool share_synset(WordId a, WordId b) const;

  /// Shortest upward distances from `id` to every ancestor within max_steps
  /// (breadth-first over immediate-hypernym edges). Excludes `id` itself.
  std::vector<std::pair<WordId, int>> ancestors(WordId id, int max_steps) const;

  /// Groups of words that list synset s, keyed by synset index.
  const std::vector<std::vector<WordId>>& synset_members() const { return synset_members_; }

 private:
  WordId intern(std::string_view word);
  static void insert_sorted(std::vector<std::uint32_t>& v, std::uint32_t x);

  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
  std::vector<std::vector<WordId>> up_;
  std::vector<std::vector<WordId>> down_;
  std::vector<std::vector<std::uint32_t>> synsets_;
  std::unordered_map<std::string, std::uint32_t> synset_ids_;
  std::vector<std::vector<WordId>> synset_members_;
};

/// 1 - n/8 where n is the shortest hypernym path from a up to b, if
/// n <= max_steps; otherwise (or if unreachable) 0.
double hypernymy_feature(const HypernymGraph& graph, std::string_view a,
                         std::string_view b, int max_steps = kHypernymHorizon);

/// 1 iff a and b share no synset but have a common immediate hypernym.
int cohyponym_feature(const HypernymGraph& graph, std::string_view a, std::string_view b);

/// The feature value for a path of length n (0 outside 1..7).
double hypernym_path_value(int n);

}  // namespace kanli::kb
