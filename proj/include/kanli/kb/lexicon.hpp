// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kanli/kb/hypernym_graph.hpp"
#include "kanli/kb/relation.hpp"

namespace kanli::kb {

struct LexiconEntry {
  RelationVector vector;
  Source source = Source::kWordNet;

  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

/// Ordered word pair -> relation vector. Immutable once built; lookups are
/// safe from any number of threads.
class RelationLexicon {
 public:
  using Key = std::pair<std::string, std::string>;
  using Map = std::map<Key, LexiconEntry>;

  /// Zero vector when the pair is unknown.
  RelationVector lookup(const std::string& a, const std::string& b) const;
  const LexiconEntry* find(const std::string& a, const std::string& b) const;

  void insert(const std::string& a, const std::string& b, LexiconEntry entry);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Map& entries() const { return entries_; }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  friend bool operator==(const RelationLexicon&, const RelationLexicon&) = default;

 private:
  Map entries_;
};

struct BuildReport {
  std::size_t conceptnet_applied = 0;
  /// ConceptNet triples ignored because WordNet already covers the pair.
  std::size_t conceptnet_shadowed = 0;
  std::size_t wordnet_unknown_relations = 0;
};

/// WordNet vectors first (synsets and Synonym triples -> synonymy, Antonym
/// triples -> antonymy, graph walk -> hypernymy/hyponymy, shared immediate
/// hypernym -> co-hyponyms, plus explicit CoHyponym triples). A condensed
/// ConceptNet triple then fills a pair only if its WordNet vector is zero.
/// Every relation is stored for both orders (hypernymy mirrored as hyponymy).
RelationLexicon build_lexicon(const std::vector<RelationTriple>& wordnet_triples,
                              const std::vector<RelationTriple>& conceptnet_triples,
                              const HypernymGraph& graph, BuildReport* report = nullptr);

/// Value a condensed ConceptNet edge contributes on its axis: 1 for the
/// binary relations, the one-step ladder value for hypernymy/hyponymy.
double conceptnet_value(Relation r);

/// Number of ordered pairs with a non-zero axis, split by source.
struct LexiconStats {
  std::array<std::array<std::size_t, 2>, kRelationDim> counts{};

  std::size_t count(Relation r, Source s) const {
    return counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
  }
  friend bool operator==(const LexiconStats&, const LexiconStats&) = default;
};

LexiconStats stats(const RelationLexicon& lexicon);
/// "relation\twordnet\tconceptnet" header, then rows in the order
/// hypernymy, hyponymy, co-hyponyms, antonymy, synonymy.
std::string stats_tsv(const LexiconStats& stats);

/// "KAL1", u64 pair count, then per entry: u32-length-prefixed head and tail,
/// 5 x f32. A trailing "SRC1" block holds one source byte per entry.
void write_lexicon(std::ostream& out, const RelationLexicon& lexicon);
RelationLexicon read_lexicon(std::istream& in);
void save_lexicon(const std::string& path, const RelationLexicon& lexicon);
RelationLexicon load_lexicon(const std::string& path);

}  // namespace kanli::kb
