// SPDX-License-Identifier: Apache-2.0
#include "kanli/kb/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "kanli/binary_io.hpp"
#include "kanli/errors.hpp"

namespace kanli::kb {

namespace {

constexpr std::string_view kLexiconMagic = "KAL1";
constexpr std::string_view kSourceMagic = "SRC1";

using VectorMap = std::map<RelationLexicon::Key, RelationVector>;

void set_axis(VectorMap& map, const std::string& a, const std::string& b, Relation r,
              double value) {
  if (a == b || value == 0.0) return;
  double& slot = map[{a, b}][r];
  slot = std::max(slot, value);
}

// Sets r on (a, b) and its mirror on (b, a).
void set_pair(VectorMap& map, const std::string& a, const std::string& b, Relation r,
              double value) {
  set_axis(map, a, b, r, value);
  set_axis(map, b, a, mirror(r), value);
}

}  // namespace

RelationVector RelationLexicon::lookup(const std::string& a, const std::string& b) const {
  auto it = entries_.find({a, b});
  return it == entries_.end() ? RelationVector{} : it->second.vector;
}

const LexiconEntry* RelationLexicon::find(const std::string& a, const std::string& b) const {
  auto it = entries_.find({a, b});
  return it == entries_.end() ? nullptr : &it->second;
}

void RelationLexicon::insert(const std::string& a, const std::string& b, LexiconEntry entry) {
  entries_[{a, b}] = entry;
}

double conceptnet_value(Relation r) {
  if (r == Relation::kHypernymy || r == Relation::kHyponymy) return hypernym_path_value(1);
  return 1.0;
}

RelationLexicon build_lexicon(const std::vector<RelationTriple>& wordnet_triples,
                              const std::vector<RelationTriple>& conceptnet_triples,
                              const HypernymGraph& graph, BuildReport* report) {
  BuildReport local;
  VectorMap wordnet;

  for (const auto& members : graph.synset_members()) {
    for (auto a : members) {
      for (auto b : members) {
        set_axis(wordnet, graph.word(a), graph.word(b), Relation::kSynonymy, 1.0);
      }
    }
  }

  for (const RelationTriple& t : wordnet_triples) {
    if (t.relation == "Synonym") {
      set_pair(wordnet, t.head, t.tail, Relation::kSynonymy, 1.0);
    } else if (t.relation == "Antonym") {
      set_pair(wordnet, t.head, t.tail, Relation::kAntonymy, 1.0);
    } else if (t.relation == "CoHyponym") {
      set_pair(wordnet, t.head, t.tail, Relation::kCoHyponyms, 1.0);
    } else if (t.relation != "InSynset" && t.relation != "Hypernym" &&
               t.relation != "Hyponym") {
      ++local.wordnet_unknown_relations;
    }
  }

  for (HypernymGraph::WordId id = 0; id < graph.num_words(); ++id) {
    for (const auto& [ancestor, n] : graph.ancestors(id, kHypernymHorizon)) {
      set_pair(wordnet, graph.word(id), graph.word(ancestor), Relation::kHypernymy,
               hypernym_path_value(n));
    }
    // Co-hyponyms: children of the same immediate hypernym.
    const auto& children = graph.hyponyms(id);
    for (auto a : children) {
      for (auto b : children) {
        if (a != b && !graph.share_synset(a, b)) {
          set_axis(wordnet, graph.word(a), graph.word(b), Relation::kCoHyponyms, 1.0);
        }
      }
    }
  }

  VectorMap conceptnet;
  for (const RelationTriple& t : conceptnet_triples) {
    const auto rel = relation_from_name(t.relation);
    if (!rel) {
      throw ContractError("ConceptNet triple not condensed: relation '" + t.relation + "'");
    }
    if (t.head == t.tail) continue;
    auto wn = wordnet.find({t.head, t.tail});
    if (wn != wordnet.end() && !wn->second.is_zero()) {
      ++local.conceptnet_shadowed;
      continue;
    }
    set_pair(conceptnet, t.head, t.tail, *rel, conceptnet_value(*rel));
    ++local.conceptnet_applied;
  }

  RelationLexicon lexicon;
  for (const auto& [key, vec] : wordnet) {
    if (!vec.is_zero()) lexicon.insert(key.first, key.second, {vec, Source::kWordNet});
  }
  for (const auto& [key, vec] : conceptnet) {
    if (!lexicon.find(key.first, key.second)) {
      lexicon.insert(key.first, key.second, {vec, Source::kConceptNet});
    }
  }
  if (report) *report = local;
  return lexicon;
}

LexiconStats stats(const RelationLexicon& lexicon) {
  LexiconStats s;
  for (const auto& [_, entry] : lexicon) {
    for (std::size_t axis = 0; axis < kRelationDim; ++axis) {
      if (entry.vector.values[axis] != 0.0) {
        ++s.counts[axis][static_cast<std::size_t>(entry.source)];
      }
    }
  }
  return s;
}

std::string stats_tsv(const LexiconStats& s) {
  static constexpr std::array<Relation, kRelationDim> kRowOrder = {
      Relation::kHypernymy, Relation::kHyponymy, Relation::kCoHyponyms,
      Relation::kAntonymy, Relation::kSynonymy};
  std::string out = "relation\twordnet\tconceptnet\n";
  for (Relation r : kRowOrder) {
    out += std::string(relation_name(r)) + "\t" +
           std::to_string(s.count(r, Source::kWordNet)) + "\t" +
           std::to_string(s.count(r, Source::kConceptNet)) + "\n";
  }
  return out;
}

void write_lexicon(std::ostream& out, const RelationLexicon& lexicon) {
  io::write_magic(out, kLexiconMagic);
  io::write_u64(out, lexicon.size());
  for (const auto& [key, entry] : lexicon) {
    io::write_string(out, key.first);
    io::write_string(out, key.second);
    for (double v : entry.vector.values) io::write_f32(out, static_cast<float>(v));
  }
  io::write_magic(out, kSourceMagic);
  for (const auto& [_, entry] : lexicon) {
    out.put(static_cast<char>(entry.source));
  }
}

RelationLexicon read_lexicon(std::istream& in) {
  io::expect_magic(in, kLexiconMagic);
  const std::uint64_t count = io::read_u64(in);
  std::vector<std::pair<RelationLexicon::Key, RelationVector>> rows;
  for (std::uint64_t i = 0; i < count; ++i) {
    RelationLexicon::Key key{io::read_string(in), io::read_string(in)};
    RelationVector vec;
    for (double& v : vec.values) v = io::read_f32(in);
    rows.emplace_back(std::move(key), vec);
  }
  std::vector<Source> sources(rows.size(), Source::kWordNet);
  if (in.peek() != std::char_traits<char>::eof()) {
    io::expect_magic(in, kSourceMagic);
    for (auto& s : sources) {
      const int byte = in.get();
      if (byte != 0 && byte != 1) throw FormatError("bad source byte in lexicon");
      s = static_cast<Source>(byte);
    }
  }
  RelationLexicon lexicon;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    lexicon.insert(rows[i].first.first, rows[i].first.second, {rows[i].second, sources[i]});
  }
  return lexicon;
}

void save_lexicon(const std::string& path, const RelationLexicon& lexicon) {
  std::ostringstream out(std::ios::binary);
  write_lexicon(out, lexicon);
  io::write_file(path, out.str());
}

RelationLexicon load_lexicon(const std::string& path) {
  std::istringstream in(io::read_file(path), std::ios::binary);
  return read_lexicon(in);
}

}  // namespace kanli::kb
