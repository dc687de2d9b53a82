// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "kanli/kb/relation.hpp"

namespace kanli::kb {

struct ParseWarning {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ParseResult {
  std::vector<RelationTriple> triples;
  std::vector<ParseWarning> warnings;
  std::size_t lines_read = 0;
};

/// Reads "head<TAB>relation<TAB>tail" lines. Words are trimmed and lowercased
/// (ASCII); the relation name is trimmed and kept verbatim. Blank lines and
/// lines starting with '#' are ignored; anything else that is not exactly
/// three non-empty fields is skipped with a warning.
ParseResult parse_triples(std::istream& in, Source source);
/// Throws IoError if the file cannot be read.
ParseResult parse_triples(const std::string& path, Source source);

struct CondenseResult {
  std::vector<RelationTriple> triples;  // relation holds a canonical name
  std::size_t dropped_unmapped = 0;
  std::size_t dropped_multiword = 0;
};

/// Maps ConceptNet relation names onto the five lexical relations:
///   HasA -> hypernymy
///   InstanceOf, Entails, IsA, MannerOf, MadeOf, PartOf, DerivedFrom -> hyponymy
///   DistinctFrom -> co-hyponyms
///   Antonym -> antonymy
///   FormOf, SimilarTo, Synonym -> synonymy
/// A leading "/r/" on the relation is accepted. Other relations and
/// multi-word concepts (containing ' ' or '_') are dropped and counted.
CondenseResult condense_conceptnet(const std::vector<RelationTriple>& triples);

/// ConceptNet relation name -> condensed relation, if listed.
std::optional<Relation> conceptnet_mapping(std::string_view relation);

}  // namespace kanli::kb
