// SPDX-License-Identifier: Apache-2.0
#include "kanli/kb/triples.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <utility>

#include "kanli/errors.hpp"

namespace kanli::kb {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_multiword(const std::string& w) {
  return w.find_first_of(" _") != std::string::npos;
}

}  // namespace

ParseResult parse_triples(std::istream& in, Source source) {
  ParseResult result;
  std::string line;
  while (std::getline(in, line)) {
    ++result.lines_read;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(trim(std::string_view(line).substr(start, tab - start)));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      result.warnings.push_back(
          {result.lines_read, "expected 3 tab-separated fields, got " +
                                  std::to_string(fields.size())});
      continue;
    }
    if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      result.warnings.push_back({result.lines_read, "empty field"});
      continue;
    }
    result.triples.push_back(
        RelationTriple{lower(fields[0]), lower(fields[2]), fields[1], source});
  }
  return result;
}

ParseResult parse_triples(const std::string& path, Source source) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open triple file '" + path + "'");
  ParseResult result = parse_triples(in, source);
  if (in.bad()) throw IoError("failed reading '" + path + "'");
  return result;
}

std::optional<Relation> conceptnet_mapping(std::string_view relation) {
  if (relation.starts_with("/r/")) relation.remove_prefix(3);
  static constexpr std::array<std::pair<std::string_view, Relation>, 13> kTable = {{
      {"HasA", Relation::kHypernymy},
      {"InstanceOf", Relation::kHyponymy},
      {"Entails", Relation::kHyponymy},
      {"IsA", Relation::kHyponymy},
      {"MannerOf", Relation::kHyponymy},
      {"MadeOf", Relation::kHyponymy},
      {"PartOf", Relation::kHyponymy},
      {"DerivedFrom", Relation::kHyponymy},
      {"DistinctFrom", Relation::kCoHyponyms},
      {"Antonym", Relation::kAntonymy},
      {"FormOf", Relation::kSynonymy},
      {"SimilarTo", Relation::kSynonymy},
      {"Synonym", Relation::kSynonymy},
  }};
  for (const auto& [name, rel] : kTable) {
    if (name == relation) return rel;
  }
  return std::nullopt;
}

CondenseResult condense_conceptnet(const std::vector<RelationTriple>& triples) {
  CondenseResult result;
  for (const RelationTriple& t : triples) {
    if (t.source != Source::kConceptNet) {
      throw ContractError("condense_conceptnet given a non-ConceptNet triple (" +
                          t.head + ", " + t.relation + ", " + t.tail + ")");
    }
    const auto rel = conceptnet_mapping(t.relation);
    if (!rel) {
      ++result.dropped_unmapped;
      continue;
    }
    if (is_multiword(t.head) || is_multiword(t.tail)) {
      ++result.dropped_multiword;
      continue;
    }
    result.triples.push_back(
        RelationTriple{t.head, t.tail, std::string(relation_name(*rel)), t.source});
  }
  return result;
}

}  // namespace kanli::kb
