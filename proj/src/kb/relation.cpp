// SPDX-License-Identifier: Apache-2.0
#include "kanli/kb/relation.hpp"

#include <algorithm>
#include <cmath>

namespace kanli::kb {

namespace {
constexpr std::array<std::string_view, kRelationDim> kNames = {
    "synonymy", "antonymy", "hypernymy", "hyponymy", "co-hyponyms"};
}

std::string_view relation_name(Relation r) {
  return kNames[static_cast<std::size_t>(r)];
}

std::optional<Relation> relation_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Relation>(i);
  }
  return std::nullopt;
}

Relation mirror(Relation r) {
  switch (r) {
    case Relation::kHypernymy:
      return Relation::kHyponymy;
    case Relation::kHyponymy:
      return Relation::kHypernymy;
    default:
      return r;
  }
}

bool is_symmetric(Relation r) { return mirror(r) == r; }

bool RelationVector::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

bool RelationVector::is_valid() const {
  auto binary = [](double v) { return v == 0.0 || v == 1.0; };
  auto ladder = [](double v) {
    if (v == 0.0) return true;
    for (int n = 1; n <= kHypernymHorizon; ++n) {
      if (v == 1.0 - static_cast<double>(n) / kHypernymHorizon) return true;
    }
    return false;
  };
  return binary((*this)[Relation::kSynonymy]) && binary((*this)[Relation::kAntonymy]) &&
         binary((*this)[Relation::kCoHyponyms]) && ladder((*this)[Relation::kHypernymy]) &&
         ladder((*this)[Relation::kHyponymy]);
}

std::string_view source_name(Source s) {
  return s == Source::kWordNet ? "wordnet" : "conceptnet";
}

}  // namespace kanli::kb
