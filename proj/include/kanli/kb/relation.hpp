// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace kanli::kb {

/// Axis order of a relation vector. Fixed; serialized files depend on it.
enum class Relation : std::size_t {
  kSynonymy = 0,
  kAntonymy = 1,
  kHypernymy = 2,
  kHyponymy = 3,
  kCoHyponyms = 4,
};

inline constexpr std::size_t kRelationDim = 5;

/// Maximum hypernym path length that still yields a non-zero feature.
inline constexpr int kHypernymHorizon = 8;

/// Canonical lowercase name ("synonymy", "co-hyponyms", ...).
std::string_view relation_name(Relation r);
std::optional<Relation> relation_from_name(std::string_view name);

/// The relation that holds for (b, a) when `r` holds for (a, b).
Relation mirror(Relation r);
bool is_symmetric(Relation r);

/// Knowledge vector e_ij for one ordered word pair.
struct RelationVector {
  std::array<double, kRelationDim> values{};

  double operator[](Relation r) const { return values[static_cast<std::size_t>(r)]; }
  double& operator[](Relation r) { return values[static_cast<std::size_t>(r)]; }

  bool is_zero() const;
  /// Checks the value-domain invariants (binary axes, 1 - n/8 ladder).
  bool is_valid() const;

  friend bool operator==(const RelationVector&, const RelationVector&) = default;
};

enum class Source : unsigned char { kWordNet = 0, kConceptNet = 1 };

std::string_view source_name(Source s);

struct RelationTriple {
  std::string head;
  std::string tail;
  std::string relation;
  Source source = Source::kWordNet;

  friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
};

}  // namespace kanli::kb
