// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kanli/kb/lexicon.hpp"

namespace kanli::harness {

enum class Label : std::size_t { kEntailment = 0, kNeutral = 1, kContradiction = 2 };
inline constexpr std::size_t kNumLabels = 3;

std::string_view label_name(Label label);
std::optional<Label> label_from_name(std::string_view name);

struct NliExample {
  std::string premise;
  std::string hypothesis;
  Label label = Label::kNeutral;
  /// The substituted slot words; empty for examples read from plain TSV.
  std::string premise_word;
  std::string hypothesis_word;

  friend bool operator==(const NliExample&, const NliExample&) = default;
};

/// Single-word-substitution NLI over invented words. The words are split
/// into disjoint train and test pools; each pool gets its own categories
/// (one hypernym, several members) and antonym pairs.
struct SyntheticTaskSpec {
  std::size_t vocab_size = 300;
  /// Unordered related pairs (hypernym, co-hyponym, antonym) over both pools.
  std::size_t num_relation_pairs = 240;
  std::size_t category_size = 3;
  /// Share of words and relation pairs reserved for the test pool.
  double test_share = 0.3;
  std::size_t train_examples = 1500;
  std::size_t test_examples = 300;
  /// Frames with one "{}" slot; premise and hypothesis share the frame.
  std::vector<std::string> templates = {"the {} is here", "i see a {}", "there is a {}",
                                        "a {} is nearby", "we found the {}"};

  void validate() const;
  friend bool operator==(const SyntheticTaskSpec&, const SyntheticTaskSpec&) = default;
};

nlohmann::json to_json(const SyntheticTaskSpec& spec);
SyntheticTaskSpec task_spec_from_json(const nlohmann::json& j);

struct GeneratedTask {
  std::vector<NliExample> train;
  std::vector<NliExample> test;
  /// WordNet-style triples the lexicon was built from.
  std::vector<kb::RelationTriple> triples;
  kb::RelationLexicon lexicon;
  std::vector<std::string> train_words;
  std::vector<std::string> test_words;
};

/// Labels: antonym or co-hyponym -> contradiction; hypothesis word is the
/// premise word's hypernym -> entailment; unrelated -> neutral. Classes that
/// have pairs in a pool are balanced to within one example. Throws
/// ConfigError when the pools are too small.
GeneratedTask generate_task(const SyntheticTaskSpec& spec, std::uint64_t seed);

/// Brute-force scan: descriptions of every test slot word that occurs in a
/// training sentence, and of every related test pair missing from the
/// lexicon. Empty when the split is clean.
std::vector<std::string> find_split_violations(const GeneratedTask& task);

/// Keeps ceil(fraction * P) of the P unordered pairs, both directions
/// together, chosen uniformly by a seeded shuffle.
kb::RelationLexicon subsample_knowledge(const kb::RelationLexicon& lexicon, double fraction,
                                        std::uint64_t seed);

/// "premise\thypothesis\tlabel" lines with a header row.
void write_examples(std::ostream& out, const std::vector<NliExample>& examples);
std::vector<NliExample> read_examples(std::istream& in);
void save_examples(const std::string& path, const std::vector<NliExample>& examples);
std::vector<NliExample> load_examples(const std::string& path);

}  // namespace kanli::harness
