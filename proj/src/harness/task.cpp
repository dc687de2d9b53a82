// SPDX-License-Identifier: Apache-2.0
#include "kanli/harness/task.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "kanli/binary_io.hpp"
#include "kanli/errors.hpp"
#include "kanli/matrix/knowledge_matrix.hpp"

namespace kanli::harness {

namespace {

using Pair = std::pair<std::string, std::string>;

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(rng, i)]);
}

std::vector<std::string> invent_words(std::size_t count, const std::set<std::string>& reserved,
                                      std::mt19937_64& rng) {
  static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  std::set<std::string> seen;
  std::vector<std::string> words;
  std::size_t attempts = 0;
  while (words.size() < count) {
    if (++attempts > 100 * count + 1000) {
      throw ConfigError("cannot invent " + std::to_string(count) + " distinct words");
    }
    std::string w;
    const std::size_t syllables = 2 + pick(rng, 2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kOnsets[pick(rng, kOnsets.size())];
      w += kVowels[pick(rng, kVowels.size())];
    }
    if (reserved.count(w) || !seen.insert(w).second) continue;
    words.push_back(w);
  }
  return words;
}

struct Pool {
  std::vector<std::string> words;
  std::vector<Pair> entailment;     // (word, its hypernym)
  std::vector<Pair> contradiction;  // unordered
};

void populate_pool(Pool& pool, std::size_t target_pairs, std::size_t category_size,
                   std::vector<kb::RelationTriple>& triples, const std::string& which) {
  const std::size_t cat_pairs = category_size + category_size * (category_size - 1) / 2;
  std::size_t next = 0, pairs = 0;
  auto take = [&] { return pool.words[next++]; };
  for (std::size_t round = 0; pairs < target_pairs; ++round) {
    const std::size_t left = pool.words.size() - next;
    const bool category = round % 4 == 0 && pairs + cat_pairs <= target_pairs &&
                          left >= category_size + 1;
    if (category) {
      const std::string hyper = take();
      std::vector<std::string> members;
      for (std::size_t i = 0; i < category_size; ++i) {
        members.push_back(take());
        triples.push_back({members.back(), hyper, "Hypernym", kb::Source::kWordNet});
        pool.entailment.emplace_back(members.back(), hyper);
      }
      for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
          pool.contradiction.emplace_back(members[i], members[j]);
        }
      }
      pairs += cat_pairs;
    } else if (left >= 2) {
      const std::string a = take(), b = take();
      triples.push_back({a, b, "Antonym", kb::Source::kWordNet});
      pool.contradiction.emplace_back(a, b);
      pairs += 1;
    } else {
      throw ConfigError(which + " pool has too few words for " + std::to_string(target_pairs) +
                        " relation pairs; raise vocab_size");
    }
  }
}

std::string fill(const std::string& frame, const std::string& word) {
  std::string out = frame;
  out.replace(out.find("{}"), 2, word);
  return out;
}

std::vector<NliExample> make_examples(const Pool& pool, std::size_t count,
                                      const std::vector<std::string>& templates,
                                      const kb::RelationLexicon& lexicon, std::mt19937_64& rng,
                                      const std::string& which) {
  std::vector<Label> classes = {Label::kNeutral};
  if (!pool.entailment.empty()) classes.push_back(Label::kEntailment);
  if (!pool.contradiction.empty()) classes.push_back(Label::kContradiction);
  std::sort(classes.begin(), classes.end());

  std::vector<NliExample> out;
  for (std::size_t i = 0; i < count; ++i) {
    NliExample ex;
    ex.label = classes[i % classes.size()];
    Pair pair;
    if (ex.label == Label::kEntailment) {
      pair = pool.entailment[pick(rng, pool.entailment.size())];
    } else if (ex.label == Label::kContradiction) {
      pair = pool.contradiction[pick(rng, pool.contradiction.size())];
      if (rng() & 1) std::swap(pair.first, pair.second);
    } else {
      if (pool.words.size() < 2) throw ConfigError(which + " pool needs at least two words");
      for (std::size_t tries = 0;; ++tries) {
        if (tries > 10000) throw ConfigError(which + " pool has no unrelated word pairs");
        pair = {pool.words[pick(rng, pool.words.size())], pool.words[pick(rng, pool.words.size())]};
        if (pair.first != pair.second && !lexicon.find(pair.first, pair.second) &&
            !lexicon.find(pair.second, pair.first)) {
          break;
        }
      }
    }
    const std::string& frame = templates[pick(rng, templates.size())];
    ex.premise = fill(frame, pair.first);
    ex.hypothesis = fill(frame, pair.second);
    ex.premise_word = pair.first;
    ex.hypothesis_word = pair.second;
    out.push_back(std::move(ex));
  }
  shuffle(out, rng);
  return out;
}

}  // namespace

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kEntailment: return "entailment";
    case Label::kNeutral: return "neutral";
    case Label::kContradiction: return "contradiction";
  }
  return "?";
}

std::optional<Label> label_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (label_name(static_cast<Label>(i)) == name) return static_cast<Label>(i);
  }
  return std::nullopt;
}

void SyntheticTaskSpec::validate() const {
  if (vocab_size < 4) throw ConfigError("task vocab_size must be >= 4");
  if (category_size == 0) throw ConfigError("category_size must be >= 1");
  if (!(test_share > 0.0 && test_share < 1.0)) throw ConfigError("test_share must lie in (0, 1)");
  if (train_examples == 0 || test_examples == 0) throw ConfigError("example counts must be >= 1");
  if (templates.empty()) throw ConfigError("at least one template is required");
  for (const std::string& t : templates) {
    const auto at = t.find("{}");
    if (at == std::string::npos || t.find("{}", at + 2) != std::string::npos) {
      throw ConfigError("template '" + t + "' must contain exactly one {} slot");
    }
  }
}

nlohmann::json to_json(const SyntheticTaskSpec& s) {
  return {{"vocab_size", s.vocab_size},         {"num_relation_pairs", s.num_relation_pairs},
          {"category_size", s.category_size},   {"test_share", s.test_share},
          {"train_examples", s.train_examples}, {"test_examples", s.test_examples},
          {"templates", s.templates}};
}

SyntheticTaskSpec task_spec_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {"vocab_size",     "num_relation_pairs",
                                              "category_size",  "test_share",
                                              "train_examples", "test_examples",
                                              "templates"};
  if (!j.is_object()) throw ConfigError("task spec must be a JSON object");
  SyntheticTaskSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (!kKeys.count(key)) throw ConfigError("unknown task key '" + key + "'");
    }
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.num_relation_pairs = j.value("num_relation_pairs", s.num_relation_pairs);
    s.category_size = j.value("category_size", s.category_size);
    s.test_share = j.value("test_share", s.test_share);
    s.train_examples = j.value("train_examples", s.train_examples);
    s.test_examples = j.value("test_examples", s.test_examples);
    s.templates = j.value("templates", s.templates);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("task spec: ") + e.what());
  }
  s.validate();
  return s;
}

GeneratedTask generate_task(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::set<std::string> reserved;
  for (const std::string& t : spec.templates) {
    for (const std::string& tok : matrix::word_tokenize(t)) reserved.insert(tok);
  }
  std::vector<std::string> words = invent_words(spec.vocab_size, reserved, rng);

  const auto test_words = static_cast<std::size_t>(std::llround(spec.vocab_size * spec.test_share));
  const auto test_pairs =
      static_cast<std::size_t>(std::llround(spec.num_relation_pairs * spec.test_share));
  Pool train, test;
  test.words.assign(words.begin(), words.begin() + static_cast<long>(test_words));
  train.words.assign(words.begin() + static_cast<long>(test_words), words.end());

  GeneratedTask task;
  populate_pool(train, spec.num_relation_pairs - test_pairs, spec.category_size, task.triples,
                "train");
  populate_pool(test, test_pairs, spec.category_size, task.triples, "test");
  task.lexicon = kb::build_lexicon(task.triples, {}, kb::HypernymGraph::from_wordnet(task.triples));
  task.train = make_examples(train, spec.train_examples, spec.templates, task.lexicon, rng, "train");
  task.test = make_examples(test, spec.test_examples, spec.templates, task.lexicon, rng, "test");
  task.train_words = train.words;
  task.test_words = test.words;
  return task;
}

std::vector<std::string> find_split_violations(const GeneratedTask& task) {
  std::vector<std::string> out;
  std::set<std::string> train_tokens;
  for (const NliExample& ex : task.train) {
    for (const std::string* s : {&ex.premise, &ex.hypothesis}) {
      for (const std::string& tok : matrix::word_tokenize(*s)) train_tokens.insert(tok);
    }
  }
  for (const std::string& w : task.test_words) {
    if (std::find(task.train_words.begin(), task.train_words.end(), w) != task.train_words.end()) {
      out.push_back("word '" + w + "' is in both pools");
    }
  }
  for (const NliExample& ex : task.test) {
    for (const std::string* w : {&ex.premise_word, &ex.hypothesis_word}) {
      if (train_tokens.count(*w)) out.push_back("test word '" + *w + "' occurs in training data");
    }
    const bool related = task.lexicon.find(ex.premise_word, ex.hypothesis_word) != nullptr;
    if (related != (ex.label != Label::kNeutral)) {
      out.push_back("test pair (" + ex.premise_word + ", " + ex.hypothesis_word +
                    ") disagrees with the lexicon");
    }
  }
  return out;
}

kb::RelationLexicon subsample_knowledge(const kb::RelationLexicon& lexicon, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ContractError("knowledge fraction must lie in [0, 1]");
  }
  std::set<Pair> unordered;
  for (const auto& [key, _] : lexicon) {
    unordered.insert(std::minmax(key.first, key.second));
  }
  std::vector<Pair> pairs(unordered.begin(), unordered.end());
  std::mt19937_64 rng(seed);
  shuffle(pairs, rng);
  const auto keep = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(pairs.size()) - 1e-9));
  const std::set<Pair> kept(pairs.begin(), pairs.begin() + static_cast<long>(keep));
  kb::RelationLexicon out;
  for (const auto& [key, entry] : lexicon) {
    if (kept.count(std::minmax(key.first, key.second))) out.insert(key.first, key.second, entry);
  }
  return out;
}

void write_examples(std::ostream& out, const std::vector<NliExample>& examples) {
  out << "premise\thypothesis\tlabel\n";
  for (const NliExample& ex : examples) {
    out << ex.premise << '\t' << ex.hypothesis << '\t' << label_name(ex.label) << '\n';
  }
}

std::vector<NliExample> read_examples(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "premise\thypothesis\tlabel") {
    throw FormatError("dataset must start with the header premise<TAB>hypothesis<TAB>label");
  }
  std::vector<NliExample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3) {
      throw FormatError("line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    const auto label = label_from_name(fields[2]);
    if (!label) throw FormatError("line " + std::to_string(lineno) + ": unknown label");
    out.push_back({fields[0], fields[1], *label, "", ""});
  }
  return out;
}

void save_examples(const std::string& path, const std::vector<NliExample>& examples) {
  std::ostringstream out;
  write_examples(out, examples);
  io::write_file(path, out.str());
}

std::vector<NliExample> load_examples(const std::string& path) {
  std::istringstream in(io::read_file(path));
  return read_examples(in);
}

}  // namespace kanli::harness
