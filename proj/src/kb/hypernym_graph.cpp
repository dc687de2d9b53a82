// SPDX-License-Identifier: Apache-2.0
#include "kanli/kb/hypernym_graph.hpp"

#include <algorithm>
#include <deque>

#include "kanli/errors.hpp"

namespace kanli::kb {

HypernymGraph::WordId HypernymGraph::intern(std::string_view word) {
  auto it = ids_.find(std::string(word));
  if (it != ids_.end()) return it->second;
  const WordId id = static_cast<WordId>(words_.size());
  words_.emplace_back(word);
  ids_.emplace(words_.back(), id);
  up_.emplace_back();
  down_.emplace_back();
  synsets_.emplace_back();
  return id;
}

void HypernymGraph::insert_sorted(std::vector<std::uint32_t>& v, std::uint32_t x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

void HypernymGraph::add_hypernym(std::string_view word, std::string_view hypernym) {
  if (word == hypernym) return;
  const WordId child = intern(word);
  const WordId parent = intern(hypernym);
  insert_sorted(up_[child], parent);
  insert_sorted(down_[parent], child);
}

void HypernymGraph::add_synset_member(std::string_view word, std::string_view synset) {
  const WordId id = intern(word);
  auto [it, inserted] = synset_ids_.emplace(std::string(synset),
                                            static_cast<std::uint32_t>(synset_members_.size()));
  if (inserted) synset_members_.emplace_back();
  insert_sorted(synsets_[id], it->second);
  insert_sorted(synset_members_[it->second], id);
}

HypernymGraph HypernymGraph::from_wordnet(const std::vector<RelationTriple>& triples) {
  HypernymGraph graph;
  for (const RelationTriple& t : triples) {
    if (t.relation == "InSynset") {
      graph.add_synset_member(t.head, t.tail);
    } else if (t.relation == "Hypernym") {
      graph.add_hypernym(t.head, t.tail);
    } else if (t.relation == "Hyponym") {
      graph.add_hypernym(t.tail, t.head);
    }
  }
  return graph;
}

std::optional<HypernymGraph::WordId> HypernymGraph::find(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

bool HypernymGraph::share_synset(WordId a, WordId b) const {
  const auto& sa = synsets_[a];
  const auto& sb = synsets_[b];
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    if (sa[i] == sb[j]) return true;
    sa[i] < sb[j] ? ++i : ++j;
  }
  return false;
}

std::vector<std::pair<HypernymGraph::WordId, int>> HypernymGraph::ancestors(
    WordId id, int max_steps) const {
  std::vector<std::pair<WordId, int>> found;
  std::vector<int> dist(words_.size(), -1);
  dist[id] = 0;
  std::deque<WordId> frontier{id};
  while (!frontier.empty()) {
    const WordId cur = frontier.front();
    frontier.pop_front();
    if (dist[cur] == max_steps) continue;
    for (WordId next : up_[cur]) {
      if (dist[next] >= 0) continue;
      dist[next] = dist[cur] + 1;
      found.emplace_back(next, dist[next]);
      frontier.push_back(next);
    }
  }
  return found;
}

double hypernym_path_value(int n) {
  if (n < 1 || n >= kHypernymHorizon) return 0.0;
  return 1.0 - static_cast<double>(n) / kHypernymHorizon;
}

double hypernymy_feature(const HypernymGraph& graph, std::string_view a,
                         std::string_view b, int max_steps) {
  if (max_steps < 1) throw ContractError("hypernymy_feature needs max_steps >= 1");
  const auto ia = graph.find(a);
  const auto ib = graph.find(b);
  if (!ia || !ib || *ia == *ib) return 0.0;
  for (const auto& [id, n] : graph.ancestors(*ia, max_steps)) {
    if (id == *ib) return hypernym_path_value(n);
  }
  return 0.0;
}

int cohyponym_feature(const HypernymGraph& graph, std::string_view a, std::string_view b) {
  const auto ia = graph.find(a);
  const auto ib = graph.find(b);
  if (!ia || !ib || *ia == *ib) return 0;
  if (graph.share_synset(*ia, *ib)) return 0;
  const auto& ha = graph.hypernyms(*ia);
  const auto& hb = graph.hypernyms(*ib);
  std::size_t i = 0, j = 0;
  while (i < ha.size() && j < hb.size()) {
    if (ha[i] == hb[j]) return 1;
    ha[i] < hb[j] ? ++i : ++j;
  }
  return 0;
}

}  // namespace kanli::kb
