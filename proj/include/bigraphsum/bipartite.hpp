#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bigraphsum/corpus.hpp"

namespace bigraphsum {

struct BipartiteEdge {
  int word = 0;  // word node position
  int sent = 0;  // sentence node position
  double weight = 1.0;
};

// Sentence-word graph for one document. Word nodes come first (sorted by
// vocab id), then sentence nodes (sorted by document sentence index).
// Sentences without any in-vocab token are left out so every node has at
// least one edge.
struct BipartiteGraph {
  std::string doc_id;
  std::vector<int> word_vocab_ids;
  std::vector<std::string> word_tokens;
  std::vector<int> sentence_indices;
  std::vector<BipartiteEdge> edges;  // sorted by (word, sent)

  // position lookups, filled by build_graph
  std::unordered_map<int, int> word_pos_by_vocab_id;
  std::unordered_map<int, int> sent_pos_by_index;

  // adjacency as (other-side position, edge id)
  std::vector<std::vector<std::pair<int, int>>> word_adj;
  std::vector<std::vector<std::pair<int, int>>> sent_adj;

  int n_words() const { return static_cast<int>(word_vocab_ids.size()); }
  int n_sentences() const { return static_cast<int>(sentence_indices.size()); }
  int n_nodes() const { return n_words() + n_sentences(); }

  // weighted degree (sum of incident edge weights)
  double word_degree(int w) const {
    double d = 0;
    for (auto [s, e] : word_adj[w]) d += edges[e].weight;
    return d;
  }
  double sent_degree(int s) const {
    double d = 0;
    for (auto [w, e] : sent_adj[s]) d += edges[e].weight;
    return d;
  }

  void rebuild_adjacency() {
    word_adj.assign(word_vocab_ids.size(), {});
    sent_adj.assign(sentence_indices.size(), {});
    for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
      word_adj[edges[e].word].push_back({edges[e].sent, e});
      sent_adj[edges[e].sent].push_back({edges[e].word, e});
    }
  }
};

using EdgeWeightMap = std::vector<double>;  // aligned with BipartiteGraph::edges

// Brandes edge betweenness on the unweighted topology. Accumulating the
// pair-dependency over every source counts each unordered pair twice, so the
// Σ_{s<t} σ_st(e)/σ_st definition scaled by 2/(N(N−1)) is the accumulated
// total divided by N(N−1).
inline EdgeWeightMap edge_betweenness(const BipartiteGraph& graph) {
  const int W = graph.n_words();
  const int N = graph.n_nodes();
  const int E = static_cast<int>(graph.edges.size());

  // node-space adjacency: words 0..W-1, sentences W..N-1
  std::vector<std::vector<std::pair<int, int>>> adj(N);
  for (int e = 0; e < E; ++e) {
    const int u = graph.edges[e].word;
    const int v = W + graph.edges[e].sent;
    adj[u].push_back({v, e});
    adj[v].push_back({u, e});
  }

  EdgeWeightMap score(E, 0.0);
  std::vector<int> dist(N), order;
  std::vector<double> sigma(N), delta(N);
  std::vector<std::vector<std::pair<int, int>>> pred(N);  // (node, edge id)
  order.reserve(N);

  for (int s = 0; s < N; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& p : pred) p.clear();
    order.clear();

    dist[s] = 0;
    sigma[s] = 1.0;
    std::vector<int> queue{s};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int v = queue[head];
      order.push_back(v);
      for (auto [u, e] : adj[v]) {
        if (dist[u] < 0) {
          dist[u] = dist[v] + 1;
          queue.push_back(u);
        }
        if (dist[u] == dist[v] + 1) {
          sigma[u] += sigma[v];
          pred[u].push_back({v, e});
        }
      }
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int w = *it;
      for (auto [v, e] : pred[w]) {
        const double c = sigma[v] / sigma[w] * (1.0 + delta[w]);
        score[e] += c;
        delta[v] += c;
      }
    }
  }

  if (N > 1) {
    const double norm = static_cast<double>(N) * (N - 1);
    for (double& x : score) x /= norm;
  }
  return score;
}

// Min-max map into (floor, 1]: w' = floor + (1−floor)(w − min)/(max − min).
// A degenerate all-equal map (single-sentence documents, stars) becomes 1
// everywhere, keeping the edge-present signal.
inline EdgeWeightMap normalize_weights(const EdgeWeightMap& raw, double floor = 1e-3) {
  EdgeWeightMap out(raw.size(), 1.0);
  if (raw.empty()) return out;
  const auto [mn_it, mx_it] = std::minmax_element(raw.begin(), raw.end());
  const double mn = *mn_it, mx = *mx_it;
  if (mx == mn) return out;
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = floor + (1.0 - floor) * (raw[i] - mn) / (mx - mn);
  return out;
}

// Build the document graph with betweenness-derived weights already applied.
inline BipartiteGraph build_graph(const Document& doc, const Vocab& vocab) {
  BipartiteGraph g;
  g.doc_id = doc.id;

  std::vector<int> vocab_ids;
  for (const Sentence& s : doc.sentences)
    for (const std::string& t : s.graph_tokens) {
      const int id = vocab.id_of(t);
      if (id >= 0) vocab_ids.push_back(id);
    }
  std::sort(vocab_ids.begin(), vocab_ids.end());
  vocab_ids.erase(std::unique(vocab_ids.begin(), vocab_ids.end()), vocab_ids.end());
  for (int id : vocab_ids) {
    g.word_pos_by_vocab_id.emplace(id, static_cast<int>(g.word_vocab_ids.size()));
    g.word_vocab_ids.push_back(id);
    g.word_tokens.push_back(vocab.tokens[static_cast<std::size_t>(id)]);
  }

  std::vector<std::pair<int, int>> edge_set;  // (word pos, sent pos)
  for (const Sentence& s : doc.sentences) {
    std::vector<int> word_positions;
    for (const std::string& t : s.graph_tokens) {
      const int id = vocab.id_of(t);
      if (id >= 0) word_positions.push_back(g.word_pos_by_vocab_id.at(id));
    }
    std::sort(word_positions.begin(), word_positions.end());
    word_positions.erase(std::unique(word_positions.begin(), word_positions.end()),
                         word_positions.end());
    if (word_positions.empty()) continue;  // no in-vocab tokens: not a graph node
    const int sent_pos = static_cast<int>(g.sentence_indices.size());
    g.sent_pos_by_index.emplace(s.index, sent_pos);
    g.sentence_indices.push_back(s.index);
    for (int wp : word_positions) edge_set.push_back({wp, sent_pos});
  }
  std::sort(edge_set.begin(), edge_set.end());
  for (auto [wp, sp] : edge_set) g.edges.push_back({wp, sp, 1.0});
  g.rebuild_adjacency();

  const EdgeWeightMap weights = normalize_weights(edge_betweenness(g));
  for (std::size_t e = 0; e < weights.size(); ++e) g.edges[e].weight = weights[e];
  return g;
}

// Edge-list text dump, one "w:<token>\ts:<index>\t<weight>" line per edge in
// (vocab id, sentence index) order.
inline void dump_graph(const BipartiteGraph& graph, std::ostream& out) {
  char buf[64];
  for (const BipartiteEdge& e : graph.edges) {
    std::snprintf(buf, sizeof(buf), "%.6f", e.weight);
    out << "w:" << graph.word_tokens[static_cast<std::size_t>(e.word)] << "\ts:"
        << graph.sentence_indices[static_cast<std::size_t>(e.sent)] << "\t" << buf << "\n";
  }
}

}  // namespace bigraphsum
