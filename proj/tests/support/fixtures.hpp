#pragma once

// Deterministic synthetic inputs shared by the unit and acceptance suites.

#include <bigraphsum/bipartite.hpp>
#include <bigraphsum/corpus.hpp>
#include <bigraphsum/util.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace fixtures {

// Pool tokens are lowercase, alphabetic and disjoint from the stopword list
// (nothing there starts with 'q' or ends in this shape).
inline std::string pool_token(char prefix, int group, int j) {
  std::string t(5, 'a');
  t[0] = prefix;
  t[1] = static_cast<char>('a' + group % 26);
  t[2] = static_cast<char>('a' + (j / 26) % 26);
  t[3] = static_cast<char>('a' + j % 26);
  t[4] = static_cast<char>('a' + (group / 26) % 26);
  return t;
}

inline bigraphsum::Document make_document(
    std::string id, const std::vector<std::vector<std::string>>& sentence_tokens,
    std::optional<std::string> summary = std::nullopt) {
  std::vector<std::string> raws;
  raws.reserve(sentence_tokens.size());
  for (const auto& toks : sentence_tokens) {
    std::string raw;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) raw += ' ';
      raw += toks[i];
    }
    raws.push_back(std::move(raw));
  }
  return bigraphsum::preprocess_document(std::move(id), raws, std::move(summary));
}

// Fixed 6-node graph (3 words, 3 sentences) with asymmetric degrees so the
// betweenness-derived weights vary.
inline bigraphsum::Document fd_document() {
  return make_document("fd", {{"qaaab", "qbbba", "qcccb"},
                              {"qbbba", "qcccb"},
                              {"qcccb"}});
}

// --- random connected bipartite graphs --------------------------------------

struct RandomBipartite {
  bigraphsum::BipartiteGraph graph;
  oracles::FlatGraph flat;  // same edge order; node s mapped to n_words + s
};

inline RandomBipartite random_bipartite(bigraphsum::Rng& rng, int max_nodes = 10) {
  const int total = 2 + static_cast<int>(rng.uniform_index(
                            static_cast<std::size_t>(max_nodes - 1)));  // 2..max
  const int n_words = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(total - 1)));
  const int n_sents = total - n_words;

  std::set<std::pair<int, int>> pairs;
  std::vector<int> placed_w{0}, placed_s;
  std::vector<std::pair<bool, int>> pending;  // (is_word, id)
  for (int w = 1; w < n_words; ++w) pending.push_back({true, w});
  for (int s = 1; s < n_sents; ++s) pending.push_back({false, s});
  rng.shuffle(pending);

  pairs.insert({0, 0});  // word 0 — sentence 0 anchor
  placed_s.push_back(0);
  for (auto [is_word, id] : pending) {
    if (is_word) {
      pairs.insert({id, placed_s[rng.uniform_index(placed_s.size())]});
      placed_w.push_back(id);
    } else {
      pairs.insert({placed_w[rng.uniform_index(placed_w.size())], id});
      placed_s.push_back(id);
    }
  }
  // extra edges beyond the spanning tree
  for (int w = 0; w < n_words; ++w)
    for (int s = 0; s < n_sents; ++s)
      if (rng.uniform() < 0.3) pairs.insert({w, s});

  RandomBipartite out;
  out.graph.doc_id = "rand";
  for (int w = 0; w < n_words; ++w) {
    out.graph.word_vocab_ids.push_back(w);
    out.graph.word_tokens.push_back("w" + std::to_string(w));
    out.graph.word_pos_by_vocab_id[w] = w;
  }
  for (int s = 0; s < n_sents; ++s) {
    out.graph.sentence_indices.push_back(s);
    out.graph.sent_pos_by_index[s] = s;
  }
  out.flat.n_nodes = total;
  for (auto [w, s] : pairs) {
    out.graph.edges.push_back({w, s, 1.0});
    out.flat.edges.push_back({w, n_words + s});
  }
  out.graph.rebuild_adjacency();
  return out;
}

// --- topic-structured corpora ------------------------------------------------

struct TopicCorpusSpec {
  int docs = 50;
  int topics = 6;
  int topic_words = 12;  // keyword pool per topic
  int global_words = 40;
  int sentences_lo = 6, sentences_hi = 10;
  int tokens_lo = 6, tokens_hi = 10;
  int hub_sentences = 2;  // leading keyword-dense sentences
  bool references = false;
  std::uint64_t seed = 2024;
};

// Documents draw most hub tokens from one topic pool and most filler tokens
// from the global pool; references (when on) are the hub sentences verbatim,
// so they repeat the document's central keywords.
inline bigraphsum::Corpus topic_corpus(const TopicCorpusSpec& spec) {
  bigraphsum::Rng rng(spec.seed);
  std::vector<std::vector<std::string>> topic_pool(static_cast<std::size_t>(spec.topics));
  for (int t = 0; t < spec.topics; ++t)
    for (int j = 0; j < spec.topic_words; ++j)
      topic_pool[static_cast<std::size_t>(t)].push_back(pool_token('q', t, j));
  std::vector<std::string> global_pool;
  for (int j = 0; j < spec.global_words; ++j) global_pool.push_back(pool_token('g', 0, j));

  auto pick = [&](const std::vector<std::string>& pool) {
    return pool[rng.uniform_index(pool.size())];
  };

  bigraphsum::Corpus corpus;
  for (int d = 0; d < spec.docs; ++d) {
    const auto& topical = topic_pool[rng.uniform_index(topic_pool.size())];
    const int m = spec.sentences_lo +
                  static_cast<int>(rng.uniform_index(
                      static_cast<std::size_t>(spec.sentences_hi - spec.sentences_lo + 1)));
    std::vector<std::vector<std::string>> sentences;
    for (int s = 0; s < m; ++s) {
      const bool hub = s < spec.hub_sentences;
      const int len = spec.tokens_lo +
                      static_cast<int>(rng.uniform_index(
                          static_cast<std::size_t>(spec.tokens_hi - spec.tokens_lo + 1)));
      std::vector<std::string> toks;
      for (int i = 0; i < len; ++i) {
        const double topical_frac = hub ? 0.8 : 0.3;
        toks.push_back(rng.uniform() < topical_frac ? pick(topical) : pick(global_pool));
      }
      sentences.push_back(std::move(toks));
    }
    std::optional<std::string> summary;
    if (spec.references) {
      std::string ref;
      for (int s = 0; s < spec.hub_sentences && s < m; ++s) {
        for (std::size_t i = 0; i < sentences[static_cast<std::size_t>(s)].size(); ++i) {
          if (!ref.empty()) ref += ' ';
          ref += sentences[static_cast<std::size_t>(s)][i];
        }
      }
      summary = std::move(ref);
    }
    corpus.push_back(make_document("doc" + std::to_string(d), sentences, std::move(summary)));
  }
  return corpus;
}

// Chain-structured documents: each linking word spans `span` consecutive
// sentences (`twins` copies per start position), plus sentence-local leaf
// words. Dropping one edge leaves the rest of the span (and any twin) in
// place, so held-out links stay recoverable from the surviving structure,
// and the chain shape spreads edge betweenness across the full weight range.
struct ChainCorpusSpec {
  int docs = 200;
  int sentences_lo = 6, sentences_hi = 9;
  int span = 3;
  int twins = 2;
  int leaves_lo = 1, leaves_hi = 2;  // per sentence
  std::uint64_t seed = 2024;
};

inline bigraphsum::Corpus chain_corpus(const ChainCorpusSpec& spec) {
  bigraphsum::Rng rng(spec.seed);
  bigraphsum::Corpus corpus;
  for (int d = 0; d < spec.docs; ++d) {
    const int m = spec.sentences_lo +
                  static_cast<int>(rng.uniform_index(
                      static_cast<std::size_t>(spec.sentences_hi - spec.sentences_lo + 1)));
    int leaf_id = 0;
    std::vector<std::vector<std::string>> sentences;
    for (int s = 0; s < m; ++s) {
      std::vector<std::string> toks;
      for (int p = s - spec.span + 1; p <= s; ++p) {
        if (p < 0 || p + spec.span > m) continue;  // only full-length spans
        for (int t = 0; t < spec.twins; ++t)
          toks.push_back(pool_token('u', d, p * spec.twins + t));
      }
      const int leaves = spec.leaves_lo +
                         static_cast<int>(rng.uniform_index(
                             static_cast<std::size_t>(spec.leaves_hi - spec.leaves_lo + 1)));
      for (int i = 0; i < leaves; ++i) toks.push_back(pool_token('v', d, leaf_id++));
      sentences.push_back(std::move(toks));
    }
    corpus.push_back(make_document("doc" + std::to_string(d), sentences));
  }
  return corpus;
}

// JSONL form accepted by the corpus loader / CLI.
inline void write_jsonl(const std::string& path, const bigraphsum::Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  for (const bigraphsum::Document& doc : corpus) {
    nlohmann::json obj;
    obj["id"] = doc.id;
    std::vector<std::string> raws;
    for (const bigraphsum::Sentence& s : doc.sentences) raws.push_back(s.raw);
    obj["sentences"] = raws;
    if (doc.has_reference) obj["summary"] = doc.reference_summary;
    out << obj.dump() << "\n";
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
