#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace bigraphsum {

struct Sentence {
  int index = 0;                          // position within the document
  std::string raw;
  std::vector<std::string> tokens;        // full lowercase token list
  std::vector<std::string> graph_tokens;  // stopwords removed, order preserved
};

struct Document {
  std::string id;
  std::vector<Sentence> sentences;
  std::string reference_summary;
  bool has_reference = false;
};

using Corpus = std::vector<Document>;

struct PreprocessOptions {
  std::size_t max_sentences = 50;
  std::size_t max_tokens = 512;  // budget over full token lists
};

// Fixed English stopword list, also shipped at data/stopwords.txt.
inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> set = [] {
    static const char* words =
        "a about above after again against ain al all also although always am among an and any are "
        "aren as at be because been before being below between both but by can cannot could couldn d "
        "did didn do does doesn doing don down during each et ever few for from further had hadn has "
        "hasn have haven having he hence her here hers herself him himself his how however i if in "
        "into is isn it its itself just ll m ma me might mightn more most must mustn my myself needn "
        "never no nor not now o of off on once only or other our ours ourselves out over own per re "
        "s same shall shan she should shouldn since so some such t than that the their theirs them "
        "themselves then there therefore these they this those though through thus to too under "
        "unless until up upon us ve very via was wasn we were weren what when where which while who "
        "whom why will with within without won would wouldn y you your yours yourself yourselves";
    std::unordered_set<std::string> out;
    std::istringstream in(words);
    std::string w;
    while (in >> w) out.insert(w);
    return out;
  }();
  return set;
}

namespace detail {

inline bool is_token_char(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;  // keep UTF-8 bytes together
}

// Tokens whose trailing period never ends a sentence.
inline const std::unordered_set<std::string>& abbreviation_guards() {
  static const std::unordered_set<std::string> set = {
      "mr",   "mrs",  "ms",   "dr",   "prof", "rev",  "gen",  "rep", "sen",  "gov",  "capt",
      "col",  "sgt",  "lt",   "st",   "jr",   "sr",   "vs",   "etc", "inc",  "ltd",  "co",
      "corp", "dept", "univ", "assn", "bros", "fig",  "figs", "eq",  "eqs",  "no",   "nos",
      "vol",  "pp",   "approx", "est", "min",  "max",  "jan",  "feb", "mar",  "apr",  "jun",
      "jul",  "aug",  "sep",  "sept", "oct",  "nov",  "dec",  "mon", "tue",  "wed",  "thu",
      "fri",  "sat",  "sun",  "mt",   "ft",   "ave",  "blvd", "rd",  "hwy"};
  return set;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Lowercase tokens split on whitespace and punctuation boundaries. With
// for_graph set, stopwords are removed (punctuation never survives the
// alphanumeric-run rule).
inline std::vector<std::string> tokenize(const std::string& text, bool for_graph) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (!detail::is_token_char(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && detail::is_token_char(static_cast<unsigned char>(text[j]))) ++j;
    std::string tok = text.substr(i, j - i);
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!for_graph || stopwords().count(tok) == 0) out.push_back(std::move(tok));
    i = j;
  }
  return out;
}

// Rule-based splitter: boundary at '.', '!' or '?' followed by whitespace and
// a capital, or at end of text. A '.' after an abbreviation or a single
// letter (initials, acronym pieces) does not split.
inline std::vector<std::string> split_sentences(const std::string& raw) {
  std::vector<std::string> out;
  const std::size_t n = raw.size();
  auto flush = [&](std::size_t b, std::size_t e) {
    std::string s = detail::trim(std::string_view(raw).substr(b, e - b));
    if (!s.empty()) out.push_back(std::move(s));
  };
  std::size_t start = 0, i = 0;
  while (i < n) {
    char c = raw[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && (raw[j + 1] == '.' || raw[j + 1] == '!' || raw[j + 1] == '?')) ++j;
    std::size_t k = j + 1;
    while (k < n && std::isspace(static_cast<unsigned char>(raw[k]))) ++k;
    bool boundary = false;
    if (k >= n) {
      boundary = true;
    } else if (k > j + 1 && std::isupper(static_cast<unsigned char>(raw[k]))) {
      boundary = true;
    }
    if (boundary && c == '.' && j == i) {
      std::size_t e = i, b = i;
      while (b > 0 && detail::is_token_char(static_cast<unsigned char>(raw[b - 1]))) --b;
      std::string word = raw.substr(b, e - b);
      for (char& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      bool is_initial = word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0]));
      if (is_initial || detail::abbreviation_guards().count(word) > 0) boundary = k >= n;
    }
    if (boundary && k < n) {
      flush(start, j + 1);
      start = k;
      i = k;
    } else {
      i = j + 1;
    }
  }
  if (start < n) flush(start, n);
  return out;
}

// Tokenize, drop empty sentences, cap the sentence count, then drop trailing
// sentences that would exceed the token budget. Indices are reassigned to
// match retained positions.
inline Document preprocess_document(std::string id, const std::vector<std::string>& sentence_raws,
                                    std::optional<std::string> summary,
                                    const PreprocessOptions& opts = {}) {
  Document doc;
  doc.id = std::move(id);
  if (summary) {
    doc.reference_summary = std::move(*summary);
    doc.has_reference = true;
  }
  std::size_t token_budget = 0;
  for (const std::string& raw : sentence_raws) {
    if (doc.sentences.size() >= opts.max_sentences) break;
    Sentence s;
    s.raw = detail::trim(raw);
    if (s.raw.empty()) continue;
    s.tokens = tokenize(s.raw, false);
    if (s.tokens.empty()) continue;
    if (token_budget + s.tokens.size() > opts.max_tokens) break;
    token_budget += s.tokens.size();
    s.graph_tokens = tokenize(s.raw, true);
    s.index = static_cast<int>(doc.sentences.size());
    doc.sentences.push_back(std::move(s));
  }
  return doc;
}

inline Document preprocess_document(std::string id, const std::string& text,
                                    std::optional<std::string> summary,
                                    const PreprocessOptions& opts = {}) {
  return preprocess_document(std::move(id), split_sentences(text), std::move(summary), opts);
}

// JSON Lines loader: {"id", "text"} or {"id", "sentences": [...]}, optional
// "summary". Documents emptied by preprocessing are skipped with a warning so
// corpus jobs stay restartable.
inline Corpus load_corpus(const std::string& path, std::optional<std::size_t> limit = std::nullopt,
                          const PreprocessOptions& opts = {}, std::ostream* warn = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    if (limit && corpus.size() >= *limit) break;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed JSON line: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": line must be an object with a string \"id\"");
    std::string id = obj["id"].get<std::string>();
    std::optional<std::string> summary;
    if (obj.contains("summary") && obj["summary"].is_string())
      summary = obj["summary"].get<std::string>();
    Document doc;
    if (obj.contains("sentences") && obj["sentences"].is_array()) {
      std::vector<std::string> raws;
      for (const auto& s : obj["sentences"]) {
        if (!s.is_string())
          throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                   ": \"sentences\" entries must be strings");
        raws.push_back(s.get<std::string>());
      }
      doc = preprocess_document(std::move(id), raws, std::move(summary), opts);
    } else if (obj.contains("text") && obj["text"].is_string()) {
      doc = preprocess_document(std::move(id), obj["text"].get<std::string>(), std::move(summary),
                                opts);
    } else {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": line needs a \"text\" string or a \"sentences\" array");
    }
    if (doc.sentences.empty()) {
      if (warn)
        (*warn) << "warning: skipping document " << doc.id << " (" << path << ":" << line_no
                << "): no sentences after preprocessing\n";
      continue;
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

struct TfIdfStats {
  std::size_t doc_count = 0;
  std::unordered_map<std::string, std::int64_t> doc_freq;
  // graph-token counts per document, corpus order
  std::vector<std::unordered_map<std::string, std::int64_t>> term_freq;

  // smoothed idf, defined for unseen tokens as well
  double idf(const std::string& token) const {
    auto it = doc_freq.find(token);
    const double df = it == doc_freq.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + df)) + 1.0;
  }
};

inline TfIdfStats compute_tfidf(const Corpus& corpus) {
  TfIdfStats stats;
  stats.doc_count = corpus.size();
  stats.term_freq.reserve(corpus.size());
  for (const Document& doc : corpus) {
    std::unordered_map<std::string, std::int64_t> tf;
    for (const Sentence& s : doc.sentences)
      for (const std::string& t : s.graph_tokens) ++tf[t];
    for (const auto& [tok, cnt] : tf) ++stats.doc_freq[tok];
    stats.term_freq.push_back(std::move(tf));
  }
  return stats;
}

struct Vocab {
  std::vector<std::string> tokens;           // id -> token
  std::unordered_map<std::string, int> ids;  // token -> id
  std::vector<std::int64_t> doc_freq;        // by id
  std::vector<double> corpus_tfidf;          // by id

  std::size_t size() const { return tokens.size(); }
  int id_of(const std::string& token) const {
    auto it = ids.find(token);
    return it == ids.end() ? -1 : it->second;
  }
};

// Rank graph tokens by corpus frequency (ties lexicographic), cap at
// max_size, then drop the prune_frac fraction with the lowest corpus TF-IDF.
// On the prune boundary the lexicographically larger token goes first.
inline Vocab build_vocab(const Corpus& corpus, std::size_t max_size = 50000,
                         double prune_frac = 0.10) {
  if (corpus.empty()) throw std::runtime_error("build_vocab: empty corpus");
  std::unordered_map<std::string, std::int64_t> freq;
  for (const Document& doc : corpus)
    for (const Sentence& s : doc.sentences)
      for (const std::string& t : s.graph_tokens) ++freq[t];

  std::vector<std::string> ranked;
  ranked.reserve(freq.size());
  for (const auto& [tok, cnt] : freq) ranked.push_back(tok);
  std::sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
    if (freq[a] != freq[b]) return freq[a] > freq[b];
    return a < b;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);

  TfIdfStats stats = compute_tfidf(corpus);
  std::unordered_map<std::string, double> tfidf;
  for (const std::string& t : ranked) tfidf[t] = static_cast<double>(freq[t]) * stats.idf(t);

  const std::size_t n_prune =
      static_cast<std::size_t>(prune_frac * static_cast<double>(ranked.size()));
  std::vector<std::string> by_tfidf = ranked;
  std::sort(by_tfidf.begin(), by_tfidf.end(), [&](const std::string& a, const std::string& b) {
    if (tfidf[a] != tfidf[b]) return tfidf[a] < tfidf[b];
    return a > b;
  });
  std::unordered_set<std::string> pruned(by_tfidf.begin(),
                                         by_tfidf.begin() + static_cast<std::ptrdiff_t>(n_prune));

  Vocab vocab;
  for (const std::string& t : ranked) {
    if (pruned.count(t)) continue;
    vocab.ids.emplace(t, static_cast<int>(vocab.tokens.size()));
    vocab.tokens.push_back(t);
    vocab.doc_freq.push_back(stats.doc_freq.at(t));
    vocab.corpus_tfidf.push_back(tfidf.at(t));
  }
  return vocab;
}

}  // namespace bigraphsum
