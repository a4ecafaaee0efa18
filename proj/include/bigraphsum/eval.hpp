#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "bigraphsum/corpus.hpp"
#include "bigraphsum/rank.hpp"

namespace bigraphsum {

struct Rouge {
  double p = 0, r = 0, f1 = 0;
};

namespace detail {

inline Rouge rouge_from_counts(double overlap, double cand, double ref) {
  Rouge s;
  if (cand <= 0 || ref <= 0) return s;
  s.p = overlap / cand;
  s.r = overlap / ref;
  s.f1 = s.p + s.r > 0 ? 2.0 * s.p * s.r / (s.p + s.r) : 0.0;
  return s;
}

inline std::unordered_map<std::string, std::int64_t> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, std::int64_t> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + static_cast<std::size_t>(j)];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

// Clipped n-gram overlap precision/recall/F1; either side empty scores 0.
inline Rouge rouge_n(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference, int n) {
  if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
  const auto cand = detail::ngram_counts(candidate, n);
  const auto ref = detail::ngram_counts(reference, n);
  double cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [k, c] : cand) cand_total += static_cast<double>(c);
  for (const auto& [k, c] : ref) ref_total += static_cast<double>(c);
  for (const auto& [k, c] : cand) {
    auto it = ref.find(k);
    if (it != ref.end()) overlap += static_cast<double>(std::min(c, it->second));
  }
  return detail::rouge_from_counts(overlap, cand_total, ref_total);
}

// Longest common subsequence P/R/F1.
inline Rouge rouge_l(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference) {
  const std::size_t a = candidate.size(), b = reference.size();
  if (a == 0 || b == 0) return {};
  std::vector<std::int32_t> prev(b + 1, 0), cur(b + 1, 0);
  for (std::size_t i = 1; i <= a; ++i) {
    for (std::size_t j = 1; j <= b; ++j) {
      if (candidate[i - 1] == reference[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return detail::rouge_from_counts(static_cast<double>(prev[b]), static_cast<double>(a),
                                   static_cast<double>(b));
}

struct Fragment {
  int a_start = 0;
  int b_start = 0;
  int length = 0;
};

using FragmentSet = std::vector<Fragment>;

// Greedy shared-sequence extraction: scan B left to right, take the longest
// contiguous match against A starting at the current position (leftmost A
// occurrence on ties), consume it, move on.
inline FragmentSet extractive_fragments(const std::vector<std::string>& a,
                                        const std::vector<std::string>& b) {
  std::unordered_map<std::string, std::vector<int>> positions;
  for (std::size_t i = 0; i < a.size(); ++i) positions[a[i]].push_back(static_cast<int>(i));
  FragmentSet fragments;
  std::size_t i = 0;
  while (i < b.size()) {
    int best_len = 0, best_a = -1;
    auto it = positions.find(b[i]);
    if (it != positions.end()) {
      for (int p : it->second) {
        int len = 0;
        while (i + static_cast<std::size_t>(len) < b.size() &&
               static_cast<std::size_t>(p) + static_cast<std::size_t>(len) < a.size() &&
               a[static_cast<std::size_t>(p) + static_cast<std::size_t>(len)] ==
                   b[i + static_cast<std::size_t>(len)])
          ++len;
        if (len > best_len) {  // leftmost A position wins ties
          best_len = len;
          best_a = p;
        }
      }
    }
    if (best_len > 0) {
      fragments.push_back({best_a, static_cast<int>(i), best_len});
      i += static_cast<std::size_t>(best_len);
    } else {
      ++i;
    }
  }
  return fragments;
}

struct FragmentStats {
  double coverage = 0, density = 0, compression = 0;
};

inline FragmentStats fragment_stats(const std::vector<std::string>& a,
                                    const std::vector<std::string>& b) {
  if (b.empty()) throw std::invalid_argument("fragment_stats: empty summary");
  FragmentStats st;
  for (const Fragment& f : extractive_fragments(a, b)) {
    st.coverage += f.length;
    st.density += static_cast<double>(f.length) * f.length;
  }
  st.coverage /= static_cast<double>(b.size());
  st.density /= static_cast<double>(b.size());
  st.compression = static_cast<double>(a.size()) / static_cast<double>(b.size());
  return st;
}

namespace detail {

inline std::vector<std::string> selection_tokens(const Document& doc,
                                                 const std::vector<int>& indices) {
  std::vector<std::string> tokens;
  for (int i : indices) {
    const auto& t = doc.sentences[static_cast<std::size_t>(i)].tokens;
    tokens.insert(tokens.end(), t.begin(), t.end());
  }
  return tokens;
}

}  // namespace detail

// Greedy reference-aware upper bound: repeatedly add the sentence that most
// improves mean(ROUGE-1 F1, ROUGE-2 F1), stopping at k or when nothing helps;
// ties go to the smaller index.
inline Summary oracle_summary(const Document& doc, const std::vector<std::string>& reference,
                              int k) {
  const int m = static_cast<int>(doc.sentences.size());
  std::vector<int> chosen;
  std::vector<bool> used(static_cast<std::size_t>(m), false);
  double best_score = 0.0;
  while (static_cast<int>(chosen.size()) < k) {
    int pick = -1;
    double pick_score = best_score;
    for (int i = 0; i < m; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      std::vector<int> trial = chosen;
      trial.push_back(i);
      std::sort(trial.begin(), trial.end());
      const std::vector<std::string> cand = detail::selection_tokens(doc, trial);
      const double score =
          0.5 * (rouge_n(cand, reference, 1).f1 + rouge_n(cand, reference, 2).f1);
      if (score > pick_score) {
        pick_score = score;
        pick = i;
      }
    }
    if (pick < 0) break;
    chosen.push_back(pick);
    used[static_cast<std::size_t>(pick)] = true;
    best_score = pick_score;
  }
  std::sort(chosen.begin(), chosen.end());
  Summary summary;
  summary.indices = chosen;
  summary.scores.assign(static_cast<std::size_t>(m), 0.0);
  for (std::size_t rank = 0; rank < chosen.size(); ++rank)
    summary.scores[static_cast<std::size_t>(chosen[rank])] =
        static_cast<double>(chosen.size() - rank);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (i) summary.text += " ";
    summary.text += doc.sentences[static_cast<std::size_t>(chosen[i])].raw;
  }
  return summary;
}

inline Summary lead_baseline(const Document& doc, int k) {
  const int m = static_cast<int>(doc.sentences.size());
  Summary summary;
  summary.scores.assign(static_cast<std::size_t>(m), 0.0);
  const int take = std::min(k, m);
  for (int i = 0; i < take; ++i) {
    summary.indices.push_back(i);
    summary.scores[static_cast<std::size_t>(i)] = static_cast<double>(take - i);
    if (i) summary.text += " ";
    summary.text += doc.sentences[static_cast<std::size_t>(i)].raw;
  }
  return summary;
}

struct SummaryRecord {
  std::string id;
  std::vector<int> indices;
  std::string text;
  std::vector<double> scores;
};

// Which text plays the "article" role A in the fragment statistics.
enum class FragmentPairing { article, reference, oracle };

inline const char* fragment_pairing_name(FragmentPairing p) {
  switch (p) {
    case FragmentPairing::article: return "article";
    case FragmentPairing::reference: return "reference";
    case FragmentPairing::oracle: return "oracle";
  }
  return "?";
}

struct DocEval {
  std::string id;
  Rouge rouge1, rouge2, rougeL;
  FragmentStats frag;
};

struct EvalReport {
  std::vector<DocEval> docs;
  Rouge mean_rouge1, mean_rouge2, mean_rougeL;
  FragmentStats mean_frag;
  std::string method, backend, config_hash;
  FragmentPairing pairing = FragmentPairing::article;
};

struct EvalOptions {
  FragmentPairing pairing = FragmentPairing::article;
  int oracle_k = 3;  // selection size when pairing == oracle
  std::string method, backend, config_hash;
};

// Corpus-level scoring of system summaries against references, with fragment
// statistics against the configured A text.
inline EvalReport evaluate_corpus(const std::vector<SummaryRecord>& summaries,
                                  const Corpus& corpus, const EvalOptions& opts = {}) {
  if (corpus.empty()) throw std::invalid_argument("evaluate_corpus: empty corpus");
  if (summaries.empty()) throw std::invalid_argument("evaluate_corpus: no summaries");
  std::unordered_map<std::string, const Document*> by_id;
  for (const Document& d : corpus) by_id[d.id] = &d;

  EvalReport report;
  report.pairing = opts.pairing;
  report.method = opts.method;
  report.backend = opts.backend;
  report.config_hash = opts.config_hash;

  for (const SummaryRecord& rec : summaries) {
    auto it = by_id.find(rec.id);
    if (it == by_id.end())
      throw std::runtime_error("evaluate_corpus: summary id \"" + rec.id +
                               "\" not present in the corpus");
    const Document& doc = *it->second;
    if (!doc.has_reference)
      throw std::runtime_error("evaluate_corpus: document \"" + rec.id +
                               "\" has no reference summary");
    const std::vector<std::string> cand = tokenize(rec.text, false);
    const std::vector<std::string> ref = tokenize(doc.reference_summary, false);

    DocEval de;
    de.id = rec.id;
    de.rouge1 = rouge_n(cand, ref, 1);
    de.rouge2 = rouge_n(cand, ref, 2);
    de.rougeL = rouge_l(cand, ref);

    std::vector<std::string> article;
    switch (opts.pairing) {
      case FragmentPairing::article: {
        std::vector<int> all(doc.sentences.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        article = detail::selection_tokens(doc, all);
        break;
      }
      case FragmentPairing::reference:
        article = ref;
        break;
      case FragmentPairing::oracle:
        article = tokenize(oracle_summary(doc, ref, opts.oracle_k).text, false);
        break;
    }
    de.frag = cand.empty() ? FragmentStats{} : fragment_stats(article, cand);
    report.docs.push_back(std::move(de));
  }

  const double inv = 1.0 / static_cast<double>(report.docs.size());
  for (const DocEval& de : report.docs) {
    report.mean_rouge1.p += de.rouge1.p * inv;
    report.mean_rouge1.r += de.rouge1.r * inv;
    report.mean_rouge1.f1 += de.rouge1.f1 * inv;
    report.mean_rouge2.p += de.rouge2.p * inv;
    report.mean_rouge2.r += de.rouge2.r * inv;
    report.mean_rouge2.f1 += de.rouge2.f1 * inv;
    report.mean_rougeL.p += de.rougeL.p * inv;
    report.mean_rougeL.r += de.rougeL.r * inv;
    report.mean_rougeL.f1 += de.rougeL.f1 * inv;
    report.mean_frag.coverage += de.frag.coverage * inv;
    report.mean_frag.density += de.frag.density * inv;
    report.mean_frag.compression += de.frag.compression * inv;
  }
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["config_hash"] = report.config_hash;
  j["method"] = report.method;
  j["backend"] = report.backend;
  j["pairing"] = fragment_pairing_name(report.pairing);
  j["doc_count"] = report.docs.size();
  nlohmann::json means;
  means["rouge1_p"] = report.mean_rouge1.p;
  means["rouge1_r"] = report.mean_rouge1.r;
  means["rouge1_f1"] = report.mean_rouge1.f1;
  means["rouge2_p"] = report.mean_rouge2.p;
  means["rouge2_r"] = report.mean_rouge2.r;
  means["rouge2_f1"] = report.mean_rouge2.f1;
  means["rougeL_p"] = report.mean_rougeL.p;
  means["rougeL_r"] = report.mean_rougeL.r;
  means["rougeL_f1"] = report.mean_rougeL.f1;
  means["coverage"] = report.mean_frag.coverage;
  means["density"] = report.mean_frag.density;
  means["compression"] = report.mean_frag.compression;
  j["means"] = means;
  return j;
}

// CSV feed for external density-plot tooling; a single leading comment line
// carries the config hash.
inline std::string report_to_csv(const EvalReport& report) {
  std::string out = "# config=" + report.config_hash + "\n";
  out += "id,rouge1,rouge2,rougeL,coverage,density,compression\n";
  char buf[160];
  for (const DocEval& de : report.docs) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", de.id.c_str(),
                  de.rouge1.f1, de.rouge2.f1, de.rougeL.f1, de.frag.coverage, de.frag.density,
                  de.frag.compression);
    out += buf;
  }
  return out;
}

}  // namespace bigraphsum
