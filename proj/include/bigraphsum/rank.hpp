#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bigraphsum/autoenc.hpp"
#include "bigraphsum/corpus.hpp"
#include "bigraphsum/features.hpp"

namespace bigraphsum {

enum class SimilarityKind { dot, cosine };

enum class RankMethod { textrank, lexrank, pacsum, far, dasg };

inline RankMethod parse_rank_method(const std::string& name) {
  if (name == "textrank") return RankMethod::textrank;
  if (name == "lexrank") return RankMethod::lexrank;
  if (name == "pacsum") return RankMethod::pacsum;
  if (name == "far") return RankMethod::far;
  if (name == "dasg") return RankMethod::dasg;
  throw std::invalid_argument("unknown method \"" + name +
                              "\" (valid: textrank, lexrank, pacsum, far, dasg)");
}

inline const char* rank_method_name(RankMethod m) {
  switch (m) {
    case RankMethod::textrank: return "textrank";
    case RankMethod::lexrank: return "lexrank";
    case RankMethod::pacsum: return "pacsum";
    case RankMethod::far: return "far";
    case RankMethod::dasg: return "dasg";
  }
  return "?";
}

struct RankConfig {
  RankMethod method = RankMethod::pacsum;
  int k = 3;
  double lambda1 = -1.0, lambda2 = 1.0;  // pacsum/far position weights
  double beta_sim = 0.0;                 // similarity threshold fraction
  double beta_far = 0.1;                 // far diameter fraction
  std::array<double, 3> dasg_fwd = {-1.5, -0.5, -1.0};  // λ⁺, j < i
  std::array<double, 3> dasg_bwd = {1.0, 1.5, 2.0};     // λ⁻, j > i
  int dasg_bucket = 0;                   // m_b; 0 → ⌈m/3⌉
  double damping = 0.85;
  double tol = 1e-6;
  int max_iter = 200;
};

struct Summary {
  std::vector<int> indices;    // ascending document positions
  std::string text;            // selected sentences joined in document order
  std::vector<double> scores;  // centrality per sentence, full length m
};

// Raw pairwise similarity Ē. Cosine defines zero-vector rows as 0.
inline MatrixXd similarity_matrix(const MatrixXd& embeddings, SimilarityKind kind) {
  const Eigen::Index m = embeddings.rows();
  MatrixXd sim = embeddings * embeddings.transpose();
  if (kind == SimilarityKind::cosine) {
    VectorXd norms = embeddings.rowwise().norm();
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        const double d = norms(i) * norms(j);
        sim(i, j) = d > 0.0 ? sim(i, j) / d : 0.0;
      }
  }
  return sim;
}

inline MatrixXd similarity_matrix(const SparseRows& rows, SimilarityKind kind) {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.rows.size());
  MatrixXd sim = MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j) {
      double v = SparseRows::dot(rows.rows[static_cast<std::size_t>(i)],
                                 rows.rows[static_cast<std::size_t>(j)]);
      if (kind == SimilarityKind::cosine) {
        const double ni = std::sqrt(SparseRows::dot(rows.rows[static_cast<std::size_t>(i)],
                                                    rows.rows[static_cast<std::size_t>(i)]));
        const double nj = std::sqrt(SparseRows::dot(rows.rows[static_cast<std::size_t>(j)],
                                                    rows.rows[static_cast<std::size_t>(j)]));
        v = ni * nj > 0.0 ? v / (ni * nj) : 0.0;
      }
      sim(i, j) = v;
      sim(j, i) = v;
    }
  return sim;
}

// Threshold normalization over off-diagonal entries: τ = min + β_sim(max−min),
// Ẽ_ij = max(Ē_ij − τ, 0), diagonal zero. A 1×1 input maps to the zero matrix.
inline MatrixXd normalize_similarity(const MatrixXd& raw, double beta_sim) {
  const Eigen::Index m = raw.rows();
  MatrixXd out = MatrixXd::Zero(m, m);
  if (m < 2) return out;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      mn = std::min(mn, raw(i, j));
      mx = std::max(mx, raw(i, j));
    }
  const double tau = mn + beta_sim * (mx - mn);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) out(i, j) = std::max(raw(i, j) - tau, 0.0);
  return out;
}

inline std::vector<double> pacsum_centrality(const MatrixXd& sim, double lambda1,
                                             double lambda2) {
  const Eigen::Index m = sim.rows();
  std::vector<double> scores(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    double before = 0, after = 0;
    for (Eigen::Index j = 0; j < i; ++j) before += sim(i, j);
    for (Eigen::Index j = i + 1; j < m; ++j) after += sim(i, j);
    scores[static_cast<std::size_t>(i)] = lambda1 * before + lambda2 * after;
  }
  return scores;
}

// FAR: clip every pairwise term by the diameter fraction ε before the
// positional weighting.
inline std::vector<double> far_centrality(const MatrixXd& sim, double lambda1, double lambda2,
                                          double beta_far) {
  const Eigen::Index m = sim.rows();
  std::vector<double> scores(static_cast<std::size_t>(m), 0.0);
  if (m < 2) return scores;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      mn = std::min(mn, sim(i, j));
      mx = std::max(mx, sim(i, j));
    }
  const double eps = beta_far * (mx - mn);
  for (Eigen::Index i = 0; i < m; ++i) {
    double before = 0, after = 0;
    for (Eigen::Index j = 0; j < i; ++j) before += std::max(sim(i, j) - eps, 0.0);
    for (Eigen::Index j = i + 1; j < m; ++j) after += std::max(sim(i, j) - eps, 0.0);
    scores[static_cast<std::size_t>(i)] = lambda1 * before + lambda2 * after;
  }
  return scores;
}

// DASG: distance-bucketed positional weights, bucket b(d)=min(⌊(d−1)/m_b⌋+1, 3).
inline std::vector<double> dasg_centrality(const MatrixXd& sim,
                                           const std::array<double, 3>& lambda_fwd,
                                           const std::array<double, 3>& lambda_bwd, int m_b) {
  if (m_b < 1) throw std::invalid_argument("dasg_centrality: bucket width must be >= 1");
  const Eigen::Index m = sim.rows();
  auto bucket = [m_b](Eigen::Index d) {
    return std::min<Eigen::Index>((d - 1) / m_b + 1, 3) - 1;  // 0-based
  };
  std::vector<double> scores(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    double acc = 0;
    for (Eigen::Index j = 0; j < i; ++j)
      acc += lambda_fwd[static_cast<std::size_t>(bucket(i - j))] * sim(i, j);
    for (Eigen::Index j = i + 1; j < m; ++j)
      acc += lambda_bwd[static_cast<std::size_t>(bucket(j - i))] * sim(i, j);
    scores[static_cast<std::size_t>(i)] = acc;
  }
  return scores;
}

struct PagerankError : std::runtime_error {
  std::vector<double> last_iterate;
  PagerankError(const std::string& what, std::vector<double> last)
      : std::runtime_error(what), last_iterate(std::move(last)) {}
};

// Power iteration on the row-stochastic transition built from the similarity
// matrix; all-zero rows teleport uniformly.
inline std::vector<double> pagerank_centrality(const MatrixXd& sim, double damping = 0.85,
                                               double tol = 1e-6, int max_iter = 200) {
  const Eigen::Index m = sim.rows();
  if (m == 0) return {};
  MatrixXd p = sim;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double row_sum = p.row(i).sum();
    if (row_sum > 0.0)
      p.row(i) /= row_sum;
    else
      p.row(i).setConstant(1.0 / static_cast<double>(m));
  }
  VectorXd rank = VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  const double teleport = (1.0 - damping) / static_cast<double>(m);
  for (int it = 0; it < max_iter; ++it) {
    VectorXd next = VectorXd::Constant(m, teleport) + damping * (p.transpose() * rank);
    const double delta = (next - rank).cwiseAbs().sum();
    rank = next;
    if (delta < tol)
      return std::vector<double>(rank.data(), rank.data() + rank.size());
  }
  throw PagerankError("pagerank failed to converge after " + std::to_string(max_iter) +
                          " iterations",
                      std::vector<double>(rank.data(), rank.data() + rank.size()));
}

// Top-k by score, ties toward the smaller index; output in document order.
inline Summary select_sentences(const std::vector<double>& scores, int k, const Document& doc) {
  const int m = static_cast<int>(scores.size());
  std::vector<int> idx(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    return a < b;
  });
  Summary summary;
  summary.scores = scores;
  const int take = std::min(k, m);
  summary.indices.assign(idx.begin(), idx.begin() + take);
  std::sort(summary.indices.begin(), summary.indices.end());
  for (std::size_t i = 0; i < summary.indices.size(); ++i) {
    if (i) summary.text += " ";
    summary.text += doc.sentences[static_cast<std::size_t>(summary.indices[i])].raw;
  }
  return summary;
}

inline std::vector<double> centrality_scores(const MatrixXd& sim_normalized,
                                             const RankConfig& cfg) {
  switch (cfg.method) {
    case RankMethod::textrank:
    case RankMethod::lexrank:
      return pagerank_centrality(sim_normalized, cfg.damping, cfg.tol, cfg.max_iter);
    case RankMethod::pacsum:
      return pacsum_centrality(sim_normalized, cfg.lambda1, cfg.lambda2);
    case RankMethod::far:
      return far_centrality(sim_normalized, cfg.lambda1, cfg.lambda2, cfg.beta_far);
    case RankMethod::dasg: {
      int m_b = cfg.dasg_bucket;
      if (m_b <= 0)
        m_b = std::max<int>(1, static_cast<int>((sim_normalized.rows() + 2) / 3));  // ⌈m/3⌉
      return dasg_centrality(sim_normalized, cfg.dasg_fwd, cfg.dasg_bwd, m_b);
    }
  }
  throw std::logic_error("unreachable");
}

inline SimilarityKind similarity_kind_for(RankMethod method) {
  return method == RankMethod::lexrank ? SimilarityKind::cosine : SimilarityKind::dot;
}

// Embedding source for ranking: the pretrained encoder, or TF-IDF rows as the
// non-neural baseline (also the fallback when a document's graph degenerates).
struct EmbeddingBackend {
  enum class Kind { bigae, tfidf } kind = Kind::tfidf;
  Checkpoint* ckpt = nullptr;
  const Vocab* vocab = nullptr;
  const EmbeddingTable* table = nullptr;
  const TfIdfStats* stats = nullptr;

  static EmbeddingBackend bigae(Checkpoint& c, const Vocab& v, const EmbeddingTable& t) {
    EmbeddingBackend b;
    b.kind = Kind::bigae;
    b.ckpt = &c;
    b.vocab = &v;
    b.table = &t;
    return b;
  }
  static EmbeddingBackend tfidf(const TfIdfStats& s, const Vocab& v) {
    EmbeddingBackend b;
    b.kind = Kind::tfidf;
    b.stats = &s;
    b.vocab = &v;
    return b;
  }
};

inline MatrixXd raw_similarity(const Document& doc, const EmbeddingBackend& backend,
                               SimilarityKind kind, std::ostream* warn) {
  if (backend.kind == EmbeddingBackend::Kind::bigae) {
    try {
      const MatrixXd emb = embed_sentences(doc, *backend.vocab, *backend.table, *backend.ckpt);
      return similarity_matrix(emb, kind);
    } catch (const std::runtime_error& e) {
      if (backend.stats == nullptr) throw;
      if (warn) (*warn) << "warning: " << e.what() << "; falling back to tfidf embeddings\n";
    }
  }
  if (backend.stats == nullptr) throw std::runtime_error("tfidf backend needs corpus stats");
  return similarity_matrix(tfidf_sentence_embedding(doc, *backend.stats, *backend.vocab), kind);
}

// Full ranking pipeline for one document:
// embed → similarity → normalize → centrality → top-k.
inline Summary summarize(const Document& doc, const EmbeddingBackend& backend,
                         const RankConfig& cfg, std::ostream* warn = nullptr) {
  if ((cfg.method == RankMethod::pacsum || cfg.method == RankMethod::far) && warn &&
      std::abs(cfg.lambda1 + cfg.lambda2 - 1.0) > 1e-12)
    (*warn) << "note: lambda1 + lambda2 = " << cfg.lambda1 + cfg.lambda2 << " != 1\n";
  const MatrixXd raw = raw_similarity(doc, backend, similarity_kind_for(cfg.method), warn);
  const MatrixXd sim = normalize_similarity(raw, cfg.beta_sim);
  return select_sentences(centrality_scores(sim, cfg), cfg.k, doc);
}

inline nlohmann::json summary_to_json(const std::string& id, const Summary& s) {
  nlohmann::json j;
  j["id"] = id;
  j["indices"] = s.indices;
  j["summary"] = s.text;
  j["scores"] = s.scores;
  return j;
}

}  // namespace bigraphsum
