#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bigraphsum/bipartite.hpp"
#include "bigraphsum/corpus.hpp"
#include "bigraphsum/util.hpp"

namespace bigraphsum {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// Word vectors by vocab id; rows of tokens absent from the source file stay
// zero (the OOV policy).
struct EmbeddingTable {
  int d_w = 300;
  MatrixXd vectors;           // |vocab| × d_w
  double coverage = 0.0;      // fraction of vocab found in the source
  RowVectorXd row(int vocab_id) const { return vectors.row(vocab_id); }
};

// Text word-vector format: token followed by exactly d_w decimals per line.
inline EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, int d_w = 300) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  EmbeddingTable table;
  table.d_w = d_w;
  table.vectors = MatrixXd::Zero(static_cast<Eigen::Index>(vocab.size()), d_w);
  std::string line;
  std::size_t line_no = 0, hits = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    values.clear();
    double v;
    while (ls >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != d_w)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(d_w) + " components, got " +
                               std::to_string(values.size()));
    const int id = vocab.id_of(token);
    if (id < 0) continue;
    ++hits;
    for (int j = 0; j < d_w; ++j) table.vectors(id, j) = values[static_cast<std::size_t>(j)];
  }
  table.coverage = vocab.size() == 0 ? 0.0 : static_cast<double>(hits) / vocab.size();
  return table;
}

// Deterministic stand-in for a pretrained table: each token's row depends
// only on (seed, token bytes), so any vocab subset agrees with any other.
inline EmbeddingTable synthetic_embeddings(const Vocab& vocab, std::uint64_t seed, int d_w = 300) {
  EmbeddingTable table;
  table.d_w = d_w;
  table.vectors = MatrixXd::Zero(static_cast<Eigen::Index>(vocab.size()), d_w);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    Rng rng(mix_seed(seed, fnv1a64(vocab.tokens[i]), 0x73796e7468ULL));
    for (int j = 0; j < d_w; ++j) table.vectors(static_cast<Eigen::Index>(i), j) = 0.3 * rng.normal();
  }
  table.coverage = 1.0;
  return table;
}

struct InitializerDims {
  int d_w = 300;
  std::vector<int> kernels = {3, 4, 5};
  int maps = 30;         // feature maps per kernel size
  int lstm_hidden = 30;  // per direction
  int cnn_dim() const { return maps * static_cast<int>(kernels.size()); }
  int lstm_dim() const { return 2 * lstm_hidden; }
  int d_s() const { return cnn_dim() + lstm_dim(); }
};

struct ConvBank {
  int kernel = 0;
  MatrixXd W;  // (kernel·d_w) × maps
  MatrixXd b;  // 1 × maps
};

struct LstmDirection {
  MatrixXd Wi, Wf, Wo, Wg;  // d_w × hidden
  MatrixXd Ui, Uf, Uo, Ug;  // hidden × hidden
  MatrixXd bi, bf, bo, bg;  // 1 × hidden
};

// CNN n-gram filters plus BiLSTM gates; together they produce the d_s
// sentence feature [cnn ; lstm_fwd ; lstm_bwd].
struct InitializerParams {
  InitializerDims dims;
  std::vector<ConvBank> banks;
  LstmDirection fwd, bwd;

  explicit InitializerParams(InitializerDims d = {}) : dims(std::move(d)) {
    for (int k : dims.kernels) {
      ConvBank bank;
      bank.kernel = k;
      bank.W = MatrixXd::Zero(k * dims.d_w, dims.maps);
      bank.b = MatrixXd::Zero(1, dims.maps);
      banks.push_back(std::move(bank));
    }
    for (LstmDirection* dir : {&fwd, &bwd}) {
      const int h = dims.lstm_hidden;
      dir->Wi = dir->Wf = dir->Wo = dir->Wg = MatrixXd::Zero(dims.d_w, h);
      dir->Ui = dir->Uf = dir->Uo = dir->Ug = MatrixXd::Zero(h, h);
      dir->bi = dir->bf = dir->bo = dir->bg = MatrixXd::Zero(1, h);
    }
  }

  // Stable visitation order; drives init, Adam state and checkpoints.
  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t i = 0; i < banks.size(); ++i) {
      const std::string p = "init/cnn" + std::to_string(banks[i].kernel) + "/";
      f(p + "W", banks[i].W);
      f(p + "b", banks[i].b);
    }
    const char* names[2] = {"init/lstm_fwd/", "init/lstm_bwd/"};
    LstmDirection* dirs[2] = {&fwd, &bwd};
    for (int d = 0; d < 2; ++d) {
      const std::string p = names[d];
      f(p + "Wi", dirs[d]->Wi);
      f(p + "Wf", dirs[d]->Wf);
      f(p + "Wo", dirs[d]->Wo);
      f(p + "Wg", dirs[d]->Wg);
      f(p + "Ui", dirs[d]->Ui);
      f(p + "Uf", dirs[d]->Uf);
      f(p + "Uo", dirs[d]->Uo);
      f(p + "Ug", dirs[d]->Ug);
      f(p + "bi", dirs[d]->bi);
      f(p + "bf", dirs[d]->bf);
      f(p + "bo", dirs[d]->bo);
      f(p + "bg", dirs[d]->bg);
    }
  }

  void set_zero() {
    for_each_tensor([](const std::string&, MatrixXd& t) { t.setZero(); });
  }
};

// Glorot-uniform weights, zero biases; the fill order is the visitation order.
inline void init_random(InitializerParams& params, Rng& rng) {
  params.for_each_tensor([&](const std::string& name, MatrixXd& t) {
    const std::size_t slash = name.rfind('/');
    if (slash != std::string::npos && slash + 1 < name.size() && name[slash + 1] == 'b') {
      t.setZero();
      return;
    }
    const double a = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = a * (2.0 * rng.uniform() - 1.0);
  });
}

struct CnnCache {
  struct Bank {
    MatrixXd windows;         // positions × (kernel·d_w)
    MatrixXd pre;             // positions × maps
    std::vector<int> argmax;  // row of the max raw pre-activation, per map
  };
  std::vector<Bank> banks;
};

// 1-D convolutions with ReLU and max-over-time pooling, one bank per kernel
// size; sequences shorter than a kernel are zero-padded at the tail.
inline RowVectorXd cnn_sentence_feature(const MatrixXd& tokens, const InitializerParams& params,
                                        CnnCache* cache = nullptr) {
  const InitializerDims& d = params.dims;
  RowVectorXd out = RowVectorXd::Zero(d.cnn_dim());
  if (cache) cache->banks.assign(params.banks.size(), {});
  for (std::size_t bi = 0; bi < params.banks.size(); ++bi) {
    const ConvBank& bank = params.banks[bi];
    const int k = bank.kernel;
    const Eigen::Index L = tokens.rows();
    const Eigen::Index Lp = std::max<Eigen::Index>(L, k);
    MatrixXd padded = MatrixXd::Zero(Lp, d.d_w);
    padded.topRows(L) = tokens;
    const Eigen::Index P = Lp - k + 1;
    MatrixXd windows(P, static_cast<Eigen::Index>(k) * d.d_w);
    for (Eigen::Index p = 0; p < P; ++p)
      for (int r = 0; r < k; ++r)
        windows.block(p, static_cast<Eigen::Index>(r) * d.d_w, 1, d.d_w) = padded.row(p + r);
    MatrixXd pre = windows * bank.W;
    pre.rowwise() += bank.b.row(0);
    std::vector<int> argmax(static_cast<std::size_t>(d.maps), 0);
    for (int j = 0; j < d.maps; ++j) {
      Eigen::Index best = 0;
      pre.col(j).maxCoeff(&best);
      argmax[static_cast<std::size_t>(j)] = static_cast<int>(best);
      out(static_cast<int>(bi) * d.maps + j) = std::max(0.0, pre(best, j));
    }
    if (cache) {
      cache->banks[bi].windows = std::move(windows);
      cache->banks[bi].pre = std::move(pre);
      cache->banks[bi].argmax = std::move(argmax);
    }
  }
  return out;
}

// Accumulates parameter gradients for one sentence; inputs are frozen so no
// gradient flows to the token embeddings.
inline void cnn_backward(const CnnCache& cache, const InitializerParams& params,
                         const RowVectorXd& dout, InitializerParams& grads) {
  const InitializerDims& d = params.dims;
  for (std::size_t bi = 0; bi < params.banks.size(); ++bi) {
    const CnnCache::Bank& cb = cache.banks[bi];
    for (int j = 0; j < d.maps; ++j) {
      const double g = dout(static_cast<int>(bi) * d.maps + j);
      if (g == 0.0) continue;
      const int r = cb.argmax[static_cast<std::size_t>(j)];
      if (cb.pre(r, j) <= 0.0) continue;  // pooled through ReLU's flat side
      grads.banks[bi].W.col(j) += g * cb.windows.row(r).transpose();
      grads.banks[bi].b(0, j) += g;
    }
  }
}

struct LstmCache {
  struct Step {
    RowVectorXd x, i, f, o, g, c, tanh_c, h;
  };
  std::vector<Step> fwd, bwd;  // bwd runs over the reversed sequence
};

namespace detail {

inline RowVectorXd sigmoid(const RowVectorXd& v) {
  return v.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

inline void lstm_run(const MatrixXd& tokens, const LstmDirection& dir, bool reverse, int hidden,
                     std::vector<LstmCache::Step>* steps, RowVectorXd& final_h) {
  const Eigen::Index L = tokens.rows();
  RowVectorXd h = RowVectorXd::Zero(hidden), c = RowVectorXd::Zero(hidden);
  if (steps) steps->clear();
  for (Eigen::Index t = 0; t < L; ++t) {
    const Eigen::Index row = reverse ? L - 1 - t : t;
    const RowVectorXd x = tokens.row(row);
    LstmCache::Step s;
    s.x = x;
    s.i = sigmoid(x * dir.Wi + h * dir.Ui + dir.bi.row(0));
    s.f = sigmoid(x * dir.Wf + h * dir.Uf + dir.bf.row(0));
    s.o = sigmoid(x * dir.Wo + h * dir.Uo + dir.bo.row(0));
    s.g = (x * dir.Wg + h * dir.Ug + dir.bg.row(0)).array().tanh();
    s.c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.g);
    s.tanh_c = s.c.array().tanh();
    s.h = s.o.cwiseProduct(s.tanh_c);
    h = s.h;
    c = s.c;
    if (steps) steps->push_back(std::move(s));
  }
  final_h = h;
}

inline void lstm_backward_dir(const std::vector<LstmCache::Step>& steps, const LstmDirection& dir,
                              const RowVectorXd& dh_final, LstmDirection& g) {
  const int T = static_cast<int>(steps.size());
  RowVectorXd dh = dh_final;
  RowVectorXd dc = RowVectorXd::Zero(dh.size());
  for (int t = T - 1; t >= 0; --t) {
    const LstmCache::Step& s = steps[static_cast<std::size_t>(t)];
    const RowVectorXd c_prev =
        t > 0 ? steps[static_cast<std::size_t>(t - 1)].c : RowVectorXd::Zero(dh.size()).eval();
    const RowVectorXd h_prev =
        t > 0 ? steps[static_cast<std::size_t>(t - 1)].h : RowVectorXd::Zero(dh.size()).eval();
    const RowVectorXd d_o = dh.cwiseProduct(s.tanh_c);
    dc += dh.cwiseProduct(s.o)
              .cwiseProduct(RowVectorXd::Ones(dh.size()) - s.tanh_c.cwiseProduct(s.tanh_c));
    const RowVectorXd d_i = dc.cwiseProduct(s.g);
    const RowVectorXd d_f = dc.cwiseProduct(c_prev);
    const RowVectorXd d_g = dc.cwiseProduct(s.i);
    const RowVectorXd p_i =
        d_i.cwiseProduct(s.i).cwiseProduct(RowVectorXd::Ones(dh.size()) - s.i);
    const RowVectorXd p_f =
        d_f.cwiseProduct(s.f).cwiseProduct(RowVectorXd::Ones(dh.size()) - s.f);
    const RowVectorXd p_o =
        d_o.cwiseProduct(s.o).cwiseProduct(RowVectorXd::Ones(dh.size()) - s.o);
    const RowVectorXd p_g =
        d_g.cwiseProduct(RowVectorXd::Ones(dh.size()) - s.g.cwiseProduct(s.g));
    g.Wi += s.x.transpose() * p_i;
    g.Wf += s.x.transpose() * p_f;
    g.Wo += s.x.transpose() * p_o;
    g.Wg += s.x.transpose() * p_g;
    g.Ui += h_prev.transpose() * p_i;
    g.Uf += h_prev.transpose() * p_f;
    g.Uo += h_prev.transpose() * p_o;
    g.Ug += h_prev.transpose() * p_g;
    g.bi += p_i;
    g.bf += p_f;
    g.bo += p_o;
    g.bg += p_g;
    dh = p_i * dir.Ui.transpose() + p_f * dir.Uf.transpose() + p_o * dir.Uo.transpose() +
         p_g * dir.Ug.transpose();
    dc = dc.cwiseProduct(s.f);
  }
}

}  // namespace detail

// Concatenated final hidden states of the two directions.
inline RowVectorXd bilstm_sentence_feature(const MatrixXd& tokens, const InitializerParams& params,
                                           LstmCache* cache = nullptr) {
  const int h = params.dims.lstm_hidden;
  RowVectorXd out(2 * h), hf, hb;
  detail::lstm_run(tokens, params.fwd, false, h, cache ? &cache->fwd : nullptr, hf);
  detail::lstm_run(tokens, params.bwd, true, h, cache ? &cache->bwd : nullptr, hb);
  out << hf, hb;
  return out;
}

inline void bilstm_backward(const LstmCache& cache, const InitializerParams& params,
                            const RowVectorXd& dout, InitializerParams& grads) {
  const int h = params.dims.lstm_hidden;
  detail::lstm_backward_dir(cache.fwd, params.fwd, dout.segment(0, h), grads.fwd);
  detail::lstm_backward_dir(cache.bwd, params.bwd, dout.segment(h, h), grads.bwd);
}

// Embedding rows for a sentence's in-vocab tokens, occurrence order with
// duplicates kept. Sentences inside a graph always have at least one row.
inline MatrixXd sentence_token_matrix(const Sentence& sentence, const Vocab& vocab,
                                      const EmbeddingTable& table) {
  std::vector<int> ids;
  for (const std::string& t : sentence.graph_tokens) {
    const int id = vocab.id_of(t);
    if (id >= 0) ids.push_back(id);
  }
  MatrixXd rows(static_cast<Eigen::Index>(ids.size()), table.d_w);
  for (std::size_t i = 0; i < ids.size(); ++i)
    rows.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  return rows;
}

struct FeatureMatrices {
  MatrixXd words;      // n × d_w
  MatrixXd sentences;  // m × d_s
};

inline FeatureMatrices init_nodes(const BipartiteGraph& graph, const Document& doc,
                                  const Vocab& vocab, const EmbeddingTable& table,
                                  const InitializerParams& params) {
  FeatureMatrices feats;
  feats.words = MatrixXd::Zero(graph.n_words(), table.d_w);
  for (int w = 0; w < graph.n_words(); ++w)
    feats.words.row(w) = table.row(graph.word_vocab_ids[static_cast<std::size_t>(w)]);
  feats.sentences = MatrixXd::Zero(graph.n_sentences(), params.dims.d_s());
  for (int s = 0; s < graph.n_sentences(); ++s) {
    const Sentence& sent =
        doc.sentences[static_cast<std::size_t>(graph.sentence_indices[static_cast<std::size_t>(s)])];
    const MatrixXd tokens = sentence_token_matrix(sent, vocab, table);
    feats.sentences.row(s) << cnn_sentence_feature(tokens, params),
        bilstm_sentence_feature(tokens, params);
  }
  return feats;
}

// Sparse TF-IDF sentence rows over the full vocab, L2-normalized. All-OOV
// sentences keep a zero row.
struct SparseRows {
  int cols = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;  // sorted by column

  static double dot(const std::vector<std::pair<int, double>>& a,
                    const std::vector<std::pair<int, double>>& b) {
    double acc = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i].first < b[j].first)
        ++i;
      else if (a[i].first > b[j].first)
        ++j;
      else
        acc += a[i++].second * b[j++].second;
    }
    return acc;
  }
};

inline SparseRows tfidf_sentence_embedding(const Document& doc, const TfIdfStats& stats,
                                           const Vocab& vocab) {
  SparseRows out;
  out.cols = static_cast<int>(vocab.size());
  out.rows.resize(doc.sentences.size());
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    std::unordered_map<int, double> tf;
    for (const std::string& t : doc.sentences[s].graph_tokens) {
      const int id = vocab.id_of(t);
      if (id >= 0) tf[id] += 1.0;
    }
    auto& row = out.rows[s];
    for (const auto& [id, cnt] : tf)
      row.push_back({id, cnt * stats.idf(vocab.tokens[static_cast<std::size_t>(id)])});
    std::sort(row.begin(), row.end());
    double norm = 0;
    for (const auto& [id, v] : row) norm += v * v;
    if (norm > 0) {
      norm = std::sqrt(norm);
      for (auto& [id, v] : row) v /= norm;
    }
  }
  return out;
}

}  // namespace bigraphsum
