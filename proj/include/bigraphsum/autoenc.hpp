#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>
#include <zlib.h>

#include "bigraphsum/bipartite.hpp"
#include "bigraphsum/corpus.hpp"
#include "bigraphsum/features.hpp"
#include "bigraphsum/util.hpp"

namespace bigraphsum {

struct GcnDims {
  int d_w = 300;
  int d_s = 150;
  int d_h = 128;
  int d_z = 75;
};

struct ChannelParams {
  MatrixXd theta1;     // d_h × d_h
  MatrixXd theta_mu;   // d_h × d_z
  MatrixXd theta_sig;  // d_h × d_z
};

// Dual-channel encoder parameters: shared per-type input projections
// (bias-free), then per channel a propagation layer and two linear heads.
struct GcnParams {
  GcnDims dims;
  MatrixXd proj_word;  // d_w × d_h
  MatrixXd proj_sent;  // d_s × d_h
  ChannelParams inter, intra;

  explicit GcnParams(GcnDims d = {}) : dims(d) {
    proj_word = MatrixXd::Zero(d.d_w, d.d_h);
    proj_sent = MatrixXd::Zero(d.d_s, d.d_h);
    for (ChannelParams* c : {&inter, &intra}) {
      c->theta1 = MatrixXd::Zero(d.d_h, d.d_h);
      c->theta_mu = MatrixXd::Zero(d.d_h, d.d_z);
      c->theta_sig = MatrixXd::Zero(d.d_h, d.d_z);
    }
  }

  template <class F>
  void for_each_tensor(F&& f) {
    f(std::string("gcn/proj_word"), proj_word);
    f(std::string("gcn/proj_sent"), proj_sent);
    const char* names[2] = {"gcn/inter/", "gcn/intra/"};
    ChannelParams* cs[2] = {&inter, &intra};
    for (int i = 0; i < 2; ++i) {
      const std::string p = names[i];
      f(p + "theta1", cs[i]->theta1);
      f(p + "theta_mu", cs[i]->theta_mu);
      f(p + "theta_sig", cs[i]->theta_sig);
    }
  }

  void set_zero() {
    for_each_tensor([](const std::string&, MatrixXd& t) { t.setZero(); });
  }
};

inline void init_random(GcnParams& params, Rng& rng) {
  params.for_each_tensor([&](const std::string&, MatrixXd& t) {
    const double a = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = a * (2.0 * rng.uniform() - 1.0);
  });
}

// Every trainable tensor in one place; the visitation order is the on-disk
// tensor order.
struct Model {
  GcnParams gcn;
  InitializerParams init;

  explicit Model(GcnDims gd = {}, InitializerDims id = {}) : gcn(gd), init(std::move(id)) {}

  template <class F>
  void for_each_tensor(F&& f) {
    gcn.for_each_tensor(f);
    init.for_each_tensor(f);
  }

  void set_zero() {
    gcn.set_zero();
    init.set_zero();
  }
};

inline void init_random(Model& model, Rng& rng) {
  init_random(model.gcn, rng);
  init_random(model.init, rng);
}

// Propagation coefficients with self-loops, d̃_v = 1 + Σ incident weights.
// Intra: e_ij/√(d̃_i d̃_j), self 1/d̃_j. Inter: √d̃_i/√d̃_j·e_ij, self 1.
inline MatrixXd message_matrix_intra(const BipartiteGraph& g) {
  const int n = g.n_words(), N = g.n_nodes();
  VectorXd deg(N);
  for (int w = 0; w < n; ++w) deg(w) = 1.0 + g.word_degree(w);
  for (int s = 0; s < g.n_sentences(); ++s) deg(n + s) = 1.0 + g.sent_degree(s);
  MatrixXd m = MatrixXd::Zero(N, N);
  for (int v = 0; v < N; ++v) m(v, v) = 1.0 / deg(v);
  for (const BipartiteEdge& e : g.edges) {
    const int u = e.word, v = n + e.sent;
    const double c = e.weight / std::sqrt(deg(u) * deg(v));
    m(u, v) = c;
    m(v, u) = c;
  }
  return m;
}

inline MatrixXd message_matrix_inter(const BipartiteGraph& g) {
  const int n = g.n_words(), N = g.n_nodes();
  VectorXd deg(N);
  for (int w = 0; w < n; ++w) deg(w) = 1.0 + g.word_degree(w);
  for (int s = 0; s < g.n_sentences(); ++s) deg(n + s) = 1.0 + g.sent_degree(s);
  MatrixXd m = MatrixXd::Zero(N, N);
  for (int v = 0; v < N; ++v) m(v, v) = 1.0;
  for (const BipartiteEdge& e : g.edges) {
    const int u = e.word, v = n + e.sent;
    m(v, u) = std::sqrt(deg(u) / deg(v)) * e.weight;  // aggregate u into v
    m(u, v) = std::sqrt(deg(v) / deg(u)) * e.weight;
  }
  return m;
}

// Single linear propagation steps (the activation policy lives in encode).
inline MatrixXd gcn_intra_layer(const MatrixXd& h, const BipartiteGraph& g,
                                const MatrixXd& theta) {
  if (h.rows() != g.n_nodes() || h.cols() != theta.rows())
    throw std::invalid_argument("gcn_intra_layer: dimension mismatch");
  return message_matrix_intra(g) * h * theta;
}

inline MatrixXd gcn_inter_layer(const MatrixXd& h, const BipartiteGraph& g,
                                const MatrixXd& theta) {
  if (h.rows() != g.n_nodes() || h.cols() != theta.rows())
    throw std::invalid_argument("gcn_inter_layer: dimension mismatch");
  return message_matrix_inter(g) * h * theta;
}

// A document's graph plus everything the model consumes for it: propagation
// matrices, the dense reconstruction target, and frozen input features.
struct GraphInstance {
  std::string doc_id;
  BipartiteGraph graph;
  MatrixXd m_intra, m_inter;              // N×N
  MatrixXd target;                        // n×m: normalized weight or 0
  MatrixXd word_features;                 // n×d_w
  std::vector<MatrixXd> sentence_tokens;  // per graph sentence: len×d_w
  int doc_sentence_count = 0;

  static GraphInstance build(const Document& doc, const Vocab& vocab,
                             const EmbeddingTable& table) {
    GraphInstance inst;
    inst.doc_id = doc.id;
    inst.graph = build_graph(doc, vocab);
    inst.doc_sentence_count = static_cast<int>(doc.sentences.size());
    inst.word_features = MatrixXd::Zero(inst.graph.n_words(), table.d_w);
    for (int w = 0; w < inst.graph.n_words(); ++w)
      inst.word_features.row(w) = table.row(inst.graph.word_vocab_ids[static_cast<std::size_t>(w)]);
    for (int s = 0; s < inst.graph.n_sentences(); ++s) {
      const Sentence& sent = doc.sentences[static_cast<std::size_t>(
          inst.graph.sentence_indices[static_cast<std::size_t>(s)])];
      inst.sentence_tokens.push_back(sentence_token_matrix(sent, vocab, table));
    }
    inst.refresh_derived();
    return inst;
  }

  void refresh_derived() {
    m_intra = message_matrix_intra(graph);
    m_inter = message_matrix_inter(graph);
    target = MatrixXd::Zero(graph.n_words(), graph.n_sentences());
    for (const BipartiteEdge& e : graph.edges) target(e.word, e.sent) = e.weight;
  }

  // Copy with a set of edges dropped (weights of survivors kept); used by the
  // edge-prediction verification.
  GraphInstance with_edges_removed(const std::vector<int>& edge_ids) const {
    GraphInstance out = *this;
    std::vector<bool> drop(graph.edges.size(), false);
    for (int e : edge_ids) drop[static_cast<std::size_t>(e)] = true;
    out.graph.edges.clear();
    for (std::size_t e = 0; e < graph.edges.size(); ++e)
      if (!drop[e]) out.graph.edges.push_back(graph.edges[e]);
    out.graph.rebuild_adjacency();
    out.refresh_derived();
    return out;
  }
};

struct TrainConfig {
  double lr = 5e-5;
  int batch_size = 8;
  double dropout = 0.1;
  int warmup_steps = 8000;
  int total_steps = 210000;
  double kl_coeff = -1.0;  // < 0: per-graph default 1/(N·2d_z)
  bool literal_objective = false;  // mse − κ·kl, inspection only
  bool freeze_initializer = false;
  std::uint64_t seed = 0;
  int jobs = 1;
};

inline double kl_coefficient(const TrainConfig& cfg, int n_nodes, int d_z) {
  if (cfg.kl_coeff >= 0.0) return cfg.kl_coeff;
  return 1.0 / (static_cast<double>(n_nodes) * 2.0 * d_z);
}

enum class Mode { train, eval };

struct ChannelState {
  MatrixXd mh0;   // M·H0, reused for the θ₁ gradient
  MatrixXd a1;    // pre-activation
  MatrixXd mask;  // inverted-dropout mask (train mode)
  MatrixXd d1;    // post ReLU+dropout
  MatrixXd md1;   // M·D1, reused for head gradients
  MatrixXd mu, logvar, eps, z;
};

struct LatentState {
  ChannelState inter, intra;
  MatrixXd z;  // N × 2d_z, columns [inter ; intra]
};

struct LossParts {
  double mse = 0, kl = 0, total = 0, kappa = 0;
};

struct ForwardPass {
  Mode mode = Mode::eval;
  MatrixXd sentence_features;  // m × d_s
  MatrixXd h0;                 // N × d_h
  LatentState latent;
  MatrixXd phat;  // n × m
  LossParts loss;
  std::vector<CnnCache> cnn_caches;
  std::vector<LstmCache> lstm_caches;
};

inline MatrixXd decode(const MatrixXd& zcat, int n_words, int n_sentences) {
  const MatrixXd logits = zcat.topRows(n_words) * zcat.bottomRows(n_sentences).transpose();
  return logits.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

inline LossParts reconstruction_loss(const MatrixXd& phat, const MatrixXd& target,
                                     const LatentState& latent, double kappa,
                                     bool literal_objective) {
  LossParts parts;
  parts.kappa = kappa;
  parts.mse = (phat - target).squaredNorm() / static_cast<double>(phat.size());
  for (const ChannelState* c : {&latent.inter, &latent.intra})
    parts.kl += 0.5 * (c->mu.array().square() + c->logvar.array().exp() - 1.0 -
                       c->logvar.array())
                          .sum();
  parts.total = literal_objective ? parts.mse - kappa * parts.kl : parts.mse + kappa * parts.kl;
  return parts;
}

namespace detail {

inline void run_channel(const MatrixXd& m, const MatrixXd& h0, const ChannelParams& p,
                        Mode mode, double dropout, Rng* rng, const ChannelState* replay,
                        ChannelState& st) {
  st.mh0 = m * h0;
  st.a1 = st.mh0 * p.theta1;
  MatrixXd r1 = st.a1.cwiseMax(0.0);
  if (mode == Mode::train && dropout > 0.0) {
    if (replay) {
      st.mask = replay->mask;
    } else {
      st.mask = MatrixXd::Zero(r1.rows(), r1.cols());
      const double keep = 1.0 - dropout;
      for (Eigen::Index r = 0; r < r1.rows(); ++r)
        for (Eigen::Index c = 0; c < r1.cols(); ++c)
          st.mask(r, c) = rng->uniform() < keep ? 1.0 / keep : 0.0;
    }
    st.d1 = r1.cwiseProduct(st.mask);
  } else {
    st.mask.resize(0, 0);
    st.d1 = std::move(r1);
  }
  st.md1 = m * st.d1;
  st.mu = st.md1 * p.theta_mu;
  st.logvar = st.md1 * p.theta_sig;
  if (mode == Mode::train) {
    if (replay) {
      st.eps = replay->eps;
    } else {
      st.eps = MatrixXd::Zero(st.mu.rows(), st.mu.cols());
      for (Eigen::Index r = 0; r < st.eps.rows(); ++r)
        for (Eigen::Index c = 0; c < st.eps.cols(); ++c) st.eps(r, c) = rng->normal();
    }
    st.z = st.mu + (st.logvar.array() * 0.5).exp().matrix().cwiseProduct(st.eps);
  } else {
    st.eps.resize(0, 0);
    st.z = st.mu;
  }
}

}  // namespace detail

// Full forward pass: sentence features from the initializer, both channels,
// decode, loss. Train mode draws dropout masks and latent noise from `rng`
// (draw order: inter then intra) unless `replay` supplies a previous pass's
// draws, which makes the pass a pure function of the parameters.
inline ForwardPass model_forward(const GraphInstance& inst, Model& model, const TrainConfig& cfg,
                                 Mode mode, Rng* rng = nullptr,
                                 const ForwardPass* replay = nullptr) {
  const BipartiteGraph& g = inst.graph;
  const int n = g.n_words(), m = g.n_sentences(), N = g.n_nodes();
  ForwardPass fp;
  fp.mode = mode;

  const bool want_caches = mode == Mode::train && !cfg.freeze_initializer;
  fp.sentence_features = MatrixXd::Zero(m, model.init.dims.d_s());
  if (want_caches) {
    fp.cnn_caches.resize(static_cast<std::size_t>(m));
    fp.lstm_caches.resize(static_cast<std::size_t>(m));
  }
  for (int s = 0; s < m; ++s) {
    const MatrixXd& toks = inst.sentence_tokens[static_cast<std::size_t>(s)];
    fp.sentence_features.row(s) << cnn_sentence_feature(
        toks, model.init, want_caches ? &fp.cnn_caches[static_cast<std::size_t>(s)] : nullptr),
        bilstm_sentence_feature(
            toks, model.init, want_caches ? &fp.lstm_caches[static_cast<std::size_t>(s)] : nullptr);
  }

  fp.h0 = MatrixXd::Zero(N, model.gcn.dims.d_h);
  fp.h0.topRows(n) = inst.word_features * model.gcn.proj_word;
  fp.h0.bottomRows(m) = fp.sentence_features * model.gcn.proj_sent;

  if (mode == Mode::train && rng == nullptr && replay == nullptr)
    throw std::invalid_argument("model_forward: train mode needs an rng or a replay pass");
  detail::run_channel(inst.m_inter, fp.h0, model.gcn.inter, mode, cfg.dropout, rng,
                      replay ? &replay->latent.inter : nullptr, fp.latent.inter);
  detail::run_channel(inst.m_intra, fp.h0, model.gcn.intra, mode, cfg.dropout, rng,
                      replay ? &replay->latent.intra : nullptr, fp.latent.intra);

  const int d_z = model.gcn.dims.d_z;
  fp.latent.z = MatrixXd::Zero(N, 2 * d_z);
  fp.latent.z.leftCols(d_z) = fp.latent.inter.z;
  fp.latent.z.rightCols(d_z) = fp.latent.intra.z;

  if (!fp.latent.z.allFinite()) throw std::runtime_error("numerical blowup in encode");

  fp.phat = decode(fp.latent.z, n, m);
  fp.loss = reconstruction_loss(fp.phat, inst.target, fp.latent,
                                kl_coefficient(cfg, N, d_z), cfg.literal_objective);
  return fp;
}

// Standalone encode: latent state from precomputed node features.
inline LatentState encode(const GraphInstance& inst, const FeatureMatrices& x,
                          const GcnParams& params, Mode mode, Rng* rng = nullptr,
                          double dropout = 0.0) {
  const int n = inst.graph.n_words(), m = inst.graph.n_sentences(), N = inst.graph.n_nodes();
  MatrixXd h0 = MatrixXd::Zero(N, params.dims.d_h);
  h0.topRows(n) = x.words * params.proj_word;
  h0.bottomRows(m) = x.sentences * params.proj_sent;
  LatentState latent;
  detail::run_channel(inst.m_inter, h0, params.inter, mode, dropout, rng, nullptr, latent.inter);
  detail::run_channel(inst.m_intra, h0, params.intra, mode, dropout, rng, nullptr, latent.intra);
  latent.z = MatrixXd::Zero(N, 2 * params.dims.d_z);
  latent.z.leftCols(params.dims.d_z) = latent.inter.z;
  latent.z.rightCols(params.dims.d_z) = latent.intra.z;
  if (!latent.z.allFinite()) throw std::runtime_error("numerical blowup in encode");
  return latent;
}

namespace detail {

inline void backward_channel(const MatrixXd& m, const ChannelParams& p,
                             const ChannelState& st, const MatrixXd& dz, double kappa,
                             double kl_sign, Mode mode, ChannelParams& gp, MatrixXd& dh0) {
  MatrixXd dmu = dz;
  MatrixXd dlogvar;
  if (mode == Mode::train && st.eps.size() > 0) {
    dlogvar = 0.5 * dz.cwiseProduct(st.eps)
                        .cwiseProduct((st.logvar.array() * 0.5).exp().matrix());
  } else {
    dlogvar = MatrixXd::Zero(st.logvar.rows(), st.logvar.cols());
  }
  dmu += kl_sign * kappa * st.mu;
  dlogvar += kl_sign * kappa * 0.5 * (st.logvar.array().exp() - 1.0).matrix();

  gp.theta_mu += st.md1.transpose() * dmu;
  gp.theta_sig += st.md1.transpose() * dlogvar;
  MatrixXd dd1 = m.transpose() * (dmu * p.theta_mu.transpose() + dlogvar * p.theta_sig.transpose());
  if (st.mask.size() > 0) dd1 = dd1.cwiseProduct(st.mask);
  const MatrixXd da1 =
      dd1.cwiseProduct((st.a1.array() > 0.0).cast<double>().matrix());
  gp.theta1 += st.mh0.transpose() * da1;
  dh0 += m.transpose() * (da1 * p.theta1.transpose());
}

}  // namespace detail

// Hand-derived reverse pass for the recorded forward; gradients accumulate
// into `grads` (callers zero it per batch).
inline void model_backward(const GraphInstance& inst, Model& model, const ForwardPass& fp,
                           const TrainConfig& cfg, Model& grads) {
  const BipartiteGraph& g = inst.graph;
  const int n = g.n_words(), m = g.n_sentences();
  const int d_z = model.gcn.dims.d_z;
  const double kl_sign = cfg.literal_objective ? -1.0 : 1.0;

  // decoder: mse over all pairs, then sigmoid
  MatrixXd dlogits = (2.0 / static_cast<double>(fp.phat.size())) * (fp.phat - inst.target);
  dlogits = dlogits.cwiseProduct(fp.phat).cwiseProduct(
      (MatrixXd::Ones(n, m) - fp.phat));
  const MatrixXd zw = fp.latent.z.topRows(n);
  const MatrixXd zs = fp.latent.z.bottomRows(m);
  MatrixXd dz = MatrixXd::Zero(g.n_nodes(), 2 * d_z);
  dz.topRows(n) = dlogits * zs;
  dz.bottomRows(m) = dlogits.transpose() * zw;

  MatrixXd dh0 = MatrixXd::Zero(fp.h0.rows(), fp.h0.cols());
  detail::backward_channel(inst.m_inter, model.gcn.inter, fp.latent.inter, dz.leftCols(d_z),
                           fp.loss.kappa, kl_sign, fp.mode, grads.gcn.inter, dh0);
  detail::backward_channel(inst.m_intra, model.gcn.intra, fp.latent.intra, dz.rightCols(d_z),
                           fp.loss.kappa, kl_sign, fp.mode, grads.gcn.intra, dh0);

  grads.gcn.proj_word += inst.word_features.transpose() * dh0.topRows(n);
  grads.gcn.proj_sent += fp.sentence_features.transpose() * dh0.bottomRows(m);

  if (!cfg.freeze_initializer && !fp.cnn_caches.empty()) {
    const MatrixXd dxs = dh0.bottomRows(m) * model.gcn.proj_sent.transpose();
    const int cnn_dim = model.init.dims.cnn_dim();
    const int lstm_dim = model.init.dims.lstm_dim();
    for (int s = 0; s < m; ++s) {
      const RowVectorXd row = dxs.row(s);
      cnn_backward(fp.cnn_caches[static_cast<std::size_t>(s)], model.init,
                   row.segment(0, cnn_dim), grads.init);
      bilstm_backward(fp.lstm_caches[static_cast<std::size_t>(s)], model.init,
                      row.segment(cnn_dim, lstm_dim), grads.init);
    }
  }
}

// Adam with bias correction and linear warmup; state keyed by tensor name.
struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;  // updates applied
  std::unordered_map<std::string, std::pair<MatrixXd, MatrixXd>> mv;

  void apply(Model& model, Model& grads, double lr_t) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    std::unordered_map<std::string, MatrixXd*> gmap;
    grads.for_each_tensor([&](const std::string& name, MatrixXd& g) { gmap[name] = &g; });
    model.for_each_tensor([&](const std::string& name, MatrixXd& p) {
      const MatrixXd& g = *gmap.at(name);
      auto [it, fresh] = mv.try_emplace(name, MatrixXd::Zero(p.rows(), p.cols()),
                                        MatrixXd::Zero(p.rows(), p.cols()));
      MatrixXd& m = it->second.first;
      MatrixXd& v = it->second.second;
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
      p -= (lr_t * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
    });
  }
};

inline double warmup_lr(const TrainConfig& cfg, int step_1based) {
  if (cfg.warmup_steps <= 0) return cfg.lr;
  return cfg.lr * std::min(1.0, static_cast<double>(step_1based) / cfg.warmup_steps);
}

struct StepMetrics {
  double mse = 0, kl = 0, total = 0, lr = 0;
};

// One optimizer step over a batch: per-graph forward/backward (optionally in
// parallel), then gradient accumulation and the Adam update in fixed batch
// order so results are bit-deterministic for a given seed.
inline StepMetrics train_step(const std::vector<const GraphInstance*>& batch, Model& model,
                              AdamState& opt, const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const int step = opt.t + 1;
  const std::size_t B = batch.size();

  std::vector<Model> grads(B, Model(model.gcn.dims, model.init.dims));
  std::vector<LossParts> losses(B);
  std::string blowup_doc;
  std::mutex blowup_mu;
  parallel_for(B, cfg.jobs, [&](std::size_t i) {
    try {
      Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step), fnv1a64(batch[i]->doc_id)));
      ForwardPass fp = model_forward(*batch[i], model, cfg, Mode::train, &rng);
      if (!std::isfinite(fp.loss.total)) throw std::runtime_error("non-finite loss");
      losses[i] = fp.loss;
      model_backward(*batch[i], model, fp, cfg, grads[i]);
    } catch (const std::exception&) {
      std::lock_guard<std::mutex> lk(blowup_mu);
      if (blowup_doc.empty()) blowup_doc = batch[i]->doc_id;
    }
  });
  if (!blowup_doc.empty())
    throw std::runtime_error("train_step: non-finite loss on document " + blowup_doc);

  Model acc(model.gcn.dims, model.init.dims);
  std::unordered_map<std::string, MatrixXd*> amap;
  acc.for_each_tensor([&](const std::string& name, MatrixXd& t) { amap[name] = &t; });
  for (std::size_t i = 0; i < B; ++i)
    grads[i].for_each_tensor(
        [&](const std::string& name, MatrixXd& g) { *amap.at(name) += g; });
  const double inv = 1.0 / static_cast<double>(B);
  acc.for_each_tensor([&](const std::string&, MatrixXd& t) { t *= inv; });

  StepMetrics metrics;
  metrics.lr = warmup_lr(cfg, step);
  for (const LossParts& l : losses) {
    metrics.mse += l.mse * inv;
    metrics.kl += l.kl * inv;
    metrics.total += l.total * inv;
  }
  opt.apply(model, acc, metrics.lr);
  return metrics;
}

// ---------------------------------------------------------------------------
// checkpoint format: "BIGAE\x01", length-prefixed JSON config, per-tensor
// records (length-prefixed name, u32 rank, u32 dims, row-major LE f32), then
// CRC32 of everything before it.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

struct Checkpoint {
  Model model;
  AdamState opt;
  TrainConfig config;
  int step = 0;
  int format_version = 1;
  std::string config_hash;

  Checkpoint() : model() {}
  explicit Checkpoint(Model m) : model(std::move(m)) {}
};

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.append(b, 4);
}

inline void put_tensor(std::string& buf, const std::string& name, const MatrixXd& t) {
  put_u32(buf, static_cast<std::uint32_t>(name.size()));
  buf.append(name);
  put_u32(buf, 2);
  put_u32(buf, static_cast<std::uint32_t>(t.rows()));
  put_u32(buf, static_cast<std::uint32_t>(t.cols()));
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      const float f = static_cast<float>(t(r, c));
      char b[4];
      std::memcpy(b, &f, 4);
      buf.append(b, 4);
    }
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;
  explicit ByteReader(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

inline void read_tensor_into(ByteReader& r, std::unordered_map<std::string, MatrixXd*>& slots) {
  const std::uint32_t name_len = r.u32();
  const std::string name = r.bytes(name_len);
  const std::uint32_t rank = r.u32();
  if (rank != 2) throw std::runtime_error("checkpoint: unsupported tensor rank for " + name);
  const std::uint32_t rows = r.u32(), cols = r.u32();
  auto it = slots.find(name);
  if (it == slots.end()) throw std::runtime_error("checkpoint: unknown tensor " + name);
  MatrixXd& t = *it->second;
  if (t.rows() != rows || t.cols() != cols)
    throw std::runtime_error("checkpoint: shape mismatch for " + name);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      float f;
      std::memcpy(&f, r.bytes(4).data(), 4);
      t(i, j) = static_cast<double>(f);
    }
  slots.erase(it);
}

}  // namespace detail

inline std::string serialize_checkpoint(Checkpoint& ckpt) {
  nlohmann::json cfg;
  cfg["format_version"] = ckpt.format_version;
  cfg["step"] = ckpt.step;
  cfg["adam_t"] = ckpt.opt.t;
  cfg["d_w"] = ckpt.model.gcn.dims.d_w;
  cfg["d_s"] = ckpt.model.gcn.dims.d_s;
  cfg["d_h"] = ckpt.model.gcn.dims.d_h;
  cfg["d_z"] = ckpt.model.gcn.dims.d_z;
  cfg["kernels"] = ckpt.model.init.dims.kernels;
  cfg["maps"] = ckpt.model.init.dims.maps;
  cfg["lstm_hidden"] = ckpt.model.init.dims.lstm_hidden;
  cfg["lr"] = ckpt.config.lr;
  cfg["batch_size"] = ckpt.config.batch_size;
  cfg["dropout"] = ckpt.config.dropout;
  cfg["warmup_steps"] = ckpt.config.warmup_steps;
  cfg["total_steps"] = ckpt.config.total_steps;
  cfg["kl_coeff"] = ckpt.config.kl_coeff;
  cfg["literal_objective"] = ckpt.config.literal_objective;
  cfg["freeze_initializer"] = ckpt.config.freeze_initializer;
  cfg["seed"] = ckpt.config.seed;
  cfg["config_hash"] = ckpt.config_hash;
  const std::string cfg_str = cfg.dump();

  std::string buf;
  buf.append("BIGAE\x01", 6);
  detail::put_u32(buf, static_cast<std::uint32_t>(cfg_str.size()));
  buf.append(cfg_str);
  ckpt.model.for_each_tensor(
      [&](const std::string& name, MatrixXd& t) { detail::put_tensor(buf, name, t); });
  ckpt.model.for_each_tensor([&](const std::string& name, MatrixXd& t) {
    auto it = ckpt.opt.mv.find(name);
    if (it == ckpt.opt.mv.end()) {
      MatrixXd zero = MatrixXd::Zero(t.rows(), t.cols());
      detail::put_tensor(buf, "opt/m/" + name, zero);
      detail::put_tensor(buf, "opt/v/" + name, zero);
    } else {
      detail::put_tensor(buf, "opt/m/" + name, it->second.first);
      detail::put_tensor(buf, "opt/v/" + name, it->second.second);
    }
  });
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
  detail::put_u32(buf, crc);
  return buf;
}

inline void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
  const std::string buf = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 10 || buf.compare(0, 6, "BIGAE\x01", 6) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  const std::uint32_t crc = static_cast<std::uint32_t>(crc32(
      0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
  if (crc != stored_crc) throw std::runtime_error("checkpoint corrupted (CRC mismatch): " + path);

  detail::ByteReader r(buf);
  r.pos = 6;
  const std::uint32_t cfg_len = r.u32();
  const nlohmann::json cfg = nlohmann::json::parse(r.bytes(cfg_len));

  GcnDims gd;
  gd.d_w = cfg.at("d_w").get<int>();
  gd.d_s = cfg.at("d_s").get<int>();
  gd.d_h = cfg.at("d_h").get<int>();
  gd.d_z = cfg.at("d_z").get<int>();
  InitializerDims id;
  id.d_w = gd.d_w;
  id.kernels = cfg.at("kernels").get<std::vector<int>>();
  id.maps = cfg.at("maps").get<int>();
  id.lstm_hidden = cfg.at("lstm_hidden").get<int>();

  Checkpoint ckpt{Model(gd, id)};
  ckpt.format_version = cfg.at("format_version").get<int>();
  ckpt.step = cfg.at("step").get<int>();
  ckpt.opt.t = cfg.at("adam_t").get<int>();
  ckpt.config.lr = cfg.at("lr").get<double>();
  ckpt.config.batch_size = cfg.at("batch_size").get<int>();
  ckpt.config.dropout = cfg.at("dropout").get<double>();
  ckpt.config.warmup_steps = cfg.at("warmup_steps").get<int>();
  ckpt.config.total_steps = cfg.at("total_steps").get<int>();
  ckpt.config.kl_coeff = cfg.at("kl_coeff").get<double>();
  ckpt.config.literal_objective = cfg.at("literal_objective").get<bool>();
  ckpt.config.freeze_initializer = cfg.at("freeze_initializer").get<bool>();
  ckpt.config.seed = cfg.at("seed").get<std::uint64_t>();
  ckpt.config_hash = cfg.value("config_hash", std::string());

  std::unordered_map<std::string, MatrixXd*> slots;
  ckpt.model.for_each_tensor([&](const std::string& name, MatrixXd& t) {
    slots[name] = &t;
    auto [it, fresh] = ckpt.opt.mv.try_emplace(name, MatrixXd::Zero(t.rows(), t.cols()),
                                               MatrixXd::Zero(t.rows(), t.cols()));
    slots["opt/m/" + name] = &it->second.first;
    slots["opt/v/" + name] = &it->second.second;
  });
  while (r.pos < buf.size() - 4) detail::read_tensor_into(r, slots);
  if (!slots.empty()) throw std::runtime_error("checkpoint missing tensors");
  return ckpt;
}

// ---------------------------------------------------------------------------
// training driver and downstream exports
// ---------------------------------------------------------------------------

// Seeded shuffled batching over the graph list until total_steps; logs
// key=value metric lines and optionally writes periodic checkpoints.
inline Checkpoint pretrain(const std::vector<GraphInstance>& graphs, const TrainConfig& cfg,
                           GcnDims gcn_dims = {}, InitializerDims init_dims = {},
                           std::ostream* log = nullptr, int log_every = 100,
                           const std::string& checkpoint_prefix = "", int checkpoint_every = 0,
                           int validate_every = 0) {
  if (graphs.empty()) throw std::invalid_argument("pretrain: no graphs");
  Checkpoint ckpt{Model(gcn_dims, std::move(init_dims))};
  Rng init_rng(mix_seed(cfg.seed, 0, 0x696e6974ULL));
  init_random(ckpt.model, init_rng);
  ckpt.config = cfg;

  // validation subset: a seeded sample of up to 10% (at least 1, at most 32)
  std::vector<const GraphInstance*> val;
  {
    Rng vr(mix_seed(cfg.seed, 0, 0x76616cULL));
    std::size_t want = std::min<std::size_t>(32, std::max<std::size_t>(1, graphs.size() / 10));
    for (std::size_t i : vr.sample_without_replacement(graphs.size(), want))
      val.push_back(&graphs[i]);
  }
  auto validation_mse = [&]() {
    double acc = 0;
    for (const GraphInstance* g : val) {
      ForwardPass fp = model_forward(*g, ckpt.model, cfg, Mode::eval);
      acc += fp.loss.mse;
    }
    return acc / static_cast<double>(val.size());
  };

  std::vector<std::size_t> order(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();  // forces a shuffle on first use
  std::uint64_t epoch = 0;

  for (int step = 1; step <= cfg.total_steps; ++step) {
    std::vector<const GraphInstance*> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor >= order.size()) {
        Rng sr(mix_seed(cfg.seed, ++epoch, 0x73687566ULL));
        sr.shuffle(order);
        cursor = 0;
      }
      batch.push_back(&graphs[order[cursor++]]);
    }
    const StepMetrics m = train_step(batch, ckpt.model, ckpt.opt, cfg);
    ckpt.step = ckpt.opt.t;
    if (log && (step % log_every == 0 || step == 1 || step == cfg.total_steps))
      (*log) << "step=" << step << " mse=" << m.mse << " kl=" << m.kl << " total=" << m.total
             << " lr=" << m.lr << "\n";
    if (log && validate_every > 0 && step % validate_every == 0)
      (*log) << "step=" << step << " val_mse=" << validation_mse() << "\n";
    if (!checkpoint_prefix.empty() && checkpoint_every > 0 && step % checkpoint_every == 0)
      save_checkpoint(checkpoint_prefix + "-" + std::to_string(step) + ".bigae", ckpt);
  }
  ckpt.step = ckpt.opt.t;
  return ckpt;
}

// Eval-mode sentence embeddings: concatenated μ rows [inter;intra] for the
// sentence nodes, mapped back to document sentence positions (sentences that
// fell out of the graph get zero rows). Documents whose graph has no
// sentences at all are degenerate and raise.
inline MatrixXd embed_sentences(const Document& doc, const Vocab& vocab,
                                const EmbeddingTable& table, Checkpoint& ckpt) {
  GraphInstance inst = GraphInstance::build(doc, vocab, table);
  if (inst.graph.n_sentences() == 0)
    throw std::runtime_error("degenerate graph for document " + doc.id +
                             ": no sentence has in-vocab tokens");
  ForwardPass fp = model_forward(inst, ckpt.model, ckpt.config, Mode::eval);
  const int d_z = ckpt.model.gcn.dims.d_z;
  MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(doc.sentences.size()), 2 * d_z);
  for (int s = 0; s < inst.graph.n_sentences(); ++s) {
    const int doc_pos = inst.graph.sentence_indices[static_cast<std::size_t>(s)];
    out.row(doc_pos).leftCols(d_z) = fp.latent.inter.mu.row(inst.graph.n_words() + s);
    out.row(doc_pos).rightCols(d_z) = fp.latent.intra.mu.row(inst.graph.n_words() + s);
  }
  return out;
}

// Balanced held-out edge existence accuracy, pooled over the corpus: drop a
// seeded fraction of each graph's edges, encode the reduced graph, and
// score p̂ > 0.5 on the held-out pairs versus an equal-sized non-edge sample.
inline double edge_prediction_accuracy(const std::vector<GraphInstance>& graphs, Checkpoint& ckpt,
                                       double holdout_frac = 0.10, std::uint64_t seed = 0) {
  std::size_t correct = 0, total = 0;
  for (const GraphInstance& inst : graphs) {
    const int E = static_cast<int>(inst.graph.edges.size());
    if (E < 2) continue;
    int k = std::max(1, static_cast<int>(holdout_frac * E));
    k = std::min(k, E - 1);
    Rng rng(mix_seed(seed, fnv1a64(inst.doc_id), 0x686f6c64ULL));
    std::vector<std::size_t> held =
        rng.sample_without_replacement(static_cast<std::size_t>(E), static_cast<std::size_t>(k));
    std::vector<int> held_ids(held.begin(), held.end());

    // non-edge pool from the original graph
    std::vector<std::pair<int, int>> non_edges;
    for (int w = 0; w < inst.graph.n_words(); ++w)
      for (int s = 0; s < inst.graph.n_sentences(); ++s)
        if (inst.target(w, s) == 0.0) non_edges.push_back({w, s});
    if (non_edges.empty()) continue;
    std::vector<std::pair<int, int>> neg;
    if (non_edges.size() <= static_cast<std::size_t>(k)) {
      neg = non_edges;
    } else {
      for (std::size_t i :
           rng.sample_without_replacement(non_edges.size(), static_cast<std::size_t>(k)))
        neg.push_back(non_edges[i]);
    }

    GraphInstance reduced = inst.with_edges_removed(held_ids);
    ForwardPass fp = model_forward(reduced, ckpt.model, ckpt.config, Mode::eval);
    for (int e : held_ids) {
      const BipartiteEdge& edge = inst.graph.edges[static_cast<std::size_t>(e)];
      correct += fp.phat(edge.word, edge.sent) > 0.5 ? 1 : 0;
      ++total;
    }
    for (auto [w, s] : neg) {
      correct += fp.phat(w, s) > 0.5 ? 0 : 1;
      ++total;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace bigraphsum
