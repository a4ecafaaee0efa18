#include <bigraphsum/autoenc.hpp>

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "support/fixtures.hpp"

using namespace bigraphsum;

namespace {

GcnDims small_gcn() {
  GcnDims d;
  d.d_w = 4;
  d.d_s = 6;  // = cnn 2 + lstm 4 below
  d.d_h = 6;
  d.d_z = 3;
  return d;
}

InitializerDims small_init() {
  InitializerDims d;
  d.d_w = 4;
  d.kernels = {2};
  d.maps = 2;
  d.lstm_hidden = 2;
  return d;
}

struct SmallSetup {
  Corpus corpus;
  Vocab vocab;
  EmbeddingTable table;
  GraphInstance inst;
};

SmallSetup small_setup() {
  SmallSetup s;
  s.corpus.push_back(fixtures::fd_document());
  s.vocab = build_vocab(s.corpus, 50000, 0.0);
  s.table = synthetic_embeddings(s.vocab, 11, 4);
  s.inst = GraphInstance::build(s.corpus[0], s.vocab, s.table);
  return s;
}

Model random_model(std::uint64_t seed) {
  Model model(small_gcn(), small_init());
  Rng rng(seed);
  init_random(model, rng);
  return model;
}

Vocab three_vocab() {
  Vocab v;
  for (const char* t : {"qaa", "qbb", "qcc"}) {
    v.ids.emplace(t, static_cast<int>(v.tokens.size()));
    v.tokens.push_back(t);
    v.doc_freq.push_back(1);
    v.corpus_tfidf.push_back(1.0);
  }
  return v;
}

// Relabel graph nodes: wp[w] / sp[s] give each node's new position.
GraphInstance permute_instance(const GraphInstance& inst, const std::vector<int>& wp,
                               const std::vector<int>& sp) {
  const int n = inst.graph.n_words(), m = inst.graph.n_sentences();
  GraphInstance out = inst;
  out.graph.word_vocab_ids.assign(static_cast<std::size_t>(n), 0);
  out.graph.word_tokens.assign(static_cast<std::size_t>(n), "");
  out.graph.sentence_indices.assign(static_cast<std::size_t>(m), 0);
  out.graph.word_pos_by_vocab_id.clear();
  out.graph.sent_pos_by_index.clear();
  out.word_features = MatrixXd::Zero(n, inst.word_features.cols());
  out.sentence_tokens.assign(static_cast<std::size_t>(m), {});
  for (int w = 0; w < n; ++w) {
    const int to = wp[static_cast<std::size_t>(w)];
    out.graph.word_vocab_ids[static_cast<std::size_t>(to)] =
        inst.graph.word_vocab_ids[static_cast<std::size_t>(w)];
    out.graph.word_tokens[static_cast<std::size_t>(to)] =
        inst.graph.word_tokens[static_cast<std::size_t>(w)];
    out.word_features.row(to) = inst.word_features.row(w);
  }
  for (int s = 0; s < m; ++s) {
    const int to = sp[static_cast<std::size_t>(s)];
    out.graph.sentence_indices[static_cast<std::size_t>(to)] =
        inst.graph.sentence_indices[static_cast<std::size_t>(s)];
    out.sentence_tokens[static_cast<std::size_t>(to)] =
        inst.sentence_tokens[static_cast<std::size_t>(s)];
  }
  for (std::size_t i = 0; i < out.graph.word_vocab_ids.size(); ++i)
    out.graph.word_pos_by_vocab_id[out.graph.word_vocab_ids[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < out.graph.sentence_indices.size(); ++i)
    out.graph.sent_pos_by_index[out.graph.sentence_indices[i]] = static_cast<int>(i);
  out.graph.edges.clear();
  for (const BipartiteEdge& e : inst.graph.edges)
    out.graph.edges.push_back({wp[static_cast<std::size_t>(e.word)],
                               sp[static_cast<std::size_t>(e.sent)], e.weight});
  std::sort(out.graph.edges.begin(), out.graph.edges.end(),
            [](const BipartiteEdge& a, const BipartiteEdge& b) {
              return std::pair(a.word, a.sent) < std::pair(b.word, b.sent);
            });
  out.graph.rebuild_adjacency();
  out.refresh_derived();
  return out;
}

}  // namespace

TEST_CASE("message matrices carry the stated coefficients", "[autoenc]") {
  BipartiteGraph g;
  g.doc_id = "mm";
  g.word_vocab_ids = {0, 1};
  g.word_tokens = {"wa", "wb"};
  g.word_pos_by_vocab_id = {{0, 0}, {1, 1}};
  g.sentence_indices = {0};
  g.sent_pos_by_index = {{0, 0}};
  g.edges = {{0, 0, 0.5}, {1, 0, 1.0}};
  g.rebuild_adjacency();
  // degrees with self-loop: wa 1.5, wb 2.0, s 2.5

  SECTION("intra: symmetric normalization, self 1/deg") {
    MatrixXd m = message_matrix_intra(g);
    CHECK_THAT(m(0, 0), Catch::Matchers::WithinAbs(1.0 / 1.5, 1e-12));
    CHECK_THAT(m(1, 1), Catch::Matchers::WithinAbs(1.0 / 2.0, 1e-12));
    CHECK_THAT(m(2, 2), Catch::Matchers::WithinAbs(1.0 / 2.5, 1e-12));
    CHECK_THAT(m(0, 2), Catch::Matchers::WithinAbs(0.5 / std::sqrt(1.5 * 2.5), 1e-12));
    CHECK_THAT(m(2, 0), Catch::Matchers::WithinAbs(0.5 / std::sqrt(1.5 * 2.5), 1e-12));
    CHECK_THAT(m(1, 2), Catch::Matchers::WithinAbs(1.0 / std::sqrt(2.0 * 2.5), 1e-12));
    CHECK(m(0, 1) == 0.0);  // no word-word edges
  }

  SECTION("inter: asymmetric amplification, self 1") {
    MatrixXd m = message_matrix_inter(g);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(2, 2) == 1.0);
    // aggregate word into sentence: sqrt(deg_w/deg_s) * e
    CHECK_THAT(m(2, 0), Catch::Matchers::WithinAbs(std::sqrt(1.5 / 2.5) * 0.5, 1e-12));
    CHECK_THAT(m(2, 1), Catch::Matchers::WithinAbs(std::sqrt(2.0 / 2.5) * 1.0, 1e-12));
    // and the reverse direction amplifies by the sentence degree
    CHECK_THAT(m(0, 2), Catch::Matchers::WithinAbs(std::sqrt(2.5 / 1.5) * 0.5, 1e-12));
  }

  SECTION("layer wrappers validate dimensions") {
    MatrixXd h = MatrixXd::Zero(3, 4);
    MatrixXd theta = MatrixXd::Zero(4, 2);
    CHECK_NOTHROW(gcn_intra_layer(h, g, theta));
    CHECK_THROWS(gcn_intra_layer(MatrixXd::Zero(2, 4), g, theta));
    CHECK_THROWS(gcn_inter_layer(h, g, MatrixXd::Zero(3, 2)));
  }
}

TEST_CASE("decode applies the latent inner-product sigmoid", "[autoenc]") {
  MatrixXd zcat(2, 2);  // one word row, one sentence row
  const double ln3 = std::log(3.0);
  zcat << ln3, 0.0, 1.0, 5.0;  // logit = ln3*1 + 0*5 = ln3
  MatrixXd p = decode(zcat, 1, 1);
  REQUIRE(p.rows() == 1);
  REQUIRE(p.cols() == 1);
  CHECK_THAT(p(0, 0), Catch::Matchers::WithinAbs(0.75, 1e-12));

  MatrixXd z0 = MatrixXd::Zero(2, 2);
  CHECK_THAT(decode(z0, 1, 1)(0, 0), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("reconstruction loss: mse, kl closed form, literal flag", "[autoenc]") {
  LatentState latent;
  latent.inter.mu = MatrixXd::Constant(1, 2, 1.0);
  latent.inter.logvar = MatrixXd::Zero(1, 2);
  latent.intra.mu = MatrixXd::Zero(1, 2);
  latent.intra.logvar = MatrixXd::Zero(1, 2);
  MatrixXd phat = MatrixXd::Constant(1, 2, 0.8);
  MatrixXd target = MatrixXd::Constant(1, 2, 0.3);

  // kl: inter contributes 0.5*(1+1-1-0)=0.5 per element, intra 0
  LossParts parts = reconstruction_loss(phat, target, latent, 0.1, false);
  CHECK_THAT(parts.mse, Catch::Matchers::WithinAbs(0.25, 1e-12));
  CHECK_THAT(parts.kl, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(parts.total, Catch::Matchers::WithinAbs(0.25 + 0.1 * 1.0, 1e-12));

  LossParts literal = reconstruction_loss(phat, target, latent, 0.1, true);
  CHECK_THAT(literal.total, Catch::Matchers::WithinAbs(0.25 - 0.1 * 1.0, 1e-12));
}

TEST_CASE("kl coefficient defaults to 1/(N*2dz)", "[autoenc]") {
  TrainConfig cfg;
  CHECK_THAT(kl_coefficient(cfg, 10, 5), Catch::Matchers::WithinAbs(1.0 / 100.0, 1e-15));
  cfg.kl_coeff = 0.25;
  CHECK(kl_coefficient(cfg, 10, 5) == 0.25);
  cfg.kl_coeff = 0.0;
  CHECK(kl_coefficient(cfg, 10, 5) == 0.0);
}

TEST_CASE("graph instance carries targets and survives edge removal", "[autoenc]") {
  SmallSetup s = small_setup();
  const BipartiteGraph& g = s.inst.graph;
  REQUIRE(g.n_words() == 3);
  REQUIRE(g.n_sentences() == 3);

  for (const BipartiteEdge& e : g.edges)
    CHECK(s.inst.target(e.word, e.sent) == e.weight);
  CHECK(s.inst.target.isZero(0.0) == false);

  GraphInstance reduced = s.inst.with_edges_removed({0});
  CHECK(reduced.graph.edges.size() == g.edges.size() - 1);
  const BipartiteEdge& gone = g.edges[0];
  CHECK(reduced.target(gone.word, gone.sent) == 0.0);
  // survivors keep their original weights
  for (const BipartiteEdge& e : reduced.graph.edges)
    CHECK(e.weight == s.inst.target(e.word, e.sent));
}

TEST_CASE("forward pass modes", "[autoenc]") {
  SmallSetup s = small_setup();
  Model model = random_model(31);
  TrainConfig cfg;
  cfg.dropout = 0.3;
  cfg.seed = 9;

  SECTION("eval is deterministic and uses z = mu") {
    ForwardPass a = model_forward(s.inst, model, cfg, Mode::eval);
    ForwardPass b = model_forward(s.inst, model, cfg, Mode::eval);
    CHECK((a.latent.z - b.latent.z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.latent.inter.z - a.latent.inter.mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.latent.inter.eps.size() == 0);
  }

  SECTION("train mode needs an rng or replay") {
    CHECK_THROWS_AS(model_forward(s.inst, model, cfg, Mode::train), std::invalid_argument);
  }

  SECTION("train mode reparameterizes and replay reproduces it exactly") {
    Rng rng(7);
    ForwardPass a = model_forward(s.inst, model, cfg, Mode::train, &rng);
    CHECK((a.latent.inter.z - a.latent.inter.mu).cwiseAbs().maxCoeff() > 0.0);
    ForwardPass b = model_forward(s.inst, model, cfg, Mode::train, nullptr, &a);
    CHECK(a.loss.total == b.loss.total);
    CHECK((a.phat - b.phat).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("non-finite parameters raise the blowup error") {
    Model broken = model;
    broken.gcn.proj_word(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
      model_forward(s.inst, broken, cfg, Mode::eval);
      FAIL("expected blowup");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("numerical blowup") != std::string::npos);
    }
  }
}

TEST_CASE("analytic gradients match finite differences", "[autoenc]") {
  SmallSetup s = small_setup();
  Model model = random_model(41);
  TrainConfig cfg;
  cfg.dropout = 0.2;
  cfg.seed = 13;

  Rng rng(101);
  ForwardPass base = model_forward(s.inst, model, cfg, Mode::train, &rng);
  Model grads(model.gcn.dims, model.init.dims);
  model_backward(s.inst, model, base, cfg, grads);

  std::unordered_map<std::string, MatrixXd*> gmap;
  grads.for_each_tensor([&](const std::string& n, MatrixXd& g) { gmap[n] = &g; });

  const double h = 1e-4;
  double worst = 0.0;
  std::string worst_name;
  model.for_each_tensor([&](const std::string& name, MatrixXd& t) {
    MatrixXd& g = *gmap.at(name);
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const double keep = t(r, c);
        t(r, c) = keep + h;
        const double up = model_forward(s.inst, model, cfg, Mode::train, nullptr, &base).loss.total;
        t(r, c) = keep - h;
        const double dn = model_forward(s.inst, model, cfg, Mode::train, nullptr, &base).loss.total;
        t(r, c) = keep;
        const double fd = (up - dn) / (2 * h);
        const double an = g(r, c);
        if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
        const double rel = std::abs(fd - an) / std::max(std::abs(fd), std::abs(an));
        if (rel > worst) {
          worst = rel;
          worst_name = name;
        }
      }
  });
  INFO("worst tensor: " << worst_name);
  CHECK(worst < 1e-3);
}

TEST_CASE("frozen initializer keeps its tensors out of the step", "[autoenc]") {
  SmallSetup s = small_setup();
  Model model = random_model(43);
  TrainConfig cfg;
  cfg.freeze_initializer = true;
  cfg.dropout = 0.0;
  cfg.seed = 3;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 0;

  Rng rng(55);
  ForwardPass fp = model_forward(s.inst, model, cfg, Mode::train, &rng);
  Model grads(model.gcn.dims, model.init.dims);
  model_backward(s.inst, model, fp, cfg, grads);
  grads.init.for_each_tensor([&](const std::string&, MatrixXd& t) { CHECK(t.isZero(0.0)); });
  CHECK(grads.gcn.proj_word.cwiseAbs().maxCoeff() > 0.0);

  Model before = model;
  AdamState opt;
  train_step({&s.inst}, model, opt, cfg);
  model.init.for_each_tensor([&](const std::string& name, MatrixXd& t) {
    std::unordered_map<std::string, MatrixXd*> bmap;
    before.init.for_each_tensor([&](const std::string& n, MatrixXd& b) { bmap[n] = &b; });
    CHECK((t - *bmap.at(name)).cwiseAbs().maxCoeff() == 0.0);
  });
  CHECK((model.gcn.proj_word - before.gcn.proj_word).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("warmup learning rate schedule", "[autoenc]") {
  TrainConfig cfg;
  cfg.lr = 5e-5;
  cfg.warmup_steps = 8000;
  CHECK_THAT(warmup_lr(cfg, 4000), Catch::Matchers::WithinAbs(2.5e-5, 1e-18));
  CHECK_THAT(warmup_lr(cfg, 8000), Catch::Matchers::WithinAbs(5e-5, 1e-18));
  CHECK_THAT(warmup_lr(cfg, 100000), Catch::Matchers::WithinAbs(5e-5, 1e-18));
  cfg.warmup_steps = 0;
  CHECK(warmup_lr(cfg, 1) == 5e-5);
}

TEST_CASE("adam first step moves by ~lr in the gradient direction", "[autoenc]") {
  Model model(small_gcn(), small_init());
  Model grads(small_gcn(), small_init());
  grads.gcn.proj_word(0, 0) = 2.0;
  grads.gcn.proj_word(1, 1) = -0.5;
  AdamState opt;
  opt.apply(model, grads, 1e-3);
  CHECK(opt.t == 1);
  // bias-corrected m/v make the first update lr * g / (|g| + eps)
  CHECK_THAT(model.gcn.proj_word(0, 0), Catch::Matchers::WithinAbs(-1e-3, 1e-8));
  CHECK_THAT(model.gcn.proj_word(1, 1), Catch::Matchers::WithinAbs(1e-3, 1e-8));
  CHECK(model.gcn.proj_word(2, 2) == 0.0);
}

TEST_CASE("train_step is deterministic and thread-count independent", "[autoenc]") {
  SmallSetup s = small_setup();
  Corpus extra = fixtures::topic_corpus({4, 2, 6, 10, 4, 6, 4, 6, 2, false, 77});
  Vocab vocab = build_vocab(extra, 50000, 0.0);
  EmbeddingTable table = synthetic_embeddings(vocab, 3, 4);
  std::vector<GraphInstance> graphs;
  for (const Document& doc : extra) graphs.push_back(GraphInstance::build(doc, vocab, table));
  REQUIRE(graphs.size() == 4);
  std::vector<const GraphInstance*> batch;
  for (const GraphInstance& g : graphs) batch.push_back(&g);

  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 0;
  cfg.dropout = 0.1;
  cfg.seed = 2024;

  auto run = [&](int jobs) {
    TrainConfig c = cfg;
    c.jobs = jobs;
    Rng rng(1);
    Model model(small_gcn(), small_init());
    init_random(model, rng);
    AdamState opt;
    StepMetrics last{};
    for (int i = 0; i < 5; ++i) last = train_step(batch, model, opt, c);
    return std::pair(model, last);
  };

  auto [m1, s1] = run(1);
  auto [m4, s4] = run(4);
  CHECK(s1.mse == s4.mse);
  CHECK(s1.total == s4.total);
  bool identical = true;
  std::unordered_map<std::string, MatrixXd*> map4;
  m4.for_each_tensor([&](const std::string& n, MatrixXd& t) { map4[n] = &t; });
  m1.for_each_tensor([&](const std::string& n, MatrixXd& t) {
    if ((t - *map4.at(n)).cwiseAbs().maxCoeff() != 0.0) identical = false;
  });
  CHECK(identical);

  SECTION("empty batch rejected") {
    Model model(small_gcn(), small_init());
    AdamState opt;
    CHECK_THROWS_AS(train_step({}, model, opt, cfg), std::invalid_argument);
  }

  SECTION("non-finite loss names the document") {
    Model model(small_gcn(), small_init());
    Rng rng(1);
    init_random(model, rng);
    model.gcn.proj_sent(0, 0) = std::numeric_limits<double>::infinity();
    AdamState opt;
    try {
      train_step({&s.inst}, model, opt, cfg);
      FAIL("expected blowup");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("fd") != std::string::npos);
    }
  }
}

TEST_CASE("short training run reduces the loss", "[autoenc]") {
  SmallSetup s = small_setup();
  TrainConfig cfg;
  cfg.lr = 5e-3;
  cfg.warmup_steps = 10;
  cfg.dropout = 0.0;
  cfg.seed = 5;
  Model model = random_model(47);
  AdamState opt;
  std::vector<const GraphInstance*> batch{&s.inst};
  double first = 0, last = 0;
  for (int i = 0; i < 120; ++i) {
    StepMetrics m = train_step(batch, model, opt, cfg);
    if (i == 0) first = m.mse;
    last = m.mse;
  }
  CHECK(last < first);
}

TEST_CASE("checkpoint round trip", "[autoenc]") {
  SmallSetup s = small_setup();
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 0;
  cfg.seed = 17;
  Model model = random_model(59);
  AdamState opt;
  std::vector<const GraphInstance*> batch{&s.inst};
  for (int i = 0; i < 3; ++i) train_step(batch, model, opt, cfg);

  Checkpoint ckpt{std::move(model)};
  ckpt.opt = std::move(opt);
  ckpt.config = cfg;
  ckpt.step = 3;
  ckpt.config_hash = "deadbeefdeadbeef";

  const std::string path = "autoenc_ckpt_test.bigae";
  save_checkpoint(path, ckpt);

  SECTION("save -> load -> save is byte-identical") {
    Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.step == 3);
    CHECK(loaded.opt.t == 3);
    CHECK(loaded.config_hash == "deadbeefdeadbeef");
    CHECK(loaded.config.lr == 1e-3);
    CHECK(loaded.model.gcn.dims.d_h == small_gcn().d_h);
    const std::string again = "autoenc_ckpt_test2.bigae";
    save_checkpoint(again, loaded);
    CHECK(fixtures::read_file(path) == fixtures::read_file(again));
    std::remove(again.c_str());
  }

  SECTION("magic and CRC failures are reported") {
    std::string buf = fixtures::read_file(path);
    {
      std::string bad = buf;
      bad[0] = 'X';
      std::ofstream out("autoenc_bad_magic.bigae", std::ios::binary);
      out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
    }
    CHECK_THROWS_WITH(load_checkpoint("autoenc_bad_magic.bigae"),
                      Catch::Matchers::ContainsSubstring("not a checkpoint"));
    std::remove("autoenc_bad_magic.bigae");

    {
      std::string bad = buf;
      bad[bad.size() / 2] ^= 0x41;
      std::ofstream out("autoenc_bad_crc.bigae", std::ios::binary);
      out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
    }
    CHECK_THROWS_WITH(load_checkpoint("autoenc_bad_crc.bigae"),
                      Catch::Matchers::ContainsSubstring("CRC"));
    std::remove("autoenc_bad_crc.bigae");

    {
      std::string bad = buf.substr(0, buf.size() - 40);
      std::ofstream out("autoenc_trunc.bigae", std::ios::binary);
      out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
    }
    CHECK_THROWS(load_checkpoint("autoenc_trunc.bigae"));
    std::remove("autoenc_trunc.bigae");

    CHECK_THROWS(load_checkpoint("missing_dir/nope.bigae"));
  }

  SECTION("unknown tensor names are rejected") {
    std::string buf = fixtures::read_file(path);
    const std::string needle = "gcn/proj_word";
    const std::size_t at = buf.find(needle);
    REQUIRE(at != std::string::npos);
    buf[at] = 'x';  // same length, unknown name
    const std::uint32_t crc = static_cast<std::uint32_t>(crc32(
        0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    std::memcpy(buf.data() + buf.size() - 4, &crc, 4);
    std::ofstream out("autoenc_unknown.bigae", std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.close();
    CHECK_THROWS_WITH(load_checkpoint("autoenc_unknown.bigae"),
                      Catch::Matchers::ContainsSubstring("unknown tensor"));
    std::remove("autoenc_unknown.bigae");
  }

  std::remove(path.c_str());
}

TEST_CASE("pretrain smoke: logging, cadence, determinism", "[autoenc]") {
  Corpus corpus = fixtures::topic_corpus({6, 2, 6, 10, 4, 6, 4, 6, 2, false, 31});
  Vocab vocab = build_vocab(corpus, 50000, 0.0);
  EmbeddingTable table = synthetic_embeddings(vocab, 3, 4);
  std::vector<GraphInstance> graphs;
  for (const Document& doc : corpus) graphs.push_back(GraphInstance::build(doc, vocab, table));

  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 2;
  cfg.warmup_steps = 4;
  cfg.total_steps = 6;
  cfg.dropout = 0.1;
  cfg.seed = 909;

  std::ostringstream log;
  Checkpoint a = pretrain(graphs, cfg, small_gcn(), small_init(), &log, 2, "", 0, 3);
  CHECK(a.step == 6);
  CHECK(log.str().find("step=1 ") != std::string::npos);
  CHECK(log.str().find("mse=") != std::string::npos);
  CHECK(log.str().find("val_mse=") != std::string::npos);

  Checkpoint b = pretrain(graphs, cfg, small_gcn(), small_init());
  std::unordered_map<std::string, MatrixXd*> bmap;
  b.model.for_each_tensor([&](const std::string& n, MatrixXd& t) { bmap[n] = &t; });
  bool identical = true;
  a.model.for_each_tensor([&](const std::string& n, MatrixXd& t) {
    if ((t - *bmap.at(n)).cwiseAbs().maxCoeff() != 0.0) identical = false;
  });
  CHECK(identical);

  SECTION("empty graph list rejected") {
    CHECK_THROWS_AS(pretrain({}, cfg), std::invalid_argument);
  }
}

TEST_CASE("embed_sentences maps latents back to document rows", "[autoenc]") {
  // second sentence all-OOV: graph drops it, embedding keeps a zero row
  Corpus corpus;
  corpus.push_back(fixtures::make_document(
      "gap", {{"qaa", "qbb"}, {"zmiss"}, {"qbb", "qcc"}}));
  Vocab vocab = three_vocab();
  EmbeddingTable table = synthetic_embeddings(vocab, 5, 4);

  Checkpoint ckpt{Model(small_gcn(), small_init())};
  Rng rng(61);
  init_random(ckpt.model, rng);
  ckpt.config.dropout = 0.0;

  MatrixXd emb = embed_sentences(corpus[0], vocab, table, ckpt);
  REQUIRE(emb.rows() == 3);
  REQUIRE(emb.cols() == 2 * small_gcn().d_z);
  CHECK(emb.row(1).isZero(0.0));
  CHECK(emb.row(0).cwiseAbs().maxCoeff() > 0.0);
  CHECK(emb.row(2).cwiseAbs().maxCoeff() > 0.0);

  // matches the eval-mode mu rows directly
  GraphInstance inst = GraphInstance::build(corpus[0], vocab, table);
  ForwardPass fp = model_forward(inst, ckpt.model, ckpt.config, Mode::eval);
  const int n = inst.graph.n_words();
  CHECK((emb.row(0).leftCols(small_gcn().d_z) - fp.latent.inter.mu.row(n)).cwiseAbs().maxCoeff() ==
        0.0);

  SECTION("degenerate documents raise") {
    Document bad = fixtures::make_document("allmiss", {{"zmiss"}, {"zgone"}});
    CHECK_THROWS_WITH(embed_sentences(bad, vocab, table, ckpt),
                      Catch::Matchers::ContainsSubstring("degenerate"));
  }
}

TEST_CASE("edge prediction accuracy near chance for an untrained model", "[autoenc]") {
  Corpus corpus = fixtures::topic_corpus({12, 3, 8, 20, 6, 9, 5, 8, 2, false, 404});
  Vocab vocab = build_vocab(corpus, 50000, 0.0);
  EmbeddingTable table = synthetic_embeddings(vocab, 19, 4);
  std::vector<GraphInstance> graphs;
  for (const Document& doc : corpus) graphs.push_back(GraphInstance::build(doc, vocab, table));

  Checkpoint ckpt{Model(small_gcn(), small_init())};
  Rng rng(67);
  init_random(ckpt.model, rng);

  const double acc = edge_prediction_accuracy(graphs, ckpt, 0.10, 7);
  CHECK(acc >= 0.3);
  CHECK(acc <= 0.7);
  // deterministic in (graphs, checkpoint, seed)
  CHECK(edge_prediction_accuracy(graphs, ckpt, 0.10, 7) == acc);
}

TEST_CASE("encoder is permutation equivariant", "[autoenc]") {
  Corpus corpus = fixtures::topic_corpus({3, 2, 8, 20, 5, 7, 5, 8, 2, false, 808});
  Vocab vocab = build_vocab(corpus, 50000, 0.0);
  EmbeddingTable table = synthetic_embeddings(vocab, 23, 4);
  Model model = random_model(71);
  TrainConfig cfg;
  cfg.dropout = 0.0;

  Rng rng(29);
  for (const Document& doc : corpus) {
    GraphInstance inst = GraphInstance::build(doc, vocab, table);
    const int n = inst.graph.n_words(), m = inst.graph.n_sentences();
    std::vector<int> wp(static_cast<std::size_t>(n)), sp(static_cast<std::size_t>(m));
    for (int i = 0; i < n; ++i) wp[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < m; ++i) sp[static_cast<std::size_t>(i)] = i;
    rng.shuffle(wp);
    rng.shuffle(sp);
    GraphInstance perm = permute_instance(inst, wp, sp);

    ForwardPass a = model_forward(inst, model, cfg, Mode::eval);
    ForwardPass b = model_forward(perm, model, cfg, Mode::eval);
    double worst = 0.0;
    for (int w = 0; w < n; ++w)
      worst = std::max(worst, (a.latent.z.row(w) -
                               b.latent.z.row(wp[static_cast<std::size_t>(w)]))
                                  .cwiseAbs()
                                  .maxCoeff());
    for (int s = 0; s < m; ++s)
      worst = std::max(worst, (a.latent.z.row(n + s) -
                               b.latent.z.row(n + sp[static_cast<std::size_t>(s)]))
                                  .cwiseAbs()
                                  .maxCoeff());
    CHECK(worst < 1e-9);
  }
}
