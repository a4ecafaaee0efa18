#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bigraphsum/autoenc.hpp"
#include "bigraphsum/bipartite.hpp"
#include "bigraphsum/corpus.hpp"
#include "bigraphsum/eval.hpp"
#include "bigraphsum/features.hpp"
#include "bigraphsum/rank.hpp"
#include "bigraphsum/util.hpp"

namespace bigraphsum {

// Raw string settings: config-file lines first, CLI flags on top (last set
// wins). resolve_config turns them into a typed RunConfig.
struct ConfigMap {
  std::map<std::string, std::string> values;

  void set(const std::string& key, const std::string& value) { values[key] = value; }
  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
};

// Flat "key = value" lines; '#' starts a comment.
inline ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ConfigMap cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key = value");
    const std::string key = detail::trim(trimmed.substr(0, eq));
    const std::string value = detail::trim(trimmed.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
    cfg.set(key, value);
  }
  return cfg;
}

struct RunConfig {
  // paths
  std::string data_path, checkpoint_path, output_path, summaries_path, word_vectors_path,
      doc_id;
  // corpus handling
  PreprocessOptions preprocess;
  std::size_t vocab_size = 50000;
  double vocab_prune = 0.10;
  std::size_t limit = 0;  // 0 = no cap
  // embedding source
  bool synthetic_embeddings = false;
  std::uint64_t synthetic_seed = 0;
  // model + training
  GcnDims gcn_dims;
  InitializerDims init_dims;
  TrainConfig train;
  int log_every = 100, checkpoint_every = 0, validate_every = 0;
  // ranking
  std::string method = "pacsum";  // rank methods plus "lead"
  std::string backend = "bigae";
  std::string preset;
  RankConfig rank;
  // evaluation
  FragmentPairing pairing = FragmentPairing::article;
  // shared
  std::uint64_t seed = 0;
  int jobs = 1;
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not a number: \"" + v + "\"");
  }
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not an integer: \"" + v + "\"");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not an unsigned integer: \"" + v + "\"");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config key " + key + ": not a boolean: \"" + v + "\"");
}

inline std::vector<double> to_double_list(const std::string& key, const std::string& v,
                                          std::size_t want) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_double(key, trim(part)));
  if (out.size() != want)
    throw std::runtime_error("config key " + key + ": expected " + std::to_string(want) +
                             " comma-separated values");
  return out;
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ','))
    out.push_back(static_cast<int>(to_int(key, trim(part))));
  if (out.empty()) throw std::runtime_error("config key " + key + ": empty list");
  return out;
}

}  // namespace detail

// Table-derived per-dataset defaults. A preset fills any key the user did not
// set explicitly; explicit keys always win.
inline void apply_preset(RunConfig& cfg, const std::string& preset, const ConfigMap& kv) {
  if (preset != "cnndm" && preset != "multinews")
    throw std::runtime_error("unknown preset \"" + preset +
                             "\" (valid: cnndm, multinews)");
  const bool cnndm = preset == "cnndm";
  if (!kv.has("k")) cfg.rank.k = cnndm ? 3 : 9;
  if (cfg.method == "pacsum") {
    if (!kv.has("lambda1")) cfg.rank.lambda1 = cnndm ? -1.0 : 0.3;
    if (!kv.has("lambda2")) cfg.rank.lambda2 = cnndm ? 1.0 : -0.7;
  } else if (cfg.method == "far") {
    if (!kv.has("lambda1")) cfg.rank.lambda1 = -0.5;
    if (!kv.has("lambda2")) cfg.rank.lambda2 = cnndm ? 0.9 : 2.0;
  } else if (cfg.method == "dasg") {
    if (!kv.has("beta_sim")) cfg.rank.beta_sim = cnndm ? 0.05 : 0.8;
    if (!kv.has("dasg_fwd")) cfg.rank.dasg_fwd = {-1.5, -0.5, -1.0};
    if (!kv.has("dasg_bwd")) cfg.rank.dasg_bwd = {1.0, 1.5, 2.0};
  }
  if (!kv.has("lr")) cfg.train.lr = cnndm ? 5e-5 : 2e-5;
}

inline RunConfig resolve_config(const ConfigMap& kv) {
  RunConfig cfg;
  if (kv.has("method")) cfg.method = kv.get("method");
  if (cfg.method != "lead") cfg.rank.method = parse_rank_method(cfg.method);
  if (kv.has("preset")) {
    cfg.preset = kv.get("preset");
    apply_preset(cfg, cfg.preset, kv);
  }

  for (const auto& [key, value] : kv.values) {
    if (key == "data") cfg.data_path = value;
    else if (key == "checkpoint") cfg.checkpoint_path = value;
    else if (key == "out") cfg.output_path = value;
    else if (key == "summaries") cfg.summaries_path = value;
    else if (key == "word_vectors") cfg.word_vectors_path = value;
    else if (key == "doc") cfg.doc_id = value;
    else if (key == "max_sentences")
      cfg.preprocess.max_sentences = static_cast<std::size_t>(detail::to_int(key, value));
    else if (key == "max_tokens")
      cfg.preprocess.max_tokens = static_cast<std::size_t>(detail::to_int(key, value));
    else if (key == "vocab_size")
      cfg.vocab_size = static_cast<std::size_t>(detail::to_int(key, value));
    else if (key == "vocab_prune") cfg.vocab_prune = detail::to_double(key, value);
    else if (key == "limit") cfg.limit = static_cast<std::size_t>(detail::to_int(key, value));
    else if (key == "synthetic_embeddings") {
      cfg.synthetic_embeddings = true;
      cfg.synthetic_seed = detail::to_u64(key, value);
    } else if (key == "d_w") {
      cfg.gcn_dims.d_w = static_cast<int>(detail::to_int(key, value));
      cfg.init_dims.d_w = cfg.gcn_dims.d_w;
    } else if (key == "d_h") cfg.gcn_dims.d_h = static_cast<int>(detail::to_int(key, value));
    else if (key == "d_z") cfg.gcn_dims.d_z = static_cast<int>(detail::to_int(key, value));
    else if (key == "kernels") cfg.init_dims.kernels = detail::to_int_list(key, value);
    else if (key == "maps") cfg.init_dims.maps = static_cast<int>(detail::to_int(key, value));
    else if (key == "lstm_hidden")
      cfg.init_dims.lstm_hidden = static_cast<int>(detail::to_int(key, value));
    else if (key == "lr") cfg.train.lr = detail::to_double(key, value);
    else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(detail::to_int(key, value));
    else if (key == "dropout") cfg.train.dropout = detail::to_double(key, value);
    else if (key == "warmup_steps")
      cfg.train.warmup_steps = static_cast<int>(detail::to_int(key, value));
    else if (key == "steps") cfg.train.total_steps = static_cast<int>(detail::to_int(key, value));
    else if (key == "kl_coeff") cfg.train.kl_coeff = detail::to_double(key, value);
    else if (key == "literal_objective")
      cfg.train.literal_objective = detail::to_bool(key, value);
    else if (key == "freeze_initializer")
      cfg.train.freeze_initializer = detail::to_bool(key, value);
    else if (key == "log_every") cfg.log_every = static_cast<int>(detail::to_int(key, value));
    else if (key == "checkpoint_every")
      cfg.checkpoint_every = static_cast<int>(detail::to_int(key, value));
    else if (key == "validate_every")
      cfg.validate_every = static_cast<int>(detail::to_int(key, value));
    else if (key == "method" || key == "preset") {
      // consumed above
    } else if (key == "backend") {
      if (value != "bigae" && value != "tfidf")
        throw std::runtime_error("unknown backend \"" + value + "\" (valid: bigae, tfidf)");
      cfg.backend = value;
    } else if (key == "k") cfg.rank.k = static_cast<int>(detail::to_int(key, value));
    else if (key == "lambda1") cfg.rank.lambda1 = detail::to_double(key, value);
    else if (key == "lambda2") cfg.rank.lambda2 = detail::to_double(key, value);
    else if (key == "beta_sim") cfg.rank.beta_sim = detail::to_double(key, value);
    else if (key == "beta_far") cfg.rank.beta_far = detail::to_double(key, value);
    else if (key == "dasg_bucket")
      cfg.rank.dasg_bucket = static_cast<int>(detail::to_int(key, value));
    else if (key == "dasg_fwd") {
      const auto v = detail::to_double_list(key, value, 3);
      cfg.rank.dasg_fwd = {v[0], v[1], v[2]};
    } else if (key == "dasg_bwd") {
      const auto v = detail::to_double_list(key, value, 3);
      cfg.rank.dasg_bwd = {v[0], v[1], v[2]};
    } else if (key == "damping") cfg.rank.damping = detail::to_double(key, value);
    else if (key == "tol") cfg.rank.tol = detail::to_double(key, value);
    else if (key == "pairing") {
      if (value == "article") cfg.pairing = FragmentPairing::article;
      else if (value == "reference") cfg.pairing = FragmentPairing::reference;
      else if (value == "oracle") cfg.pairing = FragmentPairing::oracle;
      else
        throw std::runtime_error("unknown pairing \"" + value +
                                 "\" (valid: article, reference, oracle)");
    } else if (key == "seed") cfg.seed = detail::to_u64(key, value);
    else if (key == "jobs") cfg.jobs = static_cast<int>(detail::to_int(key, value));
    else
      throw std::runtime_error("unknown config key \"" + key + "\"");
  }

  if (const char* env_seed = std::getenv("BIGRAPH_SUM_SEED")) {
    cfg.seed = detail::to_u64("BIGRAPH_SUM_SEED", env_seed);
  }
  cfg.gcn_dims.d_s = cfg.init_dims.d_s();  // sentence width follows the initializer
  cfg.train.seed = cfg.seed;
  cfg.train.jobs = cfg.jobs;
  if (cfg.rank.k < 1) throw std::runtime_error("k must be >= 1");
  return cfg;
}

// FNV-1a over the canonical sorted key=value dump of every result-affecting
// setting (logging cadence and worker count excluded: they cannot change any
// output byte).
inline std::string config_hash(const RunConfig& cfg) {
  std::map<std::string, std::string> canon;
  auto put_num = [&](const std::string& k, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    canon[k] = buf;
  };
  canon["data"] = cfg.data_path;
  canon["checkpoint"] = cfg.checkpoint_path;
  canon["word_vectors"] = cfg.word_vectors_path;
  canon["summaries"] = cfg.summaries_path;
  canon["method"] = cfg.method;
  canon["backend"] = cfg.backend;
  canon["preset"] = cfg.preset;
  canon["pairing"] = fragment_pairing_name(cfg.pairing);
  canon["synthetic_embeddings"] = cfg.synthetic_embeddings ? "true" : "false";
  canon["synthetic_seed"] = std::to_string(cfg.synthetic_seed);
  canon["seed"] = std::to_string(cfg.seed);
  canon["limit"] = std::to_string(cfg.limit);
  canon["max_sentences"] = std::to_string(cfg.preprocess.max_sentences);
  canon["max_tokens"] = std::to_string(cfg.preprocess.max_tokens);
  canon["vocab_size"] = std::to_string(cfg.vocab_size);
  put_num("vocab_prune", cfg.vocab_prune);
  canon["d_w"] = std::to_string(cfg.gcn_dims.d_w);
  canon["d_s"] = std::to_string(cfg.gcn_dims.d_s);
  canon["d_h"] = std::to_string(cfg.gcn_dims.d_h);
  canon["d_z"] = std::to_string(cfg.gcn_dims.d_z);
  {
    std::string ks;
    for (int k : cfg.init_dims.kernels) ks += std::to_string(k) + ",";
    canon["kernels"] = ks;
  }
  canon["maps"] = std::to_string(cfg.init_dims.maps);
  canon["lstm_hidden"] = std::to_string(cfg.init_dims.lstm_hidden);
  put_num("lr", cfg.train.lr);
  canon["batch_size"] = std::to_string(cfg.train.batch_size);
  put_num("dropout", cfg.train.dropout);
  canon["warmup_steps"] = std::to_string(cfg.train.warmup_steps);
  canon["steps"] = std::to_string(cfg.train.total_steps);
  put_num("kl_coeff", cfg.train.kl_coeff);
  canon["literal_objective"] = cfg.train.literal_objective ? "true" : "false";
  canon["freeze_initializer"] = cfg.train.freeze_initializer ? "true" : "false";
  canon["k"] = std::to_string(cfg.rank.k);
  put_num("lambda1", cfg.rank.lambda1);
  put_num("lambda2", cfg.rank.lambda2);
  put_num("beta_sim", cfg.rank.beta_sim);
  put_num("beta_far", cfg.rank.beta_far);
  canon["dasg_bucket"] = std::to_string(cfg.rank.dasg_bucket);
  for (int i = 0; i < 3; ++i) {
    put_num("dasg_fwd" + std::to_string(i + 1), cfg.rank.dasg_fwd[static_cast<std::size_t>(i)]);
    put_num("dasg_bwd" + std::to_string(i + 1), cfg.rank.dasg_bwd[static_cast<std::size_t>(i)]);
  }
  put_num("damping", cfg.rank.damping);
  put_num("tol", cfg.rank.tol);

  std::string blob;
  for (const auto& [k, v] : canon) blob += k + "=" + v + "\n";
  return to_hex(fnv1a64(blob));
}

namespace detail {

struct CorpusResources {
  Corpus corpus;
  Vocab vocab;
  TfIdfStats stats;
  EmbeddingTable table;
};

inline CorpusResources load_resources(const RunConfig& cfg, std::ostream* log,
                                      bool need_embeddings) {
  CorpusResources res;
  res.corpus = load_corpus(cfg.data_path,
                           cfg.limit > 0 ? std::optional<std::size_t>(cfg.limit) : std::nullopt,
                           cfg.preprocess, log);
  if (res.corpus.empty()) throw std::runtime_error("no usable documents in " + cfg.data_path);
  res.vocab = build_vocab(res.corpus, cfg.vocab_size, cfg.vocab_prune);
  res.stats = compute_tfidf(res.corpus);
  if (need_embeddings) {
    if (cfg.synthetic_embeddings) {
      res.table = synthetic_embeddings(res.vocab, cfg.synthetic_seed, cfg.gcn_dims.d_w);
    } else {
      if (cfg.word_vectors_path.empty())
        throw std::runtime_error(
            "word vectors required: pass --word-vectors or --synthetic-embeddings");
      res.table = load_embeddings(cfg.word_vectors_path, res.vocab, cfg.gcn_dims.d_w);
      if (log)
        (*log) << "embedding_coverage=" << res.table.coverage
               << " vocab_size=" << res.vocab.size() << "\n";
    }
  }
  return res;
}

inline std::vector<GraphInstance> build_instances(const CorpusResources& res,
                                                  const RunConfig& cfg, std::ostream* log) {
  std::vector<GraphInstance> graphs(res.corpus.size());
  parallel_for(res.corpus.size(), cfg.jobs, [&](std::size_t i) {
    graphs[i] = GraphInstance::build(res.corpus[i], res.vocab, res.table);
  });
  std::vector<GraphInstance> usable;
  for (auto& g : graphs) {
    if (g.graph.n_sentences() == 0) {
      if (log)
        (*log) << "warning: skipping document " << g.doc_id << ": degenerate graph\n";
      continue;
    }
    usable.push_back(std::move(g));
  }
  if (usable.empty()) throw std::runtime_error("every document produced a degenerate graph");
  return usable;
}

}  // namespace detail

inline std::string run_pretrain(const RunConfig& cfg, std::ostream* log) {
  if (cfg.checkpoint_path.empty()) throw std::runtime_error("pretrain needs --checkpoint");
  detail::CorpusResources res = detail::load_resources(cfg, log, true);
  std::vector<GraphInstance> graphs = detail::build_instances(res, cfg, log);
  if (log) (*log) << "documents=" << graphs.size() << " vocab=" << res.vocab.size() << "\n";

  TrainConfig train = cfg.train;
  Checkpoint ckpt;
  if (train.total_steps > 0) {
    ckpt = pretrain(graphs, train, cfg.gcn_dims, cfg.init_dims, log, cfg.log_every,
                    cfg.checkpoint_every > 0 ? cfg.checkpoint_path : std::string(),
                    cfg.checkpoint_every, cfg.validate_every);
  } else {
    Rng init_rng(mix_seed(train.seed, 0, 0x696e6974ULL));
    ckpt = Checkpoint(Model(cfg.gcn_dims, cfg.init_dims));
    init_random(ckpt.model, init_rng);
    ckpt.config = train;
  }
  ckpt.config_hash = config_hash(cfg);
  save_checkpoint(cfg.checkpoint_path, ckpt);
  if (log) (*log) << "checkpoint=" << cfg.checkpoint_path << " config=" << ckpt.config_hash
                  << "\n";
  return cfg.checkpoint_path;
}

inline std::string run_embed(const RunConfig& cfg, std::ostream* log) {
  if (cfg.output_path.empty()) throw std::runtime_error("embed needs --out");
  if (cfg.checkpoint_path.empty()) throw std::runtime_error("embed needs --checkpoint");
  detail::CorpusResources res = detail::load_resources(cfg, log, true);
  Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);

  std::ofstream out(cfg.output_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output: " + cfg.output_path);
  nlohmann::json meta;
  meta["config_hash"] = config_hash(cfg);
  out << meta.dump() << "\n";
  for (const Document& doc : res.corpus) {
    nlohmann::json j;
    j["id"] = doc.id;
    try {
      const MatrixXd emb = embed_sentences(doc, res.vocab, res.table, ckpt);
      std::vector<std::vector<double>> rows(static_cast<std::size_t>(emb.rows()));
      for (Eigen::Index r = 0; r < emb.rows(); ++r)
        rows[static_cast<std::size_t>(r)].assign(emb.row(r).data(),
                                                 emb.row(r).data() + emb.cols());
      j["embedding"] = rows;
    } catch (const std::runtime_error& e) {
      if (log) (*log) << "warning: skipping document " << doc.id << ": " << e.what() << "\n";
      continue;
    }
    out << j.dump() << "\n";
  }
  return cfg.output_path;
}

namespace detail {

inline void write_summaries(const std::string& path, const std::string& hash,
                            const Corpus& corpus, const std::vector<Summary>& summaries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output: " + path);
  nlohmann::json meta;
  meta["config_hash"] = hash;
  out << meta.dump() << "\n";
  for (std::size_t i = 0; i < corpus.size(); ++i)
    out << summary_to_json(corpus[i].id, summaries[i]).dump() << "\n";
}

}  // namespace detail

inline std::string run_summarize(const RunConfig& cfg, std::ostream* log) {
  if (cfg.output_path.empty()) throw std::runtime_error("summarize needs --out");
  const bool bigae = cfg.backend == "bigae" && cfg.method != "lead";
  detail::CorpusResources res = detail::load_resources(cfg, log, bigae);

  Checkpoint ckpt;
  EmbeddingBackend backend = EmbeddingBackend::tfidf(res.stats, res.vocab);
  if (bigae) {
    if (cfg.checkpoint_path.empty())
      throw std::runtime_error("bigae backend needs --checkpoint");
    ckpt = load_checkpoint(cfg.checkpoint_path);
    backend = EmbeddingBackend::bigae(ckpt, res.vocab, res.table);
    backend.stats = &res.stats;  // degenerate-graph fallback
  }

  std::vector<Summary> summaries(res.corpus.size());
  if (cfg.method == "lead") {
    for (std::size_t i = 0; i < res.corpus.size(); ++i)
      summaries[i] = lead_baseline(res.corpus[i], cfg.rank.k);
  } else {
    if ((cfg.rank.method == RankMethod::pacsum || cfg.rank.method == RankMethod::far) && log &&
        std::abs(cfg.rank.lambda1 + cfg.rank.lambda2 - 1.0) > 1e-12)
      (*log) << "note: lambda1 + lambda2 = " << cfg.rank.lambda1 + cfg.rank.lambda2
             << " != 1\n";
    parallel_for(res.corpus.size(), cfg.jobs, [&](std::size_t i) {
      summaries[i] = summarize(res.corpus[i], backend, cfg.rank, nullptr);
    });
  }
  detail::write_summaries(cfg.output_path, config_hash(cfg), res.corpus, summaries);
  if (log) (*log) << "summaries=" << cfg.output_path << " documents=" << res.corpus.size()
                  << "\n";
  return cfg.output_path;
}

inline std::string run_oracle(const RunConfig& cfg, std::ostream* log) {
  if (cfg.output_path.empty()) throw std::runtime_error("oracle needs --out");
  detail::CorpusResources res = detail::load_resources(cfg, log, false);
  std::vector<Summary> summaries(res.corpus.size());
  for (std::size_t i = 0; i < res.corpus.size(); ++i) {
    const Document& doc = res.corpus[i];
    if (!doc.has_reference)
      throw std::runtime_error("oracle: document \"" + doc.id + "\" has no reference summary");
    summaries[i] = oracle_summary(doc, tokenize(doc.reference_summary, false), cfg.rank.k);
  }
  detail::write_summaries(cfg.output_path, config_hash(cfg), res.corpus, summaries);
  return cfg.output_path;
}

// Summaries JSONL reader; tolerates (and returns) the metadata first line.
inline std::vector<SummaryRecord> load_summaries(const std::string& path,
                                                 std::string* hash_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open summaries file: " + path);
  std::vector<SummaryRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed JSON: " +
                               e.what());
    }
    if (!j.contains("id")) {
      if (j.contains("config_hash") && hash_out) *hash_out = j["config_hash"].get<std::string>();
      continue;  // metadata line
    }
    SummaryRecord rec;
    rec.id = j.at("id").get<std::string>();
    if (j.contains("indices")) rec.indices = j["indices"].get<std::vector<int>>();
    if (j.contains("summary")) rec.text = j["summary"].get<std::string>();
    if (j.contains("scores")) rec.scores = j["scores"].get<std::vector<double>>();
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw std::runtime_error("no summaries in " + path);
  return out;
}

// Writes <out>.json and <out>.csv; returns the JSON path.
inline std::string run_evaluate(const RunConfig& cfg, std::ostream* log) {
  if (cfg.output_path.empty()) throw std::runtime_error("evaluate needs --out");
  if (cfg.summaries_path.empty()) throw std::runtime_error("evaluate needs --summaries");
  detail::CorpusResources res = detail::load_resources(cfg, log, false);
  std::string summary_hash;
  const std::vector<SummaryRecord> summaries = load_summaries(cfg.summaries_path, &summary_hash);

  EvalOptions opts;
  opts.pairing = cfg.pairing;
  opts.oracle_k = cfg.rank.k;
  opts.method = cfg.method;
  opts.backend = cfg.backend;
  opts.config_hash = config_hash(cfg);
  const EvalReport report = evaluate_corpus(summaries, res.corpus, opts);

  const std::string json_path = cfg.output_path + ".json";
  const std::string csv_path = cfg.output_path + ".csv";
  {
    std::ofstream out(json_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output: " + json_path);
    out << report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output: " + csv_path);
    out << report_to_csv(report);
  }
  if (log)
    (*log) << "report_json=" << json_path << " report_csv=" << csv_path
           << " rouge1_f1=" << report.mean_rouge1.f1 << " rouge2_f1=" << report.mean_rouge2.f1
           << " rougeL_f1=" << report.mean_rougeL.f1 << "\n";
  return json_path;
}

inline void run_inspect_graph(const RunConfig& cfg, std::ostream& out, std::ostream* log) {
  if (cfg.doc_id.empty()) throw std::runtime_error("inspect-graph needs --doc <id>");
  detail::CorpusResources res = detail::load_resources(cfg, log, false);
  for (const Document& doc : res.corpus) {
    if (doc.id != cfg.doc_id) continue;
    dump_graph(build_graph(doc, res.vocab), out);
    return;
  }
  throw std::runtime_error("document \"" + cfg.doc_id + "\" not found in " + cfg.data_path);
}

}  // namespace bigraphsum
