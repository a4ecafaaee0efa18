// Command-line front end: pretrain, embed, summarize, evaluate, oracle,
// inspect-graph. Flags override config-file keys; BIGRAPH_SUM_SEED overrides
// any configured seed.
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bigraphsum/pipeline.hpp"

namespace {

// Collects CLI flags as raw key=value settings so the config file and the
// command line share one resolution path.
struct SubCommand {
  CLI::App* app = nullptr;
  bigraphsum::ConfigMap cli;
  std::string config_path;

  explicit SubCommand(CLI::App* a) : app(a) {
    app->add_option("--config", config_path, "flat key = value config file");
  }

  void opt(const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { cli.set(key, v); }, help);
  }
  void flag(const std::string& flag_name, const std::string& key, const std::string& help) {
    app->add_flag_callback(
        flag_name, [this, key] { cli.set(key, "true"); }, help);
  }

  void corpus_options() {
    opt("--data", "data", "JSON Lines dataset ({\"id\", \"text\"|\"sentences\", [\"summary\"]})");
    opt("--limit", "limit", "use at most this many documents (0 = all)");
    opt("--max-sentences", "max_sentences", "per-document sentence cap (default 50)");
    opt("--max-tokens", "max_tokens", "per-document token budget (default 512)");
    opt("--vocab-size", "vocab_size", "vocabulary cap before pruning (default 50000)");
    opt("--vocab-prune", "vocab_prune", "low TF-IDF prune fraction (default 0.10)");
    opt("--seed", "seed", "run seed (BIGRAPH_SUM_SEED overrides)");
    opt("--jobs", "jobs", "worker threads (default 1)");
  }

  void embedding_options() {
    opt("--word-vectors", "word_vectors", "word-vector text file (token + d_w decimals)");
    opt("--synthetic-embeddings", "synthetic_embeddings",
        "deterministic pseudo-random word vectors keyed by this seed");
    opt("--d-w", "d_w", "word-vector dimension (default 300)");
  }

  bigraphsum::RunConfig resolve() {
    bigraphsum::ConfigMap kv;
    if (!config_path.empty()) kv = bigraphsum::load_config_file(config_path);
    for (const auto& [k, v] : cli.values) kv.set(k, v);
    return bigraphsum::resolve_config(kv);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bigraphsum: bipartite-graph autoencoder extractive summarization"};
  app.require_subcommand(1);

  SubCommand pre(app.add_subcommand("pretrain", "train the graph autoencoder"));
  pre.corpus_options();
  pre.embedding_options();
  pre.opt("--checkpoint", "checkpoint", "output checkpoint path");
  pre.opt("--steps", "steps", "optimizer steps (default 210000)");
  pre.opt("--lr", "lr", "base learning rate (default 5e-5)");
  pre.opt("--batch-size", "batch_size", "graphs per step (default 8)");
  pre.opt("--dropout", "dropout", "layer-1 dropout (default 0.1)");
  pre.opt("--warmup-steps", "warmup_steps", "linear warmup steps (default 8000)");
  pre.opt("--kl-coeff", "kl_coeff", "KL coefficient (default: 1/(N*2*d_z) per graph)");
  pre.flag("--literal-objective", "literal_objective",
           "minimize mse - kappa*kl (inspection only)");
  pre.flag("--freeze-initializer", "freeze_initializer",
           "keep CNN/BiLSTM at random initialization");
  pre.opt("--d-h", "d_h", "GCN hidden width (default 128)");
  pre.opt("--d-z", "d_z", "latent width per channel (default 75)");
  pre.opt("--kernels", "kernels", "CNN kernel sizes, comma list (default 3,4,5)");
  pre.opt("--maps", "maps", "CNN feature maps per kernel (default 30)");
  pre.opt("--lstm-hidden", "lstm_hidden", "BiLSTM width per direction (default 30)");
  pre.opt("--log-every", "log_every", "metric log cadence (default 100)");
  pre.opt("--checkpoint-every", "checkpoint_every", "periodic checkpoint cadence (0 = off)");
  pre.opt("--validate-every", "validate_every", "validation metric cadence (0 = off)");

  SubCommand emb(app.add_subcommand("embed", "export sentence embeddings"));
  emb.corpus_options();
  emb.embedding_options();
  emb.opt("--checkpoint", "checkpoint", "trained checkpoint");
  emb.opt("--out", "out", "output JSONL path");

  SubCommand summ(app.add_subcommand("summarize", "rank and select summary sentences"));
  summ.corpus_options();
  summ.embedding_options();
  summ.opt("--checkpoint", "checkpoint", "trained checkpoint (bigae backend)");
  summ.opt("--backend", "backend", "embedding backend: bigae | tfidf (default bigae)");
  summ.opt("--method", "method",
           "textrank | lexrank | pacsum | far | dasg | lead (default pacsum)");
  summ.opt("--preset", "preset", "hyper-parameter preset: cnndm | multinews");
  summ.opt("--out", "out", "output summaries JSONL path");
  summ.opt("-k,--k", "k", "summary sentence count (default 3)");
  summ.opt("--lambda1", "lambda1", "pacsum/far backward-edge weight");
  summ.opt("--lambda2", "lambda2", "pacsum/far forward-edge weight");
  summ.opt("--beta-sim", "beta_sim", "similarity threshold fraction (default 0)");
  summ.opt("--beta-far", "beta_far", "far diameter fraction (default 0.1)");
  summ.opt("--dasg-bucket", "dasg_bucket", "dasg distance bucket width (0 = ceil(m/3))");
  summ.opt("--dasg-fwd", "dasg_fwd", "dasg backward-looking weights, 3 comma values");
  summ.opt("--dasg-bwd", "dasg_bwd", "dasg forward-looking weights, 3 comma values");
  summ.opt("--damping", "damping", "pagerank damping (default 0.85)");
  summ.opt("--tol", "tol", "pagerank tolerance (default 1e-6)");

  SubCommand ev(app.add_subcommand("evaluate", "score summaries against references"));
  ev.corpus_options();
  ev.opt("--summaries", "summaries", "summaries JSONL to score");
  ev.opt("--out", "out", "report base path (writes <out>.json and <out>.csv)");
  ev.opt("--pairing", "pairing",
         "fragment-statistics A text: article | reference | oracle (default article)");
  ev.opt("--method", "method", "method name recorded in the report");
  ev.opt("--backend", "backend", "backend name recorded in the report");
  ev.opt("-k,--k", "k", "oracle selection size for --pairing oracle (default 3)");

  SubCommand orc(app.add_subcommand("oracle", "greedy reference-aware upper bound"));
  orc.corpus_options();
  orc.opt("--out", "out", "output summaries JSONL path");
  orc.opt("-k,--k", "k", "summary sentence count (default 3)");

  SubCommand ins(app.add_subcommand("inspect-graph", "dump a document's bipartite graph"));
  ins.corpus_options();
  ins.opt("--doc", "doc", "document id to dump");
  ins.opt("--out", "out", "write the edge list here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre.app->parsed()) {
      bigraphsum::run_pretrain(pre.resolve(), &std::cerr);
    } else if (emb.app->parsed()) {
      bigraphsum::run_embed(emb.resolve(), &std::cerr);
    } else if (summ.app->parsed()) {
      bigraphsum::run_summarize(summ.resolve(), &std::cerr);
    } else if (ev.app->parsed()) {
      bigraphsum::run_evaluate(ev.resolve(), &std::cerr);
    } else if (orc.app->parsed()) {
      bigraphsum::run_oracle(orc.resolve(), &std::cerr);
    } else if (ins.app->parsed()) {
      const bigraphsum::RunConfig cfg = ins.resolve();
      if (cfg.output_path.empty()) {
        bigraphsum::run_inspect_graph(cfg, std::cout, &std::cerr);
      } else {
        std::ofstream out(cfg.output_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open output: " + cfg.output_path);
        bigraphsum::run_inspect_graph(cfg, out, &std::cerr);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
