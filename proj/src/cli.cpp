#include "tae/cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tae/version.hpp"

namespace tae::cli {

namespace {

std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12f", v);
  return buf;
}

std::string iso_utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json config_json(const TrainConfig& c) {
  nlohmann::json j;
  j["embedding_dim"] = c.embedding_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["epochs"] = c.epochs;
  j["phase_length"] = c.phase_length;
  j["learning_rate"] = c.learning_rate;
  j["temperature_start"] = c.temperature_start;
  j["temperature_min"] = c.temperature_min;
  j["temperature_decay"] = c.temperature_decay;
  j["seed"] = c.seed;
  j["shuffle"] = c.shuffle;
  return j;
}

struct TrainArgs {
  std::string corpus;
  std::string embeddings;
  std::string out_dir;
  TrainConfig config;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const EmbeddingTable table = load_embeddings(a.embeddings);
  const std::vector<EduDocument> docs = load_corpus(a.corpus);
  if (docs.empty()) {
    throw std::runtime_error("train: corpus '" + a.corpus +
                             "' contains no documents");
  }

  TrainConfig config = a.config;
  config.embedding_dim = table.dimension();
  config.validate();

  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);

  // Manifest goes out before any training so a run is reconstructible even
  // if interrupted.
  nlohmann::json manifest;
  manifest["command"] = "train";
  manifest["version"] = kVersion;
  manifest["created_utc"] = iso_utc_now();
  manifest["seed"] = config.seed;
  manifest["config"] = config_json(config);
  manifest["inputs"]["corpus"]["path"] = a.corpus;
  manifest["inputs"]["corpus"]["sha256"] = sha256_file_hex(a.corpus);
  manifest["inputs"]["embeddings"]["path"] = a.embeddings;
  manifest["inputs"]["embeddings"]["sha256"] = sha256_file_hex(a.embeddings);
  {
    std::ofstream mf(dir / "manifest.json");
    mf << manifest.dump(2) << '\n';
    if (!mf) {
      throw std::runtime_error("cannot write " +
                               (dir / "manifest.json").string());
    }
  }

  OovStats oov;
  const std::vector<TrainDoc> corpus = prepare_corpus(docs, table, &oov);
  const TrainResult result = train(config, corpus);

  {
    std::ofstream lf(dir / "loss_history.csv");
    lf << emit_loss_plot_data(result.history);
    if (!lf) {
      throw std::runtime_error("cannot write " +
                               (dir / "loss_history.csv").string());
    }
  }
  save_checkpoint(dir / "checkpoint.tae", result.to_checkpoint(config));

  out << "trained " << config.epochs << " epochs on " << corpus.size()
      << " documents (d=" << config.embedding_dim << ", H=" << config.hidden_dim
      << ")\n";
  if (oov.oov_tokens > 0) {
    out << "out-of-vocabulary tokens skipped: " << oov.oov_tokens
        << " (all-OOV EDUs: " << oov.all_oov_edus << ")\n";
  }
  for (const std::string& w : table.warnings()) {
    out << "warning: " << w << '\n';
  }
  if (!result.history.empty()) {
    out << "epoch-1 mean loss " << fmt12(result.history.front().mean_loss)
        << ", final mean loss " << fmt12(result.history.back().mean_loss)
        << '\n';
  }
  out << "wrote " << (dir / "checkpoint.tae").string() << ", "
      << (dir / "loss_history.csv").string() << ", "
      << (dir / "manifest.json").string() << '\n';
  return 0;
}

struct InduceArgs {
  std::string checkpoint;
  std::string corpus;
  std::string embeddings;
  std::string out_path;
};

int cmd_induce(const InduceArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const EmbeddingTable table = load_embeddings(a.embeddings);
  if (table.dimension() != ckpt.config.embedding_dim) {
    throw std::runtime_error(
        "induce: embedding dimension " + std::to_string(table.dimension()) +
        " does not match checkpoint dimension " +
        std::to_string(ckpt.config.embedding_dim));
  }
  const std::vector<EduDocument> docs = load_corpus(a.corpus);
  const std::vector<TrainDoc> corpus = prepare_corpus(docs, table);
  const std::vector<NamedTree> trees = induce_trees(ckpt.params, corpus);
  write_tree_file(a.out_path, trees);
  out << "wrote " << trees.size() << " trees to " << a.out_path << '\n';
  return 0;
}

struct EvalArgs {
  std::string pred;
  std::string gold;
  std::string baseline;
  std::uint64_t seed = 1;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const std::vector<NamedTree> gold = read_tree_file(a.gold);
  std::map<std::string, const BinaryTree*> gold_by_id;
  for (const NamedTree& g : gold) {
    if (!gold_by_id.emplace(g.doc_id, &g.tree).second) {
      throw std::runtime_error("eval: duplicate doc_id '" + g.doc_id +
                               "' in gold file");
    }
  }

  std::vector<NamedTree> pred;
  if (!a.baseline.empty()) {
    const BaselineKind kind = baseline_kind_from_string(a.baseline);
    Rng rng(a.seed);
    for (const NamedTree& g : gold) {
      pred.push_back({g.doc_id, baseline_tree(kind, g.tree.leaf_count(), rng)});
    }
  } else {
    pred = read_tree_file(a.pred);
  }

  std::map<std::string, const BinaryTree*> pred_by_id;
  for (const NamedTree& p : pred) {
    if (!pred_by_id.emplace(p.doc_id, &p.tree).second) {
      throw std::runtime_error("eval: duplicate doc_id '" + p.doc_id +
                               "' in prediction file");
    }
  }

  std::vector<std::string> missing_pred, missing_gold;
  for (const NamedTree& g : gold) {
    if (!pred_by_id.count(g.doc_id)) {
      missing_pred.push_back(g.doc_id);
    }
  }
  for (const NamedTree& p : pred) {
    if (!gold_by_id.count(p.doc_id)) {
      missing_gold.push_back(p.doc_id);
    }
  }
  if (!missing_pred.empty() || !missing_gold.empty()) {
    std::ostringstream msg;
    msg << "eval: doc_id mismatch between prediction and gold files";
    if (!missing_pred.empty()) {
      msg << "; missing from predictions:";
      for (const std::string& id : missing_pred) {
        msg << ' ' << id;
      }
    }
    if (!missing_gold.empty()) {
      msg << "; missing from gold:";
      for (const std::string& id : missing_gold) {
        msg << ' ' << id;
      }
    }
    throw std::runtime_error(msg.str());
  }

  out << "doc_id\tleaves\tprecision\trecall\tf1\n";
  std::size_t pooled_hits = 0, pooled_pred = 0, pooled_gold = 0;
  for (const NamedTree& g : gold) {
    const BinaryTree& p = *pred_by_id.at(g.doc_id);
    const SpanScore score = unlabeled_span_f1(p, g.tree);
    out << g.doc_id << '\t' << g.tree.leaf_count() << '\t'
        << fmt12(score.precision) << '\t' << fmt12(score.recall) << '\t'
        << fmt12(score.f1) << '\n';
    const auto sp = p.spans();
    const auto sg = g.tree.spans();
    for (const Span& s : sp) {
      pooled_hits += sg.count(s);
    }
    pooled_pred += sp.size();
    pooled_gold += sg.size();
  }

  SpanScore micro{1.0, 1.0, 1.0};  // all-pools-empty degenerates to perfect
  if (pooled_pred + pooled_gold > 0) {
    micro.precision = pooled_pred
                          ? static_cast<double>(pooled_hits) /
                                static_cast<double>(pooled_pred)
                          : 0.0;
    micro.recall = pooled_gold ? static_cast<double>(pooled_hits) /
                                     static_cast<double>(pooled_gold)
                               : 0.0;
    micro.f1 = (micro.precision + micro.recall) > 0.0
                   ? 2.0 * micro.precision * micro.recall /
                         (micro.precision + micro.recall)
                   : 0.0;
  }
  out << "micro\t" << gold.size() << '\t' << fmt12(micro.precision) << '\t'
      << fmt12(micro.recall) << '\t' << fmt12(micro.f1) << '\n';
  return 0;
}

struct StatsArgs {
  std::string trees;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const std::vector<NamedTree> trees = read_tree_file(a.trees);
  out << "doc_id\tleaves\theight\n";
  std::size_t total_leaves = 0, total_height = 0;
  std::size_t lb_internal = 0, lb_total = 0;
  for (const NamedTree& named : trees) {
    const BinaryTree& t = named.tree;
    out << named.doc_id << '\t' << t.leaf_count() << '\t' << t.height() << '\n';
    total_leaves += t.leaf_count();
    total_height += t.height();
    if (t.leaf_count() >= 3) {
      for (std::size_t node = 0; node < t.node_count(); ++node) {
        if (!t.is_leaf(node)) {
          ++lb_total;
          if (!t.is_leaf(t.left(node))) {
            ++lb_internal;
          }
        }
      }
    }
  }
  out << "trees\t" << trees.size() << '\n';
  if (!trees.empty()) {
    out << "mean_leaves\t"
        << fmt12(static_cast<double>(total_leaves) /
                 static_cast<double>(trees.size()))
        << '\n';
    out << "mean_height\t"
        << fmt12(static_cast<double>(total_height) /
                 static_cast<double>(trees.size()))
        << '\n';
  }
  if (lb_total > 0) {
    out << "left_branching_proportion\t"
        << fmt12(static_cast<double>(lb_internal) /
                 static_cast<double>(lb_total))
        << '\n';
  }
  return 0;
}

}  // namespace

std::string emit_loss_plot_data(const std::vector<EpochRecord>& history) {
  if (history.empty()) {
    throw std::invalid_argument("emit_loss_plot_data: empty history");
  }
  std::string out = "epoch,phase,mean_loss\n";
  for (const EpochRecord& rec : history) {
    out += std::to_string(rec.epoch);
    out += ',';
    out += phase_code(rec.phase);
    out += ',';
    out += fmt12(rec.mean_loss);
    out += '\n';
  }
  return out;
}

std::string sha256_file_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file for digest: " + path.string());
  }
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 init failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(ctx, buf, static_cast<size_t>(got)) != 1) {
      EVP_MD_CTX_free(ctx);
      throw std::runtime_error("sha256 update failed");
    }
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 final failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Unsupervised binary-tree induction over EDU-segmented "
               "documents via a tree auto-encoder"};
  app.name("tae");
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a model and write a run directory");
  train_cmd->add_option("--corpus", train_args.corpus, "corpus JSONL file")
      ->required();
  train_cmd
      ->add_option("--embeddings", train_args.embeddings,
                   "word embedding text file")
      ->required();
  train_cmd->add_option("--out", train_args.out_dir, "output directory")
      ->required();
  train_cmd->add_option("--epochs", train_args.config.epochs, "epoch count");
  train_cmd->add_option("--hidden", train_args.config.hidden_dim,
                        "hidden state dimension");
  train_cmd->add_option("--seed", train_args.config.seed, "master seed");
  train_cmd->add_option("--phase-length", train_args.config.phase_length,
                        "epochs per phase block");
  train_cmd->add_option("--lr", train_args.config.learning_rate,
                        "SGD learning rate");
  train_cmd->add_option("--temp", train_args.config.temperature_start,
                        "initial Gumbel-Softmax temperature");
  train_cmd->add_option("--temp-decay", train_args.config.temperature_decay,
                        "per-epoch temperature decay factor");
  train_cmd->add_option("--temp-min", train_args.config.temperature_min,
                        "temperature floor");

  InduceArgs induce_args;
  CLI::App* induce_cmd = app.add_subcommand(
      "induce", "Write argmax-mode trees for a corpus with a trained model");
  induce_cmd
      ->add_option("--checkpoint", induce_args.checkpoint, "checkpoint file")
      ->required();
  induce_cmd->add_option("--corpus", induce_args.corpus, "corpus JSONL file")
      ->required();
  induce_cmd
      ->add_option("--embeddings", induce_args.embeddings,
                   "word embedding text file (must match the checkpoint)")
      ->required();
  induce_cmd->add_option("--out", induce_args.out_path, "output tree file")
      ->required();

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Score predicted (or baseline) trees against gold trees");
  CLI::Option* pred_opt =
      eval_cmd->add_option("--pred", eval_args.pred, "predicted tree file");
  eval_cmd->add_option("--gold", eval_args.gold, "gold tree file")->required();
  CLI::Option* baseline_opt = eval_cmd->add_option(
      "--baseline", eval_args.baseline,
      "score a generated baseline instead of --pred "
      "(left|right|balanced|random)");
  eval_cmd->add_option("--seed", eval_args.seed,
                       "seed for the random baseline");

  StatsArgs stats_args;
  CLI::App* stats_cmd =
      app.add_subcommand("stats", "Describe the trees in a tree file");
  stats_cmd->add_option("--trees", stats_args.trees, "tree file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (*eval_cmd && eval_args.pred.empty() && eval_args.baseline.empty()) {
      throw CLI::RequiredError("--pred or --baseline");
    }
    (void)pred_opt;
    (void)baseline_opt;
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    err << app.help();
    return 2;
  }

  try {
    if (*train_cmd) {
      return cmd_train(train_args, out);
    }
    if (*induce_cmd) {
      return cmd_induce(induce_args, out);
    }
    if (*eval_cmd) {
      return cmd_eval(eval_args, out);
    }
    return cmd_stats(stats_args, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(const std::vector<std::string>& args) {
  return run(args, std::cout, std::cerr);
}

}  // namespace tae::cli
