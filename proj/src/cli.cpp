#include "ntm/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ntm/checkpoint.hpp"
#include "ntm/corpus.hpp"
#include "ntm/error.hpp"
#include "ntm/metrics.hpp"
#include "ntm/trainer.hpp"

namespace ntm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct PreprocessFlags {
  std::size_t min_df = 1;
  double max_df = 1.0;
  std::size_t max_vocab = 0;
  std::size_t min_len = 2;
  bool stem = false;
  std::string stopwords;

  void add(CLI::App* app) {
    app->add_option("--min-df", min_df, "Minimum document frequency")->check(CLI::PositiveNumber);
    app->add_option("--max-df", max_df, "Maximum document-frequency ratio in (0,1]");
    app->add_option("--max-vocab", max_vocab, "Vocabulary size cap (0: unbounded)");
    app->add_option("--min-len", min_len, "Minimum token length")->check(CLI::PositiveNumber);
    app->add_flag("--stem", stem, "Apply the suffix-stripping stemmer");
    app->add_option("--stopwords", stopwords, "Stopword file replacing the bundled list")
        ->check(CLI::ExistingFile);
  }

  PreprocessConfig config() const {
    PreprocessConfig c;
    c.min_df = min_df;
    c.max_df_ratio = max_df;
    if (max_vocab > 0) c.max_vocab = max_vocab;
    c.min_token_len = min_len;
    c.stemming = stem;
    if (!stopwords.empty()) c.stopword_list = load_stopwords(stopwords);
    c.validate();
    return c;
  }
};

struct TrainFlags {
  std::string corpus, labels, vocab, out, preset = "paper", neg_strategy = "similarity", pool_cache,
      kl = "aggregate";
  std::size_t topics = 0, epochs = 0, batch = 0, hidden = 0, embed = 0, neg_docs = 0, neg_words = 0,
              pool_size = 0, ckpt_every = 0;
  double lr = 0, mu = 0, beta = 0, gamma = 0, temperature = 0, final_temperature = 0;
  std::uint64_t seed = 1;
  bool no_global = false, no_local = false, hard = false;
  PreprocessFlags pre;
  CLI::App* app = nullptr;

  bool given(const char* name) const { return app->count(name) > 0; }

  TrainConfig config() const {
    TrainConfig c = preset == "desk" ? TrainConfig::desk() : TrainConfig{};
    if (given("--topics")) c.topics = topics;
    if (given("--epochs")) c.epochs = epochs;
    if (given("--batch")) c.batch_size = batch;
    if (given("--lr")) c.lr = lr;
    if (given("--mu")) c.weights.mu_w = mu;
    if (given("--beta")) c.weights.beta_w = beta;
    if (given("--gamma")) c.weights.gamma_w = gamma;
    if (given("--temperature")) c.gumbel.temperature = temperature;
    if (given("--final-temperature")) c.final_temperature = final_temperature;
    if (given("--hidden")) c.hidden = hidden;
    if (given("--embed-dim")) c.embed = embed;
    if (given("--neg-docs")) c.strategy.n_neg_docs = neg_docs;
    if (given("--neg-words")) c.strategy.n_neg_words = neg_words;
    if (given("--pool-size")) c.strategy.pool_size = pool_size;
    c.strategy.kind = neg_strategy == "random" ? NegativeKind::kRandom : NegativeKind::kSimilarity;
    c.ablation.use_global = !no_global;
    c.ablation.use_local = !no_local;
    c.gumbel.hard = hard;
    c.kl_mode = parse_kl_mode(kl);
    c.seed = seed;
    c.validate();
    return c;
  }
};

void print_table(std::ostream& os, const MetricsReport& r, const Vocabulary& vocab) {
  os << "topic  npmi      tu      top words\n";
  for (std::size_t k = 0; k < r.top_words.size(); ++k) {
    os << std::setw(5) << k << "  " << std::fixed << std::setprecision(4) << std::setw(8) << r.npmi.per_topic[k]
       << "  " << std::setw(6) << r.tu.per_topic[k] << "  ";
    for (std::size_t i = 0; i < r.top_words[k].size(); ++i) os << (i ? " " : "") << vocab.word(r.top_words[k][i]);
    os << "\n";
  }
  os << "mean   " << std::setw(8) << r.npmi.mean << "  " << std::setw(6) << r.tu.mean << "\n";
  if (r.acc) os << "acc    " << *r.acc << "\n";
  os.unsetf(std::ios::floatfield);
}

int cmd_preprocess(const std::string& corpus, const std::string& labels, const std::string& out_dir,
                   const PreprocessFlags& pre, std::ostream& out) {
  const auto cfg = pre.config();
  const auto raw = read_corpus(corpus, labels.empty() ? std::nullopt : std::optional<fs::path>(labels));
  const Corpus c = build_corpus(raw, cfg);
  fs::create_directories(out_dir);
  write_vocabulary(fs::path(out_dir) / "vocab.txt", c.vocab, cfg);
  std::ofstream bow(fs::path(out_dir) / "bow.jsonl", std::ios::trunc);
  if (!bow) throw Error(ErrorCode::kIo, "cannot write bow.jsonl");
  for (std::size_t i = 0; i < c.size(); ++i) {
    json counts = json::array();
    for (const auto& [w, n] : c.docs[i].counts) counts.push_back({w, n});
    json rec{{"line", c.source_line[i]}, {"counts", counts}};
    rec["label"] = c.docs[i].label ? json(*c.docs[i].label) : json(nullptr);
    bow << rec.dump() << "\n";
  }
  out << "documents " << c.size() << " skipped " << c.skipped.size() << " vocabulary " << c.vocab.size() << "\n";
  return 0;
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  const auto cfg = f.config();
  const auto pre = f.pre.config();
  const auto raw = read_corpus(f.corpus, f.labels.empty() ? std::nullopt : std::optional<fs::path>(f.labels));
  const Corpus corpus = f.vocab.empty() ? build_corpus(raw, pre)
                                        : build_corpus(raw, pre, Vocabulary(read_vocabulary(f.vocab), {}));
  TrainOptions opts;
  opts.run_dir = f.out;
  opts.checkpoint_every = f.ckpt_every;
  opts.preprocess = pre;
  if (!f.pool_cache.empty()) opts.pool_cache = f.pool_cache;
  const auto result = train(corpus, cfg, opts);
  const auto& last = result.report.epochs.back();
  out << "trained " << cfg.epochs << " epochs on " << corpus.size() << " documents, |V|=" << corpus.vocab.size()
      << ", K=" << cfg.topics << "; final l_total=" << last.l_total << "\n";
  out << "checkpoint " << result.report.final_checkpoint->string() << "\n";
  return 0;
}

Corpus load_for_checkpoint(const Checkpoint& ckpt, const std::string& corpus, const std::string& labels) {
  const auto raw = read_corpus(corpus, labels.empty() ? std::nullopt : std::optional<fs::path>(labels));
  return build_corpus(raw, ckpt.preprocess, ckpt.vocab);
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus, const std::string& labels,
             const MetricsConfig& mcfg, const std::string& out_file, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Corpus c = load_for_checkpoint(ckpt, corpus, labels);
  if (c.size() == 0) throw Error(ErrorCode::kEmptyDocument, "no evaluable document in corpus");
  const MetricsReport report = evaluate(ckpt.params, c, mcfg);
  json j = report.to_json(ckpt.vocab);
  j["config"]["skipped_lines"] = c.skipped;
  const std::string text = j.dump(2);
  if (!out_file.empty()) {
    std::ofstream f(out_file, std::ios::trunc);
    if (!f) throw Error(ErrorCode::kIo, "cannot write " + out_file);
    f << text << "\n";
  }
  out << text << "\n";
  print_table(err, report, ckpt.vocab);
  return 0;
}

int cmd_topics(const std::string& ckpt_path, std::size_t top, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::size_t m = std::min(top, ckpt.vocab.size());
  for (const auto& words : topic_word_set(ckpt.params.decoder, m)) {
    for (std::size_t i = 0; i < words.size(); ++i) out << (i ? " " : "") << ckpt.vocab.word(words[i]);
    out << "\n";
  }
  return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& corpus, const std::string& out_file,
              std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto raw = read_corpus(corpus);
  std::ofstream file;
  if (!out_file.empty()) {
    file.open(out_file, std::ios::trunc);
    if (!file) throw Error(ErrorCode::kIo, "cannot write " + out_file);
  }
  std::ostream& os = out_file.empty() ? out : file;
  for (std::size_t i = 0; i < raw.texts.size(); ++i) {
    json rec{{"line", i}};
    try {
      const BowDocument doc = vectorize(tokenize(raw.texts[i], ckpt.preprocess), ckpt.vocab);
      Matrix freq(1, ckpt.vocab.size());
      const auto x = frequencies(doc, ckpt.vocab.size());
      std::copy(x.begin(), x.end(), freq.row(0).begin());
      const auto theta = encode(freq, ckpt.params.encoder, Mode::kEval).theta;
      rec["theta"] = std::vector<double>(theta.row(0).begin(), theta.row(0).end());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyDocument) throw;
      rec["theta"] = nullptr;
    }
    os << rec.dump() << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural topic model with deep mutual information estimation", "ntm-dmie"};
  app.require_subcommand(1);
  app.allow_extras(false);

  // preprocess
  auto* pre_cmd = app.add_subcommand("preprocess", "Build the vocabulary and bag-of-words cache");
  std::string pre_corpus, pre_labels, pre_out;
  PreprocessFlags pre_flags;
  pre_cmd->add_option("--corpus", pre_corpus, "Corpus (.txt one doc per line, or .jsonl)")->required()->check(CLI::ExistingFile);
  pre_cmd->add_option("--labels", pre_labels, "Label file aligned by line")->check(CLI::ExistingFile);
  pre_cmd->add_option("--out", pre_out, "Output directory")->required();
  pre_flags.add(pre_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  TrainFlags tf;
  tf.app = train_cmd;
  train_cmd->add_option("--corpus", tf.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--labels", tf.labels, "Label file")->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab", tf.vocab, "Use this vocabulary instead of building one")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tf.out, "Run directory")->required();
  train_cmd->add_option("--preset", tf.preset, "paper (default) or desk")->check(CLI::IsMember({"paper", "desk"}));
  train_cmd->add_option("--topics", tf.topics, "Number of topics K")->check(CLI::Range(2, 100000));
  train_cmd->add_option("--epochs", tf.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tf.batch, "Batch size (>= 2)")->check(CLI::Range(2, 1 << 30));
  train_cmd->add_option("--lr", tf.lr, "Adam learning rate");
  train_cmd->add_option("--mu", tf.mu, "Reconstruction weight mu");
  train_cmd->add_option("--beta", tf.beta, "Mutual-information weight beta");
  train_cmd->add_option("--gamma", tf.gamma, "KL weight gamma");
  train_cmd->add_option("--temperature", tf.temperature, "Gumbel-Softmax temperature");
  train_cmd->add_option("--final-temperature", tf.final_temperature, "Anneal the temperature linearly to this value");
  train_cmd->add_flag("--hard", tf.hard, "Straight-through one-hot samples");
  train_cmd->add_option("--kl", tf.kl, "Prior term: aggregate or document")
      ->check(CLI::IsMember({"aggregate", "document"}));
  train_cmd->add_option("--hidden", tf.hidden, "Encoder hidden width")->check(CLI::PositiveNumber);
  train_cmd->add_option("--embed-dim", tf.embed, "Word embedding width")->check(CLI::PositiveNumber);
  train_cmd->add_option("--neg-strategy", tf.neg_strategy, "random or similarity")
      ->check(CLI::IsMember({"random", "similarity"}));
  train_cmd->add_option("--neg-docs", tf.neg_docs, "Negative documents per anchor")->check(CLI::PositiveNumber);
  train_cmd->add_option("--neg-words", tf.neg_words, "Negative words per positive word")->check(CLI::PositiveNumber);
  train_cmd->add_option("--pool-size", tf.pool_size, "Dissimilar pool size per document")->check(CLI::PositiveNumber);
  train_cmd->add_option("--pool-cache", tf.pool_cache, "Cache file for dissimilarity pools");
  train_cmd->add_flag("--no-global", tf.no_global, "Drop the global mutual-information term");
  train_cmd->add_flag("--no-local", tf.no_local, "Drop the local mutual-information term");
  train_cmd->add_option("--seed", tf.seed, "Random seed");
  train_cmd->add_option("--ckpt-every", tf.ckpt_every, "Also checkpoint every N epochs");
  tf.pre.add(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Compute NPMI, TU and clustering accuracy");
  std::string ev_ckpt, ev_corpus, ev_labels, ev_out;
  MetricsConfig mcfg;
  bool pairs_norm = false;
  eval_cmd->add_option("--ckpt", ev_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--corpus", ev_corpus, "Reference corpus")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--labels", ev_labels, "Label file")->check(CLI::ExistingFile);
  eval_cmd->add_option("--window", mcfg.window, "Co-occurrence window")->check(CLI::Range(2, 1 << 30));
  eval_cmd->add_option("--top", mcfg.top_m, "Top words per topic M")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--eps", mcfg.eps, "NPMI smoothing epsilon");
  eval_cmd->add_flag("--pairs-norm", pairs_norm, "Normalize NPMI by the pair count instead of M");
  eval_cmd->add_option("--out", ev_out, "Also write the JSON report here");

  // topics
  auto* topics_cmd = app.add_subcommand("topics", "Print the top words of every topic");
  std::string tp_ckpt;
  std::size_t tp_top = 10;
  topics_cmd->add_option("--ckpt", tp_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  topics_cmd->add_option("--top", tp_top, "Words per topic")->check(CLI::PositiveNumber);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Topic distribution for each line of a text file");
  std::string in_ckpt, in_corpus, in_out;
  infer_cmd->add_option("--ckpt", in_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--corpus", in_corpus, "Input text")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--out", in_out, "Output JSON-lines file (default stdout)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*pre_cmd) return cmd_preprocess(pre_corpus, pre_labels, pre_out, pre_flags, out);
    if (*train_cmd) return cmd_train(tf, out);
    if (*eval_cmd) {
      mcfg.norm = pairs_norm ? NpmiNorm::kPairs : NpmiNorm::kLiteral;
      return cmd_eval(ev_ckpt, ev_corpus, ev_labels, mcfg, ev_out, out, err);
    }
    if (*topics_cmd) return cmd_topics(tp_ckpt, tp_top, out);
    if (*infer_cmd) return cmd_infer(in_ckpt, in_corpus, in_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidConfig ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace ntm::cli
