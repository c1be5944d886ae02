#include "ntm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ntm/checkpoint.hpp"
#include "ntm/error.hpp"

namespace ntm {
namespace {

constexpr double kSimplexTol = 1e-9;

double simplex_error(std::span<const double> row) {
  double sum = 0.0, err = 0.0;
  for (double x : row) {
    sum += x;
    if (x < 0.0) err = std::max(err, -x);
  }
  return std::max(err, std::abs(sum - 1.0));
}

void check_rows(const Matrix& m, TrainReport& report) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double e = simplex_error(m.row(r));
    ++report.simplex_checks;
    report.max_simplex_error = std::max(report.max_simplex_error, e);
    if (!(e <= kSimplexTol)) ++report.simplex_violations;
  }
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.l_global) && std::isfinite(l.l_local) && std::isfinite(l.l_kl) &&
         std::isfinite(l.l_e) && std::isfinite(l.l_r) && std::isfinite(l.l_total);
}

void accumulate(LossBreakdown& acc, const LossBreakdown& l) {
  acc.l_global += l.l_global;
  acc.l_local += l.l_local;
  acc.l_kl += l.l_kl;
  acc.l_e += l.l_e;
  acc.l_r += l.l_r;
  acc.l_total += l.l_total;
}

void scale(LossBreakdown& l, double s) {
  l.l_global *= s;
  l.l_local *= s;
  l.l_kl *= s;
  l.l_e *= s;
  l.l_r *= s;
  l.l_total *= s;
}

ModelDims dims_for(const Corpus& corpus, const TrainConfig& cfg) {
  return ModelDims{corpus.vocab.size(), cfg.topics, cfg.hidden, cfg.embed, cfg.disc_hidden};
}

}  // namespace

void TrainConfig::validate() const {
  if (topics < 2) throw Error(ErrorCode::kInvalidConfig, "K must be >= 2");
  if (epochs < 1) throw Error(ErrorCode::kInvalidConfig, "epochs must be >= 1");
  if (batch_size < 2) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 2 for batch norm");
  if (!(lr > 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning rate must be > 0");
  if (!(gumbel.temperature > 0.0) || (final_temperature && !(*final_temperature > 0.0)))
    throw Error(ErrorCode::kInvalidConfig, "temperature must be > 0");
  if (hidden < 1 || embed < 1 || disc_hidden < 1)
    throw Error(ErrorCode::kInvalidConfig, "network widths must be >= 1");
  weights.validate();
  strategy.validate();
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.epochs = 50;
  c.batch_size = 32;
  c.lr = 1e-3;
  return c;
}

BatchInputs make_batch_inputs(const Corpus& corpus, std::span<const std::size_t> doc_ids,
                              const NegativeSampler& sampler, const TrainConfig& cfg, Rng& rng) {
  const std::size_t vocab = corpus.vocab.size();
  const std::size_t batch = doc_ids.size();
  BatchInputs in;
  std::vector<const BowDocument*> docs;
  docs.reserve(batch);
  for (auto id : doc_ids) docs.push_back(&corpus.docs.at(id));
  in.freq = frequency_matrix(std::span<const BowDocument* const>(docs), vocab);

  if (cfg.ablation.use_global) {
    std::vector<const BowDocument*> neg_docs;
    for (std::size_t b = 0; b < batch; ++b)
      for (auto id : sampler.draw_documents(doc_ids[b], rng)) {
        neg_docs.push_back(&corpus.docs[id]);
        in.negative_anchor.push_back(b);
      }
    in.negative_freq = frequency_matrix(std::span<const BowDocument* const>(neg_docs), vocab);
  }
  if (cfg.ablation.use_local) {
    in.positive_words.resize(batch);
    in.negative_words.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      for (const auto& [w, c] : docs[b]->counts) in.positive_words[b].push_back(w);
      in.negative_words[b] =
          sample_negative_words(*docs[b], vocab, cfg.strategy.n_neg_words * docs[b]->n_types(), rng);
    }
  }
  in.gumbel = cfg.sample_noise ? gumbel_noise(batch, cfg.topics, rng) : Matrix(batch, cfg.topics);
  return in;
}

TrainResult train(const Corpus& corpus, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  Rng init_rng(config.seed);
  if (corpus.vocab.size() == 0) throw Error(ErrorCode::kEmptyVocabulary, "corpus has no vocabulary");
  return train(corpus, config, ModelParams::initialize(dims_for(corpus, config), init_rng), options);
}

TrainResult train(const Corpus& corpus, const TrainConfig& config, ModelParams initial,
                  const TrainOptions& options) {
  config.validate();
  if (corpus.size() < 2) throw Error(ErrorCode::kCorpusTooSmall, "training needs at least 2 documents");
  if (initial.dims.vocab != corpus.vocab.size() || initial.dims.topics != config.topics)
    throw Error(ErrorCode::kLengthMismatch, "initial parameters do not match corpus / config");

  const auto start = std::chrono::steady_clock::now();
  // Separate streams for initialization and training draws.
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainResult result{std::move(initial), {}};
  ModelParams& params = result.params;
  TrainReport& report = result.report;

  const NegativeSampler sampler(corpus, config.strategy, options.pool_cache);

  std::vector<AdamState> adam;
  for (const auto& t : params.trainable()) adam.emplace_back(t.values.size(), config.lr);

  std::ofstream log;
  if (options.run_dir) {
    std::filesystem::create_directories(*options.run_dir);
    log.open(*options.run_dir / "log.jsonl", std::ios::trunc);
    if (!log) throw Error(ErrorCode::kIo, "cannot write training log");
  }
  auto save = [&](const std::filesystem::path& path) {
    save_checkpoint(path, Checkpoint{params, config, options.preprocess, corpus.vocab});
  };

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  ObjectiveConfig obj{config.weights, config.ablation, config.gumbel, config.kl_mode};
  const bool encoder_frozen = config.frozen.contains(ParamGroup::kEncoder);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    if (config.final_temperature && config.epochs > 1) {
      const double f = static_cast<double>(epoch - 1) / static_cast<double>(config.epochs - 1);
      obj.gumbel.temperature = config.gumbel.temperature + f * (*config.final_temperature - config.gumbel.temperature);
    }
    std::shuffle(order.begin(), order.end(), rng);

    LossBreakdown epoch_loss;
    std::size_t n_batches = 0;
    for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - at);
      if (len < 2) break;
      const std::span<const std::size_t> ids(order.data() + at, len);
      const BatchInputs in = make_batch_inputs(corpus, ids, sampler, config, rng);

      ModelParams grads = ModelParams::zeros(params.dims);
      ForwardTrace trace;
      const LossBreakdown loss = batch_loss(params, in, obj, &grads, &trace);
      if (!finite(loss))
        throw Error(ErrorCode::kNonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " +
                                                   std::to_string(n_batches));
      if (options.check_simplex) {
        check_rows(trace.theta, report);
        check_rows(trace.z, report);
        check_rows(trace.x_hat, report);
      }
      if (!encoder_frozen) batch_norm_update_running(params.encoder.bn, trace.bn, len);

      auto p_refs = params.trainable();
      const auto g_refs = std::as_const(grads).trainable();
      for (std::size_t i = 0; i < p_refs.size(); ++i) {
        if (config.frozen.contains(p_refs[i].group)) continue;
        adam_step(p_refs[i].values, g_refs[i].values, adam[i]);
      }
      accumulate(epoch_loss, loss);
      ++n_batches;
    }
    scale(epoch_loss, 1.0 / static_cast<double>(std::max<std::size_t>(n_batches, 1)));
    if (!params.all_finite())
      throw Error(ErrorCode::kNonFiniteLoss, "non-finite parameters after epoch " + std::to_string(epoch));
    report.epochs.push_back(epoch_loss);
    if (options.on_epoch) options.on_epoch(epoch, epoch_loss);

    if (log.is_open()) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
      log << nlohmann::json{{"epoch", epoch},
                            {"l_global", epoch_loss.l_global},
                            {"l_local", epoch_loss.l_local},
                            {"l_kl", epoch_loss.l_kl},
                            {"l_e", epoch_loss.l_e},
                            {"l_r", epoch_loss.l_r},
                            {"l_total", epoch_loss.l_total},
                            {"seconds", secs}}
                 .dump()
          << "\n";
      log.flush();
    }
    if (options.run_dir && options.checkpoint_every > 0 && epoch % options.checkpoint_every == 0)
      save(*options.run_dir / ("ckpt_epoch" + std::to_string(epoch)));
  }

  if (options.run_dir) {
    report.final_checkpoint = *options.run_dir / "final";
    save(*report.final_checkpoint);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace ntm
