#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/model.hpp"
#include "ntm/negatives.hpp"
#include "ntm/objective.hpp"

namespace ntm {

struct TrainConfig {
  std::size_t topics = 20;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr = 1e-4;
  LossWeights weights;
  GumbelConfig gumbel;
  KlMode kl_mode = KlMode::kAggregate;
  /// When set, the temperature moves linearly from gumbel.temperature at the
  /// first epoch to this value at the last.
  std::optional<double> final_temperature;
  /// Draw Gumbel noise for z; when false z = softmax(ln theta / temperature).
  bool sample_noise = true;
  NegativeStrategy strategy;
  Ablation ablation;
  std::uint64_t seed = 1;
  std::size_t hidden = 256;
  std::size_t embed = 64;
  std::size_t disc_hidden = 128;
  /// Parameter groups left untouched by the optimizer.
  std::set<ParamGroup> frozen;

  void validate() const;
  /// Small-scale settings for tests and quick runs.
  static TrainConfig desk();
};

struct TrainOptions {
  /// Checkpoints go to <run_dir>/ckpt_epoch<N> and <run_dir>/final, the log to
  /// <run_dir>/log.jsonl. Nothing is written when unset.
  std::optional<std::filesystem::path> run_dir;
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::optional<std::filesystem::path> pool_cache;
  /// Echoed into checkpoints so they can re-tokenize new text.
  PreprocessConfig preprocess;
  /// Check every theta, z and x_hat row lies on its simplex (within 1e-9).
  bool check_simplex = false;
  std::function<void(std::size_t epoch, const LossBreakdown&)> on_epoch;
};

struct TrainReport {
  std::vector<LossBreakdown> epochs;
  double seconds = 0.0;
  std::optional<std::filesystem::path> final_checkpoint;
  std::size_t simplex_checks = 0;
  std::size_t simplex_violations = 0;
  double max_simplex_error = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// Builds per-step negatives and noise for the documents of one batch.
BatchInputs make_batch_inputs(const Corpus& corpus, std::span<const std::size_t> doc_ids,
                              const NegativeSampler& sampler, const TrainConfig& cfg, Rng& rng);

/// Deterministic under a fixed seed. Throws NonFiniteLoss on a non-finite batch loss.
TrainResult train(const Corpus& corpus, const TrainConfig& config, const TrainOptions& options = {});

/// Same, starting from the given parameters.
TrainResult train(const Corpus& corpus, const TrainConfig& config, ModelParams initial,
                  const TrainOptions& options = {});

}  // namespace ntm
