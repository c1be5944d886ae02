#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ntm/model.hpp"

namespace ntm {

struct LossWeights {
  double beta_w = 1.0;
  double gamma_w = 1.0;
  double mu_w = 0.4;

  void validate() const;
};

/// Which mutual-information terms enter the encoder loss.
struct Ablation {
  bool use_global = true;
  bool use_local = true;
};

/// How the prior term compares theta with the uniform distribution.
enum class KlMode {
  kAggregate,    // KL(batch mean of theta || uniform)
  kPerDocument,  // batch mean of KL(theta_d || uniform)
};

const char* kl_mode_name(KlMode mode);
KlMode parse_kl_mode(std::string_view name);

struct LossBreakdown {
  double l_global = 0.0;  // JS bound of the global pairs (<= 0); 0 when disabled
  double l_local = 0.0;   // batch mean of the per-document local bound; 0 when disabled
  double l_kl = 0.0;      // prior term, see KlMode
  double l_e = 0.0;
  double l_r = 0.0;
  double l_total = 0.0;
};

/// mean ln sigma(pos) + mean ln(1 - sigma(neg)), sigma clamped to [1e-7, 1 - 1e-7].
double js_mi_term(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// sum_k theta_k ln(K theta_k), theta clamped to >= 1e-12 inside the log.
double kl_to_uniform(std::span<const double> theta);

/// ||x_hat - x||^2.
double reconstruction_loss(std::span<const double> x_hat, std::span<const double> x_freq);

/// -beta (global) - beta (local) + gamma kl, skipping disabled terms.
double encoder_loss(double l_global, double l_local, double l_kl, const LossWeights& weights,
                    const Ablation& ablation = {});

/// mu l_r + (1 - mu) l_e.
double total_loss(double l_r, double l_e, const LossWeights& weights);

/// Everything random about one training step, drawn up front so the loss is
/// a deterministic function of the parameters.
struct BatchInputs {
  Matrix freq;    // B x |V|
  Matrix gumbel;  // B x K
  /// Negative documents for the global term and the batch row each is paired with.
  Matrix negative_freq;
  std::vector<std::size_t> negative_anchor;
  /// Distinct word types of each document.
  std::vector<std::vector<std::size_t>> positive_words;
  /// Per document, n negatives for each positive word, grouped by positive.
  std::vector<std::vector<std::size_t>> negative_words;
};

struct ObjectiveConfig {
  LossWeights weights;
  Ablation ablation;
  GumbelConfig gumbel;
  KlMode kl_mode = KlMode::kAggregate;
};

/// Optional record of every simplex-valued intermediate of a forward pass.
struct ForwardTrace {
  Matrix theta;
  Matrix z;
  Matrix x_hat;
  BatchNormCache bn;
};

/// Full training forward pass over a batch; when `grads` is given (shaped like
/// `params`, zero or accumulating) the gradient of l_total is added to it.
LossBreakdown batch_loss(const ModelParams& params, const BatchInputs& in, const ObjectiveConfig& cfg,
                         ModelParams* grads = nullptr, ForwardTrace* trace = nullptr);

}  // namespace ntm
