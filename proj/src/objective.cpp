#include "ntm/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ntm/error.hpp"
#include "ntm/kernels.hpp"

namespace ntm {
namespace {

constexpr double kProbClamp = 1e-7;
constexpr double kThetaFloor = 1e-12;

// Value of a clamped log term and its derivative with respect to the score.
struct LogTerm {
  double value;
  double grad;
};

LogTerm log_sigmoid_clamped(double t) {
  const double p = sigmoid(t);
  if (p < kProbClamp) return {std::log(kProbClamp), 0.0};
  if (p > 1.0 - kProbClamp) return {std::log(1.0 - kProbClamp), 0.0};
  return {std::log(p), 1.0 - p};
}

LogTerm log_one_minus_sigmoid_clamped(double t) {
  const double p = sigmoid(t);
  if (p < kProbClamp) return {std::log(1.0 - kProbClamp), 0.0};
  if (p > 1.0 - kProbClamp) return {std::log(kProbClamp), 0.0};
  return {std::log(1.0 - p), -p};
}

// Row-wise softmax backward: d_in = y * (d_out - <d_out, y>).
void softmax_backward_rows(const Matrix& y, const Matrix& d_out, Matrix& d_in) {
  d_in = Matrix(y.rows(), y.cols());
  for (std::size_t b = 0; b < y.rows(); ++b) {
    double dot = 0.0;
    for (std::size_t k = 0; k < y.cols(); ++k) dot += d_out(b, k) * y(b, k);
    for (std::size_t k = 0; k < y.cols(); ++k) d_in(b, k) = y(b, k) * (d_out(b, k) - dot);
  }
}

Matrix column_block(const Matrix& m, std::size_t first, std::size_t count) {
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, first + c);
  return out;
}

// Two-layer scalar scorer applied row-wise; keeps what backward needs.
struct ScorerPass {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
  Matrix score;  // rows x 1
};

void score_rows(const DenseLayer& hidden, const DenseLayer& out, ScorerPass& pass) {
  pass.hidden = hidden.forward(pass.input, &pass.hidden_pre);
  kernels::affine(pass.hidden, out.weight, out.bias, pass.score);
}

// Backpropagates d_score through the scorer, accumulating into the layer
// gradients, and returns the gradient of the input columns [first, first+count).
Matrix score_backward(const ScorerPass& pass, const Matrix& d_score, const DenseLayer& hidden,
                      const DenseLayer& out, DenseLayer& g_hidden, DenseLayer& g_out,
                      std::size_t first, std::size_t count) {
  kernels::affine_backward_params(d_score, pass.hidden, g_out.weight, g_out.bias);
  Matrix d_hidden;
  kernels::affine_backward_input(d_score, out.weight, d_hidden);
  Matrix d_pre;
  kernels::softplus_backward(d_hidden, pass.hidden_pre, d_pre);
  kernels::affine_backward_params(d_pre, pass.input, g_hidden.weight, g_hidden.bias);
  Matrix d_in;
  kernels::affine_backward_input(d_pre, column_block(hidden.weight, first, count), d_in);
  return d_in;
}

// Local scorer over (word, document) rows. The hidden pre-activation splits
// into a word part and a document part, so each is projected once.
struct LocalPass {
  std::vector<std::size_t> words;  // distinct word ids in the batch
  std::vector<std::size_t> slot;   // row -> index into words
  std::vector<std::size_t> doc;    // row -> batch row
  Matrix embed;                    // words x E
  Matrix w_embed, w_topic;         // column blocks of the hidden weight
  Matrix hidden_pre, hidden, score;
};

void local_forward(const DiscriminatorParams& disc, const Matrix& z, const std::vector<std::size_t>& row_word,
                   LocalPass& pass) {
  const std::size_t e_dim = disc.word_embed.cols();
  const std::size_t n_topics = z.cols();
  pass.words = row_word;
  std::sort(pass.words.begin(), pass.words.end());
  pass.words.erase(std::unique(pass.words.begin(), pass.words.end()), pass.words.end());
  pass.slot.resize(row_word.size());
  for (std::size_t r = 0; r < row_word.size(); ++r)
    pass.slot[r] = static_cast<std::size_t>(
        std::lower_bound(pass.words.begin(), pass.words.end(), row_word[r]) - pass.words.begin());
  pass.embed = Matrix(pass.words.size(), e_dim);
  for (std::size_t u = 0; u < pass.words.size(); ++u) {
    const auto src = disc.word_embed.row(pass.words[u]);
    std::copy(src.begin(), src.end(), pass.embed.row(u).begin());
  }
  pass.w_embed = column_block(disc.local_hidden.weight, 0, e_dim);
  pass.w_topic = column_block(disc.local_hidden.weight, e_dim, n_topics);
  Matrix word_part, doc_part;
  kernels::affine(pass.embed, pass.w_embed, {}, word_part);
  kernels::affine(z, pass.w_topic, {}, doc_part);
  kernels::gather_add(word_part, pass.slot, doc_part, pass.doc, disc.local_hidden.bias, pass.hidden_pre);
  kernels::softplus(pass.hidden_pre, pass.hidden);
  kernels::affine(pass.hidden, disc.local_out.weight, disc.local_out.bias, pass.score);
}

void local_backward(const LocalPass& pass, const Matrix& d_score, const DiscriminatorParams& disc,
                    const Matrix& z, DiscriminatorParams& g, Matrix& d_z) {
  const std::size_t e_dim = pass.embed.cols();
  const std::size_t n_topics = z.cols();
  kernels::affine_backward_params(d_score, pass.hidden, g.local_out.weight, g.local_out.bias);
  Matrix d_hidden, d_pre;
  kernels::affine_backward_input(d_score, disc.local_out.weight, d_hidden);
  kernels::softplus_backward(d_hidden, pass.hidden_pre, d_pre);
  Matrix by_word, by_doc;
  kernels::segment_sum(d_pre, pass.slot, pass.words.size(), by_word);
  kernels::segment_sum(d_pre, pass.doc, z.rows(), by_doc);

  auto& gw = g.local_hidden.weight;
  Matrix d_w_embed(gw.rows(), e_dim), d_w_topic(gw.rows(), n_topics);
  kernels::affine_backward_params(by_word, pass.embed, d_w_embed, {});
  kernels::affine_backward_params(by_doc, z, d_w_topic, {});
  for (std::size_t o = 0; o < gw.rows(); ++o) {
    for (std::size_t e = 0; e < e_dim; ++e) gw(o, e) += d_w_embed(o, e);
    for (std::size_t k = 0; k < n_topics; ++k) gw(o, e_dim + k) += d_w_topic(o, k);
    for (std::size_t b = 0; b < by_doc.rows(); ++b) g.local_hidden.bias[o] += by_doc(b, o);
  }

  Matrix d_embed, d_topic;
  kernels::affine_backward_input(by_word, pass.w_embed, d_embed);
  for (std::size_t u = 0; u < pass.words.size(); ++u) {
    auto dst = g.word_embed.row(pass.words[u]);
    for (std::size_t e = 0; e < e_dim; ++e) dst[e] += d_embed(u, e);
  }
  kernels::affine_backward_input(by_doc, pass.w_topic, d_topic);
  for (std::size_t b = 0; b < d_z.rows(); ++b)
    for (std::size_t k = 0; k < n_topics; ++k) d_z(b, k) += d_topic(b, k);
}

void validate_inputs(const ModelParams& params, const BatchInputs& in) {
  const std::size_t b = in.freq.rows();
  const auto& dims = params.dims;
  if (in.freq.cols() != dims.vocab || in.gumbel.rows() != b || in.gumbel.cols() != dims.topics)
    throw Error(ErrorCode::kLengthMismatch, "batch inputs do not match model dimensions");
  if (in.negative_freq.rows() != in.negative_anchor.size() ||
      (in.negative_freq.rows() > 0 && in.negative_freq.cols() != dims.vocab))
    throw Error(ErrorCode::kLengthMismatch, "negative documents malformed");
  for (auto a : in.negative_anchor)
    if (a >= b) throw Error(ErrorCode::kLengthMismatch, "negative anchor out of batch");
}

}  // namespace

const char* kl_mode_name(KlMode mode) {
  return mode == KlMode::kAggregate ? "aggregate" : "document";
}

KlMode parse_kl_mode(std::string_view name) {
  if (name == "aggregate") return KlMode::kAggregate;
  if (name == "document") return KlMode::kPerDocument;
  throw Error(ErrorCode::kInvalidConfig, "unknown KL mode: " + std::string(name));
}

void LossWeights::validate() const {
  if (!(beta_w >= 0.0) || !(gamma_w >= 0.0))
    throw Error(ErrorCode::kInvalidConfig, "beta and gamma must be non-negative");
  if (!(mu_w >= 0.0 && mu_w <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "mu must lie in [0, 1]");
}

double js_mi_term(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty())
    throw Error(ErrorCode::kLengthMismatch, "js_mi_term needs positive and negative scores");
  double pos = 0.0, neg = 0.0;
  for (double t : pos_scores) pos += log_sigmoid_clamped(t).value;
  for (double t : neg_scores) neg += log_one_minus_sigmoid_clamped(t).value;
  return pos / static_cast<double>(pos_scores.size()) + neg / static_cast<double>(neg_scores.size());
}

double kl_to_uniform(std::span<const double> theta) {
  const double k = static_cast<double>(theta.size());
  double kl = 0.0;
  for (double t : theta) kl += t * std::log(k * std::max(t, kThetaFloor));
  return kl;
}

double reconstruction_loss(std::span<const double> x_hat, std::span<const double> x_freq) {
  if (x_hat.size() != x_freq.size()) throw Error(ErrorCode::kLengthMismatch, "reconstruction sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < x_hat.size(); ++i) {
    const double d = x_hat[i] - x_freq[i];
    s += d * d;
  }
  return s;
}

double encoder_loss(double l_global, double l_local, double l_kl, const LossWeights& weights,
                    const Ablation& ablation) {
  double l = weights.gamma_w * l_kl;
  if (ablation.use_global) l -= weights.beta_w * l_global;
  if (ablation.use_local) l -= weights.beta_w * l_local;
  return l;
}

double total_loss(double l_r, double l_e, const LossWeights& weights) {
  return weights.mu_w * l_r + (1.0 - weights.mu_w) * l_e;
}

LossBreakdown batch_loss(const ModelParams& params, const BatchInputs& in, const ObjectiveConfig& cfg,
                         ModelParams* grads, ForwardTrace* trace) {
  validate_inputs(params, in);
  const std::size_t batch = in.freq.rows();
  const std::size_t n_topics = params.dims.topics;
  const std::size_t vocab = params.dims.vocab;
  const double inv_b = 1.0 / static_cast<double>(batch);
  const auto& w = cfg.weights;
  const double c_r = w.mu_w;
  const double c_e = 1.0 - w.mu_w;

  // Encoder and relaxed sample.
  EncoderTrace enc = encode_trace(in.freq, params.encoder, Mode::kTrain);
  const Matrix& theta = enc.theta;
  const GumbelSample sample = gumbel_softmax_sample(theta, in.gumbel, cfg.gumbel);
  const Matrix& z = sample.z;

  // Decoder and reconstruction.
  const Matrix x_hat = decode(z, params.decoder);
  LossBreakdown loss;
  for (std::size_t b = 0; b < batch; ++b) loss.l_r += reconstruction_loss(x_hat.row(b), in.freq.row(b));
  loss.l_r *= inv_b;

  const bool aggregate_kl = cfg.kl_mode == KlMode::kAggregate;
  Vector theta_bar(n_topics, 0.0);
  if (aggregate_kl) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < n_topics; ++k) theta_bar[k] += theta(b, k);
    for (double& t : theta_bar) t *= inv_b;
    loss.l_kl = kl_to_uniform(theta_bar);
  } else {
    for (std::size_t b = 0; b < batch; ++b) loss.l_kl += kl_to_uniform(theta.row(b));
    loss.l_kl *= inv_b;
  }

  const auto& disc = params.disc;
  Matrix d_z(batch, n_topics);

  // Global pairs: rows [0, B) are (x, z_x), rows [B, B+R) are (x', z_x).
  ScorerPass global;
  Matrix d_global_score;
  if (cfg.ablation.use_global) {
    const std::size_t n_neg = in.negative_anchor.size();
    if (n_neg == 0) throw Error(ErrorCode::kCorpusTooSmall, "global term needs negative documents");
    global.input = Matrix(batch + n_neg, vocab + n_topics);
    for (std::size_t b = 0; b < batch; ++b) {
      auto row = global.input.row(b);
      std::copy_n(in.freq.row(b).begin(), vocab, row.begin());
      std::copy_n(z.row(b).begin(), n_topics, row.begin() + static_cast<std::ptrdiff_t>(vocab));
    }
    for (std::size_t r = 0; r < n_neg; ++r) {
      auto row = global.input.row(batch + r);
      std::copy_n(in.negative_freq.row(r).begin(), vocab, row.begin());
      std::copy_n(z.row(in.negative_anchor[r]).begin(), n_topics,
                  row.begin() + static_cast<std::ptrdiff_t>(vocab));
    }
    score_rows(disc.global_hidden, disc.global_out, global);

    d_global_score = Matrix(batch + n_neg, 1);
    const double scale_pos = -c_e * w.beta_w * inv_b;
    const double scale_neg = -c_e * w.beta_w / static_cast<double>(n_neg);
    double pos = 0.0, neg = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const LogTerm t = log_sigmoid_clamped(global.score(b, 0));
      pos += t.value;
      d_global_score(b, 0) = scale_pos * t.grad;
    }
    for (std::size_t r = 0; r < n_neg; ++r) {
      const LogTerm t = log_one_minus_sigmoid_clamped(global.score(batch + r, 0));
      neg += t.value;
      d_global_score(batch + r, 0) = scale_neg * t.grad;
    }
    loss.l_global = pos * inv_b + neg / static_cast<double>(n_neg);
  }

  // Local pairs: for every document, its word types and their negatives.
  LocalPass local;
  Matrix d_local_score;
  if (cfg.ablation.use_local) {
    if (in.positive_words.size() != batch || in.negative_words.size() != batch)
      throw Error(ErrorCode::kLengthMismatch, "local word lists must cover the batch");
    std::vector<std::size_t> row_word;
    std::vector<double> row_scale;
    std::vector<char> row_positive;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& pos = in.positive_words[b];
      const auto& neg = in.negative_words[b];
      if (pos.empty()) throw Error(ErrorCode::kEmptyDocument, "document without word types");
      if (neg.empty() || neg.size() % pos.size() != 0)
        throw Error(ErrorCode::kLengthMismatch, "negative words must be a multiple of positives");
      const std::size_t per = neg.size() / pos.size();
      const double wd = inv_b / static_cast<double>(pos.size());
      for (std::size_t i = 0; i < pos.size(); ++i) {
        row_word.push_back(pos[i]);
        local.doc.push_back(b);
        row_scale.push_back(wd);
        row_positive.push_back(1);
        for (std::size_t j = 0; j < per; ++j) {
          row_word.push_back(neg[i * per + j]);
          local.doc.push_back(b);
          row_scale.push_back(wd / static_cast<double>(per));
          row_positive.push_back(0);
        }
      }
    }
    for (auto v : row_word)
      if (v >= vocab) throw Error(ErrorCode::kIndexOutOfVocabulary, "local word index");
    local_forward(disc, z, row_word, local);

    const std::size_t n_rows = row_word.size();
    d_local_score = Matrix(n_rows, 1);
    const double scale = -c_e * w.beta_w;
    for (std::size_t r = 0; r < n_rows; ++r) {
      const LogTerm t = row_positive[r] ? log_sigmoid_clamped(local.score(r, 0))
                                        : log_one_minus_sigmoid_clamped(local.score(r, 0));
      loss.l_local += row_scale[r] * t.value;
      d_local_score(r, 0) = scale * row_scale[r] * t.grad;
    }
  }

  loss.l_e = encoder_loss(loss.l_global, loss.l_local, loss.l_kl, w, cfg.ablation);
  loss.l_total = total_loss(loss.l_r, loss.l_e, w);

  if (trace) {
    trace->theta = theta;
    trace->z = z;
    trace->x_hat = x_hat;
    trace->bn = enc.bn;
  }
  if (!grads) return loss;

  // Decoder.
  Matrix d_xhat(batch, vocab);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t v = 0; v < vocab; ++v)
      d_xhat(b, v) = c_r * 2.0 * inv_b * (x_hat(b, v) - in.freq(b, v));
  Matrix d_logits;
  softmax_backward_rows(x_hat, d_xhat, d_logits);
  kernels::affine_backward_params(d_logits, z, grads->decoder.topic_word, grads->decoder.bias_b);
  kernels::affine_backward_input(d_logits, params.decoder.topic_word, d_z);

  auto& gd = grads->disc;
  if (cfg.ablation.use_global) {
    const Matrix d_in = score_backward(global, d_global_score, disc.global_hidden, disc.global_out,
                                       gd.global_hidden, gd.global_out, vocab, n_topics);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < n_topics; ++k) d_z(b, k) += d_in(b, k);
    for (std::size_t r = 0; r < in.negative_anchor.size(); ++r)
      for (std::size_t k = 0; k < n_topics; ++k) d_z(in.negative_anchor[r], k) += d_in(batch + r, k);
  }
  if (cfg.ablation.use_local) local_backward(local, d_local_score, disc, z, gd, d_z);

  // z -> soft sample (straight-through when hard) -> ln theta.
  Matrix d_scaled;
  softmax_backward_rows(sample.soft, d_z, d_scaled);
  Matrix d_theta(batch, n_topics);
  const double kl_scale = c_e * w.gamma_w * inv_b;
  const double log_k = std::log(static_cast<double>(n_topics));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < n_topics; ++k) {
      const double t = theta(b, k);
      double g = t > kThetaFloor ? d_scaled(b, k) / (cfg.gumbel.temperature * t) : 0.0;
      const double p = aggregate_kl ? theta_bar[k] : t;
      g += kl_scale * (log_k + std::log(std::max(p, kThetaFloor)) + (p > kThetaFloor ? 1.0 : 0.0));
      d_theta(b, k) = g;
    }

  // theta = softmax(bn(theta_hat)).
  Matrix d_norm;
  softmax_backward_rows(theta, d_theta, d_norm);
  auto& ge = grads->encoder;
  const Matrix d_theta_hat = batch_norm_backward(d_norm, enc.bn, params.encoder.bn, ge.bn.gamma, ge.bn.beta_bn);
  kernels::affine_backward_params(d_theta_hat, enc.fc1_out, ge.fc2.weight, ge.fc2.bias);
  Matrix d_h1;
  kernels::affine_backward_input(d_theta_hat, params.encoder.fc2.weight, d_h1);
  Matrix d_a1;
  kernels::softplus_backward(d_h1, enc.fc1_pre, d_a1);
  kernels::affine_backward_params(d_a1, in.freq, ge.fc1.weight, ge.fc1.bias);
  return loss;
}

}  // namespace ntm
