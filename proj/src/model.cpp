#include "ntm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ntm/error.hpp"
#include "ntm/kernels.hpp"

namespace ntm {
namespace {

constexpr double kThetaFloor = 1e-12;

void xavier(Matrix& w, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& x : w.values()) x = dist(rng);
}

template <class Ref, class Self>
std::vector<Ref> collect(Self& p, bool with_running) {
  std::vector<Ref> refs;
  auto add_m = [&](const char* name, ParamGroup g, auto& m) {
    refs.push_back(Ref{name, g, m.rows(), m.cols(), m.values()});
  };
  auto add_v = [&](const char* name, ParamGroup g, auto& v) {
    if (!v.empty()) refs.push_back(Ref{name, g, 1, v.size(), {v.data(), v.size()}});
  };
  auto& e = p.encoder;
  add_m("encoder.fc1.weight", ParamGroup::kEncoder, e.fc1.weight);
  add_v("encoder.fc1.bias", ParamGroup::kEncoder, e.fc1.bias);
  add_m("encoder.fc2.weight", ParamGroup::kEncoder, e.fc2.weight);
  add_v("encoder.fc2.bias", ParamGroup::kEncoder, e.fc2.bias);
  add_v("encoder.bn.gamma", ParamGroup::kEncoder, e.bn.gamma);
  add_v("encoder.bn.beta", ParamGroup::kEncoder, e.bn.beta_bn);
  add_m("decoder.topic_word", ParamGroup::kDecoder, p.decoder.topic_word);
  add_v("decoder.bias", ParamGroup::kDecoder, p.decoder.bias_b);
  auto& d = p.disc;
  add_m("disc.global_hidden.weight", ParamGroup::kDiscriminator, d.global_hidden.weight);
  add_v("disc.global_hidden.bias", ParamGroup::kDiscriminator, d.global_hidden.bias);
  add_m("disc.global_out.weight", ParamGroup::kDiscriminator, d.global_out.weight);
  add_v("disc.global_out.bias", ParamGroup::kDiscriminator, d.global_out.bias);
  add_m("disc.local_hidden.weight", ParamGroup::kDiscriminator, d.local_hidden.weight);
  add_v("disc.local_hidden.bias", ParamGroup::kDiscriminator, d.local_hidden.bias);
  add_m("disc.local_out.weight", ParamGroup::kDiscriminator, d.local_out.weight);
  add_v("disc.local_out.bias", ParamGroup::kDiscriminator, d.local_out.bias);
  add_m("disc.word_embed", ParamGroup::kEmbedding, d.word_embed);
  if (with_running) {
    add_v("encoder.bn.running_mean", ParamGroup::kEncoder, e.bn.running_mean);
    add_v("encoder.bn.running_var", ParamGroup::kEncoder, e.bn.running_var);
  }
  return refs;
}

double dense_scalar(const DenseLayer& hidden, const DenseLayer& out, std::span<const double> a,
                    std::span<const double> b) {
  double score = out.bias.empty() ? 0.0 : out.bias[0];
  const auto w_out = out.weight.row(0);
  for (std::size_t h = 0; h < hidden.out_dim(); ++h) {
    const auto w = hidden.weight.row(h);
    double acc = hidden.bias.empty() ? 0.0 : hidden.bias[h];
    for (std::size_t i = 0; i < a.size(); ++i) acc += w[i] * a[i];
    for (std::size_t i = 0; i < b.size(); ++i) acc += w[a.size() + i] * b[i];
    score += w_out[h] * softplus(acc);
  }
  return score;
}

}  // namespace

const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kEncoder: return "encoder";
    case ParamGroup::kDecoder: return "decoder";
    case ParamGroup::kDiscriminator: return "discriminator";
    case ParamGroup::kEmbedding: return "embedding";
  }
  return "?";
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  const std::size_t v = dims.vocab, k = dims.topics;
  p.encoder.fc1 = DenseLayer(v, dims.hidden, Activation::kSoftplus);
  p.encoder.fc2 = DenseLayer(dims.hidden, k, Activation::kIdentity, /*with_bias=*/false);
  p.encoder.bn = BatchNormState(k);
  p.decoder.topic_word = Matrix(v, k);
  p.decoder.bias_b.assign(v, 0.0);
  p.disc.global_hidden = DenseLayer(v + k, dims.disc_hidden, Activation::kSoftplus);
  p.disc.global_out = DenseLayer(dims.disc_hidden, 1, Activation::kIdentity);
  p.disc.local_hidden = DenseLayer(dims.embed + k, dims.disc_hidden, Activation::kSoftplus);
  p.disc.local_out = DenseLayer(dims.disc_hidden, 1, Activation::kIdentity);
  p.disc.word_embed = Matrix(v, dims.embed);
  for (auto& t : p.all_tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  return p;
}

ModelParams ModelParams::initialize(const ModelDims& dims, Rng& rng) {
  if (dims.vocab < 1 || dims.topics < 2 || dims.hidden < 1 || dims.embed < 1 || dims.disc_hidden < 1)
    throw Error(ErrorCode::kInvalidConfig, "model dimensions must be positive and K >= 2");
  ModelParams p = zeros(dims);
  p.encoder.bn = BatchNormState(dims.topics);
  xavier(p.encoder.fc1.weight, rng);
  xavier(p.encoder.fc2.weight, rng);
  xavier(p.decoder.topic_word, rng);
  xavier(p.disc.global_hidden.weight, rng);
  xavier(p.disc.global_out.weight, rng);
  xavier(p.disc.local_hidden.weight, rng);
  xavier(p.disc.local_out.weight, rng);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (double& x : p.disc.word_embed.values()) x = normal(rng);
  return p;
}

std::vector<ParamRef> ModelParams::trainable() { return collect<ParamRef>(*this, false); }
std::vector<ConstParamRef> ModelParams::trainable() const { return collect<ConstParamRef>(*this, false); }
std::vector<ParamRef> ModelParams::all_tensors() { return collect<ParamRef>(*this, true); }
std::vector<ConstParamRef> ModelParams::all_tensors() const { return collect<ConstParamRef>(*this, true); }

std::size_t ModelParams::trainable_count() const {
  std::size_t n = 0;
  for (const auto& r : trainable()) n += r.values.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& r : all_tensors())
    for (double x : r.values)
      if (!std::isfinite(x)) return false;
  return true;
}

Matrix frequency_matrix(std::span<const BowDocument* const> docs, std::size_t vocab_size) {
  Matrix x(docs.size(), vocab_size);
  for (std::size_t b = 0; b < docs.size(); ++b) {
    const double total = static_cast<double>(docs[b]->token_count);
    for (const auto& [w, c] : docs[b]->counts) x(b, w) = static_cast<double>(c) / total;
  }
  return x;
}

Matrix frequency_matrix(std::span<const BowDocument> docs, std::size_t vocab_size) {
  std::vector<const BowDocument*> ptrs;
  ptrs.reserve(docs.size());
  for (const auto& d : docs) ptrs.push_back(&d);
  return frequency_matrix(std::span<const BowDocument* const>(ptrs), vocab_size);
}

EncoderTrace encode_trace(const Matrix& freq, const EncoderParams& params, Mode mode) {
  EncoderTrace t;
  t.fc1_out = params.fc1.forward(freq, &t.fc1_pre);
  t.theta_hat = params.fc2.forward(t.fc1_out);
  if (mode == Mode::kTrain)
    t.normalized = batch_norm_train(t.theta_hat, params.bn, t.bn);
  else
    t.normalized = batch_norm_eval(t.theta_hat, params.bn);
  t.theta = t.normalized;
  kernels::softmax_rows(t.theta);
  return t;
}

TopicDistributions encode(const Matrix& freq, const EncoderParams& params, Mode mode) {
  EncoderTrace t = encode_trace(freq, params, mode);
  return {std::move(t.theta_hat), std::move(t.theta)};
}

GumbelSample gumbel_softmax_sample(const Matrix& theta, const Matrix& noise, const GumbelConfig& cfg) {
  if (!(cfg.temperature > 0.0)) throw Error(ErrorCode::kInvalidConfig, "temperature must be > 0");
  assert(noise.rows() == theta.rows() && noise.cols() == theta.cols());
  GumbelSample s;
  s.soft = Matrix(theta.rows(), theta.cols());
  for (std::size_t b = 0; b < theta.rows(); ++b) {
    for (std::size_t k = 0; k < theta.cols(); ++k)
      s.soft(b, k) = (std::log(std::max(theta(b, k), kThetaFloor)) + noise(b, k)) / cfg.temperature;
    softmax_inplace(s.soft.row(b));
  }
  if (!cfg.hard) {
    s.z = s.soft;
    return s;
  }
  s.z = Matrix(theta.rows(), theta.cols());
  const auto idx = argmax_rows(s.soft);
  for (std::size_t b = 0; b < idx.size(); ++b) s.z(b, idx[b]) = 1.0;
  return s;
}

GumbelSample gumbel_softmax_sample(const Matrix& theta, const GumbelConfig& cfg, Rng& rng) {
  return gumbel_softmax_sample(theta, gumbel_noise(theta.rows(), theta.cols(), rng), cfg);
}

Matrix decode(const Matrix& z, const DecoderParams& params) {
  Matrix out;
  kernels::affine(z, params.topic_word, params.bias_b, out);
  kernels::softmax_rows(out);
  return out;
}

double discriminate_global(std::span<const double> doc_freq, std::span<const double> z,
                           const DiscriminatorParams& params) {
  if (doc_freq.size() + z.size() != params.global_hidden.in_dim())
    throw Error(ErrorCode::kLengthMismatch, "global discriminator input has wrong size");
  return dense_scalar(params.global_hidden, params.global_out, doc_freq, z);
}

double discriminate_local(std::size_t word_index, std::span<const double> z,
                          const DiscriminatorParams& params) {
  if (word_index >= params.word_embed.rows())
    throw Error(ErrorCode::kIndexOutOfVocabulary, "word index " + std::to_string(word_index));
  const auto e = params.word_embed.row(word_index);
  if (e.size() + z.size() != params.local_hidden.in_dim())
    throw Error(ErrorCode::kLengthMismatch, "local discriminator input has wrong size");
  return dense_scalar(params.local_hidden, params.local_out, e, z);
}

std::vector<std::size_t> top_words(const DecoderParams& params, std::size_t k, std::size_t m) {
  const std::size_t v = params.topic_word.rows();
  if (k >= params.topic_word.cols()) throw Error(ErrorCode::kInvalidConfig, "topic index out of range");
  if (m < 1 || m > v) throw Error(ErrorCode::kInvalidConfig, "M must lie in [1, |V|]");
  std::vector<std::size_t> idx(v);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = params.topic_word(a, k), sb = params.topic_word(b, k);
                      if (sa != sb) return sa > sb;
                      return a < b;
                    });
  idx.resize(m);
  return idx;
}

std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> out(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = k;
    out[r] = best;
  }
  return out;
}

}  // namespace ntm
