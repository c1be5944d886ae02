#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntm/corpus.hpp"
#include "ntm/numkernel.hpp"
#include "ntm/tensor.hpp"

namespace ntm {

struct ModelDims {
  std::size_t vocab = 0;
  std::size_t topics = 20;
  std::size_t hidden = 256;
  std::size_t embed = 64;
  std::size_t disc_hidden = 128;
};

/// Document-topic encoder: two fully connected layers, then batch norm.
/// fc2 carries no bias since the batch-norm mean subtraction removes it.
struct EncoderParams {
  DenseLayer fc1;  // |V| -> H, softplus
  DenseLayer fc2;  // H -> K, identity
  BatchNormState bn;
};

/// Topic-word decoder. Column k of topic_word scores the words of topic k.
struct DecoderParams {
  Matrix topic_word;  // |V| x K
  Vector bias_b;      // |V|
};

/// Scoring networks for real / negative pairs. Each is a softplus hidden
/// layer on the concatenated pair followed by a linear scalar output.
struct DiscriminatorParams {
  DenseLayer global_hidden;  // |V| + K -> D
  DenseLayer global_out;     // D -> 1
  DenseLayer local_hidden;   // E + K -> D
  DenseLayer local_out;      // D -> 1
  Matrix word_embed;         // |V| x E
};

enum class ParamGroup { kEncoder, kDecoder, kDiscriminator, kEmbedding };

const char* param_group_name(ParamGroup g);

struct ParamRef {
  std::string name;
  ParamGroup group;
  std::size_t rows;
  std::size_t cols;
  std::span<double> values;
};

struct ConstParamRef {
  std::string name;
  ParamGroup group;
  std::size_t rows;
  std::size_t cols;
  std::span<const double> values;
};

struct ModelParams {
  ModelDims dims;
  EncoderParams encoder;
  DecoderParams decoder;
  DiscriminatorParams disc;

  /// Every tensor zero (including batch-norm gamma and running variance).
  static ModelParams zeros(const ModelDims& dims);
  /// Uniform(+-sqrt(6/(fan_in+fan_out))) dense weights, zero biases,
  /// N(0, 0.1) embeddings, gamma 1, beta 0.
  static ModelParams initialize(const ModelDims& dims, Rng& rng);

  /// Trainable tensors in a fixed canonical order.
  std::vector<ParamRef> trainable();
  std::vector<ConstParamRef> trainable() const;
  /// Trainable tensors followed by batch-norm running statistics.
  std::vector<ParamRef> all_tensors();
  std::vector<ConstParamRef> all_tensors() const;

  std::size_t trainable_count() const;
  bool all_finite() const;
};

struct GumbelConfig {
  double temperature = 1.0;
  bool hard = false;
};

/// Encoder outputs for a batch; one row per document.
struct TopicDistributions {
  Matrix theta_hat;  // before batch norm / softmax
  Matrix theta;      // rows on the K-simplex
};

/// Every intermediate of the encoder pass, kept for backward.
struct EncoderTrace {
  Matrix fc1_pre;
  Matrix fc1_out;
  Matrix theta_hat;
  BatchNormCache bn;
  Matrix normalized;  // batch norm output, softmax input
  Matrix theta;
};

struct GumbelSample {
  Matrix soft;  // softmax((ln theta + g) / temperature)
  Matrix z;     // soft, or its one-hot argmax when hard
};

/// Frequency rows (counts / token_count) for a set of documents.
Matrix frequency_matrix(std::span<const BowDocument> docs, std::size_t vocab_size);
Matrix frequency_matrix(std::span<const BowDocument* const> docs, std::size_t vocab_size);

/// frequencies -> fc1 (softplus) -> fc2 = theta_hat -> batch norm -> softmax = theta.
/// Train mode uses batch statistics (needs >= 2 rows) and leaves the running
/// statistics untouched; the trainer folds them in from the trace.
TopicDistributions encode(const Matrix& freq, const EncoderParams& params, Mode mode);
EncoderTrace encode_trace(const Matrix& freq, const EncoderParams& params, Mode mode);

/// Relaxed categorical sample per row with the supplied Gumbel noise.
GumbelSample gumbel_softmax_sample(const Matrix& theta, const Matrix& noise, const GumbelConfig& cfg);
GumbelSample gumbel_softmax_sample(const Matrix& theta, const GumbelConfig& cfg, Rng& rng);

/// softmax(topic_word * z + bias_b) per row.
Matrix decode(const Matrix& z, const DecoderParams& params);

/// Pre-sigmoid score of a (document frequencies, topic sample) pair.
double discriminate_global(std::span<const double> doc_freq, std::span<const double> z,
                           const DiscriminatorParams& params);
/// Pre-sigmoid score of a (word, topic sample) pair. Throws IndexOutOfVocabulary.
double discriminate_local(std::size_t word_index, std::span<const double> z,
                          const DiscriminatorParams& params);

/// The M highest-scoring words of topic k, descending, ties by ascending index.
std::vector<std::size_t> top_words(const DecoderParams& params, std::size_t k, std::size_t m);

/// Argmax of theta per row, ties to the lowest topic.
std::vector<std::size_t> argmax_rows(const Matrix& m);

}  // namespace ntm
