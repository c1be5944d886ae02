#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ntm/error.hpp"
#include "ntm/model.hpp"

using namespace ntm;
using doctest::Approx;

namespace {

ModelDims small_dims() { return ModelDims{6, 3, 8, 4, 5}; }

Matrix random_freq(std::size_t b, std::size_t v, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(b, v);
  for (std::size_t r = 0; r < b; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < v; ++c) s += (m(r, c) = u(rng) < 0.5 ? 0.0 : u(rng));
    if (s == 0.0) s = (m(r, 0) = 1.0);
    for (std::size_t c = 0; c < v; ++c) m(r, c) /= s;
  }
  return m;
}

double simplex_error(std::span<const double> row) {
  double s = 0.0, neg = 0.0;
  for (double x : row) {
    s += x;
    neg = std::max(neg, -x);
  }
  return std::max(neg, std::abs(s - 1.0));
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ntm::Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("initialization") {
  Rng a(1), b(1);
  const auto p = ModelParams::initialize(small_dims(), a);
  const auto q = ModelParams::initialize(small_dims(), b);
  CHECK(p.encoder.fc1.weight == q.encoder.fc1.weight);
  CHECK(p.disc.word_embed == q.disc.word_embed);

  const double bound = std::sqrt(6.0 / (6.0 + 8.0));
  for (double x : p.encoder.fc1.weight.values()) CHECK(std::abs(x) <= bound);
  for (double x : p.encoder.fc1.bias) CHECK(x == 0.0);
  CHECK(p.encoder.fc2.bias.empty());
  CHECK(p.encoder.bn.gamma == Vector(3, 1.0));
  CHECK(p.encoder.bn.beta_bn == Vector(3, 0.0));
  CHECK(p.encoder.bn.running_var == Vector(3, 1.0));

  Rng big(2);
  const auto wide = ModelParams::initialize(ModelDims{500, 2, 4, 64, 4}, big);
  double ss = 0.0;
  for (double x : wide.disc.word_embed.values()) ss += x * x;
  CHECK(std::sqrt(ss / static_cast<double>(wide.disc.word_embed.size())) == Approx(0.1).epsilon(0.05));

  Rng r(3);
  CHECK(code_of([&] { ModelParams::initialize(ModelDims{6, 1, 8, 4, 5}, r); }) == ErrorCode::kInvalidConfig);
  CHECK(code_of([&] { ModelParams::initialize(ModelDims{0, 2, 8, 4, 5}, r); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("tensor listing is canonical") {
  Rng rng(1);
  auto p = ModelParams::initialize(small_dims(), rng);
  std::vector<std::string> names;
  for (const auto& t : p.trainable()) names.push_back(t.name);
  CHECK(names == std::vector<std::string>{"encoder.fc1.weight", "encoder.fc1.bias", "encoder.fc2.weight",
                                          "encoder.bn.gamma", "encoder.bn.beta", "decoder.topic_word",
                                          "decoder.bias", "disc.global_hidden.weight", "disc.global_hidden.bias",
                                          "disc.global_out.weight", "disc.global_out.bias",
                                          "disc.local_hidden.weight", "disc.local_hidden.bias",
                                          "disc.local_out.weight", "disc.local_out.bias", "disc.word_embed"});
  CHECK(p.all_tensors().size() == names.size() + 2);
  std::size_t n = 0;
  for (const auto& t : p.trainable()) {
    CHECK(t.values.size() == t.rows * t.cols);
    n += t.values.size();
  }
  CHECK(n == p.trainable_count());
  CHECK(p.all_finite());
  p.decoder.bias_b[2] = std::nan("");
  CHECK_FALSE(p.all_finite());

  const auto z = ModelParams::zeros(small_dims());
  for (const auto& t : z.all_tensors())
    for (double x : t.values) CHECK(x == 0.0);
}

TEST_CASE("frequency matrix") {
  BowDocument d;
  d.counts = {{1, 3}, {4, 1}};
  d.token_count = 4;
  const std::vector<BowDocument> docs{d, d};
  const auto m = frequency_matrix(docs, 5);
  CHECK(m.rows() == 2);
  CHECK(m(0, 1) == 0.75);
  CHECK(m(1, 4) == 0.25);
  const BowDocument* ptrs[] = {&d};
  CHECK(frequency_matrix(std::span<const BowDocument* const>(ptrs), 5).row(0)[1] == 0.75);
}

TEST_CASE("encode examples") {
  SUBCASE("zero weights and zero gamma give a uniform theta") {
    auto p = ModelParams::zeros(small_dims());
    Rng rng(1);
    const auto x = random_freq(4, 6, rng);
    for (auto mode : {Mode::kTrain, Mode::kEval}) {
      const auto out = encode(x, p.encoder, mode);
      for (double t : out.theta.values()) CHECK(t == Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
  SUBCASE("identical documents give identical rows") {
    Rng rng(2);
    const auto p = ModelParams::initialize(small_dims(), rng);
    Matrix x(3, 6);
    const auto one = random_freq(1, 6, rng);
    for (std::size_t r = 0; r < 3; ++r) std::copy(one.row(0).begin(), one.row(0).end(), x.row(r).begin());
    const auto out = encode(x, p.encoder, Mode::kEval);
    CHECK(std::equal(out.theta.row(0).begin(), out.theta.row(0).end(), out.theta.row(2).begin()));
  }
  SUBCASE("hand-set weights in eval mode") {
    EncoderParams e;
    e.fc1 = DenseLayer(2, 2, Activation::kSoftplus);
    e.fc1.weight(0, 0) = 1.0;
    e.fc1.weight(1, 1) = 1.0;
    e.fc2 = DenseLayer(2, 2, Activation::kIdentity, false);
    e.fc2.weight(0, 0) = 1.0;
    e.fc2.weight(1, 1) = 1.0;
    e.bn = BatchNormState(2);
    e.bn.eps_bn = 0.0;
    Matrix x(1, 2);
    x(0, 0) = 1.0;
    const auto out = encode(x, e, Mode::kEval);
    const double a = std::log1p(std::exp(1.0)), b = std::log(2.0);
    CHECK(out.theta(0, 0) == Approx(std::exp(a) / (std::exp(a) + std::exp(b))).epsilon(1e-14));
    CHECK(out.theta_hat(0, 0) == Approx(a).epsilon(1e-14));
  }
  SUBCASE("train mode needs two rows and leaves running statistics alone") {
    Rng rng(3);
    auto p = ModelParams::initialize(small_dims(), rng);
    CHECK(code_of([&] { encode(random_freq(1, 6, rng), p.encoder, Mode::kTrain); }) == ErrorCode::kDegenerateBatch);
    const auto before = p.encoder.bn.running_mean;
    encode(random_freq(4, 6, rng), p.encoder, Mode::kTrain);
    CHECK(p.encoder.bn.running_mean == before);
  }
}

TEST_CASE("encoder output lies on the simplex") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = ModelParams::initialize(small_dims(), rng);
    for (auto& t : p.trainable())
      for (auto& x : t.values) x *= 3.0;
    const auto x = random_freq(2 + trial % 7, 6, rng);
    for (auto mode : {Mode::kTrain, Mode::kEval}) {
      const auto out = encode(x, p.encoder, mode);
      for (std::size_t r = 0; r < out.theta.rows(); ++r) CHECK(simplex_error(out.theta.row(r)) <= 1e-9);
    }
  }
}

TEST_CASE("gumbel-softmax sample") {
  Matrix theta(2, 3);
  theta(0, 0) = 0.2, theta(0, 1) = 0.3, theta(0, 2) = 0.5;
  theta(1, 0) = 0.6, theta(1, 1) = 0.1, theta(1, 2) = 0.3;

  SUBCASE("zero noise at temperature one reproduces theta") {
    const auto s = gumbel_softmax_sample(theta, Matrix(2, 3), GumbelConfig{1.0, false});
    for (std::size_t i = 0; i < theta.size(); ++i) CHECK(s.z.values()[i] == Approx(theta.values()[i]).epsilon(1e-14));
  }
  SUBCASE("low temperature approaches one-hot") {
    Rng rng(5);
    const auto g = gumbel_noise(2, 3, rng);
    const auto s = gumbel_softmax_sample(theta, g, GumbelConfig{0.01, false});
    for (std::size_t r = 0; r < 2; ++r) {
      const double mx = *std::max_element(s.z.row(r).begin(), s.z.row(r).end());
      CHECK(mx >= 1.0 - 1e-6);
    }
  }
  SUBCASE("hard samples are one-hot at the soft argmax") {
    Rng rng(6);
    const auto g = gumbel_noise(2, 3, rng);
    const auto s = gumbel_softmax_sample(theta, g, GumbelConfig{1.0, true});
    const auto arg = argmax_rows(s.soft);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t k = 0; k < 3; ++k) CHECK(s.z(r, k) == (k == arg[r] ? 1.0 : 0.0));
  }
  SUBCASE("rows sum to one and seeding is reproducible") {
    Rng a(7), b(7);
    const auto s1 = gumbel_softmax_sample(theta, GumbelConfig{0.5, false}, a);
    const auto s2 = gumbel_softmax_sample(theta, GumbelConfig{0.5, false}, b);
    CHECK(s1.z == s2.z);
    for (std::size_t r = 0; r < 2; ++r) CHECK(simplex_error(s1.z.row(r)) <= 1e-12);
  }
  SUBCASE("zero entries of theta are floored") {
    Matrix t(1, 2);
    t(0, 0) = 1.0;
    const auto s = gumbel_softmax_sample(t, Matrix(1, 2), GumbelConfig{});
    CHECK(std::isfinite(s.z(0, 1)));
  }
  SUBCASE("non-positive temperature is rejected") {
    CHECK(code_of([&] { gumbel_softmax_sample(theta, Matrix(2, 3), GumbelConfig{0.0, false}); }) ==
          ErrorCode::kInvalidConfig);
  }
}

TEST_CASE("gumbel-softmax marginal of a uniform theta is uniform") {
  Rng rng(8);
  const std::size_t n = 10000, k = 4;
  const Matrix theta(n, k, 0.25);
  const auto s = gumbel_softmax_sample(theta, GumbelConfig{}, rng);
  for (std::size_t c = 0; c < k; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += s.z(r, c);
    CHECK(std::abs(mean / static_cast<double>(n) - 0.25) < 0.02);
  }
}

TEST_CASE("decode examples") {
  DecoderParams d{Matrix(3, 2), Vector(3, 0.0)};
  Matrix z(1, 2);
  z(0, 0) = 0.3, z(0, 1) = 0.7;
  const auto uniform = decode(z, d);
  for (double x : uniform.values()) CHECK(x == Approx(1.0 / 3.0).epsilon(1e-15));

  d.topic_word(0, 1) = 2.0;
  d.bias_b[2] = -1.0;
  Matrix onehot(1, 2);
  onehot(0, 1) = 1.0;
  const auto x = decode(onehot, d);
  const auto want = softmax(Vector{2.0, 0.0, -1.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(x(0, i) == Approx(want[i]).epsilon(1e-14));

  DecoderParams two{Matrix(2, 1), Vector(2, 0.0)};
  two.topic_word(0, 0) = std::log(2.0);
  Matrix one(1, 1, 1.0);
  const auto y = decode(one, two);
  CHECK(y(0, 0) == Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(y(0, 1) == Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("decoder output lies on the simplex") {
  Rng rng(9);
  std::normal_distribution<double> nd(0.0, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    DecoderParams d{Matrix(30, 4), Vector(30)};
    for (auto& x : d.topic_word.values()) x = nd(rng);
    for (auto& x : d.bias_b) x = nd(rng);
    const auto z = gumbel_softmax_sample(Matrix(5, 4, 0.25), GumbelConfig{}, rng).z;
    const auto x = decode(z, d);
    for (std::size_t r = 0; r < 5; ++r) CHECK(simplex_error(x.row(r)) <= 1e-9);
  }
}

TEST_CASE("global discriminator") {
  const auto zero = ModelParams::zeros(ModelDims{3, 2, 4, 2, 2});
  const Vector x{0.5, 0.5, 0.0}, z{0.1, 0.9};
  CHECK(discriminate_global(x, z, zero.disc) == 0.0);

  DiscriminatorParams d = zero.disc;
  d.global_hidden = DenseLayer(5, 1, Activation::kSoftplus);
  d.global_out = DenseLayer(1, 1, Activation::kIdentity);
  const Vector w{1.0, -2.0, 3.0, 0.5, -0.5};
  std::copy(w.begin(), w.end(), d.global_hidden.weight.values().begin());
  d.global_hidden.bias[0] = 0.25;
  d.global_out.weight(0, 0) = 2.0;
  d.global_out.bias[0] = -1.0;
  const double pre = 0.5 * 1.0 + 0.5 * -2.0 + 0.1 * 0.5 + 0.9 * -0.5 + 0.25;
  CHECK(discriminate_global(x, z, d) == Approx(2.0 * std::log1p(std::exp(pre)) - 1.0).epsilon(1e-14));
  CHECK(discriminate_global(x, z, d) == discriminate_global(x, z, d));
  CHECK(code_of([&] { discriminate_global(Vector{1.0}, z, d); }) == ErrorCode::kLengthMismatch);
}

TEST_CASE("local discriminator") {
  auto p = ModelParams::zeros(ModelDims{3, 2, 4, 2, 2});
  const Vector z{0.4, 0.6};
  CHECK(discriminate_local(1, z, p.disc) == 0.0);

  p.disc.local_out.bias[0] = 0.7;
  CHECK(discriminate_local(2, z, p.disc) == 0.7);

  p.disc.word_embed(1, 0) = 1.0;
  p.disc.word_embed(1, 1) = 2.0;
  p.disc.local_hidden.weight(0, 0) = 0.5;
  p.disc.local_hidden.weight(0, 1) = -1.0;
  p.disc.local_hidden.weight(0, 3) = 2.0;
  p.disc.local_out.weight(0, 0) = 3.0;
  const double pre = 0.5 * 1.0 - 1.0 * 2.0 + 2.0 * 0.6;
  CHECK(discriminate_local(1, z, p.disc) ==
        Approx(3.0 * std::log1p(std::exp(pre)) + 3.0 * 0.0 + 0.7 + 0.0 * std::log(2.0)).epsilon(1e-14));
  CHECK(code_of([&] { discriminate_local(3, z, p.disc); }) == ErrorCode::kIndexOutOfVocabulary);
}

TEST_CASE("top words") {
  DecoderParams d{Matrix(3, 2), Vector(3, 0.0)};
  d.topic_word(0, 0) = 0.1, d.topic_word(1, 0) = 0.9, d.topic_word(2, 0) = 0.5;
  CHECK(top_words(d, 0, 2) == std::vector<std::size_t>{1, 2});
  CHECK(top_words(d, 1, 3) == std::vector<std::size_t>{0, 1, 2});
  auto all = top_words(d, 0, 3);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2});
  CHECK(code_of([&] { top_words(d, 2, 1); }) == ErrorCode::kInvalidConfig);
  CHECK(code_of([&] { top_words(d, 0, 0); }) == ErrorCode::kInvalidConfig);
  CHECK(code_of([&] { top_words(d, 0, 4); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("argmax ties go to the lowest index") {
  Matrix m(3, 3, 0.0);
  m(0, 2) = 1.0;
  m(1, 0) = m(1, 1) = m(1, 2) = 1.0 / 3.0;
  m(2, 1) = m(2, 2) = 0.5;
  CHECK(argmax_rows(m) == std::vector<std::size_t>{2, 0, 1});
}
