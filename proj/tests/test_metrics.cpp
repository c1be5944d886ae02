#include <doctest.h>

#include <omp.h>

#include <cmath>

#include "ntm/error.hpp"
#include "ntm/metrics.hpp"
#include "support/metric_trials.hpp"
#include "support/oracles.hpp"
#include "support/planted.hpp"

using namespace ntm;
using doctest::Approx;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ntm::Error");
  return ErrorCode::kIo;
}

using Docs = std::vector<std::vector<std::uint32_t>>;

}  // namespace

TEST_CASE("co-occurrence examples") {
  const auto one = cooccurrence_counts(Docs{{0, 1}}, 2, 10);
  CHECK(one.n_windows() == 1);
  CHECK(one.word_prob(0) == 1.0);
  CHECK(one.word_prob(1) == 1.0);
  CHECK(one.pair_prob(0, 1) == 1.0);

  // a x x x b with window 2: a and b never share a window.
  const auto apart = cooccurrence_counts(Docs{{0, 2, 2, 2, 1}}, 3, 2);
  CHECK(apart.n_windows() == 4);
  CHECK(apart.pair_prob(0, 1) == 0.0);
  CHECK(apart.pair_prob(0, 2) == 0.25);
  CHECK(apart.word_prob(2) == 1.0);

  const Docs tiny{{0, 1, 2, 0}, {2, 2}, {1, 3, 0, 3, 2}};
  const auto table = cooccurrence_counts(tiny, 4, 3);
  const auto want = oracle::count_windows(tiny, 3);
  CHECK(table.n_windows() == want.n_windows);
  for (std::uint32_t a = 0; a < 4; ++a) {
    CHECK(table.word_prob(a) == oracle::word_prob(want, a));
    for (std::uint32_t b = 0; b < 4; ++b)
      if (a != b) CHECK(table.pair_prob(a, b) == oracle::pair_prob(want, a, b));
  }

  CHECK(code_of([] { cooccurrence_counts(Docs{{0}}, 1, 1); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("co-occurrence table invariants") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ref = testing::random_reference(rng);
    const auto table = cooccurrence_counts(ref.docs, ref.vocab, ref.window);
    for (std::size_t a = 0; a < ref.vocab; ++a)
      for (std::size_t b = 0; b < ref.vocab; ++b) {
        if (a == b) continue;
        CHECK(table.pair_prob(a, b) == table.pair_prob(b, a));
        CHECK(table.pair_prob(a, b) <= std::min(table.word_prob(a), table.word_prob(b)));
        CHECK(table.pair_prob(a, b) >= 0.0);
      }
  }
}

TEST_CASE("co-occurrence matches the window oracle on random corpora") {
  const auto s = testing::cooccurrence_trials(100, 11);
  CHECK(s.trials == 100);
  CHECK(s.failures == 0);
}

TEST_CASE("parallel co-occurrence counting equals the serial count") {
  const auto corpus = testing::planted_corpus({150, 3, 15, 10, 0.2, 40, 9});
  const auto ref = serial::cooccurrence_counts(corpus.sequences, corpus.vocab.size(), 10);
  for (int threads : {1, 2, 3, 8}) {
    omp_set_num_threads(threads);
    CHECK(omp::cooccurrence_counts(corpus.sequences, corpus.vocab.size(), 10) == ref);
  }
}

TEST_CASE("npmi pair terms") {
  const double p = 0.3;
  CHECK(npmi_pair(p, p, p, 1e-300) == Approx(1.0).epsilon(1e-12));
  CHECK(npmi_pair(0.5, 0.4, 0.2, 1e-300) == Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(npmi_pair(0.5, 0.4, 0.2, 1e-300)) < 1e-12);
  CHECK(npmi_pair(0.0, 0.4, 0.0, 1e-12) == -1.0);
  CHECK(npmi_pair(1.0, 1.0, 1.0, 1e-12) == 1.0);
  CHECK(npmi_pair(0.5, 0.5, 0.0, 1e-12) == Approx(std::log(4e-12) / -std::log(1e-12)).epsilon(1e-12));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double pi = u(rng), pj = u(rng);
    const double pij = u(rng) * std::min(pi, pj);
    const double v = npmi_pair(pi, pj, pij, 1e-12);
    CHECK(v >= -1.0 - 1e-9);
    CHECK(v <= 1.0 + 1e-9);
  }
}

TEST_CASE("npmi on a hand-built corpus") {
  const Docs corpus{{0, 1, 2, 3}, {0, 1, 4}, {2, 3, 4, 0}, {1, 2}};
  const auto table = cooccurrence_counts(corpus, 5, 3);
  const auto want = oracle::count_windows(corpus, 3);
  const TopicWordSet topics{{0, 1, 2}};
  const auto got = npmi(topics, table);
  CHECK(got.per_topic[0] == Approx(oracle::npmi(topics, want, 1e-12, false)[0]).epsilon(1e-12));
  // With M = 3 both normalizations divide by 3.
  CHECK(npmi(topics, table, 1e-12, NpmiNorm::kPairs).per_topic[0] == Approx(got.per_topic[0]).epsilon(1e-12));

  const auto perfect = cooccurrence_counts(Docs{{0, 1}, {2, 3}}, 4, 2);
  CHECK(npmi(TopicWordSet{{0, 1}}, perfect, 1e-300).per_topic[0] == Approx(1.0 / 2.0).epsilon(1e-12));
  CHECK(npmi(TopicWordSet{{0, 1}}, perfect, 1e-300, NpmiNorm::kPairs).per_topic[0] == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("npmi matches the oracle on random instances") {
  const auto s = testing::npmi_trials(100, 12);
  CHECK(s.trials == 100);
  CHECK(s.failures == 0);
  CHECK(s.max_error <= 1e-9);
}

TEST_CASE("topic uniqueness examples and bounds") {
  const auto shared = topic_uniqueness(TopicWordSet{{0, 1, 2}, {0, 1, 2}, {0, 1, 2}, {0, 1, 2}});
  for (double v : shared.per_topic) CHECK(v == Approx(0.25).epsilon(1e-15));
  const auto disjoint = topic_uniqueness(TopicWordSet{{0, 1}, {2, 3}, {4, 5}});
  for (double v : disjoint.per_topic) CHECK(v == 1.0);
  CHECK(disjoint.mean == 1.0);
  const auto half = topic_uniqueness(TopicWordSet{{0, 1}, {0, 2}});
  CHECK(half.per_topic == std::vector<double>{0.75, 0.75});
  CHECK(half.mean == 0.75);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + static_cast<std::size_t>(trial) % 6;
    const auto topics = testing::random_topics(8, k, 3, rng);
    for (double v : topic_uniqueness(topics).per_topic) {
      CHECK(v >= 1.0 / static_cast<double>(k) - 1e-15);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("topic uniqueness matches the oracle on random instances") {
  const auto s = testing::uniqueness_trials(100, 13);
  CHECK(s.failures == 0);
}

TEST_CASE("clustering accuracy examples") {
  using V = std::vector<std::int64_t>;
  CHECK(clustering_accuracy(V{2, 2, 0, 0, 1}, V{0, 0, 1, 1, 2}) == 1.0);
  CHECK(clustering_accuracy(V{1, 1, 0, 2}, V{0, 0, 1, 1}) == 0.75);
  CHECK(clustering_accuracy(V{0, 0, 0, 0, 0, 0}, V{0, 1, 2, 0, 1, 2}) == Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(clustering_accuracy(V{5}, V{9}) == 1.0);
  CHECK(code_of([] { clustering_accuracy(V{0, 1}, V{0}); }) == ErrorCode::kLengthMismatch);
  CHECK(code_of([] { clustering_accuracy(V{}, V{}); }) == ErrorCode::kLengthMismatch);
}

TEST_CASE("clustering accuracy is invariant under relabeling") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> c(25), l(25);
    for (auto& x : c) x = std::uniform_int_distribution<std::int64_t>(0, 4)(rng);
    for (auto& x : l) x = std::uniform_int_distribution<std::int64_t>(0, 3)(rng);
    const double base = clustering_accuracy(c, l);
    std::vector<std::int64_t> pc{0, 1, 2, 3, 4}, pl{0, 1, 2, 3};
    std::shuffle(pc.begin(), pc.end(), rng);
    std::shuffle(pl.begin(), pl.end(), rng);
    auto c2 = c, l2 = l;
    for (auto& x : c2) x = pc[static_cast<std::size_t>(x)] + 100;
    for (auto& x : l2) x = pl[static_cast<std::size_t>(x)] - 50;
    CHECK(clustering_accuracy(c2, l2) == base);
    CHECK(clustering_accuracy(l, c) == base);
  }
}

TEST_CASE("clustering accuracy matches exhaustive search") {
  const auto s = testing::accuracy_trials(100, 14);
  CHECK(s.failures == 0);
}

TEST_CASE("hungarian assignment") {
  const std::vector<std::vector<double>> cost{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  const auto a = hungarian(cost);
  CHECK(cost[0][a[0]] + cost[1][a[1]] + cost[2][a[2]] == 5.0);
  CHECK(hungarian({{1.0, 0.0, 3.0}}) == std::vector<std::size_t>{1});
  CHECK(code_of([] { hungarian({{1.0}, {2.0}}); }) == ErrorCode::kLengthMismatch);

  const auto s = testing::hungarian_trials(200, 15);
  CHECK(s.failures == 0);
}

TEST_CASE("cluster assignment uses the eval-mode argmax") {
  const auto corpus = testing::planted_corpus({10, 2, 5, 3, 0.1, 10, 1});
  auto params = ModelParams::zeros(ModelDims{corpus.vocab.size(), 3, 4, 2, 2});
  params.encoder.bn.running_var = {1.0, 1.0, 1.0};
  for (auto c : assign_clusters(params, corpus)) CHECK(c == 0);
  params.encoder.bn.beta_bn = {0.0, 0.0, 50.0};
  for (auto c : assign_clusters(params, corpus)) CHECK(c == 2);
  CHECK(assign_clusters(params, corpus) == assign_clusters(params, corpus));

  auto wrong = ModelParams::zeros(ModelDims{corpus.vocab.size() + 1, 3, 4, 2, 2});
  CHECK(code_of([&] { assign_clusters(wrong, corpus); }) == ErrorCode::kIncompatibleVocabulary);
}

TEST_CASE("evaluate reports every metric") {
  const auto corpus = testing::planted_corpus({60, 2, 10, 5, 0.1, 30, 2});
  Rng rng(3);
  auto params = ModelParams::initialize(ModelDims{corpus.vocab.size(), 2, 8, 4, 4}, rng);
  MetricsConfig cfg;
  cfg.top_m = 5;
  const auto report = evaluate(params, corpus, cfg);
  CHECK(report.top_words.size() == 2);
  CHECK(report.top_words[0].size() == 5);
  CHECK(report.top_words == topic_word_set(params.decoder, 5));
  REQUIRE(report.acc.has_value());
  CHECK(*report.acc >= 0.5);
  CHECK(report.tu.per_topic == topic_uniqueness(report.top_words).per_topic);
  const auto table = cooccurrence_counts(corpus.sequences, corpus.vocab.size(), 10);
  CHECK(report.npmi.mean == npmi(report.top_words, table).mean);

  const auto j = report.to_json(corpus.vocab);
  for (const char* key : {"npmi", "tu", "acc", "top_words", "config"}) CHECK(j.contains(key));
  CHECK(j["npmi"]["per_topic"].size() == 2);
  CHECK(j["top_words"][0][0].get<std::string>() == corpus.vocab.word(report.top_words[0][0]));
  CHECK(j["config"]["top"] == 5);

  auto unlabeled = corpus;
  unlabeled.docs[0].label.reset();
  CHECK_FALSE(evaluate(params, unlabeled, cfg).acc.has_value());
  CHECK(evaluate(params, unlabeled, cfg).to_json(corpus.vocab)["acc"].is_null());
}
