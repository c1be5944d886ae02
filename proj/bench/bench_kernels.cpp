// Serial reference vs OpenMP kernels: median wall time over repetitions and
// a bitwise comparison of the outputs.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include <CLI11.hpp>

#include "ntm/kernels.hpp"
#include "ntm/metrics.hpp"
#include "ntm/negatives.hpp"

using namespace ntm;

namespace {

double median_ms(const std::function<void()>& f, int reps) {
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) {
    const auto s = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s).count());
  }
  std::nth_element(t.begin(), t.begin() + reps / 2, t.end());
  return t[static_cast<std::size_t>(reps / 2)];
}

void row(const char* name, double serial, double parallel, bool equal) {
  std::printf("%-26s %10.3f %10.3f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              equal ? "identical" : "DIFFERENT");
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(r, c);
  for (auto& x : m.values()) x = nd(rng);
  return m;
}

Corpus synthetic_corpus(std::size_t n_docs, std::size_t vocab, std::size_t len, Rng& rng) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < vocab; ++i) words.push_back("w" + std::to_string(i));
  std::vector<TokenList> docs(n_docs);
  // Zipf-like draws so documents overlap unevenly.
  std::vector<double> weight(vocab);
  for (std::size_t i = 0; i < vocab; ++i) weight[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<std::size_t> pick(weight.begin(), weight.end());
  for (auto& d : docs)
    for (std::size_t t = 0; t < len; ++t) d.push_back(words[pick(rng)]);
  return corpus_from_tokens(docs, Vocabulary(words, {}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs OpenMP kernel benchmark"};
  int threads = omp_get_max_threads();
  int reps = 5;
  std::size_t batch = 256, vocab = 5000, hidden = 256;
  app.add_option("--threads", threads, "OpenMP threads")->check(CLI::PositiveNumber);
  app.add_option("--reps", reps, "Repetitions per measurement")->check(CLI::PositiveNumber);
  app.add_option("--batch", batch, "Rows per dense kernel call");
  app.add_option("--vocab", vocab, "Input width of the dense kernels");
  app.add_option("--hidden", hidden, "Output width of the dense kernels");
  CLI11_PARSE(app, argc, argv);
  omp_set_num_threads(threads);

  Rng rng(42);
  const auto in = random_matrix(batch, vocab, rng);
  const auto w = random_matrix(hidden, vocab, rng);
  const Vector bias(hidden, 0.1);
  const auto d_out = random_matrix(batch, hidden, rng);

  std::printf("threads %d, reps %d, dense %zux%zu -> %zu\n", threads, reps, batch, vocab, hidden);
  std::printf("%-26s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  {
    Matrix a, b;
    const double s = median_ms([&] { kernels::serial::affine(in, w, bias, a); }, reps);
    const double p = median_ms([&] { kernels::omp::affine(in, w, bias, b); }, reps);
    row("affine", s, p, a == b);
  }
  {
    Matrix a, b;
    const double s = median_ms([&] { kernels::serial::affine_backward_input(d_out, w, a); }, reps);
    const double p = median_ms([&] { kernels::omp::affine_backward_input(d_out, w, b); }, reps);
    row("affine_backward_input", s, p, a == b);
  }
  {
    Matrix a(hidden, vocab), b(hidden, vocab);
    Vector da(hidden, 0.0), db(hidden, 0.0);
    const double s = median_ms([&] { kernels::serial::affine_backward_params(d_out, in, a, da); }, reps);
    const double p = median_ms([&] { kernels::omp::affine_backward_params(d_out, in, b, db); }, reps);
    row("affine_backward_params", s, p, a == b && da == db);
  }
  {
    auto a = in, b = in;
    const double s = median_ms([&] { kernels::serial::softmax_rows(a); }, reps);
    const double p = median_ms([&] { kernels::omp::softmax_rows(b); }, reps);
    row("softmax_rows", s, p, a == b);
  }
  {
    const std::size_t n_rows = batch * 200, n_words = 2000, n_docs = batch;
    const auto word_part = random_matrix(n_words, hidden, rng);
    const auto doc_part = random_matrix(n_docs, hidden, rng);
    std::uniform_int_distribution<std::size_t> pw(0, n_words - 1), pd(0, n_docs - 1);
    std::vector<std::size_t> slot(n_rows), doc(n_rows);
    for (auto& x : slot) x = pw(rng);
    for (auto& x : doc) x = pd(rng);
    Matrix a, b;
    const double s = median_ms([&] { kernels::serial::gather_add(word_part, slot, doc_part, doc, bias, a); }, reps);
    const double p = median_ms([&] { kernels::omp::gather_add(word_part, slot, doc_part, doc, bias, b); }, reps);
    row("gather_add", s, p, a == b);
    Matrix sa, sb;
    const double s2 = median_ms([&] { kernels::serial::segment_sum(a, slot, n_words, sa); }, reps);
    const double p2 = median_ms([&] { kernels::omp::segment_sum(a, slot, n_words, sb); }, reps);
    row("segment_sum", s2, p2, sa == sb);
  }

  const auto corpus = synthetic_corpus(2000, 3000, 80, rng);
  {
    CooccurrenceTable a, b;
    const double s = median_ms([&] { a = serial::cooccurrence_counts(corpus.sequences, corpus.vocab.size(), 10); }, reps);
    const double p = median_ms([&] { b = omp::cooccurrence_counts(corpus.sequences, corpus.vocab.size(), 10); }, reps);
    row("cooccurrence_counts", s, p, a == b);
  }
  {
    const auto index = TfidfIndex::build(corpus);
    DissimilarityPools a, b;
    const double s = median_ms([&] { a = serial::build_pools(index, 50); }, reps);
    const double p = median_ms([&] { b = omp::build_pools(index, 50); }, reps);
    row("build_pools", s, p, a.pools == b.pools);
  }
  return 0;
}
