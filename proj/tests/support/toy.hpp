#pragma once

// Five-word, three-document, two-topic instance for gradient checks.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "ntm/objective.hpp"

namespace ntm::testing {

struct ToyProblem {
  ModelParams params;
  BatchInputs inputs;
  ObjectiveConfig config;
};

// Small widths keep finite differences cheap. Every word appears as a
// positive somewhere so no embedding row has an identically zero gradient.
inline ToyProblem toy_problem(std::uint64_t seed = 3) {
  const ModelDims dims{5, 2, 4, 3, 4};
  Rng rng(seed);
  ToyProblem toy{ModelParams::initialize(dims, rng), {}, {}};
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (auto& t : toy.params.trainable())
    for (auto& x : t.values) x += jitter(rng);

  const double rows[3][5] = {{0.5, 0.25, 0.25, 0, 0}, {0, 0, 0.2, 0.4, 0.4}, {0.3, 0, 0, 0.3, 0.4}};
  auto& in = toy.inputs;
  in.freq = Matrix(3, 5);
  in.negative_freq = Matrix(3, 5);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t v = 0; v < 5; ++v) {
      in.freq(b, v) = rows[b][v];
      in.negative_freq(b, v) = rows[(b + 1) % 3][v];
    }
  in.gumbel = gumbel_noise(3, 2, rng);
  in.negative_anchor = {0, 1, 2};
  in.positive_words = {{0, 1, 2}, {2, 3, 4}, {0, 3, 4}};
  in.negative_words = {{3, 4, 3}, {0, 1, 1}, {1, 2, 2}};
  toy.config.gumbel.temperature = 0.7;
  return toy;
}

struct TensorCheck {
  std::string name;
  GradCheckResult result;
};

// Finite-difference check of d l_total / d tensor for every trainable tensor.
inline std::vector<TensorCheck> check_toy_gradients(const ToyProblem& toy) {
  ModelParams grads = ModelParams::zeros(toy.params.dims);
  batch_loss(toy.params, toy.inputs, toy.config, &grads);
  const auto refs = toy.params.trainable();
  const auto grad_refs = grads.trainable();
  std::vector<TensorCheck> out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto f = [&](std::span<const double> x) {
      ModelParams probe = toy.params;
      auto probe_refs = probe.trainable();
      std::copy(x.begin(), x.end(), probe_refs[i].values.begin());
      return batch_loss(probe, toy.inputs, toy.config).l_total;
    };
    const Vector point(refs[i].values.begin(), refs[i].values.end());
    out.push_back({refs[i].name, grad_check(f, point, grad_refs[i].values)});
  }
  return out;
}

}  // namespace ntm::testing
