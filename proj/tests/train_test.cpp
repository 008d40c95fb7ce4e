// Copyright 2026 The TDI-SPN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "tdi/dataset.hpp"
#include "tdi/error.hpp"
#include "tdi/structure.hpp"
#include "tdi/train.hpp"

using namespace tdi;

namespace {

Dataset labelled_rows(const Circuit& c, std::size_t rows, std::mt19937_64& rng) {
  Dataset d;
  d.num_features = c.num_variables();
  d.labels.emplace();
  std::uniform_int_distribution<std::size_t> label(0, c.num_classes() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const Evidence e = random_evidence(c, rng, 0.2);
    for (const auto& v : e.values) d.features.push_back(v ? *v : std::nan(""));
    d.labels->push_back(label(rng));
  }
  return d;
}

double loss_at(const Circuit& c, const Dataset& batch, Objective obj,
               const std::vector<double>& theta) {
  return loss_and_grad(apply_parameters(c, theta), batch, obj).loss;
}

Circuit small_rat(std::size_t classes, std::size_t inputs) {
  RatConfig rat;
  rat.num_sums = 1;
  rat.num_input_dists = inputs;
  rat.depth = 1;
  rat.num_classes = classes;
  rat.num_variables = 2;
  rat.rng_seed = 4;
  return build_rat(rat);
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(19);
  RandomCircuitConfig cfg;
  std::size_t checked = 0;
  for (int t = 0; t < 24; ++t) {
    cfg.num_variables = 1 + t % 3;
    cfg.num_classes = 1 + t % 3;
    const Circuit c0 = t % 2 ? random_dag(cfg, rng) : random_tree(cfg, rng);
    // Start from the normalized parameterization so that theta is a valid point.
    const Circuit c = apply_parameters(c0, extract_parameters(c0));
    const Dataset batch = labelled_rows(c, 6, rng);
    for (auto obj : {Objective::kClassConditional, Objective::kCrossEntropy}) {
      if (obj == Objective::kCrossEntropy && c.num_classes() < 2) continue;
      const auto lg = loss_and_grad(c, batch, obj);
      const auto theta = extract_parameters(c);
      REQUIRE(lg.gradient.size() == theta.size());
      for (std::size_t j = 0; j < theta.size(); ++j) {
        const double h = 1e-5;
        auto up = theta, down = theta;
        up[j] += h;
        down[j] -= h;
        const double fd = (loss_at(c, batch, obj, up) - loss_at(c, batch, obj, down)) / (2 * h);
        // Relative per coordinate, with a floor for coordinates whose
        // gradient is numerically zero.
        CHECK(std::abs(lg.gradient[j] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
      }
      ++checked;
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("Gaussian leaf at its mean has zero mean gradient") {
  const Circuit c({GaussianLeaf{0, 0.7, 0.2}}, {NodeId{0}}, 1, {0.0});
  Dataset d;
  d.num_features = 1;
  d.features = {0.7};
  d.labels = std::vector<std::size_t>{0};
  const auto lg = loss_and_grad(c, d);
  CHECK(lg.gradient[0] == 0.0);
  CHECK(lg.gradient[1] != 0.0);
}

TEST_CASE("uniform weights over identical children have zero logit gradient") {
  std::vector<Node> nodes{GaussianLeaf{0, 0.0, 0.0}, GaussianLeaf{0, 0.0, 0.0},
                          SumNode{{NodeId{0}, NodeId{1}}, {std::log(0.5), std::log(0.5)}}};
  const Circuit c(std::move(nodes), {NodeId{2}}, 1, {0.0});
  std::mt19937_64 rng(1);
  const auto lg = loss_and_grad(c, labelled_rows(c, 8, rng));
  CHECK(std::abs(lg.gradient[0]) < 1e-15);
  CHECK(std::abs(lg.gradient[1]) < 1e-15);
}

TEST_CASE("separable blobs are learned") {
  const Dataset blobs = synth_blobs(2, 2, 100, 6.0, 3);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 50;
  cfg.learning_rate = 0.05;
  const Circuit c = small_rat(2, 2);
  const auto r = fit(c, blobs, cfg);
  CHECK(r.history.back().accuracy >= 0.95);
  CHECK(r.history[49].loss < r.history[0].loss);
  // Weights stay on the simplex and the structure is untouched.
  for (std::uint32_t i = 0; i < r.circuit->size(); ++i) {
    const auto lw = r.circuit->log_weights(NodeId{i});
    if (lw.empty()) continue;
    double total = 0.0;
    for (double w : lw) total += std::exp(w);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::vector<NodeId>(r.circuit->children(NodeId{i}).begin(),
                              r.circuit->children(NodeId{i}).end()) ==
          std::vector<NodeId>(c.children(NodeId{i}).begin(), c.children(NodeId{i}).end()));
  }
  CHECK(r.circuit->size() == c.size());
}

TEST_CASE("zero learning rate leaves the parameters alone") {
  const Dataset blobs = synth_blobs(2, 2, 20, 3.0, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 10;
  cfg.learning_rate = 0.0;
  const Circuit c0 = small_rat(2, 2);
  const Circuit c = apply_parameters(c0, extract_parameters(c0));
  const auto r = fit(c, blobs, cfg);
  CHECK(*r.circuit == c);
  for (const auto& h : r.history) CHECK(h.loss == r.history.front().loss);
}

TEST_CASE("fixed seed reproduces the history across thread counts") {
  const Dataset blobs = synth_blobs(3, 2, 30, 4.0, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 40;
  cfg.learning_rate = 0.02;
  cfg.rng_seed = 8;
  const Circuit c = small_rat(3, 2);
  const auto a = fit(c, blobs, cfg);
  const auto b = fit(c, blobs, cfg);
  cfg.threads = 3;
  const auto d = fit(c, blobs, cfg);
  REQUIRE(a.history.size() == 5);
  for (std::size_t e = 0; e < 5; ++e) {
    CHECK(a.history[e].loss == b.history[e].loss);
    CHECK(a.history[e].loss == d.history[e].loss);
  }
  CHECK(*a.circuit == *d.circuit);
}

TEST_CASE("label outside the class range") {
  const Circuit c = small_rat(2, 1);
  Dataset d;
  d.num_features = 2;
  d.features = {0.0, 0.0};
  d.labels = std::vector<std::size_t>{2};
  try {
    loss_and_grad(c, d);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
}

TEST_CASE("non-finite loss names the row") {
  std::vector<Node> nodes{tdi::testing::categorical(0, {1.0, 0.0})};
  const Circuit c(std::move(nodes), {NodeId{0}}, 1, {0.0});
  Dataset d;
  d.num_features = 1;
  d.features = {0.0, 1.0};
  d.labels = std::vector<std::size_t>{0, 0};
  try {
    loss_and_grad(c, d);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("invalid training configuration") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.check(), Error);
  cfg.epochs = 1;
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.check(), Error);
}

TEST_CASE("optimizer state round trip") {
  OptimizerState s{7, {0.1, -0.2}, {0.3, 0.4}};
  const auto path = std::filesystem::temp_directory_path() / "tdi_optimizer_state.json";
  save_optimizer_state(s, path);
  const auto t = load_optimizer_state(path);
  CHECK(t.step == 7);
  CHECK(t.m == s.m);
  CHECK(t.v == s.v);
  std::filesystem::remove(path);
}
