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
#include <random>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "tdi/circuit.hpp"
#include "tdi/circuit_io.hpp"
#include "tdi/error.hpp"
#include "tdi/parallel.hpp"
#include "tdi/structure.hpp"

using namespace tdi;
using tdi::testing::observe;
using tdi::testing::rel_err;

namespace {

std::vector<Circuit> generated_circuits() {
  std::vector<Circuit> out;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 30; ++i) {
    RandomCircuitConfig cfg;
    cfg.num_variables = 2 + i % 4;
    cfg.num_classes = 1 + i % 3;
    cfg.max_sum_edges = 12;
    out.push_back(i % 2 ? random_dag(cfg, rng) : random_tree(cfg, rng));
  }
  RatConfig rat;
  rat.num_sums = 3;
  rat.num_input_dists = 2;
  rat.depth = 2;
  rat.num_repetitions = 2;
  rat.num_classes = 3;
  rat.num_variables = 9;
  out.push_back(build_rat(rat));
  out.push_back(build_manual(tdi::testing::kThreeVariableCircuit));
  return out;
}

}  // namespace

TEST_CASE("product over one variable twice is a decomposability violation") {
  std::vector<Node> nodes{GaussianLeaf{0, 0.0, 0.0}, GaussianLeaf{0, 1.0, 0.0},
                          ProductNode{{NodeId{0}, NodeId{1}}}};
  const Circuit c(std::move(nodes), {NodeId{2}}, 1, {0.0});
  const auto report = validate(c);
  CHECK(report.has(ViolationKind::kDecomposability));
  CHECK(report.violations.front().node == NodeId{2});
  CHECK_THROWS_AS(require_valid(c), Error);
}

TEST_CASE("sum over different scopes is a smoothness violation") {
  std::vector<Node> nodes{GaussianLeaf{0, 0.0, 0.0}, GaussianLeaf{1, 0.0, 0.0},
                          SumNode{{NodeId{0}, NodeId{1}}, {std::log(0.5), std::log(0.5)}}};
  const Circuit c(std::move(nodes), {NodeId{2}}, 2, {0.0});
  CHECK(validate(c).has(ViolationKind::kSmoothness));
}

TEST_CASE("single Gaussian leaf is valid") {
  const Circuit c({GaussianLeaf{0, 0.0, 0.0}}, {NodeId{0}}, 1, {0.0});
  CHECK(validate(c).ok());
}

TEST_CASE("unnormalized weights and forward references are reported") {
  std::vector<Node> nodes{GaussianLeaf{0, 0.0, 0.0}, GaussianLeaf{0, 1.0, 0.0},
                          SumNode{{NodeId{0}, NodeId{1}}, {std::log(0.5), std::log(0.4)}}};
  CHECK(validate(Circuit(nodes, {NodeId{2}}, 1, {0.0})).has(ViolationKind::kWeightNormalization));

  std::vector<Node> forward{SumNode{{NodeId{1}}, {0.0}}, GaussianLeaf{0, 0.0, 0.0}};
  CHECK(validate(Circuit(forward, {NodeId{0}}, 1, {0.0})).has(ViolationKind::kTopology));

  std::vector<Node> bad_leaf{tdi::testing::categorical(0, {0.5, 0.4})};
  CHECK(validate(Circuit(bad_leaf, {NodeId{0}}, 1, {0.0})).has(ViolationKind::kLeafNormalization));
}

TEST_CASE("standard normal density at its mode") {
  CHECK(gaussian_log_density(GaussianLeaf{0, 0.0, 0.0}, 0.0) ==
        doctest::Approx(-0.918938533204673).epsilon(1e-12));
}

TEST_CASE("sum of 0.6 * 0.5 and 0.4 * 0.25") {
  const Circuit c = tdi::testing::two_leaf_sum();
  const auto ll = log_likelihood(c, observe({0.0}));
  CHECK(ll[0] == doctest::Approx(std::log(0.4)).epsilon(1e-14));
  CHECK(ll[0] == doctest::Approx(-0.916290731874155).epsilon(1e-12));
}

TEST_CASE("fully marginalized evidence has probability one") {
  for (const Circuit& c : generated_circuits()) {
    REQUIRE(validate(c).ok());
    for (double ll : log_likelihood(c, Evidence::marginalized(c.num_variables()))) {
      CHECK(std::abs(ll) < 1e-9);
    }
  }
}

TEST_CASE("log-space evaluation matches a linear-space reference") {
  std::mt19937_64 rng(5);
  for (const Circuit& c : generated_circuits()) {
    if (c.size() > 50) continue;
    for (int trial = 0; trial < 5; ++trial) {
      const Evidence ev = random_evidence(c, rng, 0.2);
      const auto linear = tdi::testing::linear_values(c, ev);
      std::vector<double> logs(c.size());
      forward_log_values(c, ev, logs);
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (linear[i] < 1e-30 || linear[i] > 1e3) continue;
        CHECK(rel_err(std::exp(logs[i]), linear[i]) < 1e-9);
      }
    }
  }
}

TEST_CASE("stored order is topological") {
  for (const Circuit& c : generated_circuits()) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (NodeId ch : c.children(NodeId{static_cast<std::uint32_t>(i)})) CHECK(ch.index < i);
    }
  }
}

TEST_CASE("marginalizing a variable never lowers the probability of the rest") {
  std::mt19937_64 rng(17);
  RandomCircuitConfig cfg;
  cfg.num_variables = 3;
  cfg.categorical_fraction = 1.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Circuit c = trial % 2 ? random_dag(cfg, rng) : random_tree(cfg, rng);
    std::vector<std::size_t> card(3);
    for (const Node& n : c.nodes()) {
      if (const auto* leaf = std::get_if<CategoricalLeaf>(&n)) card[leaf->variable] = leaf->log_probs.size();
    }
    // Every full assignment, then each variable dropped in turn.
    for (std::size_t a = 0; a < card[0]; ++a) {
      for (std::size_t b = 0; b < card[1]; ++b) {
        for (std::size_t d = 0; d < card[2]; ++d) {
          const Evidence full = observe({double(a), double(b), double(d)});
          const double base = log_likelihood(c, full)[0];
          for (std::size_t v = 0; v < 3; ++v) {
            Evidence fewer = full;
            fewer.values[v].reset();
            CHECK(log_likelihood(c, fewer)[0] >= base - 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("class posterior sums to one") {
  std::mt19937_64 rng(3);
  RandomCircuitConfig cfg;
  cfg.num_classes = 3;
  const Circuit c = random_dag(cfg, rng);
  const auto post = log_posterior(c, log_likelihood(c, random_evidence(c, rng)));
  double total = 0.0;
  for (double lp : post) total += std::exp(lp);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evidence length must match") {
  const Circuit c = tdi::testing::two_leaf_sum();
  CHECK_THROWS_AS(log_likelihood(c, observe({0.0, 1.0})), Error);
}

TEST_CASE("NaN entries are marginalized") {
  const Circuit c = tdi::testing::product_of_sums();
  const auto with_nan = log_likelihood(c, observe({0.0, std::nan("")}));
  CHECK(with_nan[0] == doctest::Approx(std::log(0.4)).epsilon(1e-14));
}

TEST_CASE("file round trip") {
  const Circuit leaf({GaussianLeaf{0, 0.25, -0.5}}, {NodeId{0}}, 1, {0.0});
  CHECK(deserialize(serialize(leaf)) == leaf);
  for (const Circuit& c : generated_circuits()) CHECK(deserialize(serialize(c)) == c);
}

TEST_CASE("file with weights summing to 0.9 fails validation on load") {
  const std::string text = R"({"version": 1, "num_variables": 1, "log_class_priors": [0],
    "roots": [2], "nodes": [
      {"kind": "gaussian", "variable": 0, "mean": 0, "log_std": 0},
      {"kind": "gaussian", "variable": 0, "mean": 1, "log_std": 0},
      {"kind": "sum", "children": [0, 1], "log_weights": [-0.6931471805599453, -1.2039728043259361]}]})";
  try {
    deserialize(text);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
  }
}

TEST_CASE("unknown version and malformed text are format errors") {
  for (const char* text : {R"({"version": 2})", "{not json"}) {
    try {
      deserialize(text);
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFormat);
    }
  }
}

TEST_CASE("concurrent read-only evaluation agrees with sequential") {
  RatConfig rat;
  rat.num_sums = 4;
  rat.num_input_dists = 3;
  rat.depth = 3;
  rat.num_repetitions = 3;
  rat.num_classes = 4;
  rat.num_variables = 16;
  const Circuit c = build_rat(rat);
  std::mt19937_64 rng(1);
  std::vector<Evidence> rows;
  for (int i = 0; i < 64; ++i) rows.push_back(random_evidence(c, rng, 0.1));
  std::vector<std::vector<double>> seq, par(rows.size());
  for (const auto& r : rows) seq.push_back(log_likelihood(c, r));
  parallel_blocks(rows.size(), 4, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) par[i] = log_likelihood(c, rows[i]);
  });
  CHECK(seq == par);
}
