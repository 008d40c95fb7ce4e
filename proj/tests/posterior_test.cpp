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

#include "doctest.h"
#include "fixtures.hpp"
#include "tdi/error.hpp"
#include "tdi/oracle/enumeration.hpp"
#include "tdi/posterior.hpp"
#include "tdi/structure.hpp"

using namespace tdi;
using tdi::testing::observe;
using tdi::testing::rel_err;

TEST_CASE("entropy of reference distributions") {
  CHECK(predictive_entropy(std::vector<double>{1, 0, 0, 0}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(predictive_entropy(std::vector<double>(10, 0.1)) ==
        doctest::Approx(2.302585092994046).epsilon(1e-12));
  CHECK(predictive_entropy(std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(0.693147180559945).epsilon(1e-12));
  CHECK_THROWS_AS(predictive_entropy(std::vector<double>{0, 0}), Error);
}

TEST_CASE("entropy stays within [0, ln C]") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.2, 1.3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> m(2 + t % 9);
    for (double& x : m) x = u(rng);
    m[0] = 0.5;
    const double h = predictive_entropy(m);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(double(m.size())) + 1e-12);
  }
}

TEST_CASE("no dropout gives the Bayes posterior with zero variance") {
  std::mt19937_64 rng(2);
  RandomCircuitConfig cfg;
  cfg.num_classes = 3;
  for (int t = 0; t < 10; ++t) {
    const Circuit c = random_dag(cfg, rng);
    const Evidence e = random_evidence(c, rng);
    const auto bayes = log_posterior(c, log_likelihood(c, e));
    for (auto method : {TaylorMethod::kSimple, TaylorMethod::kExtended}) {
      const auto post = posterior_moments(c, e, DropoutConfig(0.0), method);
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(post.mean[k] == doctest::Approx(std::exp(bayes[k])).epsilon(1e-12));
        CHECK(post.variance[k] == 0.0);
      }
    }
  }
}

TEST_CASE("structurally identical classes are symmetric") {
  std::vector<Node> nodes{GaussianLeaf{0, 0.0, 0.0}, GaussianLeaf{0, 1.0, 0.5},
                          SumNode{{NodeId{0}, NodeId{1}}, {std::log(0.3), std::log(0.7)}},
                          SumNode{{NodeId{0}, NodeId{1}}, {std::log(0.3), std::log(0.7)}}};
  const Circuit c(std::move(nodes), {NodeId{2}, NodeId{3}}, 1, {std::log(0.5), std::log(0.5)});
  for (auto method : {TaylorMethod::kSimple, TaylorMethod::kExtended}) {
    const auto post = posterior_moments(c, observe({0.4}), DropoutConfig(0.2), method);
    CHECK(post.mean[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(post.mean[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(post.variance[0] == doctest::Approx(post.variance[1]).epsilon(1e-12));
  }
}

TEST_CASE("SimpleTaylor is the ratio expansion of the enumerated root moments") {
  std::mt19937_64 rng(13);
  RandomCircuitConfig cfg;
  cfg.num_classes = 3;
  cfg.max_sum_edges = 12;
  for (int t = 0; t < 30; ++t) {
    cfg.num_variables = 1 + t % 3;
    const Circuit c = random_tree(cfg, rng);
    const Evidence e = random_evidence(c, rng);
    const auto m = oracle::enumerate_moments(c, e, 0.1, true);
    const auto& roots = c.roots();
    std::vector<double> a(3);
    double b = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      a[i] = std::exp(c.log_class_priors()[i]) * m.expectation[roots[i].index];
      b += a[i];
    }
    auto sigma = [&](std::size_t i, std::size_t j) {
      return std::exp(c.log_class_priors()[i] + c.log_class_priors()[j]) * m.cov(roots[i], roots[j]);
    };
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) var_b += sigma(i, j);
    }
    const auto post = posterior_moments(c, e, DropoutConfig(0.1));
    for (std::size_t k = 0; k < 3; ++k) {
      const double cov_ab = sigma(k, 0) + sigma(k, 1) + sigma(k, 2);
      const double mean = a[k] / b - cov_ab / (b * b) + a[k] * var_b / (b * b * b);
      const double var = sigma(k, k) / (b * b) - 2 * a[k] * cov_ab / (b * b * b) +
                         a[k] * a[k] * var_b / (b * b * b * b);
      CHECK(std::abs(post.mean[k] - mean) < 1e-9);
      CHECK(std::abs(post.variance[k] - std::max(0.0, var)) < 1e-9 * std::max(var, 1e-6));
    }
  }
}

TEST_CASE("Taylor error shrinks as single edge drops get smaller") {
  // Two class roots, each mixing k leaves of similar density: dropping one
  // edge moves a root by about 1/k, which is what the expansion linearizes.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> mean(-0.3, 0.3), weight(0.5, 1.5);
  auto class_roots = [&](std::uint32_t k) {
    std::vector<Node> nodes;
    std::vector<NodeId> roots;
    for (std::uint32_t r = 0; r < 2; ++r) {
      SumNode sum;
      std::vector<double> w(k);
      double total = 0.0;
      for (double& x : w) total += (x = weight(rng));
      for (std::uint32_t j = 0; j < k; ++j) {
        sum.children.push_back(NodeId{static_cast<std::uint32_t>(nodes.size())});
        sum.log_weights.push_back(std::log(w[j] / total));
        nodes.push_back(GaussianLeaf{0, mean(rng) + 0.4 * r, 0.0});
      }
      roots.push_back(NodeId{static_cast<std::uint32_t>(nodes.size())});
      nodes.push_back(sum);
    }
    return Circuit(std::move(nodes), roots, 1, {std::log(0.5), std::log(0.5)});
  };
  double previous = 1.0;
  for (std::uint32_t k : {2u, 5u, 10u}) {
    double worst_mean = 0.0, worst_var = 0.0;
    for (int t = 0; t < 6; ++t) {
      const Circuit c = class_roots(k);
      const Evidence e = observe({0.2});
      const auto exact = oracle::enumerate_posterior(c, e, 0.1);
      const auto simple = posterior_moments(c, e, DropoutConfig(0.1));
      const auto extended = posterior_moments(c, e, DropoutConfig(0.1), TaylorMethod::kExtended);
      for (std::size_t j = 0; j < 2; ++j) {
        worst_mean = std::max(worst_mean, rel_err(simple.mean[j], exact.mean[j]));
        worst_var = std::max(worst_var, rel_err(simple.variance[j], exact.variance[j]));
        CHECK(std::isfinite(extended.mean[j]));
        CHECK(extended.variance[j] >= 0.0);
      }
    }
    MESSAGE("k=" << k << " worst mean err " << worst_mean << " worst variance err " << worst_var);
    CHECK(worst_mean < 0.05);
    CHECK(worst_var < previous);
    previous = worst_var;
  }
}

TEST_CASE("variances are non-negative and std is their root") {
  RatConfig rat;
  rat.num_sums = 3;
  rat.num_input_dists = 2;
  rat.depth = 2;
  rat.num_classes = 4;
  rat.num_variables = 6;
  const Circuit c = build_rat(rat);
  std::mt19937_64 rng(3);
  for (auto s : {CovarianceStrategy::kTreeZero, CovarianceStrategy::kRatExact,
                 CovarianceStrategy::kCauchyLower, CovarianceStrategy::kCauchyUpper}) {
    const auto post = posterior_moments(c, random_evidence(c, rng), DropoutConfig(0.3, s));
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(post.variance[k] >= 0.0);
      CHECK(post.std_dev[k] == std::sqrt(post.variance[k]));
    }
    CHECK(post.normalized_entropy == doctest::Approx(post.entropy / std::log(4.0)));
  }
}

TEST_CASE("posterior needs two classes") {
  try {
    posterior_moments(tdi::testing::two_leaf_sum(), observe({0.0}), DropoutConfig(0.1));
    FAIL("expected a structure error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kStructure);
  }
}

TEST_CASE("every class likelihood vanishing is an underflow error") {
  std::vector<Node> nodes{tdi::testing::categorical(0, {1.0, 0.0}), SumNode{{NodeId{0}}, {0.0}},
                          SumNode{{NodeId{0}}, {0.0}}};
  const Circuit c(std::move(nodes), {NodeId{1}, NodeId{2}}, 1, {std::log(0.5), std::log(0.5)});
  try {
    posterior_moments(c, observe({1.0}), DropoutConfig(0.1));
    FAIL("expected an underflow error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnderflow);
  }
}

TEST_CASE("posterior is invariant to tiny likelihood scales") {
  // Both class likelihoods far below the double range.
  std::vector<Node> nodes{GaussianLeaf{0, 0.0, -4.0}, GaussianLeaf{0, 0.1, -4.0},
                          SumNode{{NodeId{0}, NodeId{1}}, {std::log(0.5), std::log(0.5)}},
                          SumNode{{NodeId{1}}, {0.0}}};
  const Circuit c(std::move(nodes), {NodeId{2}, NodeId{3}}, 1, {std::log(0.5), std::log(0.5)});
  const auto post = posterior_moments(c, observe({1.0}), DropoutConfig(0.1));
  CHECK(std::isfinite(post.mean[0]));
  CHECK(post.mean[0] + post.mean[1] == doctest::Approx(1.0).epsilon(1e-6));
}
