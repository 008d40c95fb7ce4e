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
#include "tdi/structure.hpp"

using namespace tdi;
using tdi::testing::observe;

namespace {

RatConfig rat(std::size_t s, std::size_t i, std::size_t d, std::size_t r, std::size_t c,
              std::size_t n, std::uint64_t seed = 0) {
  RatConfig cfg;
  cfg.num_sums = s;
  cfg.num_input_dists = i;
  cfg.depth = d;
  cfg.num_repetitions = r;
  cfg.num_classes = c;
  cfg.num_variables = n;
  cfg.rng_seed = seed;
  return cfg;
}

ErrorKind kind_of(auto&& call) {
  try {
    call();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

}  // namespace

TEST_CASE("minimal RAT") {
  const Circuit c = build_rat(rat(1, 1, 1, 1, 1, 2));
  CHECK(validate(c).ok());
  CHECK(c.num_sum_edges() == 1);
  const NodeId root = c.roots()[0];
  REQUIRE(c.kind(root) == NodeKind::kSum);
  const NodeId prod = c.children(root)[0];
  REQUIRE(c.kind(prod) == NodeKind::kProduct);
  for (NodeId leaf : c.children(prod)) CHECK(c.kind(leaf) == NodeKind::kGaussian);
}

TEST_CASE("MNIST-scale parameter counts") {
  const Circuit c = build_rat(rat(20, 20, 5, 5, 10, 784));
  CHECK(std::abs(double(c.num_parameters()) - 1.38e6) <= 0.1 * 1.38e6);
  CHECK(std::abs(double(c.num_leaf_parameters()) - 157e3) <= 0.1 * 157e3);
}

TEST_CASE("RAT invariants") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Circuit c = build_rat(rat(3, 2, 1 + seed % 3, 1 + seed % 2, 1 + seed % 4, 9, seed));
    CHECK(validate(c).ok());
    CHECK(c.structure_tag() == StructureTag::kBinaryRat);
    for (std::uint32_t i = 0; i < c.size(); ++i) {
      const NodeId id{i};
      if (c.kind(id) != NodeKind::kProduct) continue;
      const auto ch = c.children(id);
      REQUIRE(ch.size() == 2);
      // Children partition the product scope.
      CHECK(!c.scope(ch[0]).intersects(c.scope(ch[1])));
      Scope merged = c.scope(ch[0]);
      merged.merge(c.scope(ch[1]));
      CHECK(merged == c.scope(id));
      // Splits are balanced.
      const auto a = c.scope(ch[0]).count(), b = c.scope(ch[1]).count();
      CHECK((a > b ? a - b : b - a) <= 1);
    }
  }
}

TEST_CASE("same seed gives the same structure") {
  CHECK(build_rat(rat(3, 3, 2, 2, 3, 10, 42)) == build_rat(rat(3, 3, 2, 2, 3, 10, 42)));
  CHECK(!(build_rat(rat(3, 3, 2, 2, 3, 10, 42)) == build_rat(rat(3, 3, 2, 2, 3, 10, 43))));
}

TEST_CASE("invalid RAT hyperparameters") {
  CHECK(kind_of([] { build_rat(rat(0, 1, 1, 1, 1, 2)); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { build_rat(rat(1, 1, 3, 1, 1, 7)); }) == ErrorKind::kConfig);
}

TEST_CASE("manual three-variable circuit") {
  const Circuit c = build_manual(tdi::testing::kThreeVariableCircuit);
  CHECK(validate(c).ok());
  CHECK(c.num_variables() == 3);
  std::size_t leaves = 0, sums = 0, products = 0;
  for (std::uint32_t i = 0; i < c.size(); ++i) {
    const auto k = c.kind(NodeId{i});
    leaves += is_leaf(k);
    sums += k == NodeKind::kSum;
    products += k == NodeKind::kProduct;
  }
  CHECK(leaves == 10);
  CHECK(sums == 3);
  CHECK(products == 6);
  CHECK(c.kind(c.roots()[0]) == NodeKind::kSum);
  CHECK(log_likelihood(c, Evidence::marginalized(3))[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("manual format errors") {
  CHECK(kind_of([] { build_manual("a sum b:1\nb sum a:1\n"); }) == ErrorKind::kFormat);
  CHECK(kind_of([] { build_manual("a sum b:1\n"); }) == ErrorKind::kFormat);
  CHECK(kind_of([] { build_manual("a gaussian 0 0\n"); }) == ErrorKind::kFormat);
  CHECK(kind_of([] { build_manual("a wobble 0\n"); }) == ErrorKind::kFormat);
  CHECK(kind_of([] { build_manual("r sum a:0.5 b:0.3\na gaussian 0 0 1\nb gaussian 0 1 1\n"); }) ==
        ErrorKind::kValidation);
}

TEST_CASE("manual single leaf, priors and comments") {
  const Circuit leaf = build_manual("x gaussian 0 0 1  # standard normal\n");
  CHECK(leaf.size() == 1);
  CHECK(validate(leaf).ok());
  const Circuit two = build_manual(
      "roots a b\npriors 0.25 0.75\na sum l:1\nb sum l:1\nl categorical 0 0.1 0.9\n");
  CHECK(two.num_classes() == 2);
  CHECK(std::exp(two.log_class_priors()[1]) == doctest::Approx(0.75));
  CHECK(std::exp(log_likelihood(two, observe({1.0}))[0]) == doctest::Approx(0.9));
}

TEST_CASE("random generators") {
  std::mt19937_64 rng(3);
  RandomCircuitConfig cfg;
  std::size_t shared = 0;
  for (int t = 0; t < 50; ++t) {
    cfg.num_variables = 1 + t % 4;
    cfg.num_classes = 1 + t % 3;
    const Circuit tree = random_tree(cfg, rng);
    const Circuit dag = random_dag(cfg, rng);
    CHECK(validate(tree).ok());
    CHECK(validate(dag).ok());
    CHECK(tree.is_tree());
    CHECK(tree.num_sum_edges() <= cfg.max_sum_edges);
    CHECK(dag.num_sum_edges() <= cfg.max_sum_edges);
    for (NodeId r : dag.roots()) CHECK(dag.kind(r) == NodeKind::kSum);
    shared += !dag.is_tree();
  }
  CHECK(shared > 0);
}

TEST_CASE("copy-paste expansion keeps the function") {
  std::mt19937_64 rng(9);
  RandomCircuitConfig cfg;
  cfg.share_probability = 0.9;
  cfg.num_classes = 2;
  for (int t = 0; t < 20; ++t) {
    const Circuit dag = random_dag(cfg, rng);
    const Circuit tree = expand_to_tree(dag);
    CHECK(tree.is_tree());
    CHECK(validate(tree).ok());
    CHECK(tree.size() >= dag.size());
    const Evidence e = random_evidence(dag, rng, 0.3);
    const auto a = log_likelihood(dag, e), b = log_likelihood(tree, e);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
  }
}
