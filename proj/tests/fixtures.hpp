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

#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string_view>
#include <vector>

#include "tdi/circuit.hpp"

namespace tdi::testing {

inline double rel_err(double actual, double expected) {
  const double scale = std::max(std::abs(expected), 1e-300);
  return std::abs(actual - expected) / scale;
}

inline Evidence observe(std::initializer_list<double> values) {
  std::vector<double> row(values);
  return Evidence::from_row(row);
}

inline CategoricalLeaf categorical(std::size_t variable, std::initializer_list<double> probs) {
  CategoricalLeaf leaf{variable, {}};
  for (double p : probs) leaf.log_probs.push_back(std::log(p));
  return leaf;
}

// Sum with weights (0.6, 0.4) over two leaves on variable 0 that evaluate to
// 0.5 and 0.25 at x0 = 0.
inline Circuit two_leaf_sum() {
  std::vector<Node> nodes{categorical(0, {0.5, 0.5}), categorical(0, {0.25, 0.75}),
                          SumNode{{NodeId{0}, NodeId{1}}, {std::log(0.6), std::log(0.4)}}};
  return Circuit(std::move(nodes), {NodeId{2}}, 1, {0.0});
}

// Product of two copies of two_leaf_sum, on variables 0 and 1.
inline Circuit product_of_sums() {
  std::vector<Node> nodes{
      categorical(0, {0.5, 0.5}),
      categorical(0, {0.25, 0.75}),
      SumNode{{NodeId{0}, NodeId{1}}, {std::log(0.6), std::log(0.4)}},
      categorical(1, {0.5, 0.5}),
      categorical(1, {0.25, 0.75}),
      SumNode{{NodeId{3}, NodeId{4}}, {std::log(0.6), std::log(0.4)}},
      ProductNode{{NodeId{2}, NodeId{5}}},
  };
  return Circuit(std::move(nodes), {NodeId{6}}, 2, {0.0});
}

// Sum root over two products; each product pairs a nested sum with a single
// leaf. Three variables, ten leaves.
inline constexpr std::string_view kThreeVariableCircuit = R"(
roots root
root sum p1:0.7 p2:0.3
p1   product s1 c2
p2   product a0 s2
s1   sum q1:0.4 q2:0.6
q1   product a1 b1
q2   product a2 b2
s2   sum r1:0.5 r2:0.5
r1   product b3 c3
r2   product b4 c4
a0   gaussian 0 0.0 1.0
a1   gaussian 0 -1.0 0.5
a2   gaussian 0 1.0 0.5
b1   gaussian 1 0.0 1.0
b2   gaussian 1 2.0 1.5
b3   categorical 1 0.3 0.7
b4   categorical 1 0.6 0.4
c2   gaussian 2 0.0 2.0
c3   gaussian 2 -0.5 1.0
c4   gaussian 2 0.5 1.0
)";

/// Linear-space reference evaluation of every node.
inline std::vector<double> linear_values(const Circuit& circuit, const Evidence& evidence) {
  std::vector<double> v(circuit.size());
  for (std::size_t i = 0; i < circuit.size(); ++i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    const Node& n = circuit.node(id);
    if (const auto* s = std::get_if<SumNode>(&n)) {
      double acc = 0.0;
      for (std::size_t k = 0; k < s->children.size(); ++k) {
        acc += std::exp(s->log_weights[k]) * v[s->children[k].index];
      }
      v[i] = acc;
    } else if (const auto* p = std::get_if<ProductNode>(&n)) {
      double acc = 1.0;
      for (NodeId c : p->children) acc *= v[c.index];
      v[i] = acc;
    } else if (const auto* g = std::get_if<GaussianLeaf>(&n)) {
      const auto& x = evidence.values[g->variable];
      if (!x) {
        v[i] = 1.0;
      } else {
        const double sd = std::exp(g->log_std);
        const double z = (*x - g->mean) / sd;
        v[i] = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
      }
    } else {
      const auto& c = std::get<CategoricalLeaf>(n);
      const auto& x = evidence.values[c.variable];
      v[i] = x ? std::exp(c.log_probs[static_cast<std::size_t>(*x)]) : 1.0;
    }
  }
  return v;
}

}  // namespace tdi::testing
