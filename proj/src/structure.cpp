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

#include "tdi/structure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>

#include "tdi/error.hpp"

namespace tdi {
namespace {

NodeId push(std::vector<Node>& nodes, Node node) {
  nodes.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes.size() - 1)};
}

std::vector<double> random_log_weights(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> w(k);
  double total = 0.0;
  for (double& x : w) total += (x = u(rng));
  for (double& x : w) x = std::log(x / total);
  return w;
}

class RatBuilder {
 public:
  explicit RatBuilder(const RatConfig& config) : config_(config), rng_(config.rng_seed) {}

  Circuit build() {
    std::vector<NodeId> top_products;
    std::vector<std::size_t> vars(config_.num_variables);
    std::iota(vars.begin(), vars.end(), std::size_t{0});
    for (std::size_t r = 0; r < config_.num_repetitions; ++r) {
      auto [left, right] = split(vars);
      auto l = region(left, config_.depth - 1);
      auto rr = region(right, config_.depth - 1);
      for (NodeId a : l) {
        for (NodeId b : rr) top_products.push_back(push(nodes_, ProductNode{{a, b}}));
      }
    }
    std::vector<NodeId> roots;
    for (std::size_t c = 0; c < config_.num_classes; ++c) {
      roots.push_back(push(nodes_, SumNode{top_products,
                                           random_log_weights(top_products.size(), rng_)}));
    }
    std::vector<double> priors(config_.num_classes,
                               -std::log(static_cast<double>(config_.num_classes)));
    return Circuit(std::move(nodes_), std::move(roots), config_.num_variables, std::move(priors),
                   StructureTag::kBinaryRat);
  }

 private:
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(
      std::vector<std::size_t> vars) {
    std::shuffle(vars.begin(), vars.end(), rng_);
    const auto mid = vars.begin() + static_cast<std::ptrdiff_t>(vars.size() / 2);
    std::vector<std::size_t> left(vars.begin(), mid), right(mid, vars.end());
    std::sort(left.begin(), left.end());
    std::sort(right.begin(), right.end());
    return {left, right};
  }

  // Output nodes of the region over `vars` with `depth` further splits.
  std::vector<NodeId> region(const std::vector<std::size_t>& vars, std::size_t depth) {
    if (depth == 0) return leaf_region(vars);
    auto [left, right] = split(vars);
    auto l = region(left, depth - 1);
    auto r = region(right, depth - 1);
    std::vector<NodeId> products;
    for (NodeId a : l) {
      for (NodeId b : r) products.push_back(push(nodes_, ProductNode{{a, b}}));
    }
    std::vector<NodeId> sums;
    for (std::size_t s = 0; s < config_.num_sums; ++s) {
      sums.push_back(
          push(nodes_, SumNode{products, random_log_weights(products.size(), rng_)}));
    }
    return sums;
  }

  std::vector<NodeId> leaf_region(const std::vector<std::size_t>& vars) {
    std::uniform_real_distribution<double> mean(config_.init_mean_low, config_.init_mean_high);
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < config_.num_input_dists; ++i) {
      std::vector<NodeId> leaves;
      for (std::size_t v : vars) {
        leaves.push_back(push(nodes_, GaussianLeaf{v, mean(rng_), config_.init_log_std}));
      }
      out.push_back(binary_product(leaves, 0, leaves.size()));
    }
    return out;
  }

  NodeId binary_product(const std::vector<NodeId>& xs, std::size_t begin, std::size_t end) {
    if (end - begin == 1) return xs[begin];
    const std::size_t mid = begin + (end - begin) / 2;
    NodeId a = binary_product(xs, begin, mid);
    NodeId b = binary_product(xs, mid, end);
    return push(nodes_, ProductNode{{a, b}});
  }

  const RatConfig& config_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
};

// Shared generator for random trees and DAGs.
class RandomBuilder {
 public:
  RandomBuilder(const RandomCircuitConfig& config, std::mt19937_64& rng, bool share)
      : config_(config), rng_(rng), share_(share) {}

  Circuit build() {
    if (config_.num_variables == 0 || config_.num_classes == 0) {
      throw Error(ErrorKind::kConfig, "random circuit needs variables and classes");
    }
    if (config_.max_sum_edges < 2 * config_.num_classes) {
      throw Error(ErrorKind::kConfig, "sum-edge budget too small for the class roots");
    }
    std::bernoulli_distribution categorical(config_.categorical_fraction);
    std::uniform_int_distribution<std::size_t> states(2, 3);
    for (std::size_t v = 0; v < config_.num_variables; ++v) {
      cardinality_.push_back(categorical(rng_) ? states(rng_) : 0);
    }
    std::vector<std::size_t> all(config_.num_variables);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<NodeId> roots;
    const std::size_t per_class = config_.max_sum_edges / config_.num_classes;
    for (std::size_t c = 0; c < config_.num_classes; ++c) {
      budget_ = per_class;
      roots.push_back(sum_node(all, /*is_root=*/true));
    }
    std::vector<double> priors = random_log_weights(config_.num_classes, rng_);
    return Circuit(std::move(nodes_), std::move(roots), config_.num_variables, std::move(priors));
  }

 private:
  NodeId leaf(std::size_t v) {
    if (cardinality_[v] > 0) {
      return push(nodes_, CategoricalLeaf{v, random_log_weights(cardinality_[v], rng_)});
    }
    std::normal_distribution<double> mean(0.0, 1.0);
    std::uniform_real_distribution<double> log_std(-0.5, 0.5);
    return push(nodes_, GaussianLeaf{v, mean(rng_), log_std(rng_)});
  }

  std::size_t pick(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  NodeId sum_node(const std::vector<std::size_t>& vars, bool is_root) {
    const std::size_t k = pick(2, std::min<std::size_t>(3, budget_));
    budget_ -= k;
    std::vector<NodeId> children;
    while (children.size() < k) {
      NodeId c = vars.size() == 1 ? node(vars, false) : product_node(vars);
      if (std::find(children.begin(), children.end(), c) != children.end()) {
        c = vars.size() == 1 ? leaf(vars.front()) : fresh_product(vars);
      }
      children.push_back(c);
    }
    const NodeId id = push(nodes_, SumNode{children, random_log_weights(k, rng_)});
    return is_root ? id : remember(vars, id);
  }

  NodeId product_node(const std::vector<std::size_t>& vars) {
    if (auto shared = reuse(vars)) return *shared;
    return fresh_product(vars);
  }

  NodeId fresh_product(std::vector<std::size_t> vars) {
    std::shuffle(vars.begin(), vars.end(), rng_);
    const std::size_t parts = vars.size() >= 3 ? pick(2, 3) : 2;
    std::vector<std::vector<std::size_t>> groups(parts);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      groups[i < parts ? i : pick(0, parts - 1)].push_back(vars[i]);
    }
    std::vector<NodeId> children;
    for (auto& g : groups) {
      std::sort(g.begin(), g.end());
      children.push_back(node(g, true));
    }
    std::sort(vars.begin(), vars.end());
    return remember(vars, push(nodes_, ProductNode{children}));
  }

  // Any node over `vars`: a shared one, a sum while budget lasts, otherwise a
  // product or leaf.
  NodeId node(const std::vector<std::size_t>& vars, bool allow_reuse) {
    if (allow_reuse) {
      if (auto shared = reuse(vars)) return *shared;
    }
    if (budget_ >= 2 && std::bernoulli_distribution(0.5)(rng_)) return sum_node(vars, false);
    if (vars.size() == 1) return remember(vars, leaf(vars.front()));
    return fresh_product(vars);
  }

  std::optional<NodeId> reuse(const std::vector<std::size_t>& vars) {
    if (!share_) return std::nullopt;
    auto it = pool_.find(vars);
    if (it == pool_.end() || it->second.empty()) return std::nullopt;
    if (!std::bernoulli_distribution(config_.share_probability)(rng_)) return std::nullopt;
    return it->second[pick(0, it->second.size() - 1)];
  }

  NodeId remember(const std::vector<std::size_t>& vars, NodeId id) {
    if (share_) pool_[vars].push_back(id);
    return id;
  }

  const RandomCircuitConfig& config_;
  std::mt19937_64& rng_;
  bool share_;
  std::size_t budget_ = 0;
  std::vector<std::size_t> cardinality_;
  std::vector<Node> nodes_;
  std::map<std::vector<std::size_t>, std::vector<NodeId>> pool_;
};

}  // namespace

void RatConfig::check() const {
  if (num_sums == 0 || num_input_dists == 0 || depth == 0 || num_repetitions == 0 ||
      num_classes == 0 || num_variables == 0) {
    throw Error(ErrorKind::kConfig, "RAT hyperparameters must be positive");
  }
  if (depth >= 63 || (std::size_t{1} << depth) > num_variables) {
    throw Error(ErrorKind::kConfig, "2^D = 2^" + std::to_string(depth) + " exceeds the " +
                                        std::to_string(num_variables) + " variables");
  }
  if (!(init_mean_low <= init_mean_high) || !std::isfinite(init_log_std)) {
    throw Error(ErrorKind::kConfig, "invalid leaf initialization range");
  }
}

Circuit build_rat(const RatConfig& config) {
  config.check();
  Circuit circuit = RatBuilder(config).build();
  require_valid(circuit);
  return circuit;
}

Circuit random_tree(const RandomCircuitConfig& config, std::mt19937_64& rng) {
  return RandomBuilder(config, rng, false).build();
}

Circuit random_dag(const RandomCircuitConfig& config, std::mt19937_64& rng) {
  return RandomBuilder(config, rng, true).build();
}

Evidence random_evidence(const Circuit& circuit, std::mt19937_64& rng,
                         double marginalize_probability) {
  std::vector<std::size_t> cardinality(circuit.num_variables(), 0);
  for (const Node& n : circuit.nodes()) {
    if (const auto* c = std::get_if<CategoricalLeaf>(&n)) {
      cardinality[c->variable] = c->log_probs.size();
    }
  }
  std::normal_distribution<double> gauss(0.0, 1.5);
  std::bernoulli_distribution drop(marginalize_probability);
  Evidence e = Evidence::marginalized(circuit.num_variables());
  for (std::size_t v = 0; v < cardinality.size(); ++v) {
    const double value =
        cardinality[v] > 0
            ? static_cast<double>(
                  std::uniform_int_distribution<std::size_t>(0, cardinality[v] - 1)(rng))
            : gauss(rng);
    if (!drop(rng)) e.values[v] = value;
  }
  return e;
}

Circuit expand_to_tree(const Circuit& circuit) {
  std::vector<Node> nodes;
  auto copy = [&](auto&& self, NodeId id) -> NodeId {
    Node node = circuit.node(id);
    if (auto* s = std::get_if<SumNode>(&node)) {
      for (NodeId& c : s->children) c = self(self, c);
    } else if (auto* p = std::get_if<ProductNode>(&node)) {
      for (NodeId& c : p->children) c = self(self, c);
    }
    return push(nodes, std::move(node));
  };
  std::vector<NodeId> roots;
  for (NodeId r : circuit.roots()) roots.push_back(copy(copy, r));
  return Circuit(std::move(nodes), std::move(roots), circuit.num_variables(),
                 circuit.log_class_priors());
}

}  // namespace tdi
