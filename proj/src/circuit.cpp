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

#include "tdi/circuit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tdi/error.hpp"
#include "tdi/logmath.hpp"

namespace tdi {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kStructure: return "structure";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kUnderflow: return "underflow";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kInternal: return "internal";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Scope

Scope::Scope(std::size_t num_variables)
    : num_variables_(num_variables), words_((num_variables + 63) / 64, 0) {}

void Scope::insert(std::size_t variable) {
  words_[variable / 64] |= std::uint64_t{1} << (variable % 64);
}

void Scope::merge(const Scope& other) {
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
}

bool Scope::contains(std::size_t variable) const {
  return variable < num_variables_ &&
         (words_[variable / 64] >> (variable % 64)) & std::uint64_t{1};
}

bool Scope::intersects(const Scope& other) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & other.words_[i]) return true;
  }
  return false;
}

bool Scope::is_subset_of(const Scope& other) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & ~other.words_[i]) return false;
  }
  return true;
}

std::size_t Scope::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<std::size_t> Scope::variables() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < num_variables_; ++v) {
    if (contains(v)) out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evidence

Evidence Evidence::observed(std::span<const double> row) {
  Evidence e;
  e.values.assign(row.begin(), row.end());
  return e;
}

Evidence Evidence::from_row(std::span<const double> row) {
  Evidence e;
  e.values.reserve(row.size());
  for (double v : row) {
    if (std::isnan(v)) {
      e.values.emplace_back(std::nullopt);
    } else {
      e.values.emplace_back(v);
    }
  }
  return e;
}

Evidence Evidence::marginalized(std::size_t num_variables) {
  Evidence e;
  e.values.assign(num_variables, std::nullopt);
  return e;
}

// ---------------------------------------------------------------------------
// Circuit

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

const std::vector<NodeId>* children_of(const Node& node) {
  if (auto* s = std::get_if<SumNode>(&node)) return &s->children;
  if (auto* p = std::get_if<ProductNode>(&node)) return &p->children;
  return nullptr;
}

}  // namespace

Circuit::Circuit(std::vector<Node> nodes, std::vector<NodeId> roots,
                 std::size_t num_variables, std::vector<double> log_class_priors,
                 StructureTag tag)
    : nodes_(std::move(nodes)),
      roots_(std::move(roots)),
      num_variables_(num_variables),
      log_class_priors_(std::move(log_class_priors)),
      tag_(tag) {
  const std::size_t n = nodes_.size();
  kinds_.resize(n);
  offsets_.assign(n + 1, 0);
  scopes_.assign(n, Scope(num_variables_));
  parent_counts_.assign(n, 0);
  is_root_.assign(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = nodes_[i];
    kinds_[i] = static_cast<NodeKind>(node.index());
    offsets_[i] = flat_children_.size();
    if (const auto* ch = children_of(node)) {
      for (std::size_t k = 0; k < ch->size(); ++k) {
        NodeId c = (*ch)[k];
        if (c.index >= n) {
          throw Error(ErrorKind::kStructure,
                      "node " + std::to_string(i) + " references missing child " +
                          std::to_string(c.index));
        }
        flat_children_.push_back(c);
        double lw = 0.0;
        if (const auto* s = std::get_if<SumNode>(&node)) {
          lw = k < s->log_weights.size() ? s->log_weights[k] : kNegInf;
          ++num_sum_edges_;
        }
        flat_log_weights_.push_back(lw);
        ++parent_counts_[c.index];
        // Scopes are only meaningful for topologically ordered children;
        // out-of-order references are reported by validate().
        if (c.index < i) scopes_[i].merge(scopes_[c.index]);
      }
    } else {
      std::size_t var = kinds_[i] == NodeKind::kGaussian
                            ? std::get<GaussianLeaf>(node).variable
                            : std::get<CategoricalLeaf>(node).variable;
      if (var < num_variables_) scopes_[i].insert(var);
    }
  }
  offsets_[n] = flat_children_.size();

  for (NodeId r : roots_) {
    if (r.index >= n) {
      throw Error(ErrorKind::kStructure,
                  "root references missing node " + std::to_string(r.index));
    }
    is_root_[r.index] = 1;
  }
  is_tree_ = std::all_of(parent_counts_.begin(), parent_counts_.end(),
                         [](std::uint32_t c) { return c <= 1; });

  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (parent_counts_[i] == 0) continue;
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
      uf.unite(static_cast<std::uint32_t>(i), flat_children_[e].index);
    }
  }
  components_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    components_[i] = uf.find(static_cast<std::uint32_t>(i));
  }
}

std::span<const NodeId> Circuit::children(NodeId id) const {
  return std::span<const NodeId>(flat_children_).subspan(
      offsets_[id.index], offsets_[id.index + 1] - offsets_[id.index]);
}

std::span<const double> Circuit::log_weights(NodeId id) const {
  if (kinds_[id.index] != NodeKind::kSum) return {};
  return std::span<const double>(flat_log_weights_)
      .subspan(offsets_[id.index], offsets_[id.index + 1] - offsets_[id.index]);
}

std::size_t Circuit::num_leaf_parameters() const {
  std::size_t count = 0;
  for (const Node& node : nodes_) {
    if (std::holds_alternative<GaussianLeaf>(node)) count += 2;
    if (const auto* c = std::get_if<CategoricalLeaf>(&node)) count += c->log_probs.size();
  }
  return count;
}

std::size_t Circuit::num_parameters() const {
  return num_sum_edges_ + num_leaf_parameters();
}

bool operator==(const Circuit& a, const Circuit& b) {
  return a.nodes_ == b.nodes_ && a.roots_ == b.roots_ &&
         a.num_variables_ == b.num_variables_ &&
         a.log_class_priors_ == b.log_class_priors_ && a.tag_ == b.tag_;
}

// ---------------------------------------------------------------------------
// Validation

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kTopology: return "topology";
    case ViolationKind::kEmptyChildren: return "empty-children";
    case ViolationKind::kWeightCount: return "weight-count";
    case ViolationKind::kWeightNormalization: return "weight-normalization";
    case ViolationKind::kSmoothness: return "smoothness";
    case ViolationKind::kDecomposability: return "decomposability";
    case ViolationKind::kLeafVariable: return "leaf-variable";
    case ViolationKind::kLeafNormalization: return "leaf-normalization";
    case ViolationKind::kRoot: return "root";
    case ViolationKind::kRootScope: return "root-scope";
    case ViolationKind::kPriors: return "priors";
  }
  return "unknown";
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << to_string(violations[i].kind) << " at node " << violations[i].node.index
       << ": " << violations[i].message;
  }
  return os.str();
}

namespace {

constexpr double kNormalizationTolerance = 1e-9;

double linear_mass(std::span<const double> logs) {
  double total = 0.0;
  for (double l : logs) total += std::exp(l);
  return total;
}

}  // namespace

ValidationReport validate(const Circuit& circuit) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::size_t node, std::string msg) {
    report.violations.push_back(
        {kind, NodeId{static_cast<std::uint32_t>(node)}, std::move(msg)});
  };

  for (std::size_t i = 0; i < circuit.size(); ++i) {
    NodeId id{static_cast<std::uint32_t>(i)};
    const Node& node = circuit.node(id);
    const NodeKind kind = circuit.kind(id);

    if (is_leaf(kind)) {
      std::size_t var = kind == NodeKind::kGaussian
                            ? std::get<GaussianLeaf>(node).variable
                            : std::get<CategoricalLeaf>(node).variable;
      if (var >= circuit.num_variables()) {
        add(ViolationKind::kLeafVariable, i,
            "variable " + std::to_string(var) + " out of range");
      }
      if (kind == NodeKind::kCategorical) {
        const auto& probs = std::get<CategoricalLeaf>(node).log_probs;
        double mass = linear_mass(probs);
        if (probs.empty() || std::abs(mass - 1.0) > kNormalizationTolerance) {
          add(ViolationKind::kLeafNormalization, i,
              "categorical probabilities sum to " + std::to_string(mass));
        }
      }
      continue;
    }

    auto children = circuit.children(id);
    if (children.empty()) {
      add(ViolationKind::kEmptyChildren, i, "inner node without children");
      continue;
    }
    bool ordered = true;
    for (NodeId c : children) {
      if (c.index >= i) {
        add(ViolationKind::kTopology, i,
            "child " + std::to_string(c.index) + " is not below its parent");
        ordered = false;
      }
    }
    if (!ordered) continue;

    if (kind == NodeKind::kSum) {
      const auto& sum = std::get<SumNode>(node);
      if (sum.log_weights.size() != sum.children.size()) {
        add(ViolationKind::kWeightCount, i, "weight count differs from child count");
      } else {
        double mass = linear_mass(sum.log_weights);
        if (std::abs(mass - 1.0) > kNormalizationTolerance) {
          add(ViolationKind::kWeightNormalization, i,
              "weights sum to " + std::to_string(mass));
        }
      }
      const Scope& first = circuit.scope(children[0]);
      for (std::size_t k = 1; k < children.size(); ++k) {
        if (!(circuit.scope(children[k]) == first)) {
          add(ViolationKind::kSmoothness, i,
              "children " + std::to_string(children[0].index) + " and " +
                  std::to_string(children[k].index) + " differ in scope");
          break;
        }
      }
    } else {
      bool clash = false;
      for (std::size_t a = 0; a < children.size() && !clash; ++a) {
        for (std::size_t b = a + 1; b < children.size() && !clash; ++b) {
          if (circuit.scope(children[a]).intersects(circuit.scope(children[b]))) {
            add(ViolationKind::kDecomposability, i,
                "children " + std::to_string(children[a].index) + " and " +
                    std::to_string(children[b].index) + " overlap in scope");
            clash = true;
          }
        }
      }
    }
  }

  if (circuit.roots().empty()) add(ViolationKind::kRoot, 0, "circuit has no roots");
  for (NodeId r : circuit.roots()) {
    if (circuit.scope(r).count() != circuit.num_variables()) {
      add(ViolationKind::kRootScope, r.index, "root scope is not the full variable set");
    }
  }
  const auto& priors = circuit.log_class_priors();
  if (priors.size() != circuit.roots().size()) {
    add(ViolationKind::kPriors, 0, "prior count differs from root count");
  } else if (!priors.empty() &&
             std::abs(linear_mass(priors) - 1.0) > kNormalizationTolerance) {
    add(ViolationKind::kPriors, 0,
        "class priors sum to " + std::to_string(linear_mass(priors)));
  }
  return report;
}

void require_valid(const Circuit& circuit) {
  ValidationReport report = validate(circuit);
  if (!report.ok()) throw Error(ErrorKind::kValidation, report.summary());
}

// ---------------------------------------------------------------------------
// Inference

double gaussian_log_density(const GaussianLeaf& leaf, double x) {
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const double z = (x - leaf.mean) * std::exp(-leaf.log_std);
  return -0.5 * z * z - leaf.log_std - kHalfLog2Pi;
}

double leaf_log_value(const Circuit& circuit, NodeId leaf, const Evidence& evidence) {
  const Node& node = circuit.node(leaf);
  if (const auto* g = std::get_if<GaussianLeaf>(&node)) {
    if (!std::isfinite(g->mean) || !std::isfinite(g->log_std)) {
      throw Error(ErrorKind::kParameter,
                  "non-finite Gaussian parameter at node " + std::to_string(leaf.index));
    }
    const auto& v = evidence.values[g->variable];
    return v ? gaussian_log_density(*g, *v) : 0.0;
  }
  const auto& c = std::get<CategoricalLeaf>(node);
  const auto& v = evidence.values[c.variable];
  if (!v) return 0.0;
  const double rounded = std::round(*v);
  if (rounded < 0 || rounded >= static_cast<double>(c.log_probs.size())) {
    throw Error(ErrorKind::kShape, "categorical value " + std::to_string(*v) +
                                       " out of range at node " +
                                       std::to_string(leaf.index));
  }
  const double lp = c.log_probs[static_cast<std::size_t>(rounded)];
  if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity()) {
    throw Error(ErrorKind::kParameter,
                "non-finite categorical parameter at node " + std::to_string(leaf.index));
  }
  return lp;
}

void forward_log_values(const Circuit& circuit, const Evidence& evidence,
                        std::span<double> values) {
  if (evidence.size() != circuit.num_variables()) {
    throw Error(ErrorKind::kShape, "evidence has " + std::to_string(evidence.size()) +
                                       " values, circuit has " +
                                       std::to_string(circuit.num_variables()) +
                                       " variables");
  }
  const auto flat = circuit.flat_children();
  const auto weights = circuit.flat_log_weights();
  for (std::size_t i = 0; i < circuit.size(); ++i) {
    NodeId id{static_cast<std::uint32_t>(i)};
    const std::size_t begin = circuit.edge_offset(id);
    const std::size_t end = circuit.edge_offset(NodeId{id.index + 1});
    switch (circuit.kind(id)) {
      case NodeKind::kSum: {
        double hi = kNegInf;
        for (std::size_t e = begin; e < end; ++e) {
          hi = std::max(hi, weights[e] + values[flat[e].index]);
        }
        if (hi == kNegInf) {
          values[i] = kNegInf;
          break;
        }
        double acc = 0.0;
        for (std::size_t e = begin; e < end; ++e) {
          acc += std::exp(weights[e] + values[flat[e].index] - hi);
        }
        values[i] = hi + std::log(acc);
        break;
      }
      case NodeKind::kProduct: {
        double acc = 0.0;
        for (std::size_t e = begin; e < end; ++e) acc += values[flat[e].index];
        values[i] = acc;
        break;
      }
      default:
        values[i] = leaf_log_value(circuit, id, evidence);
    }
  }
}

std::vector<double> log_likelihood(const Circuit& circuit, const Evidence& evidence) {
  std::vector<double> values(circuit.size());
  forward_log_values(circuit, evidence, values);
  std::vector<double> out;
  out.reserve(circuit.num_classes());
  for (NodeId r : circuit.roots()) out.push_back(values[r.index]);
  return out;
}

std::vector<double> log_posterior(const Circuit& circuit,
                                  std::span<const double> root_log_likelihoods) {
  const auto& priors = circuit.log_class_priors();
  std::vector<double> joint(root_log_likelihoods.size());
  for (std::size_t i = 0; i < joint.size(); ++i) {
    joint[i] = root_log_likelihoods[i] + priors[i];
  }
  const double norm = log_sum_exp(joint);
  for (double& j : joint) j -= norm;
  return joint;
}

}  // namespace tdi
