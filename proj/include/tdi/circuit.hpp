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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tdi {

/// Dense index of a node inside one Circuit. Children always carry a smaller
/// index than their parents.
struct NodeId {
  std::uint32_t index = 0;

  friend auto operator<=>(NodeId, NodeId) = default;
};

struct SumNode {
  std::vector<NodeId> children;
  std::vector<double> log_weights;  // natural log of the mixture weights

  friend bool operator==(const SumNode&, const SumNode&) = default;
};

struct ProductNode {
  std::vector<NodeId> children;

  friend bool operator==(const ProductNode&, const ProductNode&) = default;
};

struct GaussianLeaf {
  std::size_t variable = 0;
  double mean = 0.0;
  double log_std = 0.0;

  friend bool operator==(const GaussianLeaf&, const GaussianLeaf&) = default;
};

struct CategoricalLeaf {
  std::size_t variable = 0;
  std::vector<double> log_probs;

  friend bool operator==(const CategoricalLeaf&, const CategoricalLeaf&) = default;
};

using Node = std::variant<SumNode, ProductNode, GaussianLeaf, CategoricalLeaf>;

enum class NodeKind : std::uint8_t { kSum, kProduct, kGaussian, kCategorical };

inline bool is_leaf(NodeKind k) {
  return k == NodeKind::kGaussian || k == NodeKind::kCategorical;
}

/// Set of variable indices, stored as a dense bitset.
class Scope {
 public:
  Scope() = default;
  explicit Scope(std::size_t num_variables);

  void insert(std::size_t variable);
  void merge(const Scope& other);
  bool contains(std::size_t variable) const;
  bool intersects(const Scope& other) const;
  bool is_subset_of(const Scope& other) const;
  std::size_t count() const;
  std::size_t universe() const { return num_variables_; }
  std::vector<std::size_t> variables() const;

  friend bool operator==(const Scope&, const Scope&) = default;

 private:
  std::size_t num_variables_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Marks circuits whose structure licenses the RAT covariance recursion.
enum class StructureTag { kGeneric, kBinaryRat };

/// Per-variable observation; std::nullopt marginalizes the variable.
struct Evidence {
  std::vector<std::optional<double>> values;

  static Evidence observed(std::span<const double> row);
  /// NaN entries become marginalized variables.
  static Evidence from_row(std::span<const double> row);
  static Evidence marginalized(std::size_t num_variables);

  std::size_t size() const { return values.size(); }
};

/// Immutable DAG of sum, product and leaf nodes in topological order.
///
/// Construction never validates smoothness or decomposability; call
/// validate() for that. Derived arrays (flat children, weights, scopes,
/// parent counts) are computed once here so that evaluation is a linear
/// sweep over contiguous memory.
class Circuit {
 public:
  Circuit(std::vector<Node> nodes, std::vector<NodeId> roots,
          std::size_t num_variables, std::vector<double> log_class_priors,
          StructureTag tag = StructureTag::kGeneric);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_[id.index]; }
  NodeKind kind(NodeId id) const { return kinds_[id.index]; }

  std::span<const NodeId> children(NodeId id) const;
  /// Log weights of a sum node; empty for any other kind.
  std::span<const double> log_weights(NodeId id) const;
  /// Position of the first child slot of `id` in the flat edge arrays.
  std::size_t edge_offset(NodeId id) const { return offsets_[id.index]; }

  const Scope& scope(NodeId id) const { return scopes_[id.index]; }
  std::uint32_t parent_count(NodeId id) const { return parent_counts_[id.index]; }
  /// Nodes in different components share no descendant (parentless nodes
  /// are excluded from the linking).
  std::uint32_t component(NodeId id) const { return components_[id.index]; }

  const std::vector<NodeId>& roots() const { return roots_; }
  std::size_t num_classes() const { return roots_.size(); }
  std::size_t num_variables() const { return num_variables_; }
  const std::vector<double>& log_class_priors() const { return log_class_priors_; }
  StructureTag structure_tag() const { return tag_; }

  bool is_root(NodeId id) const { return is_root_[id.index] != 0; }
  /// True when no node has more than one parent.
  bool is_tree() const { return is_tree_; }

  std::size_t num_edges() const { return flat_children_.size(); }
  std::size_t num_sum_edges() const { return num_sum_edges_; }
  std::size_t num_leaf_parameters() const;
  /// Sum weights plus leaf parameters.
  std::size_t num_parameters() const;

  std::span<const NodeId> flat_children() const { return flat_children_; }
  /// Log weight per child slot (0 for product slots).
  std::span<const double> flat_log_weights() const { return flat_log_weights_; }

  friend bool operator==(const Circuit& a, const Circuit& b);

 private:
  std::vector<Node> nodes_;
  std::vector<NodeId> roots_;
  std::size_t num_variables_;
  std::vector<double> log_class_priors_;
  StructureTag tag_;

  std::vector<NodeKind> kinds_;
  std::vector<std::size_t> offsets_;  // size() + 1 entries
  std::vector<NodeId> flat_children_;
  std::vector<double> flat_log_weights_;
  std::vector<Scope> scopes_;
  std::vector<std::uint32_t> parent_counts_;
  std::vector<std::uint32_t> components_;
  std::vector<std::uint8_t> is_root_;
  std::size_t num_sum_edges_ = 0;
  bool is_tree_ = true;
};

enum class ViolationKind {
  kTopology,          // child index not below the parent, or out of range
  kEmptyChildren,
  kWeightCount,
  kWeightNormalization,
  kSmoothness,
  kDecomposability,
  kLeafVariable,
  kLeafNormalization,
  kRoot,
  kRootScope,
  kPriors,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  NodeId node;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
  std::string summary() const;
};

/// Checks every structural invariant; violations are returned as data.
ValidationReport validate(const Circuit& circuit);

/// Throws Error(kValidation) with the report summary if validation fails.
void require_valid(const Circuit& circuit);

double gaussian_log_density(const GaussianLeaf& leaf, double x);

/// Log value of a leaf node under the evidence (0 when marginalized).
double leaf_log_value(const Circuit& circuit, NodeId leaf, const Evidence& evidence);

/// Bottom-up log-space pass writing the log value of every node into
/// `values` (size circuit.size()).
void forward_log_values(const Circuit& circuit, const Evidence& evidence,
                        std::span<double> values);

/// log S_i(x) for every class root.
std::vector<double> log_likelihood(const Circuit& circuit, const Evidence& evidence);

/// Log Bayes posterior log p(y_i | x) per class from root log-likelihoods.
std::vector<double> log_posterior(const Circuit& circuit,
                                  std::span<const double> root_log_likelihoods);

}  // namespace tdi
