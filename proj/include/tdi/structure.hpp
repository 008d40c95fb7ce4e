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

#include <cstdint>
#include <random>
#include <string_view>

#include "tdi/circuit.hpp"

namespace tdi {

/// Random tensorized structure hyperparameters.
struct RatConfig {
  std::size_t num_sums = 1;          // S
  std::size_t num_input_dists = 1;   // I
  std::size_t depth = 1;             // D
  std::size_t num_repetitions = 1;   // R
  std::size_t num_classes = 1;       // C
  std::size_t num_variables = 2;     // n
  std::uint64_t rng_seed = 0;
  // Gaussian leaf initialization: mean ~ U(mean_low, mean_high).
  double init_mean_low = 0.0;
  double init_mean_high = 1.0;
  double init_log_std = 0.0;

  /// Throws Error(kConfig) for zero sizes or 2^D > n.
  void check() const;
};

/// Per repetition the variables are split D times into balanced random
/// halves. Leaf regions hold I factorized Gaussian distributions, internal
/// regions S sums over the cross products of their two child regions, and
/// the C class roots mix the cross products of the top split of every
/// repetition. Every product node is binary; the result carries
/// StructureTag::kBinaryRat and passes validate().
Circuit build_rat(const RatConfig& config);

/// Builds a circuit from the line-oriented text format:
///
///   vars 3                       # optional, inferred from the leaves
///   roots root                   # optional when exactly one node is parentless
///   priors 0.5 0.5               # optional, uniform by default
///   structure binary_rat         # optional
///   root sum p1:0.6 p2:0.4
///   p1   product a b
///   a    gaussian 0 0.0 1.0      # variable mean std
///   b    categorical 1 0.2 0.8   # variable probabilities
///
/// Node lines may appear in any order. Throws Error(kFormat) for syntax
/// errors, unknown ids and cycles, Error(kValidation) for invalid circuits.
Circuit build_manual(std::string_view text);

struct RandomCircuitConfig {
  std::size_t num_variables = 3;
  std::size_t max_sum_edges = 12;
  std::size_t num_classes = 1;
  /// Probability of reusing an existing node with the same scope (DAGs only).
  double share_probability = 0.5;
  /// Fraction of variables with categorical rather than Gaussian leaves.
  double categorical_fraction = 0.3;
};

/// Random smooth, decomposable tree; every class root is a sum node.
Circuit random_tree(const RandomCircuitConfig& config, std::mt19937_64& rng);

/// Like random_tree, but subcircuits with matching scope are shared between
/// parents, so the result is generally not a tree.
Circuit random_dag(const RandomCircuitConfig& config, std::mt19937_64& rng);

/// Random evidence for a circuit: Gaussian values ~ N(0, 1.5^2), uniform
/// categorical states, each variable marginalized with the given probability.
Evidence random_evidence(const Circuit& circuit, std::mt19937_64& rng,
                         double marginalize_probability = 0.0);

/// Copy-paste expansion: every node reached along a distinct path from a
/// root becomes its own copy, so the result is a tree computing the same
/// function.
Circuit expand_to_tree(const Circuit& circuit);

}  // namespace tdi
