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

#include <cstddef>
#include <vector>

#include "tdi/circuit.hpp"

namespace tdi::oracle {

/// Largest number of droppable edges the enumerators accept.
inline constexpr std::size_t kMaxEnumeratedEdges = 24;

struct EnumeratedMoments {
  std::vector<double> expectation;  // per node
  std::vector<double> variance;     // per node
  /// Row-major node x node covariance; empty unless requested.
  std::vector<double> covariance;
  std::size_t num_masks = 0;

  double cov(NodeId a, NodeId b) const {
    return covariance[a.index * expectation.size() + b.index];
  }
};

/// Exact node moments under Bernoulli(1 - p) keep masks on every sum edge,
/// by summing over all 2^k masks in linear space. Throws Error(kConfig) when
/// more than kMaxEnumeratedEdges edges would be enumerated.
EnumeratedMoments enumerate_moments(const Circuit& circuit, const Evidence& evidence, double p,
                                    bool with_covariance = false,
                                    bool exclude_root_heads = false);

struct EnumeratedPosterior {
  std::vector<double> mean;
  std::vector<double> variance;
  /// Probability of the masks under which every class root is zero; those
  /// masks are excluded and the remainder renormalized.
  double excluded_mass = 0.0;
};

/// Exact moments of the class posterior over all masks.
EnumeratedPosterior enumerate_posterior(const Circuit& circuit, const Evidence& evidence,
                                        double p, bool exclude_root_heads = false);

}  // namespace tdi::oracle
