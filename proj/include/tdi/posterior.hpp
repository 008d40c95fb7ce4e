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

#include <span>
#include <string_view>
#include <vector>

#include "tdi/circuit.hpp"
#include "tdi/moments.hpp"

namespace tdi {

/// Second-order expansion of the class posterior around the root means.
enum class TaylorMethod {
  kSimple,    // ratio A/B with A = S_i c_i, B = sum_j S_j c_j
  kExtended,  // per-class expansion including Var[S_i S_j] terms
};

std::string_view to_string(TaylorMethod m);
TaylorMethod parse_taylor_method(std::string_view text);

/// Floor applied to posterior means before they are renormalized for the
/// entropy.
inline constexpr double kPosteriorFloor = 1e-12;

struct PosteriorMoments {
  std::vector<double> mean;      // E[p(y_i | x)]
  std::vector<double> variance;  // Var[p(y_i | x)], clamped at zero
  std::vector<double> std_dev;
  double entropy = 0.0;             // -sum m log m over the renormalized means
  double normalized_entropy = 0.0;  // entropy / ln C
  std::size_t predicted = 0;        // argmax of the means
};

/// Row-major C x C covariance matrix of the class roots.
/// Off-diagonal entries come from the frame under kRatExact and from one
/// level of sum_covariance otherwise.
std::vector<SignedLogReal> root_covariance(const Circuit& circuit, const MomentFrame& frame);

PosteriorMoments posterior_from_frame(const Circuit& circuit, const MomentFrame& frame,
                                      TaylorMethod method = TaylorMethod::kSimple);

/// One TDI pass followed by the posterior expansion. Throws Error(kStructure)
/// for fewer than two classes and Error(kUnderflow) when every class root
/// has zero expectation.
PosteriorMoments posterior_moments(const Circuit& circuit, const Evidence& evidence,
                                   const DropoutConfig& config,
                                   TaylorMethod method = TaylorMethod::kSimple);

/// Entropy of a probability vector after clamping to [kPosteriorFloor, 1]
/// and renormalizing. Throws Error(kParameter) when no entry is positive.
double predictive_entropy(std::span<const double> probabilities);

}  // namespace tdi
