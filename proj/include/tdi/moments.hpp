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
#include <iosfwd>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tdi/circuit.hpp"
#include "tdi/signed_log.hpp"

namespace tdi {

/// How covariances between distinct children of a sum node are resolved.
enum class CovarianceStrategy {
  kTreeZero,     // implicit copy-paste: sibling covariances are zero
  kRatExact,     // exact recursion for binary RAT structures
  kCauchyLower,  // point estimate as TreeZero, lower Cauchy-Schwarz bound on query
  kCauchyUpper,  // point estimate as TreeZero, upper Cauchy-Schwarz bound on query
};

std::string_view to_string(CovarianceStrategy s);
CovarianceStrategy parse_covariance_strategy(std::string_view text);

/// Bernoulli dropout on every sum-node edge. The keep probability q is the
/// stored quantity; p is derived as 1 - q.
class DropoutConfig {
 public:
  DropoutConfig() = default;
  /// Throws Error(kConfig) unless 0 <= p < 1.
  explicit DropoutConfig(double p, CovarianceStrategy strategy = CovarianceStrategy::kTreeZero);

  double p() const { return 1.0 - q_; }
  double q() const { return q_; }

  CovarianceStrategy strategy = CovarianceStrategy::kTreeZero;
  /// Leaves the edges of class-root sum nodes deterministic.
  bool exclude_root_heads = false;
  /// Optional prior leaf uncertainty as Var[L] / L^2, indexed by node; empty
  /// means every leaf is deterministic.
  std::vector<double> leaf_relative_variance;

 private:
  double q_ = 1.0;
};

inline std::uint64_t pair_key(NodeId a, NodeId b) {
  if (b < a) std::swap(a, b);
  return (std::uint64_t{a.index} << 32) | b.index;
}

struct VarianceInterval {
  SignedLogReal lower;
  SignedLogReal upper;
};

/// Moments of every node under dropout for one evidence row.
struct MomentFrame {
  std::vector<SignedLogReal> expectation;
  std::vector<SignedLogReal> variance;
  /// Covariances materialized by the pass, keyed by pair_key. Under
  /// kRatExact this holds every sibling pair plus the deeper pairs the
  /// recursion needed and all class-root pairs; it is empty otherwise.
  std::unordered_map<std::uint64_t, SignedLogReal> pair_cov;
  /// Per-node variance interval from the Cauchy-Schwarz bound on the sibling
  /// covariance term; filled only for the Cauchy strategies.
  std::vector<VarianceInterval> variance_bounds;

  CovarianceStrategy strategy = CovarianceStrategy::kTreeZero;
  double q = 1.0;
  bool exclude_root_heads = false;
  /// TreeZero or Cauchy applied to a circuit that is not a tree: sibling
  /// covariances were dropped as if shared nodes had been duplicated.
  bool implicit_copy_paste = false;

  SignedLogReal expectation_of(NodeId id) const { return expectation[id.index]; }
  SignedLogReal variance_of(NodeId id) const { return variance[id.index]; }

  /// Cov[a, b] as the strategy resolves it: Var on the diagonal, the stored
  /// value under kRatExact (Error(kInternal) if absent), zero under
  /// kTreeZero, the corresponding Cauchy-Schwarz bound otherwise.
  SignedLogReal covariance(NodeId a, NodeId b) const;
};

/// Single bottom-up pass computing E, Var (and covariances per strategy) of
/// every node. Throws Error(kStructure) for kRatExact on a circuit that is
/// not tagged binary-RAT or whose covariances have no closed form.
MomentFrame tdi_pass(const Circuit& circuit, const Evidence& evidence,
                     const DropoutConfig& config);

/// Reusable evaluator that keeps its scratch buffers between rows.
class TdiEvaluator {
 public:
  TdiEvaluator(const Circuit& circuit, DropoutConfig config);

  const MomentFrame& run(const Evidence& evidence);
  const Circuit& circuit() const { return circuit_; }
  const DropoutConfig& config() const { return config_; }

 private:
  void run_fast(const Evidence& evidence);
  void run_exact(const Evidence& evidence);

  const Circuit& circuit_;
  DropoutConfig config_;
  MomentFrame frame_;
  std::vector<double> log_e_;
  std::vector<double> log1p_rel_var_;  // log(1 + Var/E^2)
  std::vector<double> scratch_;
};

/// q_A q_B sum_i sum_j w_i^A w_j^B Cov[N_i^A, N_j^B], child covariances
/// resolved through the frame. Returns Var[a] when a == b.
SignedLogReal sum_covariance(const Circuit& circuit, const MomentFrame& frame,
                             NodeId sum_a, NodeId sum_b);

/// Covariance of two binary products P_{l,r}, P_{l',r'} whose left and right
/// children share a partition:
///   Cov[L,L'] E[R] E[R'] + Cov[R,R'] E[L] E[L'] + Cov[L,L'] Cov[R,R'].
SignedLogReal rat_product_covariance(const Circuit& circuit, const MomentFrame& frame,
                                     NodeId product_a, NodeId product_b);

/// [-sqrt(Var[a] Var[b]), +sqrt(Var[a] Var[b])].
std::pair<SignedLogReal, SignedLogReal> cauchy_bounds(const MomentFrame& frame, NodeId a,
                                                      NodeId b);

/// CSV dumps: "node_id,kind,expectation,variance" and "node_a,node_b,cov".
void write_moment_csv(std::ostream& nodes_out, const Circuit& circuit,
                      const MomentFrame& frame);
void write_covariance_csv(std::ostream& pairs_out, const MomentFrame& frame);

}  // namespace tdi
