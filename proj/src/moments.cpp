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

#include "tdi/moments.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>

#include "tdi/circuit_io.hpp"
#include "tdi/error.hpp"
#include "tdi/logmath.hpp"

namespace tdi {

std::string_view to_string(CovarianceStrategy s) {
  switch (s) {
    case CovarianceStrategy::kTreeZero: return "tree_zero";
    case CovarianceStrategy::kRatExact: return "rat_exact";
    case CovarianceStrategy::kCauchyLower: return "cauchy_lower";
    case CovarianceStrategy::kCauchyUpper: return "cauchy_upper";
  }
  return "unknown";
}

CovarianceStrategy parse_covariance_strategy(std::string_view text) {
  for (auto s : {CovarianceStrategy::kTreeZero, CovarianceStrategy::kRatExact,
                 CovarianceStrategy::kCauchyLower, CovarianceStrategy::kCauchyUpper}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorKind::kConfig, "unknown covariance strategy \"" + std::string(text) + "\"");
}

DropoutConfig::DropoutConfig(double p, CovarianceStrategy s) : strategy(s) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw Error(ErrorKind::kConfig,
                "dropout probability must lie in [0, 1), got " + format_real(p));
  }
  q_ = 1.0 - p;
}

namespace {

bool is_cauchy(CovarianceStrategy s) {
  return s == CovarianceStrategy::kCauchyLower || s == CovarianceStrategy::kCauchyUpper;
}

SignedLogReal square(const SignedLogReal& x) { return x * x; }

SignedLogReal from_log_rel_var(double log_e, double log1p_rel) {
  if (log1p_rel <= 0.0 || log_e == kNegInf) return {};
  return SignedLogReal::from_log(std::log(std::expm1(log1p_rel)) + 2.0 * log_e);
}

double keep_prob(const Circuit& circuit, NodeId id, double q, bool exclude_root_heads) {
  return exclude_root_heads && circuit.is_root(id) ? 1.0 : q;
}

void check_evidence(const Circuit& circuit, const Evidence& evidence) {
  if (evidence.size() != circuit.num_variables()) {
    throw Error(ErrorKind::kShape, "evidence has " + std::to_string(evidence.size()) +
                                       " values, circuit has " +
                                       std::to_string(circuit.num_variables()) +
                                       " variables");
  }
}

double leaf_rel_var(const DropoutConfig& config, NodeId id) {
  if (config.leaf_relative_variance.empty()) return 0.0;
  const double r = config.leaf_relative_variance[id.index];
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::kParameter,
                "leaf relative variance must be finite and non-negative at node " +
                    std::to_string(id.index));
  }
  return r;
}

// Exact covariance of two nodes by structural recursion. Independent pairs
// (no shared descendant, or a constant side) are zero; a sum on either side
// is expanded linearly; a product whose children each meet at most one
// factor of the other side factorizes into independent pairs.
class ExactCovariance {
 public:
  ExactCovariance(const Circuit& circuit, MomentFrame& frame, const DropoutConfig& config)
      : circuit_(circuit), frame_(frame), config_(config) {}

  SignedLogReal operator()(NodeId a, NodeId b) {
    if (a == b) return frame_.variance[a.index];
    const auto key = pair_key(a, b);
    if (auto it = frame_.pair_cov.find(key); it != frame_.pair_cov.end()) return it->second;
    const SignedLogReal value = compute(std::min(a, b), std::max(a, b));
    frame_.pair_cov.emplace(key, value);
    return value;
  }

  bool independent(NodeId a, NodeId b) const {
    if (!circuit_.scope(a).intersects(circuit_.scope(b))) return true;
    if (circuit_.parent_count(a) > 0 && circuit_.parent_count(b) > 0 &&
        circuit_.component(a) != circuit_.component(b)) {
      return true;
    }
    return frame_.variance[a.index].is_zero() || frame_.variance[b.index].is_zero();
  }

 private:
  SignedLogReal compute(NodeId lo, NodeId hi) {
    if (independent(lo, hi) || is_leaf(circuit_.kind(hi))) return {};
    if (circuit_.kind(hi) == NodeKind::kSum) return expand_sum(hi, lo);

    std::vector<NodeId> overlapping;
    SignedLogReal rest = SignedLogReal::from_log(0.0);
    for (NodeId c : circuit_.children(hi)) {
      if (independent(c, lo)) {
        rest *= frame_.expectation[c.index];
      } else {
        overlapping.push_back(c);
      }
    }
    if (overlapping.empty()) return {};
    if (overlapping.size() == 1) return (*this)(overlapping.front(), lo) * rest;
    if (circuit_.kind(lo) == NodeKind::kSum) return expand_sum(lo, hi);
    if (circuit_.kind(lo) != NodeKind::kProduct) return {};
    return product_pairs(lo, hi);
  }

  SignedLogReal expand_sum(NodeId sum, NodeId other) {
    const auto children = circuit_.children(sum);
    const auto lw = circuit_.log_weights(sum);
    SignedLogReal acc;
    for (std::size_t k = 0; k < children.size(); ++k) {
      acc += SignedLogReal::from_log(lw[k]) * (*this)(children[k], other);
    }
    return acc * SignedLogReal::from_double(
                     keep_prob(circuit_, sum, config_.q(), config_.exclude_root_heads));
  }

  SignedLogReal product_pairs(NodeId a, NodeId b) {
    // Match every child of `a` to the unique child of `b` it overlaps.
    SignedLogReal rest = SignedLogReal::from_log(0.0);
    std::vector<std::pair<NodeId, NodeId>> pairs;
    std::vector<int> used(circuit_.children(b).size(), 0);
    for (NodeId ca : circuit_.children(a)) {
      std::optional<std::size_t> match;
      const auto cb = circuit_.children(b);
      for (std::size_t j = 0; j < cb.size(); ++j) {
        if (independent(ca, cb[j])) continue;
        if (match) fail(a, b);
        match = j;
      }
      if (!match) {
        rest *= frame_.expectation[ca.index];
        continue;
      }
      if (used[*match]++) fail(a, b);
      pairs.emplace_back(ca, cb[*match]);
    }
    const auto cb = circuit_.children(b);
    for (std::size_t j = 0; j < cb.size(); ++j) {
      if (!used[j]) rest *= frame_.expectation[cb[j].index];
    }
    // Cov[prod X_k, prod Y_k] = prod(x_k + y_k) - prod y_k with x = Cov, y = E E,
    // accumulated without cancellation.
    SignedLogReal t;
    SignedLogReal prefix = SignedLogReal::from_log(0.0);
    for (const auto& [x_node, y_node] : pairs) {
      const SignedLogReal x = (*this)(x_node, y_node);
      const SignedLogReal y = frame_.expectation[x_node.index] * frame_.expectation[y_node.index];
      t = t * (x + y) + x * prefix;
      prefix *= y;
    }
    return t * rest;
  }

  [[noreturn]] void fail(NodeId a, NodeId b) const {
    throw Error(ErrorKind::kStructure,
                "no closed-form covariance for products " + std::to_string(a.index) + " and " +
                    std::to_string(b.index));
  }

  const Circuit& circuit_;
  MomentFrame& frame_;
  const DropoutConfig& config_;
};

}  // namespace

SignedLogReal MomentFrame::covariance(NodeId a, NodeId b) const {
  if (a == b) return variance[a.index];
  switch (strategy) {
    case CovarianceStrategy::kTreeZero: return {};
    case CovarianceStrategy::kCauchyLower: return cauchy_bounds(*this, a, b).first;
    case CovarianceStrategy::kCauchyUpper: return cauchy_bounds(*this, a, b).second;
    case CovarianceStrategy::kRatExact: break;
  }
  auto it = pair_cov.find(pair_key(a, b));
  if (it == pair_cov.end()) {
    throw Error(ErrorKind::kInternal, "covariance of nodes " + std::to_string(a.index) +
                                          " and " + std::to_string(b.index) +
                                          " was not materialized");
  }
  return it->second;
}

TdiEvaluator::TdiEvaluator(const Circuit& circuit, DropoutConfig config)
    : circuit_(circuit), config_(std::move(config)) {
  if (!config_.leaf_relative_variance.empty() &&
      config_.leaf_relative_variance.size() != circuit_.size()) {
    throw Error(ErrorKind::kShape, "leaf relative variance needs one entry per node");
  }
  if (config_.strategy == CovarianceStrategy::kRatExact &&
      circuit_.structure_tag() != StructureTag::kBinaryRat) {
    throw Error(ErrorKind::kStructure,
                "exact covariance strategy requires a binary RAT circuit");
  }
  frame_.strategy = config_.strategy;
  frame_.q = config_.q();
  frame_.exclude_root_heads = config_.exclude_root_heads;
  frame_.implicit_copy_paste =
      config_.strategy != CovarianceStrategy::kRatExact && !circuit_.is_tree();
  frame_.expectation.resize(circuit_.size());
  frame_.variance.resize(circuit_.size());
  if (is_cauchy(config_.strategy)) frame_.variance_bounds.resize(circuit_.size());
}

const MomentFrame& TdiEvaluator::run(const Evidence& evidence) {
  check_evidence(circuit_, evidence);
  if (config_.strategy == CovarianceStrategy::kRatExact) {
    run_exact(evidence);
  } else {
    run_fast(evidence);
  }
  return frame_;
}

// Relative-variance form of the zero-covariance recursion. With
// rho = Var/E^2 a product satisfies 1 + rho = prod(1 + rho_c), and a sum with
// a_c = w_c E_c / max(w E) satisfies
//   rho = sum a_c^2 (rho_c + p) / (q (sum a_c)^2).
void TdiEvaluator::run_fast(const Evidence& evidence) {
  const std::size_t n = circuit_.size();
  const bool bounds = is_cauchy(config_.strategy);
  log_e_.resize(n);
  log1p_rel_var_.resize(n);
  // Cauchy bounds: relative lower and upper variance per node.
  scratch_.assign(bounds ? 2 * n : 0, 0.0);
  double* rel_lo = bounds ? scratch_.data() : nullptr;
  double* rel_hi = bounds ? scratch_.data() + n : nullptr;

  const auto flat = circuit_.flat_children();
  const auto weights = circuit_.flat_log_weights();
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    const std::size_t begin = circuit_.edge_offset(id);
    const std::size_t end = circuit_.edge_offset(NodeId{id.index + 1});
    switch (circuit_.kind(id)) {
      case NodeKind::kSum: {
        const double q = keep_prob(circuit_, id, config_.q(), config_.exclude_root_heads);
        const double p = 1.0 - q;
        double hi = kNegInf;
        for (std::size_t e = begin; e < end; ++e) {
          hi = std::max(hi, weights[e] + log_e_[flat[e].index]);
        }
        if (hi == kNegInf) {
          log_e_[i] = kNegInf;
          log1p_rel_var_[i] = 0.0;
          if (bounds) rel_lo[i] = rel_hi[i] = 0.0;
          break;
        }
        double sum_a = 0.0, sum_a2 = 0.0, sum_var = 0.0;
        double sum_a_sqrt_hi = 0.0, sum_a2_rel_hi = 0.0, sum_a2_rel_lo = 0.0;
        for (std::size_t e = begin; e < end; ++e) {
          const std::size_t c = flat[e].index;
          const double a = std::exp(weights[e] + log_e_[c] - hi);
          if (a == 0.0) continue;
          const double lg = log1p_rel_var_[c];
          const double rho = lg == 0.0 ? 0.0 : std::expm1(lg);
          sum_a += a;
          sum_var += a * a * (rho + p);
          if (bounds) {
            sum_a2 += a * a;
            sum_a_sqrt_hi += a * std::sqrt(rel_hi[c]);
            sum_a2_rel_hi += a * a * rel_hi[c];
            sum_a2_rel_lo += a * a * rel_lo[c];
          }
        }
        const double a2 = sum_a * sum_a;
        log_e_[i] = std::log(q) + hi + std::log(sum_a);
        log1p_rel_var_[i] = std::log1p(sum_var / (q * a2));
        if (bounds) {
          // Sibling covariances bounded by sqrt(U_i U_j) of the upper child variances.
          const double cross = std::max(0.0, sum_a_sqrt_hi * sum_a_sqrt_hi - sum_a2_rel_hi);
          rel_hi[i] = ((sum_a2_rel_hi + p * sum_a2) / q + cross) / a2;
          rel_lo[i] = std::max(0.0, (sum_a2_rel_lo + p * sum_a2) / q - cross) / a2;
        }
        break;
      }
      case NodeKind::kProduct: {
        double le = 0.0, lg = 0.0, lg_lo = 0.0, lg_hi = 0.0;
        for (std::size_t e = begin; e < end; ++e) {
          const std::size_t c = flat[e].index;
          le += log_e_[c];
          lg += log1p_rel_var_[c];
          if (bounds) {
            lg_lo += std::log1p(rel_lo[c]);
            lg_hi += std::log1p(rel_hi[c]);
          }
        }
        log_e_[i] = le;
        log1p_rel_var_[i] = le == kNegInf ? 0.0 : lg;
        if (bounds) {
          rel_lo[i] = le == kNegInf ? 0.0 : std::expm1(lg_lo);
          rel_hi[i] = le == kNegInf ? 0.0 : std::expm1(lg_hi);
        }
        break;
      }
      default: {
        log_e_[i] = leaf_log_value(circuit_, id, evidence);
        const double r = log_e_[i] == kNegInf ? 0.0 : leaf_rel_var(config_, id);
        log1p_rel_var_[i] = std::log1p(r);
        if (bounds) rel_lo[i] = rel_hi[i] = r;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    frame_.expectation[i] = SignedLogReal::from_log(log_e_[i]);
    frame_.variance[i] = from_log_rel_var(log_e_[i], log1p_rel_var_[i]);
    if (bounds) {
      frame_.variance_bounds[i].lower = from_log_rel_var(log_e_[i], std::log1p(rel_lo[i]));
      frame_.variance_bounds[i].upper = from_log_rel_var(log_e_[i], std::log1p(rel_hi[i]));
    }
  }
}

void TdiEvaluator::run_exact(const Evidence& evidence) {
  frame_.pair_cov.clear();
  ExactCovariance cov(circuit_, frame_, config_);
  const std::size_t n = circuit_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    const auto children = circuit_.children(id);
    switch (circuit_.kind(id)) {
      case NodeKind::kSum: {
        const double q = keep_prob(circuit_, id, config_.q(), config_.exclude_root_heads);
        const auto lw = circuit_.log_weights(id);
        const auto sq = SignedLogReal::from_double(q);
        const auto sp = SignedLogReal::from_double(1.0 - q);
        SignedLogReal e, diag, cross;
        for (std::size_t k = 0; k < children.size(); ++k) {
          const auto w = SignedLogReal::from_log(lw[k]);
          const auto& ec = frame_.expectation[children[k].index];
          e += w * ec;
          diag += w * w * (frame_.variance[children[k].index] + sp * square(ec));
          for (std::size_t j = 0; j < k; ++j) {
            cross += w * SignedLogReal::from_log(lw[j]) * cov(children[j], children[k]);
          }
        }
        frame_.expectation[i] = sq * e;
        frame_.variance[i] = clamp_nonnegative(
            sq * diag + SignedLogReal::from_double(2.0 * q * q) * cross);
        break;
      }
      case NodeKind::kProduct: {
        // Var = prod(V + E^2) - prod E^2 via T_m = T_{m-1}(V_m + E_m^2) + V_m prod_{k<m} E_k^2.
        SignedLogReal e = SignedLogReal::from_log(0.0);
        SignedLogReal t;
        for (NodeId c : children) {
          const auto& ec = frame_.expectation[c.index];
          const auto& vc = frame_.variance[c.index];
          const auto e2 = square(e);
          t = t * (vc + square(ec)) + vc * e2;
          e *= ec;
        }
        frame_.expectation[i] = e;
        frame_.variance[i] = clamp_nonnegative(t);
        break;
      }
      default: {
        const double le = leaf_log_value(circuit_, id, evidence);
        frame_.expectation[i] = SignedLogReal::from_log(le);
        const double r = le == kNegInf ? 0.0 : leaf_rel_var(config_, id);
        frame_.variance[i] = SignedLogReal::from_double(r) * square(frame_.expectation[i]);
      }
    }
  }
  const auto& roots = circuit_.roots();
  for (std::size_t a = 0; a < roots.size(); ++a) {
    for (std::size_t b = a + 1; b < roots.size(); ++b) cov(roots[a], roots[b]);
  }
}

MomentFrame tdi_pass(const Circuit& circuit, const Evidence& evidence,
                     const DropoutConfig& config) {
  TdiEvaluator evaluator(circuit, config);
  return evaluator.run(evidence);
}

SignedLogReal sum_covariance(const Circuit& circuit, const MomentFrame& frame, NodeId sum_a,
                             NodeId sum_b) {
  if (circuit.kind(sum_a) != NodeKind::kSum || circuit.kind(sum_b) != NodeKind::kSum) {
    throw Error(ErrorKind::kStructure, "sum covariance needs two sum nodes");
  }
  if (sum_a == sum_b) return frame.variance[sum_a.index];
  const auto ca = circuit.children(sum_a);
  const auto cb = circuit.children(sum_b);
  const auto wa = circuit.log_weights(sum_a);
  const auto wb = circuit.log_weights(sum_b);
  SignedLogReal acc;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    for (std::size_t j = 0; j < cb.size(); ++j) {
      acc += SignedLogReal::from_log(wa[i] + wb[j]) * frame.covariance(ca[i], cb[j]);
    }
  }
  const double qa = keep_prob(circuit, sum_a, frame.q, frame.exclude_root_heads);
  const double qb = keep_prob(circuit, sum_b, frame.q, frame.exclude_root_heads);
  return acc * SignedLogReal::from_double(qa * qb);
}

SignedLogReal rat_product_covariance(const Circuit& circuit, const MomentFrame& frame,
                                     NodeId product_a, NodeId product_b) {
  if (circuit.kind(product_a) != NodeKind::kProduct ||
      circuit.kind(product_b) != NodeKind::kProduct) {
    throw Error(ErrorKind::kStructure, "product covariance needs two product nodes");
  }
  const auto ca = circuit.children(product_a);
  const auto cb = circuit.children(product_b);
  if (ca.size() != 2 || cb.size() != 2) {
    throw Error(ErrorKind::kStructure, "product covariance needs binary products");
  }
  if (circuit.scope(ca[0]) != circuit.scope(cb[0]) ||
      circuit.scope(ca[1]) != circuit.scope(cb[1])) {
    throw Error(ErrorKind::kStructure, "products do not share a partition");
  }
  const auto cov_l = frame.covariance(ca[0], cb[0]);
  const auto cov_r = frame.covariance(ca[1], cb[1]);
  const auto& e = frame.expectation;
  return cov_l * e[ca[1].index] * e[cb[1].index] + cov_r * e[ca[0].index] * e[cb[0].index] +
         cov_l * cov_r;
}

std::pair<SignedLogReal, SignedLogReal> cauchy_bounds(const MomentFrame& frame, NodeId a,
                                                      NodeId b) {
  const auto bound = sqrt(frame.variance[a.index] * frame.variance[b.index]);
  return {-bound, bound};
}

void write_moment_csv(std::ostream& out, const Circuit& circuit, const MomentFrame& frame) {
  static constexpr const char* kKinds[] = {"sum", "product", "gaussian", "categorical"};
  out << "node_id,kind,expectation,variance\n";
  for (std::size_t i = 0; i < circuit.size(); ++i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    out << i << ',' << kKinds[static_cast<int>(circuit.kind(id))] << ','
        << format_real(frame.expectation[i].to_double()) << ','
        << format_real(frame.variance[i].to_double()) << '\n';
  }
}

void write_covariance_csv(std::ostream& out, const MomentFrame& frame) {
  std::vector<std::pair<std::uint64_t, double>> rows;
  rows.reserve(frame.pair_cov.size());
  for (const auto& [key, value] : frame.pair_cov) rows.emplace_back(key, value.to_double());
  std::sort(rows.begin(), rows.end());
  out << "node_a,node_b,cov\n";
  for (const auto& [key, value] : rows) {
    out << (key >> 32) << ',' << (key & 0xffffffffu) << ',' << format_real(value) << '\n';
  }
}

}  // namespace tdi
