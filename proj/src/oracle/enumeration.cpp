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

#include "tdi/oracle/enumeration.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "tdi/error.hpp"
#include "tdi/logmath.hpp"

namespace tdi::oracle {
namespace {

class MaskEvaluator {
 public:
  MaskEvaluator(const Circuit& circuit, const Evidence& evidence, double p,
                bool exclude_root_heads)
      : circuit_(circuit), p_(p), edge_bit_(circuit.num_edges(), -1), log_values_(circuit.size()) {
    if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorKind::kConfig, "p must lie in [0, 1)");
    for (std::size_t i = 0; i < circuit.size(); ++i) {
      const NodeId id{static_cast<std::uint32_t>(i)};
      if (circuit.kind(id) != NodeKind::kSum) continue;
      if (exclude_root_heads && circuit.is_root(id)) continue;
      for (std::size_t e = circuit.edge_offset(id); e < circuit.edge_offset(NodeId{id.index + 1});
           ++e) {
        edge_bit_[e] = static_cast<int>(num_bits_++);
      }
    }
    if (num_bits_ > kMaxEnumeratedEdges) {
      throw Error(ErrorKind::kConfig, std::to_string(num_bits_) +
                                          " droppable edges exceed the enumeration limit");
    }
    leaf_values_.resize(circuit.size());
    for (std::size_t i = 0; i < circuit.size(); ++i) {
      const NodeId id{static_cast<std::uint32_t>(i)};
      if (is_leaf(circuit.kind(id))) leaf_values_[i] = leaf_log_value(circuit, id, evidence);
    }
  }

  std::uint64_t num_masks() const { return std::uint64_t{1} << num_bits_; }

  double mask_probability(std::uint64_t mask) const {
    const int kept = std::popcount(mask);
    return std::pow(1.0 - p_, kept) * std::pow(p_, static_cast<int>(num_bits_) - kept);
  }

  const std::vector<double>& evaluate(std::uint64_t mask) {
    const auto flat = circuit_.flat_children();
    const auto weights = circuit_.flat_log_weights();
    for (std::size_t i = 0; i < circuit_.size(); ++i) {
      const NodeId id{static_cast<std::uint32_t>(i)};
      const std::size_t begin = circuit_.edge_offset(id);
      const std::size_t end = circuit_.edge_offset(NodeId{id.index + 1});
      switch (circuit_.kind(id)) {
        case NodeKind::kSum: {
          double acc = kNegInf;
          for (std::size_t e = begin; e < end; ++e) {
            if (edge_bit_[e] >= 0 && !((mask >> edge_bit_[e]) & 1)) continue;
            acc = log_add_exp(acc, weights[e] + log_values_[flat[e].index]);
          }
          log_values_[i] = acc;
          break;
        }
        case NodeKind::kProduct: {
          double acc = 0.0;
          for (std::size_t e = begin; e < end; ++e) acc += log_values_[flat[e].index];
          log_values_[i] = acc;
          break;
        }
        default:
          log_values_[i] = leaf_values_[i];
      }
    }
    return log_values_;
  }

 private:
  const Circuit& circuit_;
  double p_;
  std::vector<int> edge_bit_;
  std::size_t num_bits_ = 0;
  std::vector<double> leaf_values_;
  std::vector<double> log_values_;
};

}  // namespace

EnumeratedMoments enumerate_moments(const Circuit& circuit, const Evidence& evidence, double p,
                                    bool with_covariance, bool exclude_root_heads) {
  MaskEvaluator eval(circuit, evidence, p, exclude_root_heads);
  const std::size_t n = circuit.size();
  EnumeratedMoments out;
  out.num_masks = eval.num_masks();
  out.expectation.assign(n, 0.0);
  out.variance.assign(n, 0.0);
  for (std::uint64_t m = 0; m < eval.num_masks(); ++m) {
    const double pm = eval.mask_probability(m);
    if (pm == 0.0) continue;
    const auto& lv = eval.evaluate(m);
    for (std::size_t i = 0; i < n; ++i) out.expectation[i] += pm * std::exp(lv[i]);
  }
  if (with_covariance) out.covariance.assign(n * n, 0.0);
  std::vector<double> centered(n);
  for (std::uint64_t m = 0; m < eval.num_masks(); ++m) {
    const double pm = eval.mask_probability(m);
    if (pm == 0.0) continue;
    const auto& lv = eval.evaluate(m);
    for (std::size_t i = 0; i < n; ++i) {
      centered[i] = std::exp(lv[i]) - out.expectation[i];
      out.variance[i] += pm * centered[i] * centered[i];
    }
    if (!with_covariance) continue;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) out.covariance[i * n + j] += pm * (centered[i] * centered[j]);
    }
  }
  return out;
}

EnumeratedPosterior enumerate_posterior(const Circuit& circuit, const Evidence& evidence,
                                        double p, bool exclude_root_heads) {
  MaskEvaluator eval(circuit, evidence, p, exclude_root_heads);
  const auto& roots = circuit.roots();
  const auto& priors = circuit.log_class_priors();
  const std::size_t c = roots.size();
  EnumeratedPosterior out;
  out.mean.assign(c, 0.0);
  out.variance.assign(c, 0.0);

  std::vector<double> joint(c);
  auto posterior = [&](std::uint64_t m) -> bool {
    const auto& lv = eval.evaluate(m);
    for (std::size_t i = 0; i < c; ++i) joint[i] = lv[roots[i].index] + priors[i];
    const double norm = log_sum_exp(joint);
    if (norm == kNegInf) return false;
    for (double& j : joint) j = std::exp(j - norm);
    return true;
  };

  double kept_mass = 0.0;
  for (std::uint64_t m = 0; m < eval.num_masks(); ++m) {
    const double pm = eval.mask_probability(m);
    if (pm == 0.0) continue;
    if (!posterior(m)) {
      out.excluded_mass += pm;
      continue;
    }
    kept_mass += pm;
    for (std::size_t i = 0; i < c; ++i) out.mean[i] += pm * joint[i];
  }
  if (kept_mass == 0.0) {
    throw Error(ErrorKind::kDegenerate, "every mask leaves all class roots at zero");
  }
  for (double& x : out.mean) x /= kept_mass;
  for (std::uint64_t m = 0; m < eval.num_masks(); ++m) {
    const double pm = eval.mask_probability(m);
    if (pm == 0.0 || !posterior(m)) continue;
    for (std::size_t i = 0; i < c; ++i) {
      const double d = joint[i] - out.mean[i];
      out.variance[i] += pm * d * d;
    }
  }
  for (double& x : out.variance) x /= kept_mass;
  return out;
}

}  // namespace tdi::oracle
