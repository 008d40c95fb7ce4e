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

#include "tdi/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tdi/error.hpp"
#include "tdi/logmath.hpp"

namespace tdi {

std::string_view to_string(TaylorMethod m) {
  return m == TaylorMethod::kSimple ? "simple" : "extended";
}

TaylorMethod parse_taylor_method(std::string_view text) {
  if (text == "simple") return TaylorMethod::kSimple;
  if (text == "extended") return TaylorMethod::kExtended;
  throw Error(ErrorKind::kConfig, "unknown Taylor method \"" + std::string(text) + "\"");
}

double predictive_entropy(std::span<const double> probabilities) {
  if (std::none_of(probabilities.begin(), probabilities.end(), [](double m) { return m > 0.0; })) {
    throw Error(ErrorKind::kParameter, "predictive entropy of an all-zero vector");
  }
  double total = 0.0;
  for (double m : probabilities) total += std::clamp(m, kPosteriorFloor, 1.0);
  double h = 0.0;
  for (double m : probabilities) {
    const double r = std::clamp(m, kPosteriorFloor, 1.0) / total;
    h -= r * std::log(r);
  }
  return std::max(h, 0.0);
}

namespace {

double root_keep_prob(const MomentFrame& frame) {
  return frame.exclude_root_heads ? 1.0 : frame.q;
}

// One level of the sum-covariance expansion with distinct children treated
// as uncorrelated and a shared child contributing its variance.
SignedLogReal shallow_sum_covariance(const Circuit& circuit, const MomentFrame& frame,
                                     NodeId a, NodeId b) {
  const auto ca = circuit.children(a);
  const auto cb = circuit.children(b);
  const auto wa = circuit.log_weights(a);
  const auto wb = circuit.log_weights(b);
  SignedLogReal acc;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    for (std::size_t j = 0; j < cb.size(); ++j) {
      if (ca[i] == cb[j]) acc += SignedLogReal::from_log(wa[i] + wb[j]) * frame.variance_of(ca[i]);
    }
  }
  const double q = root_keep_prob(frame);
  return acc * SignedLogReal::from_double(q * q);
}

void require_classes(const Circuit& circuit) {
  if (circuit.num_classes() < 2) {
    throw Error(ErrorKind::kStructure, "posterior moments need at least two class roots");
  }
}

// Diagonal part of the root variance: sum_k w_k^2 Var[delta_k N_k].
SignedLogReal dropout_diagonal(const Circuit& circuit, const MomentFrame& frame, NodeId root) {
  if (circuit.kind(root) != NodeKind::kSum) return frame.variance_of(root);
  const double q = root_keep_prob(frame);
  const auto sq = SignedLogReal::from_double(q);
  const auto sp = SignedLogReal::from_double(1.0 - q);
  const auto children = circuit.children(root);
  const auto lw = circuit.log_weights(root);
  SignedLogReal acc;
  for (std::size_t k = 0; k < children.size(); ++k) {
    const auto e = frame.expectation_of(children[k]);
    acc += SignedLogReal::from_log(2.0 * lw[k]) *
           (frame.variance_of(children[k]) + sp * e * e);
  }
  return sq * acc;
}

}  // namespace

std::vector<SignedLogReal> root_covariance(const Circuit& circuit, const MomentFrame& frame) {
  const auto& roots = circuit.roots();
  const std::size_t c = roots.size();
  std::vector<SignedLogReal> cov(c * c);
  for (std::size_t i = 0; i < c; ++i) {
    cov[i * c + i] = frame.variance_of(roots[i]);
    for (std::size_t j = i + 1; j < c; ++j) {
      SignedLogReal v;
      if (frame.strategy == CovarianceStrategy::kRatExact) {
        v = frame.covariance(roots[i], roots[j]);
      } else if (circuit.kind(roots[i]) == NodeKind::kSum &&
                 circuit.kind(roots[j]) == NodeKind::kSum) {
        v = shallow_sum_covariance(circuit, frame, roots[i], roots[j]);
      }
      cov[i * c + j] = cov[j * c + i] = v;
    }
  }
  return cov;
}

PosteriorMoments posterior_from_frame(const Circuit& circuit, const MomentFrame& frame,
                                      TaylorMethod method) {
  require_classes(circuit);
  const auto& roots = circuit.roots();
  const auto& log_c = circuit.log_class_priors();
  const std::size_t n = roots.size();

  // Everything below is expressed relative to exp(shift) = max_i E[S_i] c_i;
  // the posterior moments are invariant to that common scale.
  double shift = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    shift = std::max(shift, frame.expectation_of(roots[i]).log_magnitude() + log_c[i]);
  }
  if (shift == kNegInf) {
    throw Error(ErrorKind::kUnderflow, "every class root has zero expectation");
  }
  const auto cov = root_covariance(circuit, frame);

  PosteriorMoments out;
  out.mean.assign(n, 0.0);
  out.variance.assign(n, 0.0);

  // a_i = c_i E[S_i] and sigma_ij = c_i c_j Cov[S_i, S_j], both scaled.
  std::vector<double> a(n), sigma(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = std::exp(frame.expectation_of(roots[i]).log_magnitude() + log_c[i] - shift);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& s = cov[i * n + j];
      sigma[i * n + j] =
          s.is_zero() ? 0.0
                      : s.sign() * std::exp(s.log_magnitude() + log_c[i] + log_c[j] - 2 * shift);
    }
  }
  double b = 0.0;
  for (double x : a) b += x;
  const double b2 = b * b, b3 = b2 * b;

  if (method == TaylorMethod::kSimple) {
    double var_b = 0.0;
    for (double s : sigma) var_b += s;
    for (std::size_t i = 0; i < n; ++i) {
      double cov_ab = 0.0;
      for (std::size_t j = 0; j < n; ++j) cov_ab += sigma[i * n + j];
      out.mean[i] = a[i] / b - cov_ab / b2 + a[i] * var_b / b3;
      out.variance[i] = std::max(
          0.0, sigma[i * n + i] / b2 - 2.0 * a[i] * cov_ab / b3 + a[i] * a[i] * var_b / (b2 * b2));
    }
  } else {
    // Second order expansion of f_k = T_k / sum_j T_j with T_i = c_i S_i.
    // Products of centred roots are resolved with Var[T_i T_j] ~ D_i D_j.
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto di = dropout_diagonal(circuit, frame, roots[i]);
      d[i] = di.is_zero() ? 0.0 : std::exp(di.log_magnitude() + 2 * (log_c[i] - shift));
    }
    std::vector<double> g(n), h(n * n);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = i == k ? (b - a[k]) / b2 : -a[k] / b2;
        for (std::size_t j = 0; j < n; ++j) {
          double hij;
          if (i == k && j == k) {
            hij = -2.0 * (b - a[k]) / b3;
          } else if (i == k || j == k) {
            hij = (2.0 * a[k] - b) / b3;
          } else {
            hij = 2.0 * a[k] / b3;
          }
          h[i * n + j] = hij;
        }
      }
      double mean = a[k] / b, var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          mean += 0.5 * h[i * n + j] * sigma[i * n + j];
          var += g[i] * g[j] * sigma[i * n + j];
        }
        const double half = 0.5 * h[i * n + i];
        var += half * half * (d[i] * d[i] - 4.0 * a[i] * a[i] * sigma[i * n + i]);
        for (std::size_t j = i + 1; j < n; ++j) {
          const double hij = h[i * n + j];
          var += hij * hij *
                 (d[i] * d[j] - a[i] * a[i] * sigma[j * n + j] - a[j] * a[j] * sigma[i * n + i]);
        }
      }
      out.mean[k] = mean;
      out.variance[k] = std::max(0.0, var);
    }
  }

  out.std_dev.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.std_dev[i] = std::sqrt(out.variance[i]);
  out.entropy = predictive_entropy(out.mean);
  out.normalized_entropy = out.entropy / std::log(static_cast<double>(n));
  out.predicted = static_cast<std::size_t>(
      std::max_element(out.mean.begin(), out.mean.end()) - out.mean.begin());
  return out;
}

PosteriorMoments posterior_moments(const Circuit& circuit, const Evidence& evidence,
                                   const DropoutConfig& config, TaylorMethod method) {
  require_classes(circuit);
  return posterior_from_frame(circuit, tdi_pass(circuit, evidence, config), method);
}

}  // namespace tdi
