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
#include <vector>

#include "tdi/circuit.hpp"
#include "tdi/moments.hpp"
#include "tdi/posterior.hpp"
#include "tdi/signed_log.hpp"

namespace tdi {

/// Monte Carlo dropout: L stochastic forward passes with independent
/// Bernoulli masks on every sum edge.
struct McdConfig {
  double p = 0.0;
  std::size_t num_passes = 100;
  std::uint64_t rng_seed = 0;
  bool exclude_root_heads = false;
  bool keep_samples = false;
  /// Worker threads for the passes; 0 uses the hardware concurrency.
  std::size_t threads = 1;
};

struct McdResult {
  std::vector<SignedLogReal> root_mean;      // sample mean of S_i per class root
  std::vector<SignedLogReal> root_variance;  // population variance (divisor L)
  std::vector<double> posterior_mean;
  std::vector<double> posterior_variance;
  std::size_t degenerate_passes = 0;  // passes with every class root at zero
  /// Row-major L x C log root values when keep_samples is set.
  std::vector<double> samples;

  double entropy() const { return predictive_entropy(posterior_mean); }
};

/// Keep decision for one sum edge in one pass. Counter-based, so the result
/// depends only on (seed, pass, edge) and not on evaluation order.
bool mcd_keep(std::uint64_t seed, std::uint64_t pass, std::uint64_t edge, double q);

/// Throws Error(kConfig) for an invalid p or zero passes, Error(kDegenerate)
/// when every pass zeroes all class roots.
McdResult mcd_infer(const Circuit& circuit, const Evidence& evidence, const McdConfig& config);

struct ComparisonRow {
  std::size_t sample = 0;
  std::size_t cls = 0;
  double tdi_mean = 0.0;
  double tdi_variance = 0.0;
  double mcd_mean = 0.0;
  double mcd_variance = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  double tdi_seconds = 0.0;
  double mcd_seconds = 0.0;
  std::size_t mcd_passes = 0;

  double mean_abs_mean_gap() const;
};

/// TDI and MCD posterior moments side by side for every row and class.
ComparisonReport mcd_vs_tdi(const Circuit& circuit, const std::vector<Evidence>& rows,
                            const DropoutConfig& tdi_config, TaylorMethod method,
                            const McdConfig& mcd_config);

void write_comparison_csv(std::ostream& out, const ComparisonReport& report);

}  // namespace tdi
