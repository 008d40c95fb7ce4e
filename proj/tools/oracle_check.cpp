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

#include "oracle_check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "tdi/circuit_io.hpp"
#include "tdi/moments.hpp"
#include "tdi/oracle/enumeration.hpp"
#include "tdi/structure.hpp"

namespace tdi::tools {

namespace {

double rel(double actual, double expected, double floor) {
  return std::abs(actual - expected) / std::max(std::abs(expected), floor);
}

}  // namespace

double OracleSummary::max_rel() const { return std::max(max_rel_expectation, max_rel_variance); }

OracleSummary run_tree_oracle(const OracleSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(settings.seed);
  OracleSummary out;
  RandomCircuitConfig cfg;
  cfg.max_sum_edges = settings.max_edges;
  for (std::size_t t = 0; t < settings.trials; ++t) {
    cfg.num_variables = 1 + t % 4;
    cfg.num_classes = 1 + t % 3;
    const Circuit c = random_tree(cfg, rng);
    const Evidence e = random_evidence(c, rng, 0.2);
    for (double p : settings.ps) {
      const auto frame = tdi_pass(c, e, DropoutConfig(p));
      const auto exact = oracle::enumerate_moments(c, e, p);
      for (std::size_t k = 0; k < c.num_classes(); ++k) {
        const NodeId r = c.roots()[k];
        OracleRow row{t,
                      p,
                      k,
                      frame.expectation_of(r).to_double(),
                      exact.expectation[r.index],
                      frame.variance_of(r).to_double(),
                      exact.variance[r.index]};
        // A root without dropout below it has an enumerated variance made of
        // rounding only, so its variance error is taken relative to E^2.
        const double e2 = row.exact_expectation * row.exact_expectation;
        out.max_rel_expectation = std::max(
            out.max_rel_expectation, rel(row.tdi_expectation, row.exact_expectation, 1e-300));
        out.max_rel_variance = std::max(
            out.max_rel_variance, rel(row.tdi_variance, row.exact_variance, 1e-15 * e2 + 1e-300));
        out.rows.push_back(row);
      }
    }
    ++out.circuits;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_oracle_csv(std::ostream& out, const OracleSummary& summary) {
  out << "trial,p,root,tdi_expectation,exact_expectation,tdi_variance,exact_variance\n";
  for (const auto& r : summary.rows) {
    out << r.trial << ',' << format_real(r.p) << ',' << r.root << ','
        << format_real(r.tdi_expectation) << ',' << format_real(r.exact_expectation) << ','
        << format_real(r.tdi_variance) << ',' << format_real(r.exact_variance) << '\n';
  }
}

}  // namespace tdi::tools
