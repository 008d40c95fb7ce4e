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

#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "tdi/error.hpp"
#include "tdi/mcd.hpp"
#include "tdi/oracle/enumeration.hpp"
#include "tdi/structure.hpp"

using namespace tdi;
using tdi::testing::observe;
using tdi::testing::rel_err;

namespace {

McdConfig mcd_config(double p, std::size_t passes, std::uint64_t seed = 1) {
  McdConfig cfg;
  cfg.p = p;
  cfg.num_passes = passes;
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("no dropout repeats the forward value") {
  std::mt19937_64 rng(1);
  RandomCircuitConfig rc;
  rc.num_classes = 2;
  const Circuit c = random_dag(rc, rng);
  const Evidence e = random_evidence(c, rng);
  auto cfg = mcd_config(0.0, 50);
  cfg.keep_samples = true;
  const auto r = mcd_infer(c, e, cfg);
  const auto ll = log_likelihood(c, e);
  for (std::size_t l = 0; l < 50; ++l) {
    for (std::size_t k = 0; k < 2; ++k) CHECK(r.samples[l * 2 + k] == ll[k]);
  }
  for (const auto& v : r.root_variance) CHECK(v.is_zero());
  for (double v : r.posterior_variance) CHECK(v == 0.0);
}

TEST_CASE("two-leaf sum converges to its closed-form moments") {
  const auto r = mcd_infer(tdi::testing::two_leaf_sum(), observe({0.0}), mcd_config(0.2, 200000, 7));
  // Binomial standard errors: about 0.0003 on the mean and 0.0001 on the variance.
  CHECK(rel_err(r.root_mean[0].to_double(), 0.32) < 0.01);
  CHECK(rel_err(r.root_variance[0].to_double(), 0.016) < 0.03);
}

TEST_CASE("fixed seed is bit-identical and independent of threads") {
  RatConfig rat;
  rat.num_sums = 3;
  rat.num_input_dists = 2;
  rat.depth = 2;
  rat.num_classes = 3;
  rat.num_variables = 5;
  const Circuit c = build_rat(rat);
  const Evidence e = Evidence::marginalized(5);
  auto cfg = mcd_config(0.3, 500, 99);
  cfg.keep_samples = true;
  const auto a = mcd_infer(c, e, cfg);
  const auto b = mcd_infer(c, e, cfg);
  cfg.threads = 4;
  const auto d = mcd_infer(c, e, cfg);
  CHECK(a.samples == b.samples);
  CHECK(a.samples == d.samples);
  CHECK(a.posterior_mean == d.posterior_mean);
  CHECK(a.posterior_variance == d.posterior_variance);
  CHECK(a.root_variance == d.root_variance);
}

TEST_CASE("keep masks are independent across passes and edges") {
  // 2x2 contingency of adjacent edges and of consecutive passes, chi-square
  // with one degree of freedom at alpha = 0.01.
  const double q = 0.7;
  const std::size_t passes = 20000;
  auto chi2 = [](const double n[2][2]) {
    const double total = n[0][0] + n[0][1] + n[1][0] + n[1][1];
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double expect = (n[i][0] + n[i][1]) * (n[0][j] + n[1][j]) / total;
        s += (n[i][j] - expect) * (n[i][j] - expect) / expect;
      }
    }
    return s;
  };
  for (std::uint64_t edge = 0; edge < 5; ++edge) {
    double across_edges[2][2] = {}, across_passes[2][2] = {};
    std::size_t kept = 0;
    for (std::size_t l = 0; l < passes; ++l) {
      const bool a = mcd_keep(3, l, edge, q);
      across_edges[a][mcd_keep(3, l, edge + 1, q)] += 1;
      across_passes[a][mcd_keep(3, l + 1, edge, q)] += 1;
      kept += a;
    }
    CHECK(chi2(across_edges) < 6.635);
    CHECK(chi2(across_passes) < 6.635);
    const double se = std::sqrt(q * (1 - q) / passes);
    CHECK(std::abs(double(kept) / passes - q) < 4 * se);
  }
}

TEST_CASE("MCD posterior converges to the enumerated posterior") {
  std::mt19937_64 rng(23);
  RandomCircuitConfig rc;
  rc.num_classes = 2;
  rc.max_sum_edges = 12;
  const Circuit c = random_tree(rc, rng);
  for (int i = 0; i < 3; ++i) {
    const Evidence e = random_evidence(c, rng);
    const auto exact = oracle::enumerate_posterior(c, e, 0.1);
    const auto r = mcd_infer(c, e, mcd_config(0.1, 100000, 5 + i));
    for (std::size_t k = 0; k < 2; ++k) {
      // Five standard errors of a [0, 1] valued sample mean.
      CHECK(std::abs(r.posterior_mean[k] - exact.mean[k]) <
            5.0 * std::sqrt(exact.variance[k] / 100000.0) + 1e-12);
      CHECK(rel_err(r.posterior_variance[k], exact.variance[k]) < 0.05);
    }
  }
}

TEST_CASE("comparison report counts passes and writes timing") {
  std::mt19937_64 rng(4);
  RandomCircuitConfig rc;
  rc.num_classes = 2;
  const Circuit c = random_tree(rc, rng);
  const auto report = mcd_vs_tdi(c, {random_evidence(c, rng)}, DropoutConfig(0.1),
                                 TaylorMethod::kSimple, mcd_config(0.1, 100));
  CHECK(report.mcd_passes == 100);
  std::ostringstream out;
  write_comparison_csv(out, report);
  CHECK(out.str().find("tdi_passes=1") != std::string::npos);
  CHECK(out.str().find("mcd_passes=100") != std::string::npos);
}

TEST_CASE("no dropout gives zero gaps") {
  std::mt19937_64 rng(6);
  RandomCircuitConfig rc;
  rc.num_classes = 3;
  const Circuit c = random_dag(rc, rng);
  std::vector<Evidence> rows;
  for (int i = 0; i < 5; ++i) rows.push_back(random_evidence(c, rng));
  const auto report =
      mcd_vs_tdi(c, rows, DropoutConfig(0.0), TaylorMethod::kSimple, mcd_config(0.0, 10));
  for (const auto& r : report.rows) {
    // Both sides normalize the same likelihoods along different routes.
    CHECK(std::abs(r.tdi_mean - r.mcd_mean) < 1e-12);
    CHECK(r.tdi_variance == 0.0);
    CHECK(r.mcd_variance == 0.0);
  }
}

TEST_CASE("all passes degenerate") {
  const Circuit c = tdi::testing::two_leaf_sum();
  try {
    mcd_infer(c, observe({0.0}), mcd_config(0.999999, 5));
    FAIL("expected a degenerate error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerate);
  }
}

TEST_CASE("invalid settings") {
  const Circuit c = tdi::testing::two_leaf_sum();
  CHECK_THROWS_AS(mcd_infer(c, observe({0.0}), mcd_config(1.0, 5)), Error);
  CHECK_THROWS_AS(mcd_infer(c, observe({0.0}), mcd_config(0.1, 0)), Error);
  CHECK_THROWS_AS(mcd_infer(c, observe({0.0, 1.0}), mcd_config(0.1, 5)), Error);
}
