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

#include "tdi/mcd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <string>

#include "tdi/circuit_io.hpp"
#include "tdi/error.hpp"
#include "tdi/logmath.hpp"
#include "tdi/parallel.hpp"

namespace tdi {
namespace {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

bool mcd_keep(std::uint64_t seed, std::uint64_t pass, std::uint64_t edge, double q) {
  std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL * (pass + 1));
  h = mix64(h ^ (0xd1b54a32d192ed03ULL * (edge + 1)));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < q;
}

McdResult mcd_infer(const Circuit& circuit, const Evidence& evidence, const McdConfig& config) {
  if (!(config.p >= 0.0 && config.p < 1.0)) {
    throw Error(ErrorKind::kConfig, "dropout probability must lie in [0, 1), got " +
                                        format_real(config.p));
  }
  if (config.num_passes == 0) throw Error(ErrorKind::kConfig, "MCD needs at least one pass");
  if (evidence.size() != circuit.num_variables()) {
    throw Error(ErrorKind::kShape, "evidence length does not match the circuit");
  }
  const std::size_t n = circuit.size();
  const std::size_t c = circuit.num_classes();
  const std::size_t passes = config.num_passes;
  const double q = 1.0 - config.p;

  std::vector<double> leaf(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    if (is_leaf(circuit.kind(id))) leaf[i] = leaf_log_value(circuit, id, evidence);
  }

  std::vector<double> samples(passes * c);
  parallel_blocks(passes, config.threads, [&](std::size_t begin, std::size_t end) {
    const auto flat = circuit.flat_children();
    const auto weights = circuit.flat_log_weights();
    std::vector<double> values(n);
    for (std::size_t pass = begin; pass < end; ++pass) {
      for (std::size_t i = 0; i < n; ++i) {
        const NodeId id{static_cast<std::uint32_t>(i)};
        const std::size_t b = circuit.edge_offset(id);
        const std::size_t e_end = circuit.edge_offset(NodeId{id.index + 1});
        switch (circuit.kind(id)) {
          case NodeKind::kSum: {
            const bool droppable = !(config.exclude_root_heads && circuit.is_root(id));
            double hi = kNegInf;
            for (std::size_t e = b; e < e_end; ++e) {
              if (droppable && !mcd_keep(config.rng_seed, pass, e, q)) continue;
              hi = std::max(hi, weights[e] + values[flat[e].index]);
            }
            if (hi == kNegInf) {
              values[i] = kNegInf;
              break;
            }
            double acc = 0.0;
            for (std::size_t e = b; e < e_end; ++e) {
              if (droppable && !mcd_keep(config.rng_seed, pass, e, q)) continue;
              acc += std::exp(weights[e] + values[flat[e].index] - hi);
            }
            values[i] = hi + std::log(acc);
            break;
          }
          case NodeKind::kProduct: {
            double acc = 0.0;
            for (std::size_t e = b; e < e_end; ++e) acc += values[flat[e].index];
            values[i] = acc;
            break;
          }
          default:
            values[i] = leaf[i];
        }
      }
      for (std::size_t k = 0; k < c; ++k) samples[pass * c + k] = values[circuit.roots()[k].index];
    }
  });

  McdResult out;
  out.root_mean.resize(c);
  out.root_variance.resize(c);
  const double inv_l = 1.0 / static_cast<double>(passes);
  for (std::size_t k = 0; k < c; ++k) {
    double shift = kNegInf;
    for (std::size_t l = 0; l < passes; ++l) shift = std::max(shift, samples[l * c + k]);
    if (shift == kNegInf) continue;
    double mean = 0.0;
    for (std::size_t l = 0; l < passes; ++l) mean += std::exp(samples[l * c + k] - shift);
    mean *= inv_l;
    double var = 0.0;
    for (std::size_t l = 0; l < passes; ++l) {
      const double d = std::exp(samples[l * c + k] - shift) - mean;
      var += d * d;
    }
    var *= inv_l;
    out.root_mean[k] = SignedLogReal::from_log(shift + std::log(mean));
    out.root_variance[k] =
        var > 0.0 ? SignedLogReal::from_log(2.0 * shift + std::log(var)) : SignedLogReal{};
  }

  const auto& priors = circuit.log_class_priors();
  std::vector<double> post(passes * c);
  std::vector<char> valid(passes, 0);
  std::vector<double> joint(c);
  std::size_t num_valid = 0;
  for (std::size_t l = 0; l < passes; ++l) {
    for (std::size_t k = 0; k < c; ++k) joint[k] = samples[l * c + k] + priors[k];
    const double norm = log_sum_exp(joint);
    if (norm == kNegInf) {
      ++out.degenerate_passes;
      continue;
    }
    valid[l] = 1;
    ++num_valid;
    for (std::size_t k = 0; k < c; ++k) post[l * c + k] = std::exp(joint[k] - norm);
  }
  if (num_valid == 0) {
    throw Error(ErrorKind::kDegenerate, "every dropout pass zeroed all class roots");
  }
  // Accumulate offsets from the first valid pass so that identical passes
  // give that pass back exactly, with zero variance.
  const std::size_t first = static_cast<std::size_t>(std::find(valid.begin(), valid.end(), 1) -
                                                     valid.begin());
  std::vector<double> offset(c, 0.0);
  for (std::size_t l = 0; l < passes; ++l) {
    if (!valid[l]) continue;
    for (std::size_t k = 0; k < c; ++k) offset[k] += post[l * c + k] - post[first * c + k];
  }
  out.posterior_mean.assign(c, 0.0);
  out.posterior_variance.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    offset[k] /= static_cast<double>(num_valid);
    out.posterior_mean[k] = post[first * c + k] + offset[k];
  }
  for (std::size_t l = 0; l < passes; ++l) {
    if (!valid[l]) continue;
    for (std::size_t k = 0; k < c; ++k) {
      const double d = post[l * c + k] - post[first * c + k] - offset[k];
      out.posterior_variance[k] += d * d;
    }
  }
  for (double& v : out.posterior_variance) v /= static_cast<double>(num_valid);
  if (config.keep_samples) out.samples = std::move(samples);
  return out;
}

double ComparisonReport::mean_abs_mean_gap() const {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : rows) acc += std::abs(r.tdi_mean - r.mcd_mean);
  return acc / static_cast<double>(rows.size());
}

ComparisonReport mcd_vs_tdi(const Circuit& circuit, const std::vector<Evidence>& rows,
                            const DropoutConfig& tdi_config, TaylorMethod method,
                            const McdConfig& mcd_config) {
  using Clock = std::chrono::steady_clock;
  ComparisonReport report;
  report.mcd_passes = mcd_config.num_passes;
  std::vector<PosteriorMoments> tdi;
  tdi.reserve(rows.size());
  {
    TdiEvaluator evaluator(circuit, tdi_config);
    const auto start = Clock::now();
    for (const auto& row : rows) tdi.push_back(posterior_from_frame(circuit, evaluator.run(row), method));
    report.tdi_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  }
  std::vector<McdResult> mcd;
  mcd.reserve(rows.size());
  {
    const auto start = Clock::now();
    for (const auto& row : rows) mcd.push_back(mcd_infer(circuit, row, mcd_config));
    report.mcd_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  }
  for (std::size_t s = 0; s < rows.size(); ++s) {
    for (std::size_t k = 0; k < circuit.num_classes(); ++k) {
      report.rows.push_back({s, k, tdi[s].mean[k], tdi[s].variance[k], mcd[s].posterior_mean[k],
                             mcd[s].posterior_variance[k]});
    }
  }
  return report;
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& report) {
  out << "sample,class,tdi_mean,tdi_variance,mcd_mean,mcd_variance\n";
  for (const auto& r : report.rows) {
    out << r.sample << ',' << r.cls << ',' << format_real(r.tdi_mean) << ','
        << format_real(r.tdi_variance) << ',' << format_real(r.mcd_mean) << ','
        << format_real(r.mcd_variance) << '\n';
  }
  out << "# timing tdi_passes=1 tdi_seconds=" << format_real(report.tdi_seconds)
      << " mcd_passes=" << report.mcd_passes
      << " mcd_seconds=" << format_real(report.mcd_seconds) << '\n';
}

}  // namespace tdi
