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

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tdi/circuit.hpp"
#include "tdi/dataset.hpp"
#include "tdi/mcd.hpp"
#include "tdi/moments.hpp"
#include "tdi/posterior.hpp"

namespace tdi {

enum class Method { kPlain, kTdi, kMcd };

std::string_view to_string(Method m);
/// Display tag: PC, PC+TDI or PC+MCD.
std::string_view method_tag(Method m);
Method parse_method(std::string_view text);

struct MethodConfig {
  Method method = Method::kPlain;
  DropoutConfig dropout;  // TDI
  TaylorMethod taylor = TaylorMethod::kSimple;
  McdConfig mcd;          // MCD; its p is used as the dropout probability
  std::size_t threads = 1;

  double p() const;
};

struct SampleUncertainty {
  std::vector<double> posterior;  // posterior mean per class
  std::vector<double> variance;   // posterior variance per class (0 for plain)
  double entropy = 0.0;
  double normalized_entropy = 0.0;
  double std_dev = 0.0;  // posterior std of the predicted class (0 for plain)
  std::size_t predicted = 0;
};

/// Per-row predictive distribution. Rows are evaluated in parallel and the
/// output order matches the dataset.
std::vector<SampleUncertainty> evaluate(const Circuit& circuit, const Dataset& data,
                                        const MethodConfig& config);

inline constexpr std::size_t kThresholdGrid = 256;

struct SweepResult {
  std::string ood_name;
  std::string method;
  double p = 0.0;
  bool normalized = false;
  std::vector<double> thresholds;
  std::vector<double> id_outlier_rate;
  std::vector<double> ood_outlier_rate;
  double auc = 0.0;
};

/// Rates of entropy >= t over an even grid on [0, h_max]; auc is the
/// trapezoidal mean of the OOD curve. Throws Error(kShape) for empty inputs.
SweepResult threshold_sweep(std::span<const double> id_entropy,
                            std::span<const double> ood_entropy, double h_max,
                            std::size_t grid = kThresholdGrid);

struct NamedDataset {
  std::string name;
  const Dataset* data = nullptr;
};

std::vector<SweepResult> ood_sweep(const Circuit& circuit, const Dataset& id_data,
                                   const std::vector<NamedDataset>& ood_sets,
                                   const MethodConfig& config, bool normalized = false);

struct SeverityRow {
  std::string kind;  // "rotation" or the corruption name
  double level = 0.0;  // angle or severity
  double mean_entropy = 0.0;
  double accuracy = 0.0;
  double mean_std = 0.0;
};

std::vector<SeverityRow> perturb_sweep(const Circuit& circuit, const Dataset& test,
                                       std::span<const double> angles, std::size_t width,
                                       std::size_t height, const MethodConfig& config);

/// Severity 0 evaluates the unmodified data.
std::vector<SeverityRow> corrupt_sweep(const Circuit& circuit, const Dataset& test,
                                       std::span<const Corruption> kinds,
                                       std::span<const int> severities,
                                       const MethodConfig& config, std::uint64_t seed);

struct Histogram {
  std::string name;
  double h_max = 0.0;
  std::vector<std::size_t> counts;
};

Histogram entropy_histogram(std::string name, std::span<const double> entropy, double h_max,
                            std::size_t bins = 50);
std::vector<Histogram> entropy_histograms(const Circuit& circuit,
                                          const std::vector<NamedDataset>& sets,
                                          const MethodConfig& config, std::size_t bins = 50);

/// Sum over bins of min(a_i / |a|, b_i / |b|).
double histogram_overlap(const Histogram& a, const Histogram& b);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

/// Accuracy of argmax predictions against the labels.
double accuracy(const std::vector<SampleUncertainty>& samples, const Dataset& data);
double mean_entropy(const std::vector<SampleUncertainty>& samples);

void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& sweeps);
void write_sweep_json(std::ostream& out, const std::vector<SweepResult>& sweeps);
void write_severity_csv(std::ostream& out, const std::vector<SeverityRow>& rows);
void write_severity_json(std::ostream& out, const std::vector<SeverityRow>& rows);
void write_histogram_csv(std::ostream& out, const std::vector<Histogram>& histograms);
void write_histogram_json(std::ostream& out, const std::vector<Histogram>& histograms);
void write_samples_csv(std::ostream& out, const std::vector<SampleUncertainty>& samples);

}  // namespace tdi
