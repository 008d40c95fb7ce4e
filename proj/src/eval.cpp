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

#include "tdi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tdi/circuit_io.hpp"
#include "tdi/error.hpp"
#include "tdi/parallel.hpp"

namespace tdi {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kPlain: return "plain";
    case Method::kTdi: return "tdi";
    case Method::kMcd: return "mcd";
  }
  return "unknown";
}

std::string_view method_tag(Method m) {
  switch (m) {
    case Method::kPlain: return "PC";
    case Method::kTdi: return "PC+TDI";
    case Method::kMcd: return "PC+MCD";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  for (auto m : {Method::kPlain, Method::kTdi, Method::kMcd}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorKind::kConfig, "unknown method \"" + std::string(text) + "\"");
}

double MethodConfig::p() const {
  switch (method) {
    case Method::kPlain: return 0.0;
    case Method::kTdi: return dropout.p();
    case Method::kMcd: return mcd.p;
  }
  return 0.0;
}

std::vector<SampleUncertainty> evaluate(const Circuit& circuit, const Dataset& data,
                                        const MethodConfig& config) {
  data.check();
  const std::size_t rows = data.rows();
  const std::size_t classes = circuit.num_classes();
  const double log_c = std::log(static_cast<double>(classes));
  std::vector<SampleUncertainty> out(rows);
  parallel_blocks(rows, config.threads, [&](std::size_t begin, std::size_t end) {
    std::optional<TdiEvaluator> tdi;
    if (config.method == Method::kTdi) tdi.emplace(circuit, config.dropout);
    std::vector<double> values(circuit.size()), lls(classes);
    for (std::size_t i = begin; i < end; ++i) {
      const Evidence ev = data.evidence(i);
      SampleUncertainty& s = out[i];
      switch (config.method) {
        case Method::kPlain: {
          forward_log_values(circuit, ev, values);
          for (std::size_t k = 0; k < classes; ++k) lls[k] = values[circuit.roots()[k].index];
          const auto lp = log_posterior(circuit, lls);
          s.posterior.resize(classes);
          for (std::size_t k = 0; k < classes; ++k) s.posterior[k] = std::exp(lp[k]);
          s.variance.assign(classes, 0.0);
          break;
        }
        case Method::kTdi: {
          auto pm = posterior_from_frame(circuit, tdi->run(ev), config.taylor);
          s.posterior = std::move(pm.mean);
          s.variance = std::move(pm.variance);
          break;
        }
        case Method::kMcd: {
          McdConfig mc = config.mcd;
          mc.rng_seed = config.mcd.rng_seed + i;
          mc.threads = 1;
          auto r = mcd_infer(circuit, ev, mc);
          s.posterior = std::move(r.posterior_mean);
          s.variance = std::move(r.posterior_variance);
          break;
        }
      }
      s.predicted = static_cast<std::size_t>(
          std::max_element(s.posterior.begin(), s.posterior.end()) - s.posterior.begin());
      s.entropy = predictive_entropy(s.posterior);
      s.normalized_entropy = classes > 1 ? s.entropy / log_c : 0.0;
      s.std_dev = std::sqrt(std::max(0.0, s.variance[s.predicted]));
    }
  });
  return out;
}

SweepResult threshold_sweep(std::span<const double> id_entropy,
                            std::span<const double> ood_entropy, double h_max,
                            std::size_t grid) {
  if (id_entropy.empty() || ood_entropy.empty()) {
    throw Error(ErrorKind::kShape, "threshold sweep needs non-empty ID and OOD sets");
  }
  if (grid < 2) throw Error(ErrorKind::kConfig, "threshold grid needs at least two points");
  SweepResult r;
  auto rate = [](std::span<const double> h, double t) {
    std::size_t n = 0;
    for (double x : h) n += x >= t ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(h.size());
  };
  for (std::size_t k = 0; k < grid; ++k) {
    const double t = h_max * static_cast<double>(k) / static_cast<double>(grid - 1);
    r.thresholds.push_back(t);
    r.id_outlier_rate.push_back(rate(id_entropy, t));
    r.ood_outlier_rate.push_back(rate(ood_entropy, t));
  }
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < grid; ++k) {
    area += 0.5 * (r.ood_outlier_rate[k] + r.ood_outlier_rate[k + 1]);
  }
  r.auc = area / static_cast<double>(grid - 1);
  return r;
}

namespace {

std::vector<double> entropies(const std::vector<SampleUncertainty>& s, bool normalized) {
  std::vector<double> h;
  h.reserve(s.size());
  for (const auto& x : s) h.push_back(normalized ? x.normalized_entropy : x.entropy);
  return h;
}

double h_max_for(const Circuit& circuit, bool normalized) {
  return normalized ? 1.0 : std::log(static_cast<double>(circuit.num_classes()));
}

double mean_std(const std::vector<SampleUncertainty>& samples) {
  double acc = 0.0;
  for (const auto& s : samples) acc += s.std_dev;
  return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
}

SeverityRow summarize(std::string kind, double level, const std::vector<SampleUncertainty>& s,
                      const Dataset& data) {
  return {std::move(kind), level, mean_entropy(s), data.labels ? accuracy(s, data) : 0.0,
          mean_std(s)};
}

}  // namespace

std::vector<SweepResult> ood_sweep(const Circuit& circuit, const Dataset& id_data,
                                   const std::vector<NamedDataset>& ood_sets,
                                   const MethodConfig& config, bool normalized) {
  if (id_data.rows() == 0) throw Error(ErrorKind::kShape, "empty ID set");
  const auto id_h = entropies(evaluate(circuit, id_data, config), normalized);
  std::vector<SweepResult> out;
  for (const auto& set : ood_sets) {
    if (!set.data || set.data->rows() == 0) {
      throw Error(ErrorKind::kShape, "empty OOD set \"" + set.name + "\"");
    }
    const auto ood_h = entropies(evaluate(circuit, *set.data, config), normalized);
    SweepResult r = threshold_sweep(id_h, ood_h, h_max_for(circuit, normalized));
    r.ood_name = set.name;
    r.method = std::string(method_tag(config.method));
    r.p = config.p();
    r.normalized = normalized;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SeverityRow> perturb_sweep(const Circuit& circuit, const Dataset& test,
                                       std::span<const double> angles, std::size_t width,
                                       std::size_t height, const MethodConfig& config) {
  std::vector<SeverityRow> rows;
  for (double angle : angles) {
    const Dataset rotated = rotate(test, angle, width, height);
    rows.push_back(summarize("rotation", angle, evaluate(circuit, rotated, config), rotated));
  }
  return rows;
}

std::vector<SeverityRow> corrupt_sweep(const Circuit& circuit, const Dataset& test,
                                       std::span<const Corruption> kinds,
                                       std::span<const int> severities,
                                       const MethodConfig& config, std::uint64_t seed) {
  std::vector<SeverityRow> rows;
  for (Corruption kind : kinds) {
    for (int severity : severities) {
      const Dataset data = severity == 0 ? test : corrupt(test, kind, severity, seed);
      rows.push_back(summarize(std::string(to_string(kind)), severity,
                               evaluate(circuit, data, config), data));
    }
  }
  return rows;
}

Histogram entropy_histogram(std::string name, std::span<const double> entropy, double h_max,
                            std::size_t bins) {
  if (bins == 0) throw Error(ErrorKind::kConfig, "histogram needs at least one bin");
  Histogram h{std::move(name), h_max, std::vector<std::size_t>(bins, 0)};
  for (double x : entropy) {
    auto b = static_cast<std::ptrdiff_t>(std::floor(x / h_max * static_cast<double>(bins)));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

std::vector<Histogram> entropy_histograms(const Circuit& circuit,
                                          const std::vector<NamedDataset>& sets,
                                          const MethodConfig& config, std::size_t bins) {
  std::vector<Histogram> out;
  for (const auto& set : sets) {
    out.push_back(entropy_histogram(set.name, entropies(evaluate(circuit, *set.data, config), false),
                                    h_max_for(circuit, false), bins));
  }
  return out;
}

double histogram_overlap(const Histogram& a, const Histogram& b) {
  if (a.counts.size() != b.counts.size()) {
    throw Error(ErrorKind::kShape, "histograms have different bin counts");
  }
  const double na = std::accumulate(a.counts.begin(), a.counts.end(), 0.0);
  const double nb = std::accumulate(b.counts.begin(), b.counts.end(), 0.0);
  if (na == 0 || nb == 0) return 0.0;
  double overlap = 0.0;
  for (std::size_t i = 0; i < a.counts.size(); ++i) {
    overlap += std::min(a.counts[i] / na, b.counts[i] / nb);
  }
  return overlap;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::kShape, "rank correlation needs two equal-length series");
  }
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double accuracy(const std::vector<SampleUncertainty>& samples, const Dataset& data) {
  if (!data.labels) throw Error(ErrorKind::kShape, "accuracy needs labels");
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) hits += samples[i].predicted == data.label(i);
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

double mean_entropy(const std::vector<SampleUncertainty>& samples) {
  double acc = 0.0;
  for (const auto& s : samples) acc += s.entropy;
  return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& sweeps) {
  out << "ood_set,method,p,normalized,threshold,id_outlier_rate,ood_outlier_rate,auc\n";
  for (const auto& s : sweeps) {
    for (std::size_t k = 0; k < s.thresholds.size(); ++k) {
      out << s.ood_name << ',' << s.method << ',' << format_real(s.p) << ','
          << (s.normalized ? 1 : 0) << ',' << format_real(s.thresholds[k]) << ','
          << format_real(s.id_outlier_rate[k]) << ',' << format_real(s.ood_outlier_rate[k])
          << ',' << format_real(s.auc) << '\n';
    }
  }
}

void write_sweep_json(std::ostream& out, const std::vector<SweepResult>& sweeps) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : sweeps) {
    j.push_back({{"ood_set", s.ood_name},
                 {"method", s.method},
                 {"p", s.p},
                 {"normalized", s.normalized},
                 {"thresholds", s.thresholds},
                 {"id_outlier_rate", s.id_outlier_rate},
                 {"ood_outlier_rate", s.ood_outlier_rate},
                 {"auc", s.auc}});
  }
  out << j.dump(1) << '\n';
}

void write_severity_csv(std::ostream& out, const std::vector<SeverityRow>& rows) {
  out << "kind,level,mean_entropy,accuracy,mean_std\n";
  for (const auto& r : rows) {
    out << r.kind << ',' << format_real(r.level) << ',' << format_real(r.mean_entropy) << ','
        << format_real(r.accuracy) << ',' << format_real(r.mean_std) << '\n';
  }
}

void write_severity_json(std::ostream& out, const std::vector<SeverityRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"kind", r.kind},
                 {"level", r.level},
                 {"mean_entropy", r.mean_entropy},
                 {"accuracy", r.accuracy},
                 {"mean_std", r.mean_std}});
  }
  out << j.dump(1) << '\n';
}

void write_histogram_csv(std::ostream& out, const std::vector<Histogram>& histograms) {
  out << "dataset,bin,lower,upper,count\n";
  for (const auto& h : histograms) {
    const double width = h.h_max / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out << h.name << ',' << b << ',' << format_real(width * static_cast<double>(b)) << ','
          << format_real(width * static_cast<double>(b + 1)) << ',' << h.counts[b] << '\n';
    }
  }
}

void write_histogram_json(std::ostream& out, const std::vector<Histogram>& histograms) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& h : histograms) {
    j.push_back({{"dataset", h.name}, {"h_max", h.h_max}, {"counts", h.counts}});
  }
  out << j.dump(1) << '\n';
}

void write_samples_csv(std::ostream& out, const std::vector<SampleUncertainty>& samples) {
  const std::size_t c = samples.empty() ? 0 : samples.front().posterior.size();
  out << "sample,predicted,entropy,normalized_entropy";
  for (std::size_t k = 0; k < c; ++k) out << ",mean_" << k;
  for (std::size_t k = 0; k < c; ++k) out << ",var_" << k;
  out << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out << i << ',' << s.predicted << ',' << format_real(s.entropy) << ','
        << format_real(s.normalized_entropy);
    for (double m : s.posterior) out << ',' << format_real(m);
    for (double v : s.variance) out << ',' << format_real(v);
    out << '\n';
  }
}

}  // namespace tdi
