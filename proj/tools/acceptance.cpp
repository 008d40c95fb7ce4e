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

// Acceptance run: one PASS/FAIL line per criterion.
//
//   tdi_acceptance [--data-dir DIR] [--only N,...] [--expect-red N,...]
//
// Exit status is 0 when every criterion passes, or, with --expect-red, when
// exactly the listed criteria fail. Failing lines are printed as FAIL either way.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracle_check.hpp"
#include "tdi/circuit.hpp"
#include "tdi/dataset.hpp"
#include "tdi/error.hpp"
#include "tdi/eval.hpp"
#include "tdi/mcd.hpp"
#include "tdi/moments.hpp"
#include "tdi/oracle/enumeration.hpp"
#include "tdi/posterior.hpp"
#include "tdi/structure.hpp"
#include "tdi/train.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace tdi {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double rel_err(double actual, double expected) {
  return std::abs(actual - expected) / std::max(std::abs(expected), 1e-300);
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// 1. TDI root moments on trees equal exhaustive enumeration.
Outcome tree_oracle() {
  tools::OracleSettings s;
  s.trials = 200;
  s.max_edges = 12;
  const auto r = tools::run_tree_oracle(s);
  const bool pass = r.circuits >= 200 && r.max_rel() < 1e-6 && r.seconds < 60.0;
  return {pass, fmt("%zu trees x 3 p, max rel err E %.2e Var %.2e (tol 1e-6), %.1f s (limit 60 s)",
                    r.circuits, r.max_rel_expectation, r.max_rel_variance, r.seconds)};
}

// 2. RatExact root variance on binary RAT circuits equals enumeration; TreeZero
// equals the exact moments of the copy-paste expansion.
Outcome rat_oracle() {
  struct Shape {
    std::size_t depth, inputs, classes, reps, vars;
  };
  // S = 2 throughout. With I = 2 the D = 2 circuits exceed 12 sum edges, so
  // D = 2 runs with I = 1 plus one 20-edge I = 2 circuit.
  const std::vector<Shape> shapes{{1, 2, 1, 1, 2}, {1, 2, 1, 2, 2}, {1, 2, 2, 1, 2},
                                  {2, 1, 1, 1, 4}, {2, 1, 2, 1, 4}, {2, 2, 1, 1, 4}};
  double worst_exact = 0.0, worst_copy = 0.0, max_gap = 0.0;
  std::size_t circuits = 0, max_edges = 0, tree_pass_refs = 0;
  for (const auto& sh : shapes) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      RatConfig rat;
      rat.num_sums = 2;
      rat.num_input_dists = sh.inputs;
      rat.depth = sh.depth;
      rat.num_classes = sh.classes;
      rat.num_repetitions = sh.reps;
      rat.num_variables = sh.vars;
      rat.rng_seed = seed;
      rat.init_log_std = -0.5;
      const Circuit c = build_rat(rat);
      max_edges = std::max(max_edges, c.num_sum_edges());
      std::mt19937_64 rng(seed + 11);
      const Evidence e = random_evidence(c, rng);
      const auto exact = oracle::enumerate_moments(c, e, 0.2);
      const auto rx = tdi_pass(c, e, DropoutConfig(0.2, CovarianceStrategy::kRatExact));
      const auto tz = tdi_pass(c, e, DropoutConfig(0.2, CovarianceStrategy::kTreeZero));
      const Circuit tree = expand_to_tree(c);
      // The expansion of the largest circuits exceeds the enumeration limit;
      // there the tree pass itself is the reference (exact on trees, see 1).
      const bool enumerable = tree.num_sum_edges() <= oracle::kMaxEnumeratedEdges;
      std::vector<double> ref_e(tree.size()), ref_v(tree.size());
      if (enumerable) {
        const auto expanded = oracle::enumerate_moments(tree, e, 0.2);
        ref_e = expanded.expectation;
        ref_v = expanded.variance;
      } else {
        const auto expanded = tdi_pass(tree, e, DropoutConfig(0.2));
        for (std::size_t i = 0; i < tree.size(); ++i) {
          ref_e[i] = expanded.expectation[i].to_double();
          ref_v[i] = expanded.variance[i].to_double();
        }
        ++tree_pass_refs;
      }
      for (std::size_t k = 0; k < c.num_classes(); ++k) {
        const NodeId r = c.roots()[k];
        const NodeId tr = tree.roots()[k];
        const double v = exact.variance[r.index];
        worst_exact = std::max(worst_exact, rel_err(rx.variance_of(r).to_double(), v));
        worst_copy = std::max(worst_copy, rel_err(tz.variance_of(r).to_double(), ref_v[tr.index]));
        worst_copy =
            std::max(worst_copy, rel_err(tz.expectation_of(r).to_double(), ref_e[tr.index]));
        max_gap = std::max(max_gap, rel_err(tz.variance_of(r).to_double(), v));
      }
      ++circuits;
    }
  }
  const bool pass = worst_exact < 1e-6 && worst_copy < 1e-9;
  return {pass, fmt("%zu RAT circuits (<= %zu sum edges), RatExact max rel err %.2e (tol 1e-6), "
                    "TreeZero vs expanded tree %.2e (tol 1e-9, %zu expansions checked by tree pass), "
                    "TreeZero differs from exact by up to %.1f%%",
                    circuits, max_edges, worst_exact, worst_copy, tree_pass_refs,
                    100.0 * max_gap)};
}

// 3. Enumerated covariances lie in the Cauchy-Schwarz interval.
Outcome containment() {
  std::mt19937_64 rng(3);
  RandomCircuitConfig cfg;
  cfg.max_sum_edges = 10;
  cfg.share_probability = 0.7;
  std::size_t pairs = 0, violations = 0, dags = 0;
  for (int t = 0; t < 20; ++t) {
    const Circuit c = random_dag(cfg, rng);
    dags += c.is_tree() ? 0 : 1;
    const Evidence e = random_evidence(c, rng);
    const auto exact = oracle::enumerate_moments(c, e, 0.2, true);
    const auto f = tdi_pass(c, e, DropoutConfig(0.2, CovarianceStrategy::kCauchyUpper));
    for (std::uint32_t a = 0; a < c.size(); ++a) {
      for (std::uint32_t b = 0; b < a; ++b) {
        const double bound = std::sqrt(exact.variance[a] * exact.variance[b]);
        if (std::abs(exact.cov(NodeId{a}, NodeId{b})) > bound * (1 + 1e-9) + 1e-300) ++violations;
        ++pairs;
      }
    }
    // The propagated per-node interval must hold the true variance as well.
    for (std::uint32_t a = 0; a < c.size(); ++a) {
      const double v = exact.variance[a];
      const double e2 = exact.expectation[a] * exact.expectation[a];
      if (f.variance_bounds[a].lower.to_double() > v * (1 + 1e-9) + 1e-12 * e2) ++violations;
      if (f.variance_bounds[a].upper.to_double() < v * (1 - 1e-9) - 1e-12 * e2) ++violations;
    }
  }
  return {pairs >= 500 && violations == 0,
          fmt("%zu node pairs on %zu DAGs (needs >= 500), %zu violations", pairs, dags,
              violations)};
}

// 4. MCD root moments approach the TDI moments on trees.
Outcome mcd_convergence() {
  std::mt19937_64 rng(17);
  RandomCircuitConfig cfg;
  cfg.max_sum_edges = 12;
  double worst_mean = 0.0, worst_var = 0.0;
  std::size_t circuits = 0;
  for (int t = 0; t < 50; ++t) {
    cfg.num_variables = 1 + t % 4;
    cfg.num_classes = 1 + t % 2;
    const Circuit c = random_tree(cfg, rng);
    const Evidence e = random_evidence(c, rng);
    const auto f = tdi_pass(c, e, DropoutConfig(0.1));
    McdConfig m;
    m.p = 0.1;
    m.num_passes = 100000;
    m.rng_seed = 1000 + t;
    const auto r = mcd_infer(c, e, m);
    for (std::size_t k = 0; k < c.num_classes(); ++k) {
      const NodeId root = c.roots()[k];
      // Ratios in log space: the moments of image-scale roots underflow doubles.
      const auto te = f.expectation_of(root), tv = f.variance_of(root);
      worst_mean = std::max(
          worst_mean, std::abs(std::expm1(r.root_mean[k].log_magnitude() - te.log_magnitude())));
      if (tv.is_zero()) {
        worst_var = std::max(worst_var, r.root_variance[k].is_zero() ? 0.0 : 1.0);
      } else {
        worst_var = std::max(worst_var, std::abs(std::expm1(r.root_variance[k].log_magnitude() -
                                                            tv.log_magnitude())));
      }
    }
    ++circuits;
  }
  return {circuits >= 50 && worst_mean < 0.02 && worst_var < 0.05,
          fmt("%zu trees, L=1e5, p=0.1: max rel mean gap %.4f (tol 0.02), max rel variance gap "
              "%.4f (tol 0.05)",
              circuits, worst_mean, worst_var)};
}

// 5. Posterior Taylor moments against the enumerated ratio moments.
Outcome taylor_accuracy() {
  std::mt19937_64 rng(13);
  RandomCircuitConfig cfg;
  cfg.num_classes = 2;
  cfg.max_sum_edges = 10;
  std::size_t circuits = 0, passing = 0;
  std::vector<double> mean_err, var_err;
  double ext_mean = 0.0, ext_var = 0.0, major_mean = 0.0, major_var = 0.0;
  for (int t = 0; t < 100; ++t) {
    cfg.num_variables = 1 + t % 3;
    const Circuit c = random_tree(cfg, rng);
    const Evidence e = random_evidence(c, rng);
    const auto exact = oracle::enumerate_posterior(c, e, 0.1);
    const auto simple = posterior_moments(c, e, DropoutConfig(0.1));
    const auto extended = posterior_moments(c, e, DropoutConfig(0.1), TaylorMethod::kExtended);
    double m = 0.0, v = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      m = std::max(m, rel_err(simple.mean[k], exact.mean[k]));
      v = std::max(v, rel_err(simple.variance[k], exact.variance[k]));
      ext_mean = std::max(ext_mean, rel_err(extended.mean[k], exact.mean[k]));
      ext_var = std::max(ext_var, rel_err(extended.variance[k], exact.variance[k]));
      if (exact.mean[k] >= 0.1) {
        major_mean = std::max(major_mean, rel_err(simple.mean[k], exact.mean[k]));
        major_var = std::max(major_var, rel_err(simple.variance[k], exact.variance[k]));
      }
    }
    mean_err.push_back(m);
    var_err.push_back(v);
    passing += (m < 0.05 && v < 0.15) ? 1 : 0;
    ++circuits;
  }
  auto median = [](std::vector<double> x) {
    std::nth_element(x.begin(), x.begin() + x.size() / 2, x.end());
    return x[x.size() / 2];
  };
  return {passing == circuits,
          fmt("%zu/%zu trees within (mean 5%%, variance 15%%); SimpleTaylor median/max rel err "
              "mean %.3f/%.3f variance %.3f/%.3f (classes with mean >= 0.1: max %.3f/%.3f); ExtendedTaylor (informational) max mean %.3f "
              "variance %.3f",
              passing, circuits, median(mean_err),
              *std::max_element(mean_err.begin(), mean_err.end()), median(var_err),
              *std::max_element(var_err.begin(), var_err.end()), major_mean, major_var, ext_mean,
              ext_var)};
}

// 6. Analytic gradients against central differences.
Outcome gradients() {
  std::mt19937_64 rng(19);
  RandomCircuitConfig cfg;
  std::size_t circuits = 0, coords = 0;
  double worst = 0.0;
  for (int t = 0; t < 24; ++t) {
    cfg.num_variables = 1 + t % 3;
    cfg.num_classes = 1 + t % 3;
    const Circuit c0 = t % 2 ? random_dag(cfg, rng) : random_tree(cfg, rng);
    const Circuit c = apply_parameters(c0, extract_parameters(c0));
    Dataset batch;
    batch.num_features = c.num_variables();
    batch.labels.emplace();
    std::uniform_int_distribution<std::size_t> label(0, c.num_classes() - 1);
    for (int r = 0; r < 6; ++r) {
      for (const auto& v : random_evidence(c, rng, 0.2).values) {
        batch.features.push_back(v ? *v : std::nan(""));
      }
      batch.labels->push_back(label(rng));
    }
    const auto obj = c.num_classes() > 1 && t % 2 ? Objective::kCrossEntropy
                                                  : Objective::kClassConditional;
    const auto lg = loss_and_grad(c, batch, obj);
    const auto theta = extract_parameters(c);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double h = 1e-5;
      auto up = theta, down = theta;
      up[j] += h;
      down[j] -= h;
      const double fd = (loss_and_grad(apply_parameters(c, up), batch, obj).loss -
                         loss_and_grad(apply_parameters(c, down), batch, obj).loss) /
                        (2 * h);
      // Relative, with a floor for coordinates whose gradient is numerically zero.
      worst = std::max(worst, std::abs(lg.gradient[j] - fd) / std::max(std::abs(fd), 1e-3));
      ++coords;
    }
    ++circuits;
  }
  return {circuits >= 20 && worst < 1e-4,
          fmt("%zu circuits, %zu coordinates, max rel err %.2e (tol 1e-4)", circuits, coords,
              worst)};
}

// 7. Fully marginalized evidence has probability one.
Outcome normalization(const Circuit& desk) {
  std::vector<Circuit> circuits{desk};
  std::mt19937_64 rng(23);
  for (int t = 0; t < 100; ++t) {
    RandomCircuitConfig cfg;
    cfg.num_variables = 1 + t % 6;
    cfg.num_classes = 1 + t % 4;
    circuits.push_back(t % 2 ? random_dag(cfg, rng) : random_tree(cfg, rng));
  }
  for (std::size_t d = 1; d <= 3; ++d) {
    RatConfig rat;
    rat.num_sums = 3;
    rat.num_input_dists = 3;
    rat.depth = d;
    rat.num_repetitions = 2;
    rat.num_classes = 4;
    rat.num_variables = 16;
    circuits.push_back(build_rat(rat));
  }
  double worst = 0.0;
  for (const Circuit& c : circuits) {
    for (double ll : log_likelihood(c, Evidence::marginalized(c.num_variables()))) {
      worst = std::max(worst, std::abs(ll));
    }
  }
  return {worst < 1e-9,
          fmt("%zu circuits, max |log Z| %.2e (tol 1e-9)", circuits.size(), worst)};
}

// Desk-scale setup shared by 7-11: 8x8 digits, classes 0-4 in distribution,
// 5-9 held out as OOD.
struct DeskScale {
  Circuit model;
  Dataset test;
  Dataset ood;
  double train_seconds = 0.0;
  double test_accuracy = 0.0;
};

DeskScale desk_scale(const fs::path& data_dir) {
  const Dataset all = load_idx(data_dir / "digits-images.idx", data_dir / "digits-labels.idx");
  const std::vector<std::size_t> id_classes{0, 1, 2, 3, 4}, ood_classes{5, 6, 7, 8, 9};
  const Dataset id = filter_classes(all, id_classes, true);
  auto [train, test] = split_rows(id, 0.3, 1);
  RatConfig rat;
  rat.num_sums = 5;
  rat.num_input_dists = 5;
  rat.depth = 3;
  rat.num_repetitions = 2;
  rat.num_classes = 5;
  rat.num_variables = 64;
  rat.rng_seed = 1;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  cfg.objective = Objective::kCrossEntropy;
  cfg.rng_seed = 1;
  const auto start = Clock::now();
  const auto fitted = fit(build_rat(rat), train, cfg);
  DeskScale out{*fitted.circuit, test, filter_classes(all, ood_classes, false)};
  out.train_seconds = seconds_since(start);
  out.test_accuracy = accuracy(evaluate(out.model, test, MethodConfig{}), test);
  return out;
}

MethodConfig tdi_method(double p) {
  MethodConfig m;
  m.method = Method::kTdi;
  m.dropout = DropoutConfig(p);
  return m;
}

constexpr double kDeskP = 0.2;

// 8. OOD detection improves with TDI.
Outcome ood_direction(const DeskScale& d, double setup_seconds) {
  const auto start = Clock::now();
  const std::vector<NamedDataset> sets{{"digits 5-9", &d.ood}};
  const double plain = ood_sweep(d.model, d.test, sets, MethodConfig{})[0].auc;
  const double tdi = ood_sweep(d.model, d.test, sets, tdi_method(kDeskP))[0].auc;
  const double total = setup_seconds + seconds_since(start);
  return {tdi >= plain + 0.05 && total < 900.0,
          fmt("AUC PC %.4f, PC+TDI (p=%.1f) %.4f, margin %.4f (needs >= 0.05); test accuracy "
              "%.3f; %.0f s incl. training (limit 900 s)",
              plain, kDeskP, tdi, tdi - plain, d.test_accuracy, total)};
}

// 9. Entropy grows with the rotation angle, accuracy is kept.
Outcome rotation(const DeskScale& d) {
  const std::vector<double> angles{0, 15, 30, 45, 60, 75, 90};
  const auto rows = perturb_sweep(d.model, d.test, angles, 8, 8, tdi_method(kDeskP));
  std::vector<double> h;
  std::string curve;
  for (const auto& r : rows) {
    h.push_back(r.mean_entropy);
    curve += fmt(" %.3f", r.mean_entropy);
  }
  const double rho = spearman(angles, h);
  const double gap = std::abs(rows[0].accuracy - d.test_accuracy);
  return {rho >= 0.9 && gap <= 0.02,
          fmt("Spearman %.3f (needs >= 0.9); entropy at 0..90 deg:%s; accuracy at 0 deg %.3f vs "
              "plain %.3f (gap %.3f, tol 0.02)",
              rho, curve.c_str(), rows[0].accuracy, d.test_accuracy, gap)};
}

// 10. Entropy grows with noise severity; p = 0 reproduces the plain circuit.
Outcome corruption(const DeskScale& d) {
  const std::vector<Corruption> kinds{Corruption::kGaussianNoise};
  const std::vector<int> sev{1, 2, 3, 4, 5};
  const auto rows = corrupt_sweep(d.model, d.test, kinds, sev, tdi_method(kDeskP), 3);
  std::size_t inversions = 0;
  std::string curve;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    curve += fmt(" %.3f", rows[i].mean_entropy);
    if (i > 0 && rows[i].mean_entropy < rows[i - 1].mean_entropy) ++inversions;
  }
  const auto plain = evaluate(d.model, d.test, MethodConfig{});
  const auto zero = evaluate(d.model, d.test, tdi_method(0.0));
  double worst = 0.0;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    worst = std::max(worst, std::abs(plain[i].entropy - zero[i].entropy));
    for (std::size_t k = 0; k < plain[i].posterior.size(); ++k) {
      worst = std::max(worst, std::abs(plain[i].posterior[k] - zero[i].posterior[k]));
    }
  }
  return {inversions <= 1 && worst < 1e-9,
          fmt("noise severities 1..5 entropy:%s, %zu inversion(s) (max 1); p=0 vs plain max "
              "per-sample diff %.2e (tol 1e-9)",
              curve.c_str(), inversions, worst)};
}

// 11. One TDI pass is cheap compared with the forward pass and with MCD.
Outcome cost(const DeskScale& d) {
  const std::size_t rows = std::min<std::size_t>(d.test.rows(), 200);
  std::vector<Evidence> ev;
  for (std::size_t i = 0; i < rows; ++i) ev.push_back(d.test.evidence(i));
  std::vector<double> logs(d.model.size());
  double sink = 0.0;
  auto best_of = [](int reps, const std::function<void()>& body) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
      const auto start = Clock::now();
      body();
      best = std::min(best, seconds_since(start));
    }
    return best;
  };
  const double plain = best_of(5, [&] {
    for (const auto& e : ev) {
      forward_log_values(d.model, e, logs);
      sink += logs.back();
    }
  });
  TdiEvaluator tdi(d.model, DropoutConfig(kDeskP));
  const double single = best_of(5, [&] {
    for (const auto& e : ev) {
      sink += posterior_from_frame(d.model, tdi.run(e), TaylorMethod::kSimple).entropy;
    }
  });
  McdConfig m;
  m.p = kDeskP;
  m.num_passes = 100;
  const double mcd = best_of(1, [&] {
    for (const auto& e : ev) sink += mcd_infer(d.model, e, m).entropy();
  });
  if (!std::isfinite(sink)) std::cerr << "non-finite timing sink\n";
  return {single < 5.0 * plain && single < mcd / 10.0,
          fmt("per row: plain %.1f us, TDI %.1f us (%.2fx plain, limit 5x), 100-pass MCD %.1f us "
              "(TDI/MCD %.3f, limit 0.1)",
              1e6 * plain / rows, 1e6 * single / rows, single / plain, 1e6 * mcd / rows,
              single / mcd)};
}

std::set<int> parse_set(const std::string& text) {
  std::set<int> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace
}  // namespace tdi

int main(int argc, char** argv) {
  using namespace tdi;
  CLI::App app{"Acceptance criteria 1-11"};
  std::string data_dir = TDI_DEFAULT_DATA_DIR, only, expect_red;
  app.add_option("--data-dir", data_dir, "Directory with digits-images.idx and digits-labels.idx")
      ->capture_default_str();
  app.add_option("--only", only, "Run only these criteria, e.g. 1,2,3");
  app.add_option("--expect-red", expect_red,
                 "Criteria known to fail; exit 0 iff exactly these fail");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected = parse_set(only);
  const std::set<int> expected_red = parse_set(expect_red);
  auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  std::set<int> red;
  auto run = [&](int n, const std::function<Outcome()>& body) {
    if (!wanted(n)) return;
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) red.insert(n);
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
  };

  run(1, tree_oracle);
  run(2, rat_oracle);
  run(3, containment);
  run(4, mcd_convergence);
  run(5, taylor_accuracy);
  run(6, gradients);

  const bool need_desk = wanted(7) || wanted(8) || wanted(9) || wanted(10) || wanted(11);
  std::optional<DeskScale> desk;
  double setup = 0.0;
  if (need_desk) {
    const auto start = Clock::now();
    try {
      desk = desk_scale(data_dir);
    } catch (const std::exception& e) {
      std::cout << "desk-scale setup failed: " << e.what() << std::endl;
    }
    setup = seconds_since(start);
  }
  auto with_desk = [&](int n, const std::function<Outcome(const DeskScale&)>& body) {
    run(n, [&]() -> Outcome {
      if (!desk) return {false, "desk-scale model unavailable"};
      return body(*desk);
    });
  };
  with_desk(7, [](const DeskScale& d) { return normalization(d.model); });
  with_desk(8, [&](const DeskScale& d) { return ood_direction(d, setup); });
  with_desk(9, rotation);
  with_desk(10, corruption);
  with_desk(11, cost);

  std::cout << "summary: " << red.size() << " criterion/criteria failing";
  for (int n : red) std::cout << ' ' << n;
  std::cout << std::endl;
  if (!expected_red.empty()) {
    std::set<int> expected_run;
    for (int n : expected_red) {
      if (wanted(n)) expected_run.insert(n);
    }
    return red == expected_run ? 0 : 1;
  }
  return red.empty() ? 0 : 1;
}
