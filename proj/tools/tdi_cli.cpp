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

// Command-line entry point. Every subcommand writes its outputs and an
// effective-config snapshot into --out; `tdi --config <out>/config.snapshot`
// repeats the run.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracle_check.hpp"
#include "tdi/circuit_io.hpp"
#include "tdi/dataset.hpp"
#include "tdi/error.hpp"
#include "tdi/eval.hpp"
#include "tdi/mcd.hpp"
#include "tdi/moments.hpp"
#include "tdi/posterior.hpp"
#include "tdi/structure.hpp"
#include "tdi/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace tdi {
namespace {

constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMissingFile = 3;
constexpr int kExitValidation = 4;

// Shared by every subcommand.
struct Common {
  std::string out = "run";
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  bool json = false;
};

struct DataFlags {
  std::string input;
  std::string labels;
  std::string classes;  // comma separated labels; empty keeps all
  bool relabel = true;
  double split = 0.0;
  std::string part = "all";
  std::uint64_t split_seed = 1;
};

struct InferenceFlags {
  std::string method = "tdi";
  double p = 0.1;
  std::size_t passes = 100;
  std::string strategy = "tree_zero";
  std::string taylor = "simple";
  std::uint64_t seed = 0;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--out", c.out, "Output directory")->capture_default_str();
  app.add_option("--threads", c.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str();
  app.add_flag("--json", c.json, "Print the run summary as JSON");
}

void add_data(CLI::App& app, DataFlags& d, const std::string& prefix, const std::string& what) {
  app.add_option("--" + prefix + "input", d.input,
                 what + " features: a .csv file (optional 'label' column) or an IDX image file");
  app.add_option("--" + prefix + "labels", d.labels, what + " IDX label file");
  app.add_option("--" + prefix + "classes", d.classes, "Keep only these labels, e.g. 0,1,2");
  app.add_option("--" + prefix + "relabel", d.relabel,
                 "Renumber kept labels 0..k-1 in the order given")
      ->capture_default_str();
  app.add_option("--" + prefix + "split", d.split, "Fraction of rows held out as the test part")
      ->capture_default_str();
  app.add_option("--" + prefix + "part", d.part, "Rows to use: all, train or test")
      ->check(CLI::IsMember({"all", "train", "test"}))
      ->capture_default_str();
  app.add_option("--" + prefix + "split-seed", d.split_seed, "Seed of the row split")
      ->capture_default_str();
}

void add_inference(CLI::App& app, InferenceFlags& f) {
  app.add_option("--method", f.method, "plain, tdi or mcd")
      ->check(CLI::IsMember({"plain", "tdi", "mcd"}))
      ->capture_default_str();
  app.add_option("--p", f.p, "Dropout probability of every sum edge")->capture_default_str();
  app.add_option("--L", f.passes, "Monte Carlo passes for mcd")->capture_default_str();
  app.add_option("--strategy", f.strategy,
                 "Sibling covariance: tree_zero, rat_exact, cauchy_lower, cauchy_upper")
      ->capture_default_str();
  app.add_option("--taylor", f.taylor, "Posterior expansion: simple or extended")
      ->capture_default_str();
  app.add_option("--seed", f.seed, "Monte Carlo seed")->capture_default_str();
}

Dataset load_data(const DataFlags& d, const std::string& what) {
  if (d.input.empty()) throw Error(ErrorKind::kConfig, what + " input is required");
  const fs::path input(d.input);
  Dataset data;
  if (input.extension() == ".csv") {
    data = load_csv(input);
  } else if (d.labels.empty()) {
    data = load_idx(input);
  } else {
    data = load_idx(input, fs::path(d.labels));
  }
  if (!d.classes.empty()) {
    std::vector<std::size_t> keep;
    std::istringstream list(d.classes);
    for (std::string item; std::getline(list, item, ',');) {
      try {
        keep.push_back(std::stoul(item));
      } catch (const std::exception&) {
        throw Error(ErrorKind::kConfig, "bad class label '" + item + "'");
      }
    }
    data = filter_classes(data, keep, d.relabel);
  }
  if (d.part != "all") {
    auto [train, test] = split_rows(data, d.split, d.split_seed);
    data = d.part == "train" ? std::move(train) : std::move(test);
  }
  return data;
}

MethodConfig method_config(const InferenceFlags& f, std::size_t threads) {
  MethodConfig m;
  m.method = parse_method(f.method);
  m.dropout = DropoutConfig(f.p, parse_covariance_strategy(f.strategy));
  m.taylor = parse_taylor_method(f.taylor);
  m.mcd.p = f.p;
  m.mcd.num_passes = f.passes;
  m.mcd.rng_seed = f.seed;
  m.mcd.threads = threads;
  m.threads = threads;
  return m;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  body(out);
}

// Printed summary: key/value text lines, or one JSON object with --json.
void report(const Common& c, const json& summary) {
  if (c.json) {
    std::cout << summary.dump() << '\n';
    return;
  }
  for (const auto& [key, value] : summary.items()) std::cout << key << ": " << value << '\n';
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
      return kExitMissingFile;
    case ErrorKind::kValidation:
      return kExitValidation;
    default:
      return kExitOther;
  }
}

std::string quoted(const std::string& text) {
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

int fail(std::string_view kind, const std::string& message, int code) {
  std::cerr << "error: kind=" << kind << " message=" << quoted(message) << '\n';
  return code;
}

}  // namespace
}  // namespace tdi

int main(int argc, char** argv) {
  using namespace tdi;
  CLI::App app{"Tractable dropout inference for probabilistic circuits"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key = value file (flags override it)");
  app.allow_config_extras(false);

  Common common;
  std::function<json()> action;
  std::vector<CLI::App*> subcommands;
  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->configurable();
    add_common(*s, common);
    subcommands.push_back(s);
    return s;
  };

  // build
  std::string structure = "rat", manual_file;
  RatConfig rat;
  RandomCircuitConfig random_cfg;
  {
    auto* s = sub("build", "Build a circuit and write model.circuit");
    s->add_option("--structure", structure, "rat, manual, random_tree or random_dag")
        ->check(CLI::IsMember({"rat", "manual", "random_tree", "random_dag"}))
        ->capture_default_str();
    s->add_option("--S", rat.num_sums, "Sum nodes per region")->capture_default_str();
    s->add_option("--I", rat.num_input_dists, "Input distributions per leaf region")
        ->capture_default_str();
    s->add_option("--D", rat.depth, "Split depth")->capture_default_str();
    s->add_option("--R", rat.num_repetitions, "Repetitions")->capture_default_str();
    s->add_option("--C", rat.num_classes, "Class roots")->capture_default_str();
    s->add_option("--vars", rat.num_variables, "Number of variables")->capture_default_str();
    s->add_option("--init-mean-low", rat.init_mean_low, "Lower end of the initial leaf means")
        ->capture_default_str();
    s->add_option("--init-mean-high", rat.init_mean_high, "Upper end of the initial leaf means")
        ->capture_default_str();
    s->add_option("--init-log-std", rat.init_log_std, "Initial leaf log standard deviation")
        ->capture_default_str();
    s->add_option("--seed", rat.rng_seed, "Structure and initialization seed")
        ->capture_default_str();
    s->add_option("--manual", manual_file, "Manual structure file (for --structure manual)");
    s->add_option("--max-edges", random_cfg.max_sum_edges, "Sum-edge budget of random circuits")
        ->capture_default_str();
    s->callback([&] {
      action = [&]() -> json {
        Circuit c = [&] {
          if (structure == "rat") return build_rat(rat);
          if (structure == "manual") {
            std::ifstream in(manual_file);
            if (!in) throw Error(ErrorKind::kIo, "cannot read " + manual_file);
            std::stringstream text;
            text << in.rdbuf();
            return build_manual(text.str());
          }
          std::mt19937_64 rng(rat.rng_seed);
          random_cfg.num_variables = rat.num_variables;
          random_cfg.num_classes = rat.num_classes;
          return structure == "random_tree" ? random_tree(random_cfg, rng)
                                            : random_dag(random_cfg, rng);
        }();
        require_valid(c);
        save_circuit(c, fs::path(common.out) / "model.circuit");
        write_file(fs::path(common.out) / "structure.csv", [&](std::ostream& o) {
          o << "nodes,edges,parameters,classes,variables\n"
            << c.size() << ',' << c.num_edges() << ',' << c.num_parameters() << ','
            << c.num_classes() << ',' << c.num_variables() << '\n';
        });
        return {{"nodes", c.size()}, {"edges", c.num_edges()}, {"parameters", c.num_parameters()}};
      };
    });
  }

  // train
  std::string model;
  DataFlags data;
  TrainConfig train_cfg;
  std::string objective = "class_conditional", optimizer = "adam";
  {
    auto* s = sub("train", "Fit circuit parameters and write model.circuit and history.csv");
    s->add_option("--model", model, "Circuit to start from")->required();
    add_data(*s, data, "", "Training");
    s->add_option("--epochs", train_cfg.epochs, "Training epochs")->capture_default_str();
    s->add_option("--batch", train_cfg.batch_size, "Mini-batch size")->capture_default_str();
    s->add_option("--lr", train_cfg.learning_rate, "Learning rate")->capture_default_str();
    s->add_option("--optimizer", optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}))
        ->capture_default_str();
    s->add_option("--objective", objective, "class_conditional or cross_entropy")
        ->check(CLI::IsMember({"class_conditional", "cross_entropy"}))
        ->capture_default_str();
    s->add_option("--min-log-std", train_cfg.min_log_std, "Lower clamp of leaf log std")
        ->capture_default_str();
    s->add_option("--seed", train_cfg.rng_seed, "Shuffling seed")->capture_default_str();
    s->callback([&] {
      action = [&]() -> json {
        const Circuit start = load_circuit(model);
        const Dataset rows = load_data(data, "training");
        train_cfg.optimizer = optimizer == "adam" ? Optimizer::kAdam : Optimizer::kSgd;
        train_cfg.objective = objective == "cross_entropy" ? Objective::kCrossEntropy
                                                           : Objective::kClassConditional;
        train_cfg.threads = common.threads;
        const fs::path out(common.out);
        TrainResult r;
        try {
          r = fit(start, rows, train_cfg);
        } catch (const TrainingDiverged& e) {
          save_circuit(*e.checkpoint(), out / "checkpoint.circuit");
          write_file(out / "history.csv", [&](std::ostream& o) { write_history_csv(o, e.history()); });
          throw;
        }
        save_circuit(*r.circuit, out / "model.circuit");
        save_optimizer_state(r.state, out / "optimizer.json");
        write_file(out / "history.csv", [&](std::ostream& o) { write_history_csv(o, r.history); });
        return {{"rows", rows.rows()},
                {"final_loss", r.history.back().loss},
                {"train_accuracy", r.history.back().accuracy}};
      };
    });
  }

  // eval
  InferenceFlags inf;
  {
    auto* s = sub("eval", "Per-sample posterior, entropy and accuracy with one method");
    s->add_option("--model", model, "Circuit file")->required();
    add_data(*s, data, "", "Evaluation");
    add_inference(*s, inf);
    s->callback([&] {
      action = [&]() -> json {
        const Circuit c = load_circuit(model);
        const Dataset rows = load_data(data, "evaluation");
        const auto result = evaluate(c, rows, method_config(inf, common.threads));
        write_file(fs::path(common.out) / "samples.csv",
                   [&](std::ostream& o) { write_samples_csv(o, result); });
        json j{{"rows", rows.rows()}, {"method", method_tag(parse_method(inf.method))},
               {"mean_entropy", mean_entropy(result)}};
        if (rows.labels) j["accuracy"] = accuracy(result, rows);
        return j;
      };
    });
  }

  // tdi
  bool node_moments = false;
  {
    auto* s = sub("tdi", "Single-pass dropout posterior moments per sample");
    s->add_option("--model", model, "Circuit file")->required();
    add_data(*s, data, "", "Evidence");
    s->add_option("--p", inf.p, "Dropout probability of every sum edge")->capture_default_str();
    s->add_option("--strategy", inf.strategy,
                  "Sibling covariance: tree_zero, rat_exact, cauchy_lower, cauchy_upper")
        ->capture_default_str();
    s->add_option("--taylor", inf.taylor, "Posterior expansion: simple or extended")
        ->capture_default_str();
    s->add_flag("--node-moments", node_moments,
                "Also write every node's E/Var for the first row to nodes.csv");
    s->callback([&] {
      action = [&]() -> json {
        const Circuit c = load_circuit(model);
        const Dataset rows = load_data(data, "evidence");
        inf.method = "tdi";
        const auto m = method_config(inf, common.threads);
        const auto result = evaluate(c, rows, m);
        write_file(fs::path(common.out) / "posterior.csv",
                   [&](std::ostream& o) { write_samples_csv(o, result); });
        if (node_moments && rows.rows() > 0) {
          const auto frame = tdi_pass(c, rows.evidence(0), m.dropout);
          write_file(fs::path(common.out) / "nodes.csv",
                     [&](std::ostream& o) { write_moment_csv(o, c, frame); });
        }
        return {{"rows", rows.rows()}, {"p", inf.p}, {"mean_entropy", mean_entropy(result)}};
      };
    });
  }

  // mcd
  bool compare = false;
  {
    auto* s = sub("mcd", "Monte Carlo dropout posterior per sample");
    s->add_option("--model", model, "Circuit file")->required();
    add_data(*s, data, "", "Evidence");
    s->add_option("--p", inf.p, "Dropout probability of every sum edge")->capture_default_str();
    s->add_option("--L", inf.passes, "Stochastic forward passes")->capture_default_str();
    s->add_option("--seed", inf.seed, "Monte Carlo seed")->capture_default_str();
    s->add_flag("--compare", compare, "Also compare against TDI in comparison.csv");
    s->callback([&] {
      action = [&]() -> json {
        const Circuit c = load_circuit(model);
        const Dataset rows = load_data(data, "evidence");
        inf.method = "mcd";
        const auto m = method_config(inf, common.threads);
        const auto result = evaluate(c, rows, m);
        write_file(fs::path(common.out) / "posterior.csv",
                   [&](std::ostream& o) { write_samples_csv(o, result); });
        json j{{"rows", rows.rows()}, {"passes", inf.passes},
               {"mean_entropy", mean_entropy(result)}};
        if (compare) {
          std::vector<Evidence> ev;
          for (std::size_t i = 0; i < rows.rows(); ++i) ev.push_back(rows.evidence(i));
          const auto r = mcd_vs_tdi(c, ev, DropoutConfig(inf.p), TaylorMethod::kSimple, m.mcd);
          write_file(fs::path(common.out) / "comparison.csv",
                     [&](std::ostream& o) { write_comparison_csv(o, r); });
          j["mean_abs_mean_gap"] = r.mean_abs_mean_gap();
          j["tdi_seconds"] = r.tdi_seconds;
          j["mcd_seconds"] = r.mcd_seconds;
        }
        return j;
      };
    });
  }

  // ood
  DataFlags ood_data;
  std::string ood_name = "ood";
  bool normalized = false;
  std::size_t bins = 50;
  {
    auto* s = sub("ood", "Entropy threshold sweep of ID against OOD data");
    s->add_option("--model", model, "Circuit file")->required();
    add_data(*s, data, "", "In-distribution");
    add_data(*s, ood_data, "ood-", "Out-of-distribution");
    s->add_option("--ood-name", ood_name, "Name of the OOD set in the outputs")
        ->capture_default_str();
    add_inference(*s, inf);
    s->add_flag("--normalized", normalized, "Sweep entropy divided by ln C");
    s->add_option("--bins", bins, "Histogram bins")->capture_default_str();
    s->callback([&] {
      action = [&]() -> json {
        const Circuit c = load_circuit(model);
        const Dataset id = load_data(data, "in-distribution");
        const Dataset ood = load_data(ood_data, "out-of-distribution");
        const auto m = method_config(inf, common.threads);
        const std::vector<NamedDataset> sets{{ood_name, &ood}};
        const auto sweeps = ood_sweep(c, id, sets, m, normalized);
        write_file(fs::path(common.out) / "sweep.csv",
                   [&](std::ostream& o) { write_sweep_csv(o, sweeps); });
        const std::vector<NamedDataset> both{{"id", &id}, {ood_name, &ood}};
        const auto hist = entropy_histograms(c, both, m, bins);
        write_file(fs::path(common.out) / "histogram.csv",
                   [&](std::ostream& o) { write_histogram_csv(o, hist); });
        write_file(fs::path(common.out) / "id_samples.csv",
                   [&](std::ostream& o) { write_samples_csv(o, evaluate(c, id, m)); });
        write_file(fs::path(common.out) / "ood_samples.csv",
                   [&](std::ostream& o) { write_samples_csv(o, evaluate(c, ood, m)); });
        return {{"method", sweeps[0].method}, {"auc", sweeps[0].auc},
                {"histogram_overlap", histogram_overlap(hist[0], hist[1])}};
      };
    });
  }

  // perturb
  std::vector<double> angles{0, 15, 30, 45, 60, 75, 90};
  std::size_t width = 8, height = 8;
  {
    auto* s = sub("perturb", "Mean entropy and accuracy under image rotation");
    s->add_option("--model", model, "Circuit file")->required();
    add_data(*s, data, "", "Test");
    add_inference(*s, inf);
    s->add_option("--angles", angles, "Rotation angles in degrees")
        ->delimiter(',')
        ->capture_default_str();
    s->add_option("--width", width, "Image width")->capture_default_str();
    s->add_option("--height", height, "Image height")->capture_default_str();
    s->callback([&] {
      action = [&]() -> json {
        const Circuit c = load_circuit(model);
        const Dataset rows = load_data(data, "test");
        const auto result =
            perturb_sweep(c, rows, angles, width, height, method_config(inf, common.threads));
        write_file(fs::path(common.out) / "severity.csv",
                   [&](std::ostream& o) { write_severity_csv(o, result); });
        std::vector<double> h;
        for (const auto& r : result) h.push_back(r.mean_entropy);
        return {{"levels", result.size()}, {"spearman", spearman(angles, h)}};
      };
    });
  }

  // corrupt
  std::vector<std::string> kinds{"gaussian_noise"};
  std::vector<int> severities{1, 2, 3, 4, 5};
  std::uint64_t corrupt_seed = 0;
  {
    auto* s = sub("corrupt", "Mean entropy and accuracy under corruptions");
    s->add_option("--model", model, "Circuit file")->required();
    add_data(*s, data, "", "Test");
    add_inference(*s, inf);
    s->add_option("--kinds", kinds, "gaussian_noise, brightness, contrast")
        ->delimiter(',')
        ->capture_default_str();
    s->add_option("--severities", severities, "Severity levels 0..5")
        ->delimiter(',')
        ->capture_default_str();
    s->add_option("--corruption-seed", corrupt_seed, "Noise seed")->capture_default_str();
    s->callback([&] {
      action = [&]() -> json {
        const Circuit c = load_circuit(model);
        const Dataset rows = load_data(data, "test");
        std::vector<Corruption> k;
        for (const auto& name : kinds) k.push_back(parse_corruption(name));
        const auto result = corrupt_sweep(c, rows, k, severities,
                                          method_config(inf, common.threads), corrupt_seed);
        write_file(fs::path(common.out) / "severity.csv",
                   [&](std::ostream& o) { write_severity_csv(o, result); });
        return {{"levels", result.size()}};
      };
    });
  }

  // oracle
  tools::OracleSettings oracle;
  double tolerance = 1e-6;
  {
    auto* s = sub("oracle", "TDI against exhaustive dropout-mask enumeration on random trees");
    s->add_option("--max-edges", oracle.max_edges, "Sum-edge budget per circuit")
        ->capture_default_str();
    s->add_option("--trials", oracle.trials, "Random circuits")->capture_default_str();
    s->add_option("--seed", oracle.seed, "Generator seed")->capture_default_str();
    s->add_option("--p", oracle.ps, "Dropout probabilities")->delimiter(',')->capture_default_str();
    s->add_option("--tolerance", tolerance, "Largest accepted relative error")
        ->capture_default_str();
    s->callback([&] {
      action = [&]() -> json {
        const auto r = tools::run_tree_oracle(oracle);
        write_file(fs::path(common.out) / "oracle.csv",
                   [&](std::ostream& o) { tools::write_oracle_csv(o, r); });
        if (r.max_rel() >= tolerance) {
          throw Error(ErrorKind::kNumeric, "oracle relative error " + format_real(r.max_rel()) +
                                               " exceeds " + format_real(tolerance));
        }
        return {{"circuits", r.circuits}, {"max_rel_expectation", r.max_rel_expectation},
                {"max_rel_variance", r.max_rel_variance}, {"seconds", r.seconds}};
      };
    });
  }

  // synth
  std::size_t synth_classes = 3, synth_vars = 2, synth_rows = 100;
  double separation = 4.0;
  std::uint64_t synth_seed = 0;
  {
    auto* s = sub("synth", "Write Gaussian blob data to data.csv");
    s->add_option("--classes", synth_classes, "Classes")->capture_default_str();
    s->add_option("--vars", synth_vars, "Variables")->capture_default_str();
    s->add_option("--rows", synth_rows, "Rows per class")->capture_default_str();
    s->add_option("--separation", separation, "Distance between class means")
        ->capture_default_str();
    s->add_option("--seed", synth_seed, "Seed")->capture_default_str();
    s->callback([&] {
      action = [&]() -> json {
        const Dataset d = synth_blobs(synth_classes, synth_vars, synth_rows, separation, synth_seed);
        save_csv(d, fs::path(common.out) / "data.csv");
        return {{"rows", d.rows()}};
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    return fail("io", e.what(), kExitMissingFile);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitUsage);
  }

  try {
    fs::create_directories(common.out);
    for (const CLI::App* s : subcommands) {
      if (!s->parsed()) continue;
      std::ofstream snapshot(fs::path(common.out) / "config.snapshot");
      snapshot << '[' << s->get_name() << "]\n" << s->config_to_str(true, false);
    }
    report(common, action());
    return 0;
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitOther);
  }
}
