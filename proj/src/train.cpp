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

#include "tdi/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

#include "tdi/circuit_io.hpp"
#include "tdi/logmath.hpp"
#include "tdi/parallel.hpp"

namespace tdi {
namespace {

constexpr std::size_t kChunk = 32;

void log_softmax(std::span<const double> logits, std::vector<double>& out) {
  const double norm = log_sum_exp(logits);
  out.assign(logits.begin(), logits.end());
  for (double& x : out) x -= norm;
}

}  // namespace

void TrainConfig::check() const {
  if (epochs == 0 || batch_size == 0) {
    throw Error(ErrorKind::kConfig, "epochs and batch size must be positive");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::kConfig, "learning rate must be finite and non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw Error(ErrorKind::kConfig, "invalid Adam hyperparameters");
  }
  if (!(min_log_std <= max_log_std)) throw Error(ErrorKind::kConfig, "empty log-std range");
}

ParameterLayout::ParameterLayout(const Circuit& circuit)
    : edge_param(circuit.num_edges(), -1), leaf_param(circuit.size(), -1) {
  for (std::size_t i = 0; i < circuit.size(); ++i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    if (circuit.kind(id) != NodeKind::kSum) continue;
    for (std::size_t e = circuit.edge_offset(id); e < circuit.edge_offset(NodeId{id.index + 1});
         ++e) {
      edge_param[e] = static_cast<std::ptrdiff_t>(total++);
    }
  }
  for (std::size_t i = 0; i < circuit.size(); ++i) {
    const Node& n = circuit.nodes()[i];
    if (std::holds_alternative<GaussianLeaf>(n)) {
      leaf_param[i] = static_cast<std::ptrdiff_t>(total);
      total += 2;
    } else if (const auto* c = std::get_if<CategoricalLeaf>(&n)) {
      leaf_param[i] = static_cast<std::ptrdiff_t>(total);
      total += c->log_probs.size();
    }
  }
}

std::vector<double> extract_parameters(const Circuit& circuit) {
  const ParameterLayout layout(circuit);
  std::vector<double> theta(layout.size());
  const auto lw = circuit.flat_log_weights();
  for (std::size_t e = 0; e < lw.size(); ++e) {
    if (layout.edge_param[e] >= 0) theta[static_cast<std::size_t>(layout.edge_param[e])] = lw[e];
  }
  for (std::size_t i = 0; i < circuit.size(); ++i) {
    if (layout.leaf_param[i] < 0) continue;
    const auto at = static_cast<std::size_t>(layout.leaf_param[i]);
    if (const auto* g = std::get_if<GaussianLeaf>(&circuit.nodes()[i])) {
      theta[at] = g->mean;
      theta[at + 1] = g->log_std;
    } else {
      const auto& c = std::get<CategoricalLeaf>(circuit.nodes()[i]);
      std::copy(c.log_probs.begin(), c.log_probs.end(), theta.begin() + static_cast<std::ptrdiff_t>(at));
    }
  }
  return theta;
}

Circuit apply_parameters(const Circuit& circuit, std::span<const double> parameters) {
  const ParameterLayout layout(circuit);
  if (parameters.size() != layout.size()) {
    throw Error(ErrorKind::kShape, "parameter vector has " + std::to_string(parameters.size()) +
                                       " entries, circuit needs " +
                                       std::to_string(layout.size()));
  }
  std::vector<Node> nodes = circuit.nodes();
  std::vector<double> buf;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    if (auto* s = std::get_if<SumNode>(&nodes[i])) {
      const auto first = static_cast<std::size_t>(layout.edge_param[circuit.edge_offset(id)]);
      log_softmax(parameters.subspan(first, s->children.size()), buf);
      s->log_weights = buf;
    } else if (auto* g = std::get_if<GaussianLeaf>(&nodes[i])) {
      const auto at = static_cast<std::size_t>(layout.leaf_param[i]);
      g->mean = parameters[at];
      g->log_std = parameters[at + 1];
    } else if (auto* c = std::get_if<CategoricalLeaf>(&nodes[i])) {
      const auto at = static_cast<std::size_t>(layout.leaf_param[i]);
      log_softmax(parameters.subspan(at, c->log_probs.size()), buf);
      c->log_probs = buf;
    }
  }
  return Circuit(std::move(nodes), circuit.roots(), circuit.num_variables(),
                 circuit.log_class_priors(), circuit.structure_tag());
}

LossAndGrad loss_and_grad(const Circuit& circuit, const Dataset& batch, Objective objective,
                          std::size_t threads) {
  batch.check();
  if (!batch.labels) throw Error(ErrorKind::kShape, "training data needs labels");
  const std::size_t rows = batch.rows();
  if (rows == 0) throw Error(ErrorKind::kShape, "empty batch");
  const std::size_t classes = circuit.num_classes();
  for (std::size_t b = 0; b < rows; ++b) {
    if (batch.label(b) >= classes) {
      throw Error(ErrorKind::kShape, "label " + std::to_string(batch.label(b)) + " of row " +
                                         std::to_string(b) + " is not below " +
                                         std::to_string(classes));
    }
  }
  const ParameterLayout layout(circuit);
  const std::size_t n = circuit.size();
  const std::size_t num_chunks = (rows + kChunk - 1) / kChunk;
  const double scale = 1.0 / static_cast<double>(rows);

  // Gradients with respect to log weights / log probabilities per chunk,
  // summed in chunk order afterwards.
  std::vector<std::vector<double>> chunk_grad(num_chunks);
  std::vector<double> chunk_loss(num_chunks, 0.0);
  std::vector<std::size_t> chunk_correct(num_chunks, 0);
  std::vector<std::ptrdiff_t> bad_row(num_chunks, -1);

  parallel_blocks(num_chunks, threads, [&](std::size_t cb, std::size_t ce) {
    std::vector<double> values(n), adj(n), joint(classes);
    const auto flat = circuit.flat_children();
    const auto weights = circuit.flat_log_weights();
    for (std::size_t chunk = cb; chunk < ce; ++chunk) {
      auto& grad = chunk_grad[chunk];
      grad.assign(layout.size(), 0.0);
      const std::size_t end = std::min(rows, (chunk + 1) * kChunk);
      for (std::size_t b = chunk * kChunk; b < end; ++b) {
        const Evidence ev = batch.evidence(b);
        forward_log_values(circuit, ev, values);
        const std::size_t y = batch.label(b);
        for (std::size_t k = 0; k < classes; ++k) {
          joint[k] = values[circuit.roots()[k].index] + circuit.log_class_priors()[k];
        }
        const double norm = log_sum_exp(joint);
        const double ll = values[circuit.roots()[y].index];
        const double loss =
            objective == Objective::kClassConditional ? -ll : -(joint[y] - norm);
        if (!std::isfinite(loss)) {
          bad_row[chunk] = static_cast<std::ptrdiff_t>(b);
          break;
        }
        chunk_loss[chunk] += loss;
        const auto predicted = static_cast<std::size_t>(
            std::max_element(joint.begin(), joint.end()) - joint.begin());
        if (predicted == y) ++chunk_correct[chunk];

        std::fill(adj.begin(), adj.end(), 0.0);
        if (objective == Objective::kClassConditional) {
          adj[circuit.roots()[y].index] = -scale;
        } else {
          for (std::size_t k = 0; k < classes; ++k) {
            adj[circuit.roots()[k].index] += scale * std::exp(joint[k] - norm);
          }
          adj[circuit.roots()[y].index] -= scale;
        }
        for (std::size_t i = n; i-- > 0;) {
          const double a = adj[i];
          if (a == 0.0) continue;
          const NodeId id{static_cast<std::uint32_t>(i)};
          const std::size_t begin = circuit.edge_offset(id);
          const std::size_t stop = circuit.edge_offset(NodeId{id.index + 1});
          switch (circuit.kind(id)) {
            case NodeKind::kSum: {
              if (values[i] == kNegInf) break;
              for (std::size_t e = begin; e < stop; ++e) {
                const std::size_t c = flat[e].index;
                const double r = std::exp(weights[e] + values[c] - values[i]);
                grad[static_cast<std::size_t>(layout.edge_param[e])] += a * r;
                adj[c] += a * r;
              }
              break;
            }
            case NodeKind::kProduct:
              for (std::size_t e = begin; e < stop; ++e) adj[flat[e].index] += a;
              break;
            case NodeKind::kGaussian: {
              const auto& g = std::get<GaussianLeaf>(circuit.nodes()[i]);
              const auto& x = ev.values[g.variable];
              if (!x) break;
              const auto at = static_cast<std::size_t>(layout.leaf_param[i]);
              const double sigma = std::exp(g.log_std);
              const double z = (*x - g.mean) / sigma;
              grad[at] += a * z / sigma;
              grad[at + 1] += a * (z * z - 1.0);
              break;
            }
            case NodeKind::kCategorical: {
              const auto& cat = std::get<CategoricalLeaf>(circuit.nodes()[i]);
              const auto& x = ev.values[cat.variable];
              if (!x) break;
              const auto at = static_cast<std::size_t>(layout.leaf_param[i]);
              grad[at + static_cast<std::size_t>(std::round(*x))] += a;
              break;
            }
          }
        }
      }
    }
  });

  for (std::size_t chunk = 0; chunk < num_chunks; ++chunk) {
    if (bad_row[chunk] >= 0) {
      throw Error(ErrorKind::kNumeric,
                  "non-finite loss at row " + std::to_string(bad_row[chunk]));
    }
  }
  LossAndGrad out;
  out.gradient.assign(layout.size(), 0.0);
  for (std::size_t chunk = 0; chunk < num_chunks; ++chunk) {
    out.loss += chunk_loss[chunk];
    out.correct += chunk_correct[chunk];
    for (std::size_t j = 0; j < layout.size(); ++j) out.gradient[j] += chunk_grad[chunk][j];
  }
  out.loss *= scale;

  // Chain rule through the per-node log-softmax: g_logit = g - softmax * sum(g).
  auto through_softmax = [&](std::size_t at, std::span<const double> log_probs) {
    double total = 0.0;
    for (std::size_t k = 0; k < log_probs.size(); ++k) total += out.gradient[at + k];
    for (std::size_t k = 0; k < log_probs.size(); ++k) {
      out.gradient[at + k] -= std::exp(log_probs[k]) * total;
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    if (circuit.kind(id) == NodeKind::kSum) {
      through_softmax(static_cast<std::size_t>(layout.edge_param[circuit.edge_offset(id)]),
                      circuit.log_weights(id));
    } else if (const auto* c = std::get_if<CategoricalLeaf>(&circuit.nodes()[i])) {
      through_softmax(static_cast<std::size_t>(layout.leaf_param[i]), c->log_probs);
    }
  }
  return out;
}

TrainResult fit(const Circuit& circuit, const Dataset& data, const TrainConfig& config) {
  config.check();
  data.check();
  if (data.rows() == 0) throw Error(ErrorKind::kShape, "training data is empty");
  require_valid(circuit);

  const ParameterLayout layout(circuit);
  std::vector<bool> is_log_std(layout.size(), false);
  for (std::size_t i = 0; i < circuit.size(); ++i) {
    if (layout.leaf_param[i] >= 0 && std::holds_alternative<GaussianLeaf>(circuit.nodes()[i])) {
      is_log_std[static_cast<std::size_t>(layout.leaf_param[i]) + 1] = true;
    }
  }

  std::vector<double> theta = extract_parameters(circuit);
  TrainResult result;
  result.state.m.assign(theta.size(), 0.0);
  result.state.v.assign(theta.size(), 0.0);
  auto current = std::make_shared<const Circuit>(apply_parameters(circuit, theta));
  std::mt19937_64 rng(config.rng_seed);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const Dataset batch =
          data.subset(std::span<const std::size_t>(order.data() + start, stop - start));
      LossAndGrad lg;
      try {
        lg = loss_and_grad(*current, batch, config.objective, config.threads);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        throw TrainingDiverged("training diverged in epoch " + std::to_string(epoch) + ": " +
                                   e.what(),
                               current, result.history);
      }
      loss_sum += lg.loss * static_cast<double>(stop - start);
      correct += lg.correct;

      auto& st = result.state;
      ++st.step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(st.step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(st.step));
      for (std::size_t j = 0; j < theta.size(); ++j) {
        const double g = lg.gradient[j];
        if (config.optimizer == Optimizer::kAdam) {
          st.m[j] = config.beta1 * st.m[j] + (1.0 - config.beta1) * g;
          st.v[j] = config.beta2 * st.v[j] + (1.0 - config.beta2) * g * g;
          const double step = config.learning_rate * (st.m[j] / bc1) /
                              (std::sqrt(st.v[j] / bc2) + config.epsilon);
          theta[j] -= step;
        } else {
          theta[j] -= config.learning_rate * g;
        }
        if (is_log_std[j]) theta[j] = std::clamp(theta[j], config.min_log_std, config.max_log_std);
      }
      current = std::make_shared<const Circuit>(apply_parameters(circuit, theta));
    }
    result.history.push_back({epoch, loss_sum / static_cast<double>(data.rows()),
                              static_cast<double>(correct) / static_cast<double>(data.rows())});
  }
  result.circuit = current;
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,loss,accuracy\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_real(r.loss) << ',' << format_real(r.accuracy) << '\n';
  }
}

void save_optimizer_state(const OptimizerState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  nlohmann::json j{{"step", state.step}, {"m", state.m}, {"v", state.v}};
  out << j.dump() << '\n';
}

OptimizerState load_optimizer_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return {j.at("step").get<std::uint64_t>(), j.at("m").get<std::vector<double>>(),
            j.at("v").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad optimizer state: ") + e.what());
  }
}

}  // namespace tdi
