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
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "tdi/circuit.hpp"
#include "tdi/dataset.hpp"
#include "tdi/error.hpp"

namespace tdi {

enum class Optimizer { kAdam, kSgd };

enum class Objective {
  kClassConditional,  // -log S_y(x), the head of the observed label
  kCrossEntropy,      // -log p(y | x)
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 200;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t rng_seed = 0;
  Objective objective = Objective::kClassConditional;
  double min_log_std = -7.0;
  double max_log_std = 7.0;
  /// Worker threads; 0 uses the hardware concurrency.
  std::size_t threads = 1;

  void check() const;
};

/// Flat vector of trainable parameters: one logit per sum edge (in flat edge
/// order), then mean and log-std of every Gaussian leaf, then the logits of
/// every categorical leaf, all in node order.
struct ParameterLayout {
  explicit ParameterLayout(const Circuit& circuit);

  std::size_t size() const { return total; }

  std::vector<std::ptrdiff_t> edge_param;  // per flat edge, -1 for product slots
  std::vector<std::ptrdiff_t> leaf_param;  // per node, first parameter of a leaf or -1
  std::size_t total = 0;
};

std::vector<double> extract_parameters(const Circuit& circuit);
/// Same structure with sum weights log_softmax(logits) and the given leaf
/// parameters.
Circuit apply_parameters(const Circuit& circuit, std::span<const double> parameters);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> gradient;
  std::size_t correct = 0;  // argmax posterior hits in the batch
};

/// Mean loss over the rows and its gradient with respect to
/// extract_parameters(circuit). Throws Error(kNumeric) naming the first row
/// with a non-finite loss, Error(kShape) for out-of-range labels.
LossAndGrad loss_and_grad(const Circuit& circuit, const Dataset& batch,
                          Objective objective = Objective::kClassConditional,
                          std::size_t threads = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

struct TrainResult {
  std::shared_ptr<const Circuit> circuit;
  std::vector<EpochRecord> history;
  OptimizerState state;
};

/// Raised when the loss becomes non-finite; carries the last finite state.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::string message, std::shared_ptr<const Circuit> checkpoint,
                   std::vector<EpochRecord> history)
      : Error(ErrorKind::kNumeric, std::move(message)),
        checkpoint_(std::move(checkpoint)),
        history_(std::move(history)) {}

  const std::shared_ptr<const Circuit>& checkpoint() const { return checkpoint_; }
  const std::vector<EpochRecord>& history() const { return history_; }

 private:
  std::shared_ptr<const Circuit> checkpoint_;
  std::vector<EpochRecord> history_;
};

/// Mini-batch training; the structure is never changed. Each epoch visits
/// the rows in a seeded random order.
TrainResult fit(const Circuit& circuit, const Dataset& data, const TrainConfig& config);

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);
void save_optimizer_state(const OptimizerState& state, const std::filesystem::path& path);
OptimizerState load_optimizer_state(const std::filesystem::path& path);

}  // namespace tdi
