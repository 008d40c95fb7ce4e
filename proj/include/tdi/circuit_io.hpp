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

#include <filesystem>
#include <string>
#include <string_view>

#include "tdi/circuit.hpp"

namespace tdi {

inline constexpr int kCircuitFormatVersion = 1;

// JSON circuit file:
//   {"version": 1, "num_variables": n, "structure": "generic"|"binary_rat",
//    "log_class_priors": [...], "roots": [...],
//    "nodes": [{"kind": "sum", "children": [...], "log_weights": [...]},
//              {"kind": "product", "children": [...]},
//              {"kind": "gaussian", "variable": v, "mean": m, "log_std": s},
//              {"kind": "categorical", "variable": v, "log_probs": [...]}]}
// Nodes appear in topological order. Reals are written with 17 significant
// digits; -inf log values are written as the string "-inf".
std::string serialize(const Circuit& circuit);

/// Parses and validates. Throws Error(kFormat) for malformed input or an
/// unknown version, Error(kValidation) when the loaded circuit is invalid.
Circuit deserialize(std::string_view text);

void save_circuit(const Circuit& circuit, const std::filesystem::path& path);
Circuit load_circuit(const std::filesystem::path& path);

/// Decimal with 17 significant digits, "-inf"/"inf"/"nan" for non-finite values.
std::string format_real(double value);

}  // namespace tdi
