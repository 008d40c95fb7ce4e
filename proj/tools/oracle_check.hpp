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
#include <iosfwd>
#include <vector>

namespace tdi::tools {

struct OracleSettings {
  std::size_t trials = 200;
  std::size_t max_edges = 12;
  std::vector<double> ps{0.05, 0.1, 0.2};
  std::uint64_t seed = 7;
};

struct OracleRow {
  std::size_t trial = 0;
  double p = 0.0;
  std::size_t root = 0;
  double tdi_expectation = 0.0;
  double exact_expectation = 0.0;
  double tdi_variance = 0.0;
  double exact_variance = 0.0;
};

struct OracleSummary {
  std::size_t circuits = 0;
  double max_rel_expectation = 0.0;
  double max_rel_variance = 0.0;
  double seconds = 0.0;
  std::vector<OracleRow> rows;

  double max_rel() const;
};

/// Root E and Var of TDI against exhaustive mask enumeration on random trees
/// with at most `max_edges` sum edges, for every p in the settings.
OracleSummary run_tree_oracle(const OracleSettings& settings);

void write_oracle_csv(std::ostream& out, const OracleSummary& summary);

}  // namespace tdi::tools
