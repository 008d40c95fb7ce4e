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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tdi/circuit.hpp"

namespace tdi {

struct Normalization {
  std::vector<double> mean;
  std::vector<double> std_dev;
};

/// Row-major feature matrix with optional labels. NaN features are treated
/// as missing and marginalized at evaluation time.
struct Dataset {
  std::string name;
  std::size_t num_features = 0;
  std::vector<double> features;
  std::optional<std::vector<std::size_t>> labels;
  std::optional<Normalization> normalization;

  std::size_t rows() const { return num_features == 0 ? 0 : features.size() / num_features; }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  Evidence evidence(std::size_t i) const { return Evidence::from_row(row(i)); }
  std::size_t label(std::size_t i) const { return (*labels)[i]; }

  /// Throws Error(kShape) when the matrix or labels are inconsistent.
  void check() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Big-endian IDX: magic 0x00000803 for images (pixels scaled by 1/255),
/// 0x00000801 for labels. Throws Error(kIo) when a file cannot be opened and
/// Error(kFormat) for a bad magic, truncation or mismatched counts.
Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels = std::nullopt);

/// Writes features (expected in [0, 1], rounded to bytes) as a rows x height x
/// width image file, and labels when present.
void save_idx(const Dataset& dataset, std::size_t height, std::size_t width,
              const std::filesystem::path& images,
              const std::optional<std::filesystem::path>& labels = std::nullopt);

/// CSV with a header row; a column named "label" holds class indices, empty
/// or "nan" cells are missing values.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Rotates every width x height image counterclockwise about its center with
/// bilinear interpolation and zero padding. 0 degrees is the identity.
Dataset rotate(const Dataset& dataset, double degrees, std::size_t width, std::size_t height);

enum class Corruption { kGaussianNoise, kBrightness, kContrast };

std::string_view to_string(Corruption kind);
Corruption parse_corruption(std::string_view text);

/// Severity 1..5; results clamped to [0, 1]. Deterministic under seed.
Dataset corrupt(const Dataset& dataset, Corruption kind, int severity, std::uint64_t seed);

/// Isotropic unit-variance Gaussian clusters. Class 0 is centered at the
/// origin and class c > 0 at `separation` times a random unit direction.
Dataset synth_blobs(std::size_t num_classes, std::size_t num_vars, std::size_t rows_per_class,
                    double separation, std::uint64_t seed);

/// Rows whose label is in `classes`; with relabel the labels become the
/// position within `classes`.
Dataset filter_classes(const Dataset& dataset, std::span<const std::size_t> classes,
                       bool relabel);

/// Seeded shuffle, then the first round(fraction * rows) rows form the second set.
std::pair<Dataset, Dataset> split_rows(const Dataset& dataset, double second_fraction,
                                       std::uint64_t seed);

/// Per-feature mean and standard deviation (floored at 1e-6) of the rows.
Normalization fit_normalization(const Dataset& dataset);
/// (x - mean) / std per feature; records the statistics on the result.
Dataset apply_normalization(const Dataset& dataset, const Normalization& normalization);

void save_normalization(const Normalization& normalization, const std::filesystem::path& path);
Normalization load_normalization(const std::filesystem::path& path);

}  // namespace tdi
