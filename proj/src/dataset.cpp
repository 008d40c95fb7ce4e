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

#include "tdi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "tdi/circuit_io.hpp"
#include "tdi/error.hpp"

namespace tdi {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                   const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw Error(ErrorKind::kFormat, "truncated IDX header in " + path.string());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

double bilinear(std::span<const double> img, std::size_t w, std::size_t h, double x, double y) {
  auto snap = [](double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
  };
  x = snap(x);
  y = snap(y);
  const double fx = std::floor(x), fy = std::floor(y);
  const double tx = x - fx, ty = y - fy;
  auto at = [&](double xi, double yi) -> double {
    if (xi < 0 || yi < 0 || xi >= static_cast<double>(w) || yi >= static_cast<double>(h)) {
      return 0.0;
    }
    return img[static_cast<std::size_t>(yi) * w + static_cast<std::size_t>(xi)];
  };
  double v = 0.0;
  if ((1 - tx) * (1 - ty) > 0) v += (1 - tx) * (1 - ty) * at(fx, fy);
  if (tx * (1 - ty) > 0) v += tx * (1 - ty) * at(fx + 1, fy);
  if ((1 - tx) * ty > 0) v += (1 - tx) * ty * at(fx, fy + 1);
  if (tx * ty > 0) v += tx * ty * at(fx + 1, fy + 1);
  return v;
}

}  // namespace

void Dataset::check() const {
  if (num_features == 0 || features.size() % num_features != 0) {
    throw Error(ErrorKind::kShape, "feature matrix is not rows x " + std::to_string(num_features));
  }
  if (labels && labels->size() != rows()) {
    throw Error(ErrorKind::kShape, "label count does not match the row count");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.name = name;
  out.num_features = num_features;
  out.normalization = normalization;
  out.features.reserve(indices.size() * num_features);
  if (labels) out.labels.emplace();
  for (std::size_t i : indices) {
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    if (labels) out.labels->push_back((*labels)[i]);
  }
  return out;
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels) {
  const auto bytes = read_bytes(images);
  if (be32(bytes, 0, images) != kImageMagic) {
    throw Error(ErrorKind::kFormat, "bad IDX image magic in " + images.string());
  }
  const std::size_t n = be32(bytes, 4, images);
  const std::size_t h = be32(bytes, 8, images);
  const std::size_t w = be32(bytes, 12, images);
  if (h == 0 || w == 0) throw Error(ErrorKind::kFormat, "empty image dimensions");
  if (bytes.size() < 16 + n * h * w) {
    throw Error(ErrorKind::kFormat, "truncated IDX image data in " + images.string());
  }
  Dataset out;
  out.name = images.stem().string();
  out.num_features = h * w;
  out.features.resize(n * h * w);
  for (std::size_t i = 0; i < out.features.size(); ++i) out.features[i] = bytes[16 + i] / 255.0;
  if (labels) {
    const auto lb = read_bytes(*labels);
    if (be32(lb, 0, *labels) != kLabelMagic) {
      throw Error(ErrorKind::kFormat, "bad IDX label magic in " + labels->string());
    }
    const std::size_t m = be32(lb, 4, *labels);
    if (m != n) throw Error(ErrorKind::kFormat, "image and label counts differ");
    if (lb.size() < 8 + m) {
      throw Error(ErrorKind::kFormat, "truncated IDX label data in " + labels->string());
    }
    out.labels.emplace(lb.begin() + 8, lb.begin() + 8 + static_cast<std::ptrdiff_t>(m));
  }
  return out;
}

void save_idx(const Dataset& dataset, std::size_t height, std::size_t width,
              const std::filesystem::path& images,
              const std::optional<std::filesystem::path>& labels) {
  dataset.check();
  if (height * width != dataset.num_features) {
    throw Error(ErrorKind::kShape, "image size does not match the feature count");
  }
  std::ofstream out(images, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + images.string());
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(dataset.rows()));
  put_be32(out, static_cast<std::uint32_t>(height));
  put_be32(out, static_cast<std::uint32_t>(width));
  for (double v : dataset.features) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255))));
  }
  if (labels && dataset.labels) {
    std::ofstream lo(*labels, std::ios::binary);
    if (!lo) throw Error(ErrorKind::kIo, "cannot write " + labels->string());
    put_be32(lo, kLabelMagic);
    put_be32(lo, static_cast<std::uint32_t>(dataset.rows()));
    for (std::size_t l : *dataset.labels) lo.put(static_cast<char>(l));
  }
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kFormat, "empty CSV " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  std::optional<std::size_t> label_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "label") label_col = i;
  }
  Dataset out;
  out.name = path.stem().string();
  out.num_features = header.size() - (label_col ? 1 : 0);
  if (out.num_features == 0) throw Error(ErrorKind::kFormat, "CSV has no feature columns");
  if (label_col) out.labels.emplace();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) +
                                          ": expected " + std::to_string(header.size()) +
                                          " cells");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      if (label_col && i == *label_col) {
        try {
          out.labels->push_back(std::stoul(c));
        } catch (const std::logic_error&) {
          throw Error(ErrorKind::kFormat, "bad label \"" + c + "\" on line " +
                                              std::to_string(line_no));
        }
        continue;
      }
      if (c.empty() || c == "nan" || c == "NaN") {
        out.features.push_back(std::nan(""));
        continue;
      }
      try {
        std::size_t used = 0;
        out.features.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::kFormat, "bad value \"" + c + "\" on line " +
                                            std::to_string(line_no));
      }
    }
  }
  return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.check();
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (std::size_t j = 0; j < dataset.num_features; ++j) out << (j ? "," : "") << "x" << j;
  if (dataset.labels) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    const auto r = dataset.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      out << (j ? "," : "") << (std::isnan(r[j]) ? std::string() : format_real(r[j]));
    }
    if (dataset.labels) out << ',' << dataset.label(i);
    out << '\n';
  }
}

Dataset rotate(const Dataset& dataset, double degrees, std::size_t width, std::size_t height) {
  if (width * height != dataset.num_features) {
    throw Error(ErrorKind::kShape, "width x height does not match the feature count");
  }
  if (degrees == 0.0) return dataset;
  const double theta = degrees * M_PI / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (static_cast<double>(width) - 1) / 2;
  const double cy = (static_cast<double>(height) - 1) / 2;
  Dataset out = dataset;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    const auto src = dataset.row(i);
    double* dst = out.features.data() + i * dataset.num_features;
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        dst[y * width + x] = bilinear(src, width, height, cx + c * dx - s * dy, cy + s * dx + c * dy);
      }
    }
  }
  return out;
}

std::string_view to_string(Corruption kind) {
  switch (kind) {
    case Corruption::kGaussianNoise: return "gaussian_noise";
    case Corruption::kBrightness: return "brightness";
    case Corruption::kContrast: return "contrast";
  }
  return "unknown";
}

Corruption parse_corruption(std::string_view text) {
  for (auto k : {Corruption::kGaussianNoise, Corruption::kBrightness, Corruption::kContrast}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorKind::kConfig, "unknown corruption \"" + std::string(text) + "\"");
}

Dataset corrupt(const Dataset& dataset, Corruption kind, int severity, std::uint64_t seed) {
  if (severity < 1 || severity > 5) {
    throw Error(ErrorKind::kConfig, "severity must be in 1..5, got " + std::to_string(severity));
  }
  static constexpr double kNoise[] = {0.04, 0.08, 0.12, 0.18, 0.26};
  static constexpr double kBrightness[] = {0.1, 0.2, 0.3, 0.4, 0.5};
  static constexpr double kContrast[] = {0.75, 0.6, 0.45, 0.3, 0.2};
  const auto s = static_cast<std::size_t>(severity - 1);
  Dataset out = dataset;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, kNoise[s]);
  for (double& v : out.features) {
    if (std::isnan(v)) continue;
    switch (kind) {
      case Corruption::kGaussianNoise: v += noise(rng); break;
      case Corruption::kBrightness: v += kBrightness[s]; break;
      case Corruption::kContrast: v = (v - 0.5) * kContrast[s] + 0.5; break;
    }
    v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Dataset synth_blobs(std::size_t num_classes, std::size_t num_vars, std::size_t rows_per_class,
                    double separation, std::uint64_t seed) {
  if (num_classes == 0 || num_vars == 0) {
    throw Error(ErrorKind::kConfig, "blobs need at least one class and one variable");
  }
  if (!(separation >= 0.0)) throw Error(ErrorKind::kConfig, "separation must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> means(num_classes * num_vars, 0.0);
  for (std::size_t c = 1; c < num_classes; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < num_vars; ++j) {
      const double d = normal(rng);
      means[c * num_vars + j] = d;
      norm += d * d;
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < num_vars; ++j) {
      means[c * num_vars + j] *= norm > 0 ? separation / norm : 0.0;
    }
  }
  Dataset out;
  out.name = "blobs";
  out.num_features = num_vars;
  out.labels.emplace();
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t r = 0; r < rows_per_class; ++r) {
      for (std::size_t j = 0; j < num_vars; ++j) {
        out.features.push_back(means[c * num_vars + j] + normal(rng));
      }
      out.labels->push_back(c);
    }
  }
  return out;
}

Dataset filter_classes(const Dataset& dataset, std::span<const std::size_t> classes,
                       bool relabel) {
  if (!dataset.labels) throw Error(ErrorKind::kShape, "dataset has no labels");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    if (std::find(classes.begin(), classes.end(), dataset.label(i)) != classes.end()) {
      keep.push_back(i);
    }
  }
  Dataset out = dataset.subset(keep);
  if (relabel) {
    for (auto& l : *out.labels) {
      l = static_cast<std::size_t>(std::find(classes.begin(), classes.end(), l) - classes.begin());
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split_rows(const Dataset& dataset, double second_fraction,
                                       std::uint64_t seed) {
  std::vector<std::size_t> idx(dataset.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(
      std::lround(std::clamp(second_fraction, 0.0, 1.0) * static_cast<double>(idx.size())));
  std::vector<std::size_t> second(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<std::size_t> first(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {dataset.subset(first), dataset.subset(second)};
}

Normalization fit_normalization(const Dataset& dataset) {
  const std::size_t d = dataset.num_features;
  Normalization n{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  std::vector<std::size_t> count(d, 0);
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    const auto r = dataset.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (std::isnan(r[j])) continue;
      n.mean[j] += r[j];
      ++count[j];
    }
  }
  for (std::size_t j = 0; j < d; ++j) n.mean[j] /= std::max<std::size_t>(count[j], 1);
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    const auto r = dataset.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isnan(r[j])) n.std_dev[j] += (r[j] - n.mean[j]) * (r[j] - n.mean[j]);
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    n.std_dev[j] = std::max(std::sqrt(n.std_dev[j] / std::max<std::size_t>(count[j], 1)), 1e-6);
  }
  return n;
}

Dataset apply_normalization(const Dataset& dataset, const Normalization& normalization) {
  if (normalization.mean.size() != dataset.num_features) {
    throw Error(ErrorKind::kShape, "normalization does not match the feature count");
  }
  Dataset out = dataset;
  for (std::size_t i = 0; i < out.features.size(); ++i) {
    const std::size_t j = i % out.num_features;
    out.features[i] = (out.features[i] - normalization.mean[j]) / normalization.std_dev[j];
  }
  out.normalization = normalization;
  return out;
}

void save_normalization(const Normalization& normalization, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  nlohmann::json j{{"mean", normalization.mean}, {"std", normalization.std_dev}};
  out << j.dump() << '\n';
}

Normalization load_normalization(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad normalization file: ") + e.what());
  }
}

}  // namespace tdi
