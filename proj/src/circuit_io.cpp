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

#include "tdi/circuit_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tdi/error.hpp"
#include "tdi/logmath.hpp"

namespace tdi {

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

void write_real(std::ostream& os, double value) {
  if (std::isfinite(value)) {
    os << format_real(value);
  } else {
    os << '"' << format_real(value) << '"';
  }
}

template <typename T, typename F>
void write_array(std::ostream& os, const std::vector<T>& xs, F&& write_one) {
  os << '[';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ',';
    write_one(xs[i]);
  }
  os << ']';
}

using nlohmann::json;

double read_real(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return kNegInf;
    if (s == "inf") return -kNegInf;
  }
  throw Error(ErrorKind::kFormat, "expected a real number, got " + j.dump());
}

std::vector<double> read_reals(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::kFormat, "expected an array of reals");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(read_real(x));
  return out;
}

std::vector<NodeId> read_ids(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::kFormat, "expected an array of node ids");
  std::vector<NodeId> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number_unsigned()) {
      throw Error(ErrorKind::kFormat, "node id must be a non-negative integer");
    }
    out.push_back(NodeId{x.get<std::uint32_t>()});
  }
  return out;
}

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    throw Error(ErrorKind::kFormat, std::string("missing field \"") + name + "\"");
  }
  return *it;
}

}  // namespace

std::string serialize(const Circuit& circuit) {
  std::ostringstream os;
  os << "{\"version\":" << kCircuitFormatVersion
     << ",\"num_variables\":" << circuit.num_variables() << ",\"structure\":\""
     << (circuit.structure_tag() == StructureTag::kBinaryRat ? "binary_rat" : "generic")
     << "\",\"log_class_priors\":";
  write_array(os, circuit.log_class_priors(), [&](double v) { write_real(os, v); });
  os << ",\"roots\":";
  write_array(os, circuit.roots(), [&](NodeId r) { os << r.index; });
  os << ",\n\"nodes\":[";
  const auto& nodes = circuit.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    os << (i ? ",\n" : "\n");
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SumNode>) {
            os << "{\"kind\":\"sum\",\"children\":";
            write_array(os, n.children, [&](NodeId c) { os << c.index; });
            os << ",\"log_weights\":";
            write_array(os, n.log_weights, [&](double v) { write_real(os, v); });
          } else if constexpr (std::is_same_v<T, ProductNode>) {
            os << "{\"kind\":\"product\",\"children\":";
            write_array(os, n.children, [&](NodeId c) { os << c.index; });
          } else if constexpr (std::is_same_v<T, GaussianLeaf>) {
            os << "{\"kind\":\"gaussian\",\"variable\":" << n.variable << ",\"mean\":";
            write_real(os, n.mean);
            os << ",\"log_std\":";
            write_real(os, n.log_std);
          } else {
            os << "{\"kind\":\"categorical\",\"variable\":" << n.variable
               << ",\"log_probs\":";
            write_array(os, n.log_probs, [&](double v) { write_real(os, v); });
          }
          os << '}';
        },
        nodes[i]);
  }
  os << "\n]}\n";
  return os.str();
}

Circuit deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed circuit file: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::kFormat, "circuit file is not an object");
  const auto& version = field(doc, "version");
  if (!version.is_number_integer() || version.get<int>() != kCircuitFormatVersion) {
    throw Error(ErrorKind::kFormat, "unknown circuit file version " + version.dump());
  }

  try {
    const auto num_variables = field(doc, "num_variables").get<std::size_t>();
    StructureTag tag = StructureTag::kGeneric;
    if (auto it = doc.find("structure"); it != doc.end()) {
      const auto s = it->get<std::string>();
      if (s == "binary_rat") {
        tag = StructureTag::kBinaryRat;
      } else if (s != "generic") {
        throw Error(ErrorKind::kFormat, "unknown structure tag \"" + s + "\"");
      }
    }
    auto priors = read_reals(field(doc, "log_class_priors"));
    auto roots = read_ids(field(doc, "roots"));

    const auto& jnodes = field(doc, "nodes");
    if (!jnodes.is_array()) throw Error(ErrorKind::kFormat, "\"nodes\" must be an array");
    std::vector<Node> nodes;
    nodes.reserve(jnodes.size());
    for (const auto& jn : jnodes) {
      const auto kind = field(jn, "kind").get<std::string>();
      if (kind == "sum") {
        nodes.emplace_back(SumNode{read_ids(field(jn, "children")),
                                   read_reals(field(jn, "log_weights"))});
      } else if (kind == "product") {
        nodes.emplace_back(ProductNode{read_ids(field(jn, "children"))});
      } else if (kind == "gaussian") {
        nodes.emplace_back(GaussianLeaf{field(jn, "variable").get<std::size_t>(),
                                        read_real(field(jn, "mean")),
                                        read_real(field(jn, "log_std"))});
      } else if (kind == "categorical") {
        nodes.emplace_back(CategoricalLeaf{field(jn, "variable").get<std::size_t>(),
                                           read_reals(field(jn, "log_probs"))});
      } else {
        throw Error(ErrorKind::kFormat, "unknown node kind \"" + kind + "\"");
      }
    }
    Circuit circuit(std::move(nodes), std::move(roots), num_variables,
                    std::move(priors), tag);
    require_valid(circuit);
    return circuit;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed circuit file: ") + e.what());
  }
}

void save_circuit(const Circuit& circuit, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << serialize(circuit);
}

Circuit load_circuit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace tdi
