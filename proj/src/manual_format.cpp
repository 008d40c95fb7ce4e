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

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tdi/error.hpp"
#include "tdi/structure.hpp"

namespace tdi {
namespace {

struct RawNode {
  std::string kind;
  std::vector<std::string> args;
  std::size_t line = 0;
};

[[noreturn]] void syntax(std::size_t line, const std::string& message) {
  throw Error(ErrorKind::kFormat, "line " + std::to_string(line) + ": " + message);
}

double parse_real(const std::string& token, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) syntax(line, "bad number \"" + token + "\"");
    return v;
  } catch (const std::logic_error&) {
    syntax(line, "bad number \"" + token + "\"");
  }
}

std::size_t parse_index(const std::string& token, std::size_t line) {
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) {
    syntax(line, "bad variable index \"" + token + "\"");
  }
  return std::stoul(token);
}

class ManualParser {
 public:
  explicit ManualParser(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
      ++line;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      std::istringstream words(raw);
      std::vector<std::string> tokens;
      for (std::string w; words >> w;) tokens.push_back(w);
      if (tokens.empty()) continue;
      directive_or_node(tokens, line);
    }
  }

  Circuit build() {
    if (raw_.empty()) throw Error(ErrorKind::kFormat, "no nodes defined");
    for (const auto& [name, node] : raw_) visit(name, node.line);
    if (root_names_.empty()) {
      std::map<std::string, int> referenced;
      for (const auto& [name, node] : raw_) {
        for (const auto& child : children_of(node)) referenced[child] = 1;
      }
      for (const auto& [name, node] : raw_) {
        if (!referenced.count(name)) root_names_.push_back(name);
      }
      if (root_names_.size() != 1) {
        throw Error(ErrorKind::kFormat, "cannot infer the root; add a \"roots\" line");
      }
    }
    std::vector<NodeId> roots;
    for (const auto& r : root_names_) {
      auto it = index_.find(r);
      if (it == index_.end()) throw Error(ErrorKind::kFormat, "unknown root \"" + r + "\"");
      roots.push_back(it->second);
    }
    std::vector<double> log_priors;
    if (priors_.empty()) {
      log_priors.assign(roots.size(), -std::log(static_cast<double>(roots.size())));
    } else {
      for (double p : priors_) log_priors.push_back(std::log(p));
    }
    Circuit circuit(std::move(nodes_), std::move(roots), num_variables_.value_or(max_var_ + 1),
                    std::move(log_priors), tag_);
    require_valid(circuit);
    return circuit;
  }

 private:
  void directive_or_node(const std::vector<std::string>& t, std::size_t line) {
    if (t[0] == "vars") {
      if (t.size() != 2) syntax(line, "expected \"vars N\"");
      num_variables_ = parse_index(t[1], line);
    } else if (t[0] == "roots") {
      root_names_.assign(t.begin() + 1, t.end());
    } else if (t[0] == "priors") {
      for (std::size_t i = 1; i < t.size(); ++i) priors_.push_back(parse_real(t[i], line));
    } else if (t[0] == "structure") {
      if (t.size() != 2 || (t[1] != "generic" && t[1] != "binary_rat")) {
        syntax(line, "expected \"structure generic|binary_rat\"");
      }
      tag_ = t[1] == "binary_rat" ? StructureTag::kBinaryRat : StructureTag::kGeneric;
    } else {
      if (t.size() < 2) syntax(line, "expected \"id kind args...\"");
      if (raw_.count(t[0])) syntax(line, "duplicate node id \"" + t[0] + "\"");
      raw_[t[0]] = RawNode{t[1], {t.begin() + 2, t.end()}, line};
    }
  }

  static std::vector<std::string> children_of(const RawNode& node) {
    std::vector<std::string> out;
    if (node.kind == "sum") {
      for (const auto& a : node.args) out.push_back(a.substr(0, a.rfind(':')));
    } else if (node.kind == "product") {
      out = node.args;
    }
    return out;
  }

  // Depth-first emission so that children precede parents.
  NodeId visit(const std::string& name, std::size_t from_line) {
    if (auto it = index_.find(name); it != index_.end()) return it->second;
    auto raw = raw_.find(name);
    if (raw == raw_.end()) syntax(from_line, "unknown node id \"" + name + "\"");
    if (!on_stack_.insert({name, 1}).second) {
      throw Error(ErrorKind::kFormat, "cycle through node \"" + name + "\"");
    }
    const RawNode& r = raw->second;
    Node node = make(r, [&](const std::string& child) { return visit(child, r.line); });
    on_stack_.erase(name);
    nodes_.push_back(std::move(node));
    const NodeId id{static_cast<std::uint32_t>(nodes_.size() - 1)};
    index_[name] = id;
    return id;
  }

  template <typename Visit>
  Node make(const RawNode& r, Visit&& child) {
    if (r.kind == "sum") {
      if (r.args.empty()) syntax(r.line, "sum without children");
      SumNode s;
      for (const auto& a : r.args) {
        const auto colon = a.rfind(':');
        if (colon == std::string::npos) syntax(r.line, "sum child needs \"id:weight\"");
        s.children.push_back(child(a.substr(0, colon)));
        const double w = parse_real(a.substr(colon + 1), r.line);
        s.log_weights.push_back(std::log(w));
      }
      return s;
    }
    if (r.kind == "product") {
      if (r.args.empty()) syntax(r.line, "product without children");
      ProductNode p;
      for (const auto& a : r.args) p.children.push_back(child(a));
      return p;
    }
    if (r.kind == "gaussian") {
      if (r.args.size() != 3) syntax(r.line, "expected \"gaussian variable mean std\"");
      const std::size_t v = parse_index(r.args[0], r.line);
      const double stddev = parse_real(r.args[2], r.line);
      if (!(stddev > 0.0)) syntax(r.line, "standard deviation must be positive");
      max_var_ = std::max(max_var_, v);
      return GaussianLeaf{v, parse_real(r.args[1], r.line), std::log(stddev)};
    }
    if (r.kind == "categorical") {
      if (r.args.size() < 2) syntax(r.line, "expected \"categorical variable p0 p1 ...\"");
      CategoricalLeaf c;
      c.variable = parse_index(r.args[0], r.line);
      max_var_ = std::max(max_var_, c.variable);
      for (std::size_t i = 1; i < r.args.size(); ++i) {
        c.log_probs.push_back(std::log(parse_real(r.args[i], r.line)));
      }
      return c;
    }
    syntax(r.line, "unknown node kind \"" + r.kind + "\"");
  }

  std::map<std::string, RawNode> raw_;
  std::map<std::string, NodeId> index_;
  std::map<std::string, int> on_stack_;
  std::vector<Node> nodes_;
  std::vector<std::string> root_names_;
  std::vector<double> priors_;
  std::optional<std::size_t> num_variables_;
  std::size_t max_var_ = 0;
  StructureTag tag_ = StructureTag::kGeneric;
};

}  // namespace

Circuit build_manual(std::string_view text) {
  return ManualParser(text).build();
}

}  // namespace tdi
