#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mopol/common.hpp"
#include "mopol/csv.hpp"
#include "mopol/data.hpp"
#include "mopol/weights.hpp"

namespace mopol {

// Depth-limited axis-aligned decision tree. Internal nodes route a row left
// iff x[feature] <= threshold; leaves carry a treatment.
class PolicyTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int treatment = 0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  PolicyTree() : nodes_{Node{}} {}

  static PolicyTree leaf(int treatment) {
    PolicyTree t;
    t.nodes_[0].treatment = treatment;
    return t;
  }

  static PolicyTree split(int feature, double threshold, const PolicyTree& left, const PolicyTree& right) {
    PolicyTree t;
    t.nodes_[0] = Node{feature, threshold, -1, -1, 0};
    t.nodes_[0].left = t.graft(left);
    t.nodes_[0].right = t.graft(right);
    return t;
  }

  const Node& root() const { return nodes_[0]; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Node>& nodes() const { return nodes_; }

  std::size_t depth() const { return depth_from(0); }
  std::size_t leaf_count() const {
    std::size_t c = 0;
    for (const auto& n : nodes_) c += n.is_leaf();
    return c;
  }
  std::size_t node_count() const { return nodes_.size(); }

  int max_feature() const {
    int m = -1;
    for (const auto& n : nodes_) m = std::max(m, n.feature);
    return m;
  }

  int route(std::span<const double> x) const {
    int i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[i].treatment;
  }

  friend bool operator==(const PolicyTree&, const PolicyTree&) = default;

 private:
  int graft(const PolicyTree& sub) {
    const int offset = static_cast<int>(nodes_.size());
    for (Node n : sub.nodes_) {
      if (!n.is_leaf()) {
        n.left += offset;
        n.right += offset;
      }
      nodes_.push_back(n);
    }
    return offset;
  }

  std::size_t depth_from(int i) const {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }

  std::vector<Node> nodes_;
};

inline std::vector<int> apply(const PolicyTree& tree, const Matrix& X) {
  if (tree.max_feature() >= static_cast<int>(X.cols()))
    fail_validation("tree uses feature ", tree.max_feature(), " but X has ", X.cols(), " columns");
  std::vector<int> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = tree.route(X.row(i));
  return out;
}

// (1/n) sum_i (2 pi_i - 1) Gamma_i for a binary policy against treatment-minus-control scores.
inline double value_binary(std::span<const int> assignments, std::span<const double> scores) {
  if (assignments.size() != scores.size()) fail_validation("value_binary: length mismatch");
  if (scores.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) sum += (2.0 * assignments[i] - 1.0) * scores[i];
  return sum / static_cast<double>(scores.size());
}

// (1/n) sum_i Gamma_{i, pi_i, y}
inline double value_multi(std::span<const int> assignments, const ScoreMatrix& scores, std::size_t outcome) {
  if (assignments.size() != scores.units()) fail_validation("value_multi: ", assignments.size(), " assignments for ", scores.units(), " units");
  if (outcome >= scores.outcomes()) fail_validation("value_multi: outcome ", outcome, " out of range");
  double sum = 0.0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int w = assignments[i];
    if (w < 0 || static_cast<std::size_t>(w) >= scores.treatments()) fail_validation("value_multi: assignment ", w, " out of range");
    sum += scores(i, static_cast<std::size_t>(w), outcome);
  }
  return sum / static_cast<double>(assignments.size());
}

// One objective: either the value on a score-backed outcome or a scalar
// computed from the fitted tree itself (never used to drive splitting).
struct ObjectiveMetric {
  std::string name;
  int outcome = -1;  // >= 0 for outcome metrics
  std::function<double(const PolicyTree&)> scalar;

  bool is_outcome() const { return outcome >= 0; }

  static ObjectiveMetric for_outcome(std::size_t y, std::string name = {}) {
    return {name.empty() ? "outcome_" + std::to_string(y) : std::move(name), static_cast<int>(y), {}};
  }
  static ObjectiveMetric model_scalar(std::string name, std::function<double(const PolicyTree&)> fn) {
    return {std::move(name), -1, std::move(fn)};
  }
  // Fewer leaves is better under maximization.
  static ObjectiveMetric negative_leaf_count() {
    return model_scalar("neg_leaf_count", [](const PolicyTree& t) { return -static_cast<double>(t.leaf_count()); });
  }
};

inline std::vector<ObjectiveMetric> outcome_metrics(std::size_t outcomes) {
  std::vector<ObjectiveMetric> m;
  for (std::size_t y = 0; y < outcomes; ++y) m.push_back(ObjectiveMetric::for_outcome(y));
  return m;
}

// Per-metric values of a tree: V_y for outcome metrics, phi(tree) otherwise.
inline std::vector<double> metric_values(const PolicyTree& tree, const Matrix& X, const ScoreMatrix& scores,
                                         const std::vector<ObjectiveMetric>& metrics) {
  std::vector<int> assign;
  std::vector<double> v(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    if (metrics[m].is_outcome()) {
      if (assign.empty()) assign = apply(tree, X);
      v[m] = value_multi(assign, scores, static_cast<std::size_t>(metrics[m].outcome));
    } else {
      v[m] = metrics[m].scalar(tree);
    }
  }
  return v;
}

inline double weighted_sum(const WeightVector& lambda, std::span<const double> values) {
  double s = 0.0;
  for (std::size_t m = 0; m < values.size(); ++m) s += lambda[m] * values[m];
  return s;
}

// sum_y lambda_y V_y
inline double value_weighted(const PolicyTree& tree, const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda,
                             const std::vector<ObjectiveMetric>& metrics) {
  if (lambda.size() != metrics.size())
    fail_validation("weight vector has ", lambda.size(), " entries for ", metrics.size(), " metrics");
  const auto v = metric_values(tree, X, scores, metrics);
  return weighted_sum(lambda, v);
}

inline double value_weighted(const PolicyTree& tree, const Matrix& X, const ScoreMatrix& scores, const WeightVector& lambda) {
  return value_weighted(tree, X, scores, lambda, outcome_metrics(scores.outcomes()));
}

// --- serialization ---------------------------------------------------------

namespace detail {

inline nlohmann::json tree_json(const PolicyTree& t, int i) {
  const auto& n = t.node(i);
  if (n.is_leaf()) return {{"leaf", {{"treatment", n.treatment}}}};
  return {{"split",
           {{"feature", n.feature}, {"threshold", n.threshold}, {"left", tree_json(t, n.left)}, {"right", tree_json(t, n.right)}}}};
}

}  // namespace detail

inline nlohmann::json tree_to_json(const PolicyTree& t) { return detail::tree_json(t, 0); }

inline PolicyTree tree_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("leaf")) return PolicyTree::leaf(j["leaf"].at("treatment").get<int>());
    const auto& s = j.at("split");
    const int f = s.at("feature").get<int>();
    if (f < 0) fail_validation("tree JSON: negative feature index");
    return PolicyTree::split(f, s.at("threshold").get<double>(), tree_from_json(s.at("left")), tree_from_json(s.at("right")));
  } catch (const nlohmann::json::exception& e) {
    fail_validation("tree JSON: ", e.what());
  }
}

enum class TreeFormat { text, dot };

namespace detail {

inline void render_text(const PolicyTree& t, int i, const std::vector<std::string>& names, int indent, std::ostringstream& out) {
  const auto& n = t.node(i);
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (n.is_leaf()) {
    out << pad << "assign treatment " << n.treatment << '\n';
    return;
  }
  out << pad << "if " << names[static_cast<std::size_t>(n.feature)] << " <= " << csv::format_double(n.threshold) << ":\n";
  render_text(t, n.left, names, indent + 1, out);
  out << pad << "else:\n";
  render_text(t, n.right, names, indent + 1, out);
}

inline std::string dot_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '"' || c == '\\') o.push_back('\\');
    o.push_back(c);
  }
  return o;
}

}  // namespace detail

inline std::string export_tree(const PolicyTree& t, const std::vector<std::string>& names, TreeFormat format) {
  if (t.max_feature() >= static_cast<int>(names.size()))
    fail_validation("export_tree: ", names.size(), " feature names but the tree uses feature ", t.max_feature());
  std::ostringstream out;
  if (format == TreeFormat::text) {
    detail::render_text(t, 0, names, 0, out);
    return out.str();
  }
  out << "digraph policy_tree {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < t.nodes().size(); ++i) {
    const auto& n = t.nodes()[i];
    if (n.is_leaf()) {
      out << "  n" << i << " [label=\"treatment " << n.treatment << "\", style=rounded];\n";
    } else {
      out << "  n" << i << " [label=\"" << detail::dot_escape(names[static_cast<std::size_t>(n.feature)]) << " <= "
          << csv::format_double(n.threshold) << "\"];\n";
      out << "  n" << i << " -> n" << n.left << " [label=\"yes\"];\n";
      out << "  n" << i << " -> n" << n.right << " [label=\"no\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

// Inverse of the text rendering.
inline PolicyTree parse_tree_text(std::string_view text, const std::vector<std::string>& names) {
  std::vector<std::pair<int, std::string>> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    std::size_t sp = 0;
    while (sp < line.size() && line[sp] == ' ') ++sp;
    std::string body = csv::trim(line.substr(sp));
    if (!body.empty()) lines.emplace_back(static_cast<int>(sp / 2), body);
  }
  std::size_t cursor = 0;
  std::function<PolicyTree(int)> parse = [&](int indent) -> PolicyTree {
    if (cursor >= lines.size()) fail_validation("tree text: unexpected end");
    const auto [ind, body] = lines[cursor++];
    if (ind != indent) fail_validation("tree text: bad indentation at '", body, "'");
    constexpr std::string_view assign = "assign treatment ";
    if (body.rfind(assign, 0) == 0) {
      long long a = 0;
      if (!csv::parse_long(body.substr(assign.size()), a)) fail_validation("tree text: bad treatment in '", body, "'");
      return PolicyTree::leaf(static_cast<int>(a));
    }
    if (body.rfind("if ", 0) != 0 || body.back() != ':') fail_validation("tree text: cannot parse '", body, "'");
    const std::string cond = body.substr(3, body.size() - 4);
    const auto op = cond.rfind(" <= ");
    if (op == std::string::npos) fail_validation("tree text: missing '<=' in '", body, "'");
    const std::string name = cond.substr(0, op);
    double thr = 0.0;
    if (!csv::parse_double(cond.substr(op + 4), thr)) fail_validation("tree text: bad threshold in '", body, "'");
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) fail_validation("tree text: unknown feature '", name, "'");
    PolicyTree left = parse(indent + 1);
    if (cursor >= lines.size() || lines[cursor].second != "else:" || lines[cursor].first != indent)
      fail_validation("tree text: missing 'else:'");
    ++cursor;
    PolicyTree right = parse(indent + 1);
    return PolicyTree::split(static_cast<int>(it - names.begin()), thr, left, right);
  };
  PolicyTree t = parse(0);
  if (cursor != lines.size()) fail_validation("tree text: trailing lines");
  return t;
}

}  // namespace mopol
