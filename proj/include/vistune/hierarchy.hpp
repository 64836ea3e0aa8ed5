#pragma once

// Average-linkage (UPGMA) dendrograms over per-label centroids and their
// Newick text form.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vistune/core.hpp"
#include "vistune/distance.hpp"
#include "vistune/metrics.hpp"

namespace vistune {

class NewickError : public Error {
 public:
  NewickError(const std::string& what, std::size_t position)
      : Error("newick: " + what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// One agglomeration step. Node ids: leaves are 0..L-1, merge m creates node L+m.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
  friend bool operator==(const Merge&, const Merge&) = default;
};

/// Binary merge tree. The left child of every merge holds the smaller minimum
/// leaf index, which fixes a canonical child order.
struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;

  std::size_t leaf_count() const noexcept { return leaves.size(); }
  std::size_t root() const { return leaves.size() + merges.size() - 1; }
  bool is_leaf(std::size_t node) const noexcept { return node < leaves.size(); }
  const Merge& merge_of(std::size_t node) const { return merges.at(node - leaves.size()); }

  double height_of(std::size_t node) const { return is_leaf(node) ? 0.0 : merge_of(node).height; }

  /// Leaves in left-to-right drawing order.
  std::vector<std::size_t> leaf_order() const {
    std::vector<std::size_t> out;
    if (leaves.empty()) return out;
    std::vector<std::size_t> stack{root()};
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      if (is_leaf(node)) {
        out.push_back(node);
      } else {
        stack.push_back(merge_of(node).right);
        stack.push_back(merge_of(node).left);
      }
    }
    return out;
  }

  /// Leaf sets of every internal node, in merge order.
  std::vector<std::vector<std::size_t>> clusters() const {
    const std::size_t n = leaves.size();
    std::vector<std::vector<std::size_t>> members(n + merges.size());
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t m = 0; m < merges.size(); ++m) {
      auto& dst = members[n + m];
      dst = members[merges[m].left];
      dst.insert(dst.end(), members[merges[m].right].begin(), members[merges[m].right].end());
      std::sort(dst.begin(), dst.end());
      out.push_back(dst);
    }
    return out;
  }

  /// Throws InputError when the structural invariants do not hold.
  void validate() const {
    const std::size_t n = leaves.size();
    if (n < 2) throw InputError("dendrogram: need at least 2 leaves");
    if (merges.size() != n - 1) throw InputError("dendrogram: expected leaves-1 merges");
    std::vector<int> parents(n + merges.size(), 0);
    for (std::size_t m = 0; m < merges.size(); ++m) {
      const auto& mg = merges[m];
      for (auto child : {mg.left, mg.right}) {
        if (child >= n + m) throw InputError("dendrogram: merge refers to a later node");
        if (++parents[child] > 1) throw InputError("dendrogram: node has two parents");
        if (height_of(child) > mg.height) throw InputError("dendrogram: heights decrease");
      }
    }
  }

  friend bool operator==(const Dendrogram&, const Dendrogram&) = default;
};

struct Centroids {
  DataMatrix points;
  std::vector<std::string> names;
};

/// Per-label arithmetic means, labels in first-appearance order.
inline Centroids label_centroids(const DataMatrix& matrix, const Labels& labels) {
  if (labels.size() != matrix.rows()) {
    throw InputError("label_centroids: label count does not match row count");
  }
  const LabelCodes enc = encode_labels(labels);
  if (enc.names.size() < 2) throw InputError("label_centroids: need at least 2 distinct labels");
  Centroids out{DataMatrix(enc.names.size(), matrix.cols()), enc.names};
  std::vector<std::size_t> counts(enc.names.size(), 0);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const auto c = enc.codes[i];
    ++counts[c];
    auto src = matrix.row(i);
    auto dst = out.points.row(c);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (double& v : out.points.row(c)) v /= static_cast<double>(counts[c]);
  }
  return out;
}

/// UPGMA. Ties between equal pair distances go to the lowest (i, j) pair of
/// active clusters, where a cluster is indexed by its smallest leaf.
inline Dendrogram upgma(const DistanceMatrix& dist, const std::vector<std::string>& leaf_names) {
  const std::size_t n = dist.size();
  if (n < 2) throw InputError("upgma: need at least 2 leaves");
  if (leaf_names.size() != n) throw InputError("upgma: leaf name count does not match matrix");

  std::vector<double> d = dist.values();
  std::vector<bool> active(n, true);
  std::vector<std::size_t> node(n), size(n, 1);
  for (std::size_t i = 0; i < n; ++i) node[i] = i;

  Dendrogram tree;
  tree.leaves = leaf_names;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t best_a = 0, best_b = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (active[b] && d[a * n + b] < best) {
          best = d[a * n + b];
          best_a = a;
          best_b = b;
        }
      }
    }
    // Average linkage is monotone; the max only absorbs rounding in the
    // size-weighted updates.
    const double height = std::max({best / 2.0, tree.height_of(node[best_a]),
                                    tree.height_of(node[best_b])});
    tree.merges.push_back({node[best_a], node[best_b], height, size[best_a] + size[best_b]});

    const double wa = static_cast<double>(size[best_a]);
    const double wb = static_cast<double>(size[best_b]);
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == best_a || c == best_b) continue;
      const double v = (wa * d[best_a * n + c] + wb * d[best_b * n + c]) / (wa + wb);
      d[best_a * n + c] = v;
      d[c * n + best_a] = v;
    }
    active[best_b] = false;
    size[best_a] += size[best_b];
    node[best_a] = n + step;
  }
  return tree;
}

namespace detail {

inline bool newick_needs_quotes(std::string_view name) {
  if (name.empty()) return true;
  return name.find_first_of("()[]',;: \t\n\r") != std::string_view::npos;
}

inline std::string newick_name(std::string_view name) {
  if (!newick_needs_quotes(name)) return std::string(name);
  std::string out = "'";
  for (char c : name) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

}  // namespace detail

/// Parenthesized form without branch lengths, e.g. "((A,B),C);".
inline std::string to_newick(const Dendrogram& tree) {
  tree.validate();
  std::string out;
  std::function<void(std::size_t)> emit = [&](std::size_t node) {
    if (tree.is_leaf(node)) {
      out += detail::newick_name(tree.leaves[node]);
      return;
    }
    const Merge& m = tree.merge_of(node);
    out += '(';
    emit(m.left);
    out += ',';
    emit(m.right);
    out += ')';
  };
  emit(tree.root());
  out += ';';
  return out;
}

/// Parses a binary, length-free Newick string. Leaves are numbered in order of
/// appearance; merge heights are subtree depths (leaves at 0).
inline Dendrogram parse_newick(std::string_view text) {
  Dendrogram tree;
  // Parse into a nested structure first; node ids need the final leaf count.
  struct Node {
    bool leaf = false;
    std::string name;
    int left = -1, right = -1;
  };
  std::vector<Node> nodes;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto parse_name = [&]() -> std::string {
    skip_ws();
    std::string name;
    if (pos < text.size() && text[pos] == '\'') {
      const std::size_t start = pos++;
      while (true) {
        if (pos >= text.size()) throw NewickError("unterminated quoted name", start);
        if (text[pos] == '\'') {
          if (pos + 1 < text.size() && text[pos + 1] == '\'') {
            name += '\'';
            pos += 2;
            continue;
          }
          ++pos;
          break;
        }
        name += text[pos++];
      }
      return name;
    }
    while (pos < text.size() && !detail::newick_needs_quotes(text.substr(pos, 1))) {
      name += text[pos++];
    }
    if (name.empty()) throw NewickError("expected a leaf name", pos);
    return name;
  };
  std::function<int(int)> parse_subtree = [&](int depth) -> int {
    if (depth > 100000) throw NewickError("nesting too deep", pos);
    skip_ws();
    if (pos >= text.size()) throw NewickError("unexpected end of input", pos);
    if (text[pos] == '(') {
      ++pos;
      const int left = parse_subtree(depth + 1);
      skip_ws();
      if (pos >= text.size() || text[pos] != ',') {
        throw NewickError(pos < text.size() && text[pos] == ')' ? "node with a single child"
                                                                : "expected ','",
                          pos);
      }
      ++pos;
      const int right = parse_subtree(depth + 1);
      skip_ws();
      if (pos >= text.size()) throw NewickError("unbalanced parentheses", pos);
      if (text[pos] == ',') throw NewickError("only binary trees are supported", pos);
      if (text[pos] == ':') throw NewickError("branch lengths are not supported", pos);
      if (text[pos] != ')') throw NewickError("expected ')'", pos);
      ++pos;
      nodes.push_back({false, {}, left, right});
    } else if (text[pos] == ')' || text[pos] == ',' || text[pos] == ';') {
      throw NewickError("expected a subtree", pos);
    } else {
      nodes.push_back({true, parse_name(), -1, -1});
      skip_ws();
      if (pos < text.size() && text[pos] == ':') {
        throw NewickError("branch lengths are not supported", pos);
      }
    }
    return static_cast<int>(nodes.size()) - 1;
  };

  const int root = parse_subtree(0);
  skip_ws();
  if (pos >= text.size() || text[pos] != ';') {
    throw NewickError(pos < text.size() && text[pos] == ')' ? "unbalanced parentheses"
                                                            : "missing ';'",
                      pos);
  }
  ++pos;
  skip_ws();
  if (pos != text.size()) throw NewickError("trailing characters after ';'", pos);

  // Leaves in appearance order, merges in post-order (children before parents).
  std::vector<std::size_t> id(nodes.size());
  std::size_t leaf_count = 0;
  for (const auto& nd : nodes) leaf_count += nd.leaf ? 1 : 0;
  if (leaf_count < 2) throw NewickError("tree needs at least 2 leaves", 0);
  std::vector<double> depth(nodes.size(), 0.0);
  std::function<void(int)> assign = [&](int i) {
    Node& nd = nodes[static_cast<std::size_t>(i)];
    if (nd.leaf) {
      id[static_cast<std::size_t>(i)] = tree.leaves.size();
      tree.leaves.push_back(nd.name);
      return;
    }
    assign(nd.left);
    assign(nd.right);
    const auto l = static_cast<std::size_t>(nd.left), r = static_cast<std::size_t>(nd.right);
    depth[static_cast<std::size_t>(i)] = 1.0 + std::max(depth[l], depth[r]);
    id[static_cast<std::size_t>(i)] = leaf_count + tree.merges.size();
    tree.merges.push_back({0, 0, depth[static_cast<std::size_t>(i)], 0});
  };
  assign(root);
  // Second pass fills child ids and sizes now that every id is known.
  std::vector<std::size_t> sizes(leaf_count + tree.merges.size(), 1);
  std::function<void(int)> link = [&](int i) {
    const Node& nd = nodes[static_cast<std::size_t>(i)];
    if (nd.leaf) return;
    link(nd.left);
    link(nd.right);
    const std::size_t self = id[static_cast<std::size_t>(i)];
    Merge& m = tree.merges[self - leaf_count];
    m.left = id[static_cast<std::size_t>(nd.left)];
    m.right = id[static_cast<std::size_t>(nd.right)];
    sizes[self] = sizes[m.left] + sizes[m.right];
    m.size = sizes[self];
  };
  link(root);
  return tree;
}

/// Lloyd's k-means with k-means++ seeding; returns cluster ids as strings
/// ("0".."k-1"). Used to form dendrogram leaves for unlabeled data.
inline Labels kmeans_labels(const DataMatrix& matrix, std::size_t k, std::uint64_t seed,
                            std::size_t max_iter = 100) {
  const std::size_t n = matrix.rows(), dim = matrix.cols();
  if (n == 0) throw InputError("kmeans_labels: empty matrix");
  k = std::min(k, n);
  auto sq = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
  };
  std::mt19937_64 rng(seed);
  auto uniform01 = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  DataMatrix centers(k, dim);
  std::size_t first = static_cast<std::size_t>(rng() % n);
  std::copy(matrix.row(first).begin(), matrix.row(first).end(), centers.row(0).begin());
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq(matrix.row(i), centers.row(c - 1)));
      total += best[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double target = uniform01() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= best[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = c % n;
    }
    std::copy(matrix.row(pick).begin(), matrix.row(pick).end(), centers.row(c).begin());
  }

  std::vector<std::size_t> assign(n, 0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double v = sq(matrix.row(i), centers.row(c));
        if (v < bd) {
          bd = v;
          arg = c;
        }
      }
      if (assign[i] != arg) changed = true;
      assign[i] = arg;
    }
    if (!changed) break;
    DataMatrix sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < dim; ++j) sums(assign[i], j) += matrix(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
  }
  // Renumber by first appearance so names are stable across runs.
  std::vector<std::size_t> rename(k, k);
  std::size_t next = 0;
  Labels out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rename[assign[i]] == k) rename[assign[i]] = next++;
    out[i] = std::to_string(rename[assign[i]]);
  }
  return out;
}

}  // namespace vistune
