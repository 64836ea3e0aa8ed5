#pragma once

// Deterministic SVG output for embeddings and dendrograms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "vistune/core.hpp"
#include "vistune/hierarchy.hpp"
#include "vistune/metrics.hpp"

namespace vistune {

enum class LegendPlacement { Right, None };

struct PlotSpec {
  int width = 800;
  int height = 600;
  double margin = 40.0;
  double point_radius = 3.0;
  LegendPlacement legend = LegendPlacement::Right;
  double legend_width = 180.0;
  std::string title;
  std::vector<std::string> palette = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
      "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
      "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5"};

  void validate() const {
    if (width <= 0 || height <= 0) throw InputError("plot width and height must be positive");
    if (palette.empty()) throw InputError("plot palette must not be empty");
    if (!(margin >= 0.0) || !(point_radius > 0.0)) throw InputError("invalid plot margin or radius");
  }
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string svg_open(const PlotSpec& spec) {
  const std::string w = std::to_string(spec.width), h = std::to_string(spec.height);
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + w + "\" height=\"" + h +
         "\" viewBox=\"0 0 " + w + " " + h + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" + w + "\" height=\"" + h +
         "\" fill=\"#ffffff\"/>\n";
  if (!spec.title.empty()) {
    out += "<text class=\"title\" x=\"" + fmt2(spec.width / 2.0) + "\" y=\"" +
           fmt2(std::max(12.0, spec.margin / 2.0)) + "\" text-anchor=\"middle\" font-size=\"14\">" +
           xml_escape(spec.title) + "</text>\n";
  }
  return out;
}

struct Range {
  double lo, hi;
};

// 5% padding; a zero-width range becomes a unit box around the value.
inline Range padded_range(double lo, double hi) {
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace detail

/// Scatter plot: one circle per point colored by label, legend of label names.
inline std::string render_scatter(const DataMatrix& embedding, const Labels& labels,
                                  const PlotSpec& spec = {}) {
  spec.validate();
  if (embedding.cols() != 2) throw InputError("render_scatter: embedding must have 2 columns");
  if (!labels.empty() && labels.size() != embedding.rows()) {
    throw InputError("render_scatter: label count does not match point count");
  }
  if (auto bad = embedding.first_nonfinite_row()) {
    throw InputError("render_scatter: non-finite coordinate in row " + std::to_string(*bad));
  }
  const std::size_t n = embedding.rows();
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = embedding(i, 0), y = embedding(i, 1);
    if (i == 0 || x < xmin) xmin = x;
    if (i == 0 || x > xmax) xmax = x;
    if (i == 0 || y < ymin) ymin = y;
    if (i == 0 || y > ymax) ymax = y;
  }
  const auto rx = detail::padded_range(xmin, xmax);
  const auto ry = detail::padded_range(ymin, ymax);

  LabelCodes codes;
  if (!labels.empty()) codes = encode_labels(labels);
  const bool legend = spec.legend == LegendPlacement::Right && !codes.names.empty();

  const double left = spec.margin;
  const double top = spec.margin;
  const double right = spec.width - spec.margin - (legend ? spec.legend_width : 0.0);
  const double bottom = spec.height - spec.margin;
  const double pw = std::max(1.0, right - left);
  const double ph = std::max(1.0, bottom - top);
  auto px = [&](double x) { return left + (x - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto py = [&](double y) { return bottom - (y - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::string out = detail::svg_open(spec);
  using detail::fmt2;
  out += "<g class=\"axes\" stroke=\"#333333\" fill=\"none\">\n";
  out += "<line x1=\"" + fmt2(left) + "\" y1=\"" + fmt2(bottom) + "\" x2=\"" + fmt2(left + pw) +
         "\" y2=\"" + fmt2(bottom) + "\"/>\n";
  out += "<line x1=\"" + fmt2(left) + "\" y1=\"" + fmt2(bottom) + "\" x2=\"" + fmt2(left) +
         "\" y2=\"" + fmt2(top) + "\"/>\n";
  out += "</g>\n";
  out += "<g class=\"ticks\" fill=\"#333333\">\n";
  out += "<text x=\"" + fmt2(left) + "\" y=\"" + fmt2(bottom + 14) + "\">" + fmt2(rx.lo) + "</text>\n";
  out += "<text x=\"" + fmt2(left + pw) + "\" y=\"" + fmt2(bottom + 14) +
         "\" text-anchor=\"end\">" + fmt2(rx.hi) + "</text>\n";
  out += "<text x=\"" + fmt2(left - 4) + "\" y=\"" + fmt2(bottom) + "\" text-anchor=\"end\">" +
         fmt2(ry.lo) + "</text>\n";
  out += "<text x=\"" + fmt2(left - 4) + "\" y=\"" + fmt2(top + 8) + "\" text-anchor=\"end\">" +
         fmt2(ry.hi) + "</text>\n";
  out += "</g>\n";

  out += "<g class=\"points\" fill-opacity=\"0.8\">\n";
  const std::string r = fmt2(spec.point_radius);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = labels.empty() ? 0 : codes.codes[i];
    out += "<circle cx=\"" + fmt2(px(embedding(i, 0))) + "\" cy=\"" + fmt2(py(embedding(i, 1))) +
           "\" r=\"" + r + "\" fill=\"" + spec.palette[c % spec.palette.size()] + "\"/>\n";
  }
  out += "</g>\n";

  if (legend) {
    out += "<g class=\"legend\">\n";
    const double lx = right + 16.0;
    for (std::size_t c = 0; c < codes.names.size(); ++c) {
      const double ly = top + 16.0 * static_cast<double>(c);
      out += "<rect class=\"legend-swatch\" x=\"" + fmt2(lx) + "\" y=\"" + fmt2(ly) +
             "\" width=\"10\" height=\"10\" fill=\"" + spec.palette[c % spec.palette.size()] + "\"/>\n";
      out += "<text x=\"" + fmt2(lx + 14) + "\" y=\"" + fmt2(ly + 9) + "\">" +
             detail::xml_escape(codes.names[c]) + "</text>\n";
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

/// Rectangular dendrogram: leaves along the bottom in the tree's canonical
/// order, merge height on the vertical axis, one bracket path per merge.
inline std::string render_dendrogram(const Dendrogram& tree, const PlotSpec& spec = {}) {
  spec.validate();
  tree.validate();
  const std::size_t n = tree.leaf_count();
  const auto order = tree.leaf_order();

  double max_h = 0.0;
  for (const auto& m : tree.merges) max_h = std::max(max_h, m.height);
  if (!(max_h > 0.0)) max_h = 1.0;

  const double label_band = 60.0;
  const double left = spec.margin + 30.0;
  const double top = spec.margin;
  const double right = spec.width - spec.margin;
  const double bottom = spec.height - spec.margin - label_band;
  const double pw = std::max(1.0, right - left);
  const double ph = std::max(1.0, bottom - top);
  auto py = [&](double h) { return bottom - h / max_h * ph; };

  std::vector<double> xs(n + tree.merges.size(), 0.0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    xs[order[pos]] = left + pw * (static_cast<double>(pos) + 0.5) / static_cast<double>(n);
  }
  for (std::size_t m = 0; m < tree.merges.size(); ++m) {
    xs[n + m] = 0.5 * (xs[tree.merges[m].left] + xs[tree.merges[m].right]);
  }

  using detail::fmt2;
  std::string out = detail::svg_open(spec);
  out += "<g class=\"axes\" stroke=\"#333333\" fill=\"none\">\n";
  out += "<line x1=\"" + fmt2(left - 10) + "\" y1=\"" + fmt2(bottom) + "\" x2=\"" + fmt2(left - 10) +
         "\" y2=\"" + fmt2(top) + "\"/>\n";
  out += "</g>\n";
  out += "<g class=\"ticks\" fill=\"#333333\" text-anchor=\"end\">\n";
  out += "<text x=\"" + fmt2(left - 14) + "\" y=\"" + fmt2(bottom) + "\">0.00</text>\n";
  out += "<text x=\"" + fmt2(left - 14) + "\" y=\"" + fmt2(top + 8) + "\">" + fmt2(max_h) + "</text>\n";
  out += "</g>\n";

  out += "<g class=\"brackets\" stroke=\"#1f3b73\" stroke-width=\"1.5\" fill=\"none\">\n";
  for (std::size_t m = 0; m < tree.merges.size(); ++m) {
    const Merge& mg = tree.merges[m];
    const double xl = xs[mg.left], xr = xs[mg.right];
    const double yl = py(tree.height_of(mg.left)), yr = py(tree.height_of(mg.right));
    const double ym = py(mg.height);
    out += "<path class=\"bracket\" data-height=\"" + format_score(mg.height) + "\" d=\"M" +
           fmt2(xl) + " " + fmt2(yl) + " V" + fmt2(ym) + " H" + fmt2(xr) + " V" + fmt2(yr) + "\"/>\n";
  }
  out += "</g>\n";

  out += "<g class=\"leaf-labels\" fill=\"#333333\">\n";
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t leaf = order[pos];
    const std::string x = fmt2(xs[leaf]), y = fmt2(bottom + 6);
    out += "<text x=\"" + x + "\" y=\"" + y + "\" transform=\"rotate(45 " + x + " " + y + ")\">" +
           detail::xml_escape(tree.leaves[leaf]) + "</text>\n";
  }
  out += "</g>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace vistune
