/*
 * Copyright (c) 2026, The DeepView-NLP Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "deepview/render.hpp"

#include <cstdio>

namespace deepview {

const std::array<std::string_view, 10>& class_palette() {
  static constexpr std::array<std::string_view, 10> palette = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette;
}

namespace {

constexpr std::string_view kUnknownColor = "#bdbdbd";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // Avoid "-0.00".
  if (std::string_view(buf) == "-0.00") return "0.00";
  return buf;
}

std::string opacity(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
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

std::string_view color_of(int label) {
  if (label < 0) return kUnknownColor;
  return class_palette()[static_cast<std::size_t>(label) % class_palette().size()];
}

}  // namespace

std::string render_svg(const VisPayload& payload, const RenderOptions& options) {
  const DecisionGrid& g = payload.grid;
  const double pad = 20.0;
  const double legend_width = 200.0;
  const double plot = options.plot_size;
  const double total_w = pad + plot + pad + legend_width;
  const double total_h = pad + plot + pad;

  const double world_w = g.dx * static_cast<double>(g.width);
  const double world_h = g.dy * static_cast<double>(g.height);
  const double sx = plot / world_w;
  const double sy = plot / world_h;
  auto px = [&](double x) { return pad + (x - g.x0) * sx; };
  auto py = [&](double y) { return pad + plot - (y - g.y0) * sy; };

  std::string svg;
  svg.reserve(g.cell_count() * 96 + payload.points.size() * 128 + 1024);
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(total_w) + "\" height=\"" +
         num(total_h) + "\" viewBox=\"0 0 " + num(total_w) + " " + num(total_h) + "\">\n";

  svg += "<g class=\"grid\" shape-rendering=\"crispEdges\">\n";
  const double cw = g.dx * sx, ch = g.dy * sy;
  for (std::size_t row = 0; row < g.height; ++row) {
    for (std::size_t col = 0; col < g.width; ++col) {
      const std::size_t cell = row * g.width + col;
      const double left = px(g.x0 + static_cast<double>(col) * g.dx);
      const double top = py(g.y0 + static_cast<double>(row + 1) * g.dy);
      svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(cw) +
             "\" height=\"" + num(ch) + "\" fill=\"" + std::string(color_of(g.labels[cell])) +
             "\" fill-opacity=\"" + opacity(g.certainty[cell]) + "\"/>\n";
    }
  }
  svg += "</g>\n";

  svg += "<g class=\"points\">\n";
  for (const auto& pt : payload.points) {
    const std::string cx = num(px(pt.x)), cy = num(py(pt.y));
    svg += "<circle class=\"point\" cx=\"" + cx + "\" cy=\"" + cy + "\" r=\"" +
           num(options.point_radius) + "\" fill=\"" +
           std::string(color_of(pt.true_label ? *pt.true_label : -1)) +
           "\" stroke=\"#000000\" stroke-width=\"0.5\"><title>" + escape_xml(pt.id) +
           "</title></circle>\n";
    if (pt.mismatch) {
      svg += "<circle class=\"ring\" cx=\"" + cx + "\" cy=\"" + cy + "\" r=\"" +
             num(options.ring_radius) + "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n";
    }
  }
  svg += "</g>\n";

  svg += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"14\">\n";
  const double lx = pad + plot + pad;
  for (std::size_t c = 0; c < payload.class_names.size(); ++c) {
    const double ly = pad + 24.0 * static_cast<double>(c);
    svg += "<path d=\"M" + num(lx) + " " + num(ly) + "h14v14h-14z\" fill=\"" +
           std::string(color_of(static_cast<int>(c))) + "\"/>\n";
    svg += "<text x=\"" + num(lx + 22.0) + "\" y=\"" + num(ly + 12.0) + "\">" +
           escape_xml(payload.class_names[c]) + "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace deepview
