#include "sidewalk/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sidewalk {

namespace {

constexpr const char* kRobotColour = "#d62728";
constexpr const char* kPedestrianColour = "#1f77b4";
constexpr const char* kAfterColour = "#b0b0b0";
constexpr const char* kGroupColours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

struct Frame {
  double x0, y0, width, height;  // pixel box
  double lo_x, hi_x, lo_y, hi_y;  // data box

  double px(double x) const { return x0 + (x - lo_x) / (hi_x - lo_x) * width; }
  double py(double y) const { return y0 + height - (y - lo_y) / (hi_y - lo_y) * height; }
};

template <class Get>
std::string polyline(const std::vector<TraceRow>& rows, std::size_t begin, std::size_t end,
                     const Frame& f, Get get, const char* colour, const char* cls) {
  std::ostringstream out;
  out << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << colour
      << "\" stroke-width=\"1\" stroke-opacity=\"0.6\" points=\"";
  for (std::size_t i = begin; i < end; ++i) {
    const auto [x, y] = get(rows[i]);
    if (i != begin) out << ' ';
    out << num(f.px(x)) << ',' << num(f.py(y));
  }
  out << "\"/>\n";
  return out.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::size_t passing_index(const Trace& trace) {
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    if (trace.rows[i].robot_x < trace.rows[i].ped_x) return i;
  }
  return trace.rows.size();
}

void render_traces_svg(const std::vector<TracePanel>& panels, const SidewalkGeometry& geometry,
                       const std::filesystem::path& path) {
  bool any = false;
  for (const auto& p : panels) any = any || !p.traces.empty();
  if (!any) throw std::invalid_argument("render_traces_svg: no traces to draw");

  const double panel_w = 900.0;
  const double panel_h = 180.0;
  const double margin = 40.0;
  const double gap = 50.0;
  const double total_h = margin + static_cast<double>(panels.size()) * (panel_h + gap);
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(panel_w + 2 * margin)
      << "\" height=\"" << num(total_h) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double half = geometry.half_width();
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const TracePanel& panel = panels[k];
    const Frame f{margin, margin + static_cast<double>(k) * (panel_h + gap), panel_w, panel_h,
                  0.0, geometry.length, -half, half};
    svg << "<g class=\"panel\">\n"
        << "<text x=\"" << num(f.x0) << "\" y=\"" << num(f.y0 - 8) << "\" font-weight=\"bold\">"
        << xml_escape(panel.title) << "</text>\n"
        << "<rect class=\"sidewalk\" x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\""
        << num(f.width) << "\" height=\"" << num(f.height)
        << "\" fill=\"#f4f4f4\" stroke=\"black\"/>\n"
        << "<line x1=\"" << num(f.x0) << "\" y1=\"" << num(f.py(0)) << "\" x2=\""
        << num(f.x0 + f.width) << "\" y2=\"" << num(f.py(0))
        << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
    auto robot = [](const TraceRow& r) { return std::pair{r.robot_x, r.robot_y}; };
    auto ped = [](const TraceRow& r) { return std::pair{r.ped_x, r.ped_y}; };
    for (const Trace& trace : panel.traces) {
      const std::size_t n = trace.rows.size();
      if (n == 0) continue;
      const std::size_t split = std::min(passing_index(trace), n - 1);
      svg << "<g class=\"episode\">\n";
      if (split + 1 < n) {
        svg << polyline(trace.rows, split, n, f, robot, kAfterColour, "robot-after");
        svg << polyline(trace.rows, split, n, f, ped, kAfterColour, "pedestrian-after");
      }
      svg << polyline(trace.rows, 0, split + 1, f, robot, kRobotColour, "robot-before");
      svg << polyline(trace.rows, 0, split + 1, f, ped, kPedestrianColour, "pedestrian-before");
      svg << "</g>\n";
    }
    svg << "<text x=\"" << num(f.x0) << "\" y=\"" << num(f.y0 + f.height + 16)
        << "\">x (m), pedestrian walks left to right, robot right to left</text>\n"
        << "</g>\n";
  }
  svg << "</svg>\n";
  write_file(path, svg.str());
}

std::vector<std::string> annotation_lines(const GroupComparison& c) {
  std::vector<std::string> lines;
  char buf[256];
  std::snprintf(buf, sizeof buf, "Kruskal-Wallis H(%d)=%.2f, %s", c.kruskal.df, c.kruskal.h,
                format_p(c.kruskal.p).c_str());
  lines.emplace_back(buf);
  for (const auto& pc : c.pairwise) {
    std::snprintf(buf, sizeof buf, "%s vs %s: %s (Bonferroni)", pc.a.c_str(), pc.b.c_str(),
                  format_p(pc.p_adjusted).c_str());
    lines.emplace_back(buf);
  }
  return lines;
}

void render_distribution_svg(const DistributionPlot& plot, const std::filesystem::path& path) {
  if (plot.groups.empty()) throw std::invalid_argument("render_distribution_svg: no groups");
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (const auto& g : plot.groups) {
    for (double v : g.values) {
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  }
  if (plot.threshold_line) {
    lo = first ? *plot.threshold_line : std::min(lo, *plot.threshold_line);
    hi = first ? *plot.threshold_line : std::max(hi, *plot.threshold_line);
  }
  lo = std::min(lo, 0.0);
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);

  const double slot = 160.0;
  const double left = 70.0;
  const double top = 40.0;
  const double plot_h = 320.0;
  const double annot_h = 18.0 * static_cast<double>(plot.annotation.size()) + 20.0;
  const double width = left + slot * static_cast<double>(plot.groups.size()) + 40.0;
  const Frame f{left, top, slot * static_cast<double>(plot.groups.size()), plot_h, 0.0, 1.0,
                lo - pad, hi + pad};

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(std::max(width, 520.0))
      << "\" height=\"" << num(top + plot_h + 50 + annot_h)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(left) << "\" y=\"24\" font-weight=\"bold\">" << xml_escape(plot.title)
      << "</text>\n"
      << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\"" << num(f.width)
      << "\" height=\"" << num(f.height) << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text transform=\"translate(18," << num(top + plot_h / 2) << ") rotate(-90)\""
      << " text-anchor=\"middle\">" << xml_escape(plot.y_label) << "</text>\n";

  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(f.py(v) + 4)
        << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  if (plot.threshold_line) {
    const double y = f.py(*plot.threshold_line);
    svg << "<line class=\"threshold\" x1=\"" << num(f.x0) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(f.x0 + f.width) << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n"
        << "<text class=\"threshold-label\" x=\"" << num(f.x0 + f.width - 4) << "\" y=\""
        << num(y - 4) << "\" text-anchor=\"end\">" << xml_escape(plot.threshold_label)
        << "</text>\n";
  }

  std::mt19937_64 jitter_rng(12345);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  for (std::size_t k = 0; k < plot.groups.size(); ++k) {
    const NamedGroup& g = plot.groups[k];
    const char* colour = kGroupColours[k % std::size(kGroupColours)];
    const double centre = f.x0 + slot * (static_cast<double>(k) + 0.5);
    svg << "<g class=\"group\">\n";
    for (double v : g.values) {
      svg << "<circle cx=\"" << num(centre + jitter(jitter_rng) * slot * 0.5) << "\" cy=\""
          << num(f.py(v)) << "\" r=\"2.5\" fill=\"" << colour << "\" fill-opacity=\"0.6\"/>\n";
    }
    if (!g.values.empty()) {
      for (double q : {quantile(g.values, 0.25), quantile(g.values, 0.75)}) {
        svg << "<line class=\"iqr\" x1=\"" << num(centre - slot * 0.35) << "\" y1=\""
            << num(f.py(q)) << "\" x2=\"" << num(centre + slot * 0.35) << "\" y2=\"" << num(f.py(q))
            << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
      }
    }
    svg << "<text x=\"" << num(centre) << "\" y=\"" << num(f.y0 + f.height + 18)
        << "\" text-anchor=\"middle\">" << xml_escape(g.name) << "</text>\n"
        << "</g>\n";
  }

  double y = top + plot_h + 50;
  for (const auto& line : plot.annotation) {
    svg << "<text class=\"annotation\" x=\"" << num(left) << "\" y=\"" << num(y) << "\">"
        << xml_escape(line) << "</text>\n";
    y += 18.0;
  }
  svg << "</svg>\n";
  write_file(path, svg.str());
}

}  // namespace sidewalk
