#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sidewalk/evaluation.hpp"
#include "sidewalk/statistics.hpp"
#include "sidewalk/world.hpp"

namespace sidewalk {

// First row index where the robot is behind the pedestrian (robot_x < ped_x);
// rows.size() when the agents never pass.
std::size_t passing_index(const Trace& trace);

struct TracePanel {
  std::string title;
  std::vector<Trace> traces;
};

// One panel per controller: the sidewalk outline and each episode's robot and
// pedestrian paths, coloured up to the passing instant and grey afterwards.
// Throws std::invalid_argument when there is nothing to draw.
void render_traces_svg(const std::vector<TracePanel>& panels, const SidewalkGeometry& geometry,
                       const std::filesystem::path& path);

struct DistributionPlot {
  std::string title;
  std::string y_label;
  std::vector<NamedGroup> groups;
  std::optional<double> threshold_line;  // e.g. 1.0 for normalised risk
  std::string threshold_label = "risk threshold";
  std::vector<std::string> annotation;   // one text line each
};

// Jittered dot strip per group with dashed lines at the quartiles.
void render_distribution_svg(const DistributionPlot& plot, const std::filesystem::path& path);

// Annotation lines for a statistics comparison (H, df, p and adjusted pairwise p).
std::vector<std::string> annotation_lines(const GroupComparison& comparison);

std::string xml_escape(const std::string& text);

}  // namespace sidewalk
