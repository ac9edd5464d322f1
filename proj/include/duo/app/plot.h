#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"

namespace duo::app {

/// One panel per pair: top-down root paths of both persons and a front view
/// of both skeletons at the middle frame.
void write_motion_svg(const std::filesystem::path& path, const motion::Dataset& data,
                      const motion::SkeletonSpec& skeleton, int max_pairs = 8);

/// One line chart per metric; x is the guidance scale.
using Series = std::map<std::string, std::vector<std::pair<double, double>>>;
void write_sweep_svg(const std::filesystem::path& path, const Series& series, const std::string& x_label);

/// Number of <circle> markers per chart, for checking a written sweep plot.
std::map<std::string, int> count_sweep_points(const std::filesystem::path& path);

}  // namespace duo::app
