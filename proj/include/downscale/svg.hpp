#pragma once

#include <string>

#include "downscale/experiment.hpp"

namespace downscale {

// Standalone SVG line plot of a trend table: linear sweep axis, log error
// axis, one polyline and marker set per method, vertical bars at plus and
// minus one standard deviation. The output depends only on the table
// contents, so identical tables render byte-identical documents.
std::string render_trend_svg(const TrendTable& table);

void emit_plot(const TrendTable& table, const std::string& path);

}  // namespace downscale
