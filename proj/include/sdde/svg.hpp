#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sdde {

/// One polyline for the plot emitter.
struct SvgSeries {
    std::vector<double> xs;
    std::vector<double> ys;
};

/// Minimal self-contained line plot (axes, ticks, polylines). CSV files are
/// the source of truth; these are a convenience view with no external
/// tooling involved. `config_hash` lands in a comment on the first line.
void write_line_svg(const std::filesystem::path& file, const std::string& config_hash,
                    const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<SvgSeries>& series);

} // namespace sdde
