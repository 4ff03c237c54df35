#include "sdde/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "sdde/report.hpp"

namespace sdde {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 56.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void widen(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finalize() {
        if (lo > hi) {
            lo = 0.0;
            hi = 1.0;
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

} // namespace

void write_line_svg(const std::filesystem::path& file, const std::string& config_hash,
                    const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<SvgSeries>& series) {
    Range rx, ry;
    for (const auto& s : series) {
        for (double v : s.xs) rx.widen(v);
        for (double v : s.ys) ry.widen(v);
    }
    rx.finalize();
    ry.finalize();

    auto px = [&](double x) {
        return kMargin + (x - rx.lo) / (rx.hi - rx.lo) * (kWidth - 2 * kMargin);
    };
    auto py = [&](double y) {
        return kHeight - kMargin - (y - ry.lo) / (ry.hi - ry.lo) * (kHeight - 2 * kMargin);
    };

    std::string out;
    out += "<!-- config_hash=" + config_hash + " -->\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
           "viewBox=\"0 0 720 480\">\n";
    out += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
    out += "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
           "font-family=\"sans-serif\">" + title + "</text>\n";

    // axes
    out += "<line x1=\"" + format_double(kMargin) + "\" y1=\"" + format_double(kHeight - kMargin) +
           "\" x2=\"" + format_double(kWidth - kMargin) + "\" y2=\"" +
           format_double(kHeight - kMargin) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + format_double(kMargin) + "\" y1=\"" + format_double(kMargin) +
           "\" x2=\"" + format_double(kMargin) + "\" y2=\"" + format_double(kHeight - kMargin) +
           "\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 5; ++i) {
        const double fx = rx.lo + (rx.hi - rx.lo) * i / 5.0;
        const double fy = ry.lo + (ry.hi - ry.lo) * i / 5.0;
        out += "<text x=\"" + format_double(px(fx)) + "\" y=\"" +
               format_double(kHeight - kMargin + 18) +
               "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" +
               format_double(fx) + "</text>\n";
        out += "<text x=\"" + format_double(kMargin - 8) + "\" y=\"" + format_double(py(fy) + 4) +
               "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" +
               format_double(fy) + "</text>\n";
    }
    out += "<text x=\"360\" y=\"" + format_double(kHeight - 12) +
           "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" + xlabel +
           "</text>\n";
    out += "<text x=\"16\" y=\"240\" text-anchor=\"middle\" font-size=\"13\" "
           "font-family=\"sans-serif\" transform=\"rotate(-90 16 240)\">" + ylabel + "</text>\n";

    std::size_t color = 0;
    for (const auto& s : series) {
        std::string points;
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
            points += format_double(px(s.xs[i]));
            points += ',';
            points += format_double(py(s.ys[i]));
            points += ' ';
        }
        out += "<polyline fill=\"none\" stroke=\"";
        out += kPalette[color % 10];
        out += "\" stroke-width=\"1\" points=\"" + points + "\"/>\n";
        ++color;
    }
    out += "</svg>\n";

    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

} // namespace sdde
