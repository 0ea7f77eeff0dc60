#include "downscale/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "downscale/errors.hpp"

namespace downscale {

namespace {

constexpr double kLeft = 70.0;
constexpr double kRight = 610.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 370.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
constexpr int kPaletteSize = 5;

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string label(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

struct Group {
    std::string method;
    std::vector<const TrendRow*> rows;
};

std::vector<Group> group_by_method(const TrendTable& table) {
    std::vector<Group> groups;
    for (const TrendRow& row : table.rows) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const Group& g) { return g.method == row.method; });
        if (it == groups.end()) {
            groups.push_back({row.method, {}});
            it = groups.end() - 1;
        }
        it->rows.push_back(&row);
    }
    return groups;
}

}  // namespace

std::string render_trend_svg(const TrendTable& table) {
    double xmin = 0.0, xmax = 1.0;
    double vmin = 0.0, vmax = 0.0;
    bool any_x = false, any_v = false;
    for (const TrendRow& row : table.rows) {
        xmin = any_x ? std::min(xmin, row.sweep_value) : row.sweep_value;
        xmax = any_x ? std::max(xmax, row.sweep_value) : row.sweep_value;
        any_x = true;
        for (double v : {row.mean_rel_l2, row.mean_rel_l2 + row.std_rel_l2,
                         row.mean_rel_l2 - row.std_rel_l2}) {
            if (v <= 0.0 || !std::isfinite(v)) continue;
            vmin = any_v ? std::min(vmin, v) : v;
            vmax = any_v ? std::max(vmax, v) : v;
            any_v = true;
        }
    }
    int lo_exp = -2, hi_exp = 0;
    if (any_v) {
        lo_exp = static_cast<int>(std::floor(std::log10(vmin)));
        hi_exp = static_cast<int>(std::ceil(std::log10(vmax)));
        if (hi_exp <= lo_exp) hi_exp = lo_exp + 1;
    }

    const auto x_of = [&](double v) {
        if (!any_x || xmax == xmin) return 0.5 * (kLeft + kRight);
        return kLeft + (v - xmin) / (xmax - xmin) * (kRight - kLeft);
    };
    const auto y_of = [&](double v) {
        const double t = (std::log10(v) - lo_exp) / (hi_exp - lo_exp);
        return kBottom - t * (kBottom - kTop);
    };
    const double floor_value = std::pow(10.0, lo_exp);

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "viewBox=\"0 0 640 420\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"#ffffff\"/>\n";
    out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
        << num(kRight - kLeft) << "\" height=\"" << num(kBottom - kTop)
        << "\" fill=\"none\" stroke=\"#000000\"/>\n";

    for (int e = lo_exp; e <= hi_exp; ++e) {
        const double y = y_of(std::pow(10.0, e));
        out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\""
            << num(kRight) << "\" y2=\"" << num(y)
            << "\" stroke=\"#cccccc\" stroke-dasharray=\"3,3\"/>\n";
        out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4)
            << "\" text-anchor=\"end\">" << label(std::pow(10.0, e)) << "</text>\n";
    }

    std::vector<double> xticks;
    for (const TrendRow& row : table.rows) xticks.push_back(row.sweep_value);
    std::sort(xticks.begin(), xticks.end());
    xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
    for (double v : xticks) {
        const double x = x_of(v);
        out << "<line x1=\"" << num(x) << "\" y1=\"" << num(kBottom) << "\" x2=\"" << num(x)
            << "\" y2=\"" << num(kBottom + 5) << "\" stroke=\"#000000\"/>\n";
        out << "<text x=\"" << num(x) << "\" y=\"" << num(kBottom + 18)
            << "\" text-anchor=\"middle\">" << label(v) << "</text>\n";
    }

    const std::vector<Group> groups = group_by_method(table);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const char* color = kPalette[g % kPaletteSize];
        for (const TrendRow* row : groups[g].rows) {
            if (row->std_rel_l2 <= 0.0 || row->mean_rel_l2 <= 0.0) continue;
            const double x = x_of(row->sweep_value);
            const double hi = row->mean_rel_l2 + row->std_rel_l2;
            const double lo = std::max(row->mean_rel_l2 - row->std_rel_l2, floor_value);
            out << "<line x1=\"" << num(x) << "\" y1=\"" << num(y_of(lo)) << "\" x2=\""
                << num(x) << "\" y2=\"" << num(y_of(hi)) << "\" stroke=\"" << color
                << "\"/>\n";
            for (double v : {lo, hi}) {
                out << "<line x1=\"" << num(x - 4) << "\" y1=\"" << num(y_of(v))
                    << "\" x2=\"" << num(x + 4) << "\" y2=\"" << num(y_of(v))
                    << "\" stroke=\"" << color << "\"/>\n";
            }
        }
        std::vector<std::pair<double, double>> pts;
        for (const TrendRow* row : groups[g].rows) {
            if (row->mean_rel_l2 <= 0.0) continue;
            pts.emplace_back(x_of(row->sweep_value), y_of(row->mean_rel_l2));
        }
        if (pts.size() >= 2) {
            out << "<polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (i) out << " ";
                out << num(pts[i].first) << "," << num(pts[i].second);
            }
            out << "\"/>\n";
        }
        for (const auto& [x, y] : pts) {
            out << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y)
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        const double ly = kTop + 14 + 18.0 * static_cast<double>(g);
        out << "<line x1=\"470\" y1=\"" << num(ly - 4) << "\" x2=\"494\" y2=\""
            << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"500\" y=\"" << num(ly) << "\">" << groups[g].method
            << "</text>\n";
    }

    out << "<text x=\"" << num(0.5 * (kLeft + kRight)) << "\" y=\"410\" "
           "text-anchor=\"middle\">sweep value</text>\n";
    out << "<text x=\"18\" y=\"" << num(0.5 * (kTop + kBottom))
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << num(0.5 * (kTop + kBottom)) << ")\">relative L2 error</text>\n";
    out << "</svg>\n";
    return out.str();
}

void emit_plot(const TrendTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write plot '" + path + "'");
    out << render_trend_svg(table);
    if (!out) throw IoError("failed writing plot '" + path + "'");
}

}  // namespace downscale
