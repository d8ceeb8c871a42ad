#pragma once

// Minimal SVG line/scatter charts for the evaluation report.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace dkoop::svg {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    bool scatter = false;
    double width = 1.5;
    std::string marker = "o";  // "o" circle, "x" cross
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    bool equal_aspect = false;
    bool unit_circle = false;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

inline double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

}  // namespace detail

/// Renders panels stacked vertically; `comment` lands in an XML comment at the top.
inline std::string render(const std::vector<Panel>& panels, const std::string& comment, double width = 900.0,
                          double panel_height = 320.0) {
    using detail::num;
    const double ml = 70, mr = 190, mt = 34, mb = 46;
    const double height = panel_height * static_cast<double>(panels.size());
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<!-- " + detail::escape(comment) + " -->\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const Panel& p = panels[pi];
        const double top = panel_height * static_cast<double>(pi);
        double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
        for (const auto& s : p.series) {
            for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
            for (double v : s.y)
                if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
        }
        if (p.unit_circle) x0 = std::min(x0, -1.1), x1 = std::max(x1, 1.1), y0 = std::min(y0, -1.1), y1 = std::max(y1, 1.1);
        if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
        if (x1 <= x0) x1 = x0 + 1;
        if (y1 <= y0) y1 = y0 + 1;
        const double pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;

        double pw = width - ml - mr, ph = panel_height - mt - mb;
        if (p.equal_aspect) {
            const double scale = std::min(pw / (x1 - x0), ph / (y1 - y0));
            pw = scale * (x1 - x0);
            ph = scale * (y1 - y0);
        }
        auto sx = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
        auto sy = [&](double v) { return top + mt + ph - (v - y0) / (y1 - y0) * ph; };

        out += "<text x=\"" + num(ml) + "\" y=\"" + num(top + 20) + "\" font-size=\"14\">" + detail::escape(p.title) + "</text>\n";
        out += "<rect x=\"" + num(ml) + "\" y=\"" + num(top + mt) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
               "\" fill=\"none\" stroke=\"#444\"/>\n";
        const double xs = detail::nice_step(x1 - x0, 6), ys = detail::nice_step(y1 - y0, 5);
        for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-12; v += xs)
            out += "<line x1=\"" + num(sx(v)) + "\" y1=\"" + num(top + mt) + "\" x2=\"" + num(sx(v)) + "\" y2=\"" +
                   num(top + mt + ph) + "\" stroke=\"#ddd\"/><text x=\"" + num(sx(v)) + "\" y=\"" + num(top + mt + ph + 15) +
                   "\" text-anchor=\"middle\">" + detail::tick(v) + "</text>\n";
        for (double v = std::ceil(y0 / ys) * ys; v <= y1 + 1e-12; v += ys)
            out += "<line x1=\"" + num(ml) + "\" y1=\"" + num(sy(v)) + "\" x2=\"" + num(ml + pw) + "\" y2=\"" + num(sy(v)) +
                   "\" stroke=\"#ddd\"/><text x=\"" + num(ml - 6) + "\" y=\"" + num(sy(v) + 4) + "\" text-anchor=\"end\">" +
                   detail::tick(v) + "</text>\n";
        out += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(top + mt + ph + 34) + "\" text-anchor=\"middle\">" +
               detail::escape(p.x_label) + "</text>\n";
        out += "<text transform=\"translate(" + num(18) + "," + num(top + mt + ph / 2) +
               ") rotate(-90)\" text-anchor=\"middle\">" + detail::escape(p.y_label) + "</text>\n";
        if (p.unit_circle) {
            out += "<ellipse cx=\"" + num(sx(0)) + "\" cy=\"" + num(sy(0)) + "\" rx=\"" + num(sx(1) - sx(0)) + "\" ry=\"" +
                   num(sy(0) - sy(1)) + "\" fill=\"none\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
        }

        for (std::size_t si = 0; si < p.series.size(); ++si) {
            const Series& s = p.series[si];
            const std::size_t n = std::min(s.x.size(), s.y.size());
            if (s.scatter) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double cx = sx(s.x[i]), cy = sy(s.y[i]);
                    if (s.marker == "x")
                        out += "<path d=\"M" + num(cx - 4) + " " + num(cy - 4) + "L" + num(cx + 4) + " " + num(cy + 4) + "M" +
                               num(cx - 4) + " " + num(cy + 4) + "L" + num(cx + 4) + " " + num(cy - 4) + "\" stroke=\"" +
                               s.color + "\" stroke-width=\"1.5\"/>\n";
                    else
                        out += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"3.5\" fill=\"none\" stroke=\"" +
                               s.color + "\" stroke-width=\"1.3\"/>\n";
                }
            } else if (n > 0) {
                out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"" + num(s.width) + "\" points=\"";
                for (std::size_t i = 0; i < n; ++i) out += num(sx(s.x[i])) + "," + num(sy(s.y[i])) + " ";
                out += "\"/>\n";
            }
            const double ly = top + mt + 14 + 18 * static_cast<double>(si);
            out += "<line x1=\"" + num(width - mr + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(width - mr + 32) +
                   "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + s.color + "\" stroke-width=\"3\"/><text x=\"" +
                   num(width - mr + 38) + "\" y=\"" + num(ly) + "\">" + detail::escape(s.label) + "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace dkoop::svg
