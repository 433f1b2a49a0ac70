#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gbs::bench {

struct PlotSeries {
    std::string name;
    std::vector<double> x, y;
    std::vector<double> lo, hi; // optional shaded band, same length as x
};

struct PlotSpec {
    std::string title, x_label, y_label;
    std::vector<PlotSeries> series;
    std::optional<double> reference_y; // horizontal guide, e.g. ratio 1
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

// Step of roughly `target` ticks over span, rounded to 1, 2 or 5 times a power of ten.
inline double tick_step(double span, int target) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double f : {1.0, 2.0, 5.0, 10.0})
        if (raw <= f * mag) return f * mag;
    return 10.0 * mag;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

} // namespace detail

/// Self-contained SVG line chart. The output depends only on the spec, so plots
/// regenerated from the same table are byte-identical.
inline std::string render_svg(const PlotSpec& spec) {
    const double W = 720, H = 440, L = 80, R = 170, T = 40, B = 60;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto grow = [](double v, double& lo, double& hi) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    for (const auto& s : spec.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            grow(s.x[i], x0, x1);
            grow(s.y[i], y0, y1);
            if (i < s.lo.size()) grow(s.lo[i], y0, y1);
            if (i < s.hi.size()) grow(s.hi[i], y0, y1);
        }
    if (spec.reference_y) grow(*spec.reference_y, y0, y1);
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    using detail::num;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           detail::escape(spec.title) + "</text>\n";

    // axes and ticks
    out += "<g stroke=\"#444\" fill=\"none\"><path d=\"M" + num(L) + " " + num(T) + " V" + num(H - B) + " H" +
           num(W - R) + "\"/></g>\n";
    const double xs = detail::tick_step(x1 - x0, 6), ys = detail::tick_step(y1 - y0, 6);
    for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs)
        out += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(px(t)) + "\" y2=\"" +
               num(H - B + 5) + "\" stroke=\"#444\"/><text x=\"" + num(px(t)) + "\" y=\"" + num(H - B + 18) +
               "\" text-anchor=\"middle\">" + detail::label(t) + "</text>\n";
    for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys)
        out += "<line x1=\"" + num(L - 5) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(W - R) + "\" y2=\"" +
               num(py(t)) + "\" stroke=\"#ddd\"/><text x=\"" + num(L - 8) + "\" y=\"" + num(py(t) + 4) +
               "\" text-anchor=\"end\">" + detail::label(t) + "</text>\n";
    out += "<text x=\"" + num((L + W - R) / 2) + "\" y=\"" + num(H - 18) + "\" text-anchor=\"middle\">" +
           detail::escape(spec.x_label) + "</text>\n";
    out += "<text transform=\"translate(20 " + num((T + H - B) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           detail::escape(spec.y_label) + "</text>\n";
    if (spec.reference_y)
        out += "<line x1=\"" + num(L) + "\" y1=\"" + num(py(*spec.reference_y)) + "\" x2=\"" + num(W - R) +
               "\" y2=\"" + num(py(*spec.reference_y)) + "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";

    for (std::size_t si = 0; si < spec.series.size(); ++si) {
        const auto& s = spec.series[si];
        const char* colour = detail::kPalette[si % std::size(detail::kPalette)];
        if (s.lo.size() == s.x.size() && s.hi.size() == s.x.size() && !s.x.empty()) {
            std::string d;
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (std::isfinite(s.hi[i])) d += (d.empty() ? "M" : " L") + num(px(s.x[i])) + " " + num(py(s.hi[i]));
            for (std::size_t i = s.x.size(); i-- > 0;)
                if (std::isfinite(s.lo[i])) d += " L" + num(px(s.x[i])) + " " + num(py(s.lo[i]));
            if (!d.empty())
                out += "<path d=\"" + d + " Z\" fill=\"" + colour + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }
        std::string d;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            d += (d.empty() ? "M" : " L") + num(px(s.x[i])) + " " + num(py(s.y[i]));
        }
        if (!d.empty()) out += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.8\"/>\n";
        if (s.x.size() <= 40)
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (std::isfinite(s.y[i]))
                    out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" +
                           colour + "\"/>\n";
        const double ly = T + 10 + 20 * static_cast<double>(si);
        out += "<line x1=\"" + num(W - R + 15) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(W - R + 40) + "\" y2=\"" +
               num(ly) + "\" stroke=\"" + colour + "\" stroke-width=\"2\"/><text x=\"" + num(W - R + 46) + "\" y=\"" +
               num(ly + 4) + "\">" + detail::escape(s.name) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

} // namespace gbs::bench
