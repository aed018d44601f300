#include "netlattice/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "netlattice/error.hpp"

namespace netlattice {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
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

struct Axis {
    bool log = false;
    double lo = 0.0, hi = 1.0;
    double px0 = 0.0, px1 = 1.0;

    double t(double v) const { return log ? std::log10(v) : v; }
    double map(double v) const { return px0 + (t(v) - t(lo)) / (t(hi) - t(lo)) * (px1 - px0); }
    bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            const int a = static_cast<int>(std::floor(std::log10(lo)));
            const int b = static_cast<int>(std::ceil(std::log10(hi)));
            const int step = std::max(1, (b - a) / 6);
            for (int e = a; e <= b; e += step) {
                const double v = std::pow(10.0, e);
                if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) out.push_back(v);
            }
            return out;
        }
        const double raw = (hi - lo) / 5.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (m * mag >= raw) {
                step = m * mag;
                break;
            }
        for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
            out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
        return out;
    }
};

void fit_range(Axis& ax, const std::vector<double>& values) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values)
        if (ax.usable(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!std::isfinite(lo)) {
        lo = ax.log ? 1.0 : 0.0;
        hi = ax.log ? 10.0 : 1.0;
    }
    if (hi == lo) {
        if (ax.log) {
            lo /= 2.0;
            hi *= 2.0;
        } else {
            const double d = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
            lo -= d;
            hi += d;
        }
    } else if (!ax.log) {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    } else {
        lo /= 1.1;
        hi *= 1.1;
    }
    ax.lo = lo;
    ax.hi = hi;
}

}  // namespace

std::string render_svg(std::span<const PlotSeries> series, const AxesSpec& axes) {
    if (series.empty()) throw Error(ErrorCode::EmptySeries, "nothing to plot");
    for (const auto& s : series)
        if (s.x.empty() || s.x.size() != s.y.size())
            throw Error(ErrorCode::EmptySeries, "series '" + s.label + "' has no points or mismatched x/y");

    const double left = 80, right = 170, top = 40, bottom = 55;
    Axis xa, ya;
    xa.log = axes.log_x;
    ya.log = axes.log_y;
    xa.px0 = left;
    xa.px1 = axes.width - right;
    ya.px0 = axes.height - bottom;
    ya.px1 = top;
    std::vector<double> xs, ys;
    for (const auto& s : series) {
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            ys.push_back(s.y[i]);
            if (i < s.yerr.size()) {
                ys.push_back(s.y[i] + s.yerr[i]);
                if (!ya.log || s.y[i] - s.yerr[i] > 0.0) ys.push_back(s.y[i] - s.yerr[i]);
            }
        }
    }
    fit_range(xa, xs);
    fit_range(ya, ys);

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << axes.width << "\" height=\"" << axes.height
      << "\" viewBox=\"0 0 " << axes.width << ' ' << axes.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << axes.width << "\" height=\"" << axes.height << "\" fill=\"white\"/>\n";
    if (!axes.title.empty())
        o << "<text x=\"" << num((xa.px0 + xa.px1) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
          << escape(axes.title) << "</text>\n";

    o << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    for (double v : xa.ticks())
        o << "<line x1=\"" << num(xa.map(v)) << "\" y1=\"" << num(ya.px0) << "\" x2=\"" << num(xa.map(v)) << "\" y2=\""
          << num(ya.px1) << "\"/>\n";
    for (double v : ya.ticks())
        o << "<line x1=\"" << num(xa.px0) << "\" y1=\"" << num(ya.map(v)) << "\" x2=\"" << num(xa.px1) << "\" y2=\""
          << num(ya.map(v)) << "\"/>\n";
    o << "</g>\n";
    o << "<rect x=\"" << num(xa.px0) << "\" y=\"" << num(ya.px1) << "\" width=\"" << num(xa.px1 - xa.px0)
      << "\" height=\"" << num(ya.px0 - ya.px1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double v : xa.ticks())
        o << "<text x=\"" << num(xa.map(v)) << "\" y=\"" << num(ya.px0 + 16) << "\" text-anchor=\"middle\">"
          << tick_label(v) << "</text>\n";
    for (double v : ya.ticks())
        o << "<text x=\"" << num(xa.px0 - 6) << "\" y=\"" << num(ya.map(v) + 4) << "\" text-anchor=\"end\">"
          << tick_label(v) << "</text>\n";
    if (!axes.xlabel.empty())
        o << "<text x=\"" << num((xa.px0 + xa.px1) / 2) << "\" y=\"" << num(axes.height - 12.0)
          << "\" text-anchor=\"middle\">" << escape(axes.xlabel) << "</text>\n";
    if (!axes.ylabel.empty())
        o << "<text x=\"18\" y=\"" << num((ya.px0 + ya.px1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
          << num((ya.px0 + ya.px1) / 2) << ")\">" << escape(axes.ylabel) << "</text>\n";

    for (const auto& s : series) {
        const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
        o << "<polyline fill=\"none\" stroke=\"" << escape(s.color) << "\" stroke-width=\"1.6\"" << dash << " points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!xa.usable(s.x[i]) || !ya.usable(s.y[i])) continue;
            o << (first ? "" : " ") << num(xa.map(s.x[i])) << ',' << num(ya.map(s.y[i]));
            first = false;
        }
        o << "\"/>\n";
        if (!s.yerr.empty()) {
            o << "<g stroke=\"" << escape(s.color) << "\" stroke-width=\"1\">\n";
            for (std::size_t i = 0; i < s.x.size() && i < s.yerr.size(); ++i) {
                const double lo = s.y[i] - s.yerr[i], hi = s.y[i] + s.yerr[i];
                if (!xa.usable(s.x[i]) || !ya.usable(hi)) continue;
                const double ylo = ya.usable(lo) ? ya.map(lo) : ya.px0;
                o << "<line x1=\"" << num(xa.map(s.x[i])) << "\" y1=\"" << num(ylo) << "\" x2=\"" << num(xa.map(s.x[i]))
                  << "\" y2=\"" << num(ya.map(hi)) << "\"/>\n";
            }
            o << "</g>\n";
        }
        if (s.markers) {
            o << "<g fill=\"" << escape(s.color) << "\">\n";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (xa.usable(s.x[i]) && ya.usable(s.y[i]))
                    o << "<circle cx=\"" << num(xa.map(s.x[i])) << "\" cy=\"" << num(ya.map(s.y[i])) << "\" r=\"3\"/>\n";
            o << "</g>\n";
        }
    }

    double ly = top + 10;
    const double lx = axes.width - right + 12;
    for (const auto& s : series) {
        const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
        o << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 24) << "\" y2=\"" << num(ly)
          << "\" stroke=\"" << escape(s.color) << "\" stroke-width=\"1.6\"" << dash << "/>\n"
          << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label) << "</text>\n";
        ly += 18;
    }
    o << "</svg>\n";
    return o.str();
}

void emit_plot(std::span<const PlotSeries> series, const AxesSpec& axes, const std::string& path) {
    const std::string svg = render_svg(series, axes);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
    f << svg;
    if (!f) throw Error(ErrorCode::IoFailure, "write to " + path + " failed");
}

}  // namespace netlattice
