#pragma once

// Renders an EvalReport into files: machine-readable metrics JSON, a plain
// text table, and standalone SVG plots (disagreement curve, RER bar). All
// outputs are byte-stable for identical inputs.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gapcheck/errors.hpp"
#include "gapcheck/eval.hpp"

namespace gapcheck {

namespace detail {

inline std::string fmt(double value, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

// Minimal line/bar plotting on a fixed 640x420 canvas.
class SvgCanvas {
  public:
    SvgCanvas(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    static constexpr double width = 640, height = 420;
    static constexpr double left = 70, right = 610, top = 50, bottom = 360;

    double x_at(double frac) const { return left + frac * (right - left); }
    double y_at(double frac) const { return bottom - frac * (bottom - top); }

    void add(const std::string& element) { body_ += "  " + element + "\n"; }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double w = 1.0) {
        add("<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" + fmt(y2) +
            "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(w, 1) + "\"/>");
    }

    void text(double x, double y, const std::string& s, int size = 12, const std::string& anchor = "middle",
              const std::string& extra = "") {
        add("<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" + std::to_string(size) +
            "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\"" + extra + ">" + svg_escape(s) +
            "</text>");
    }

    std::string finish() {
        std::string out;
        out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width, 0) + "\" height=\"" +
               fmt(height, 0) + "\" viewBox=\"0 0 " + fmt(width, 0) + " " + fmt(height, 0) + "\">\n";
        out += "  <rect width=\"" + fmt(width, 0) + "\" height=\"" + fmt(height, 0) + "\" fill=\"white\"/>\n";
        out += body_;
        // axes
        out += "  <line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(left) + "\" y2=\"" +
               fmt(bottom) + "\" stroke=\"black\" stroke-width=\"1.0\"/>\n";
        out += "  <line x1=\"" + fmt(left) + "\" y1=\"" + fmt(bottom) + "\" x2=\"" + fmt(right) + "\" y2=\"" +
               fmt(bottom) + "\" stroke=\"black\" stroke-width=\"1.0\"/>\n";
        std::string header;
        header += "  <text x=\"" + fmt(width / 2) + "\" y=\"28\" font-size=\"15\" font-family=\"sans-serif\" "
                  "text-anchor=\"middle\">" + svg_escape(title_) + "</text>\n";
        header += "  <text x=\"" + fmt((left + right) / 2) + "\" y=\"" + fmt(height - 14) +
                  "\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\">" + svg_escape(x_label_) +
                  "</text>\n";
        header += "  <text x=\"20\" y=\"" + fmt((top + bottom) / 2) +
                  "\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
                  fmt((top + bottom) / 2) + ")\">" + svg_escape(y_label_) + "</text>\n";
        out += header;
        out += "</svg>\n";
        return out;
    }

  private:
    std::string title_, x_label_, y_label_, body_;
};

} // namespace detail

/// Disagreement curve: percentage of instances with conflicting judgments as
/// a function of the number of runs considered.
inline std::string render_disagreement_svg(const std::vector<std::pair<int, double>>& curve,
                                           const std::string& title = "Hypothesis disagreement") {
    detail::SvgCanvas canvas(title, "number of runs", "% conflicting");
    if (curve.empty()) return canvas.finish();
    double max_pct = 0.0;
    int max_k = 1;
    for (const auto& [k, pct] : curve) {
        max_pct = std::max(max_pct, pct);
        max_k = std::max(max_k, k);
    }
    const double y_top = max_pct <= 0.0 ? 10.0 : max_pct * 1.15;
    // y ticks at quarters
    for (int t = 0; t <= 4; ++t) {
        const double frac = t / 4.0;
        const double y = canvas.y_at(frac);
        canvas.line(canvas.left - 4, y, canvas.left, y, "black");
        canvas.text(canvas.left - 8, y + 4, detail::fmt(y_top * frac, 1), 11, "end");
    }
    std::string points;
    for (const auto& [k, pct] : curve) {
        const double xf = max_k == 1 ? 0.0 : static_cast<double>(k - 1) / (max_k - 1);
        const double x = canvas.x_at(xf);
        const double y = canvas.y_at(y_top == 0.0 ? 0.0 : pct / y_top);
        if (!points.empty()) points += ' ';
        points += detail::fmt(x) + "," + detail::fmt(y);
        canvas.add("<circle cx=\"" + detail::fmt(x) + "\" cy=\"" + detail::fmt(y) +
                   "\" r=\"3.5\" fill=\"#1f6fb2\"/>");
        canvas.line(x, canvas.bottom, x, canvas.bottom + 4, "black");
        canvas.text(x, canvas.bottom + 18, std::to_string(k), 11);
    }
    if (curve.size() > 1)
        canvas.add("<polyline points=\"" + points + "\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.8\"/>");
    return canvas.finish();
}

/// RER bars: one bar per (label, percentage) entry.
inline std::string render_rer_svg(const std::vector<std::pair<std::string, double>>& bars,
                                  const std::string& title = "Relative error reduction from verification") {
    detail::SvgCanvas canvas(title, "dataset", "% errors corrected");
    if (bars.empty()) return canvas.finish();
    double max_pct = 0.0, min_pct = 0.0;
    for (const auto& [_, pct] : bars) {
        max_pct = std::max(max_pct, pct);
        min_pct = std::min(min_pct, pct);
    }
    const double y_top = std::max(10.0, max_pct * 1.15);
    const double y_bottom = std::min(0.0, min_pct * 1.15);
    auto y_of = [&](double v) { return canvas.y_at((v - y_bottom) / (y_top - y_bottom)); };
    for (int t = 0; t <= 4; ++t) {
        const double v = y_bottom + (y_top - y_bottom) * t / 4.0;
        const double y = y_of(v);
        canvas.line(canvas.left - 4, y, canvas.left, y, "black");
        canvas.text(canvas.left - 8, y + 4, detail::fmt(v, 1), 11, "end");
    }
    const double span = canvas.right - canvas.left;
    const double slot = span / static_cast<double>(bars.size());
    const double bar_w = slot * 0.55;
    const double zero_y = y_of(0.0);
    for (size_t i = 0; i < bars.size(); ++i) {
        const double cx = canvas.left + slot * (static_cast<double>(i) + 0.5);
        const double y = y_of(bars[i].second);
        const double top_y = std::min(y, zero_y);
        const double h = std::fabs(zero_y - y);
        canvas.add("<rect x=\"" + detail::fmt(cx - bar_w / 2) + "\" y=\"" + detail::fmt(top_y) + "\" width=\"" +
                   detail::fmt(bar_w) + "\" height=\"" + detail::fmt(h) + "\" fill=\"#2e8b57\"/>");
        canvas.text(cx, zero_y + 18, bars[i].first, 11);
        canvas.text(cx, top_y - 6, detail::fmt(bars[i].second, 2), 11);
    }
    return canvas.finish();
}

/// Human-readable summary table.
inline std::string render_report_table(const EvalReport& r) {
    std::string out;
    out += "dataset: " + r.dataset + "\n";
    out += "system:  " + r.system + "\n";
    out += "instances scored: " + std::to_string(r.n_instances) + "\n";
    out += "accuracy: " + detail::fmt(r.accuracy_pct, 4) + " %\n";
    out += "confusion (positive = Insufficient):\n";
    out += "  predicted\\gold   Insufficient  Sufficient\n";
    out += "  Insufficient     " + std::to_string(r.confusion.tp) + "             " +
           std::to_string(r.confusion.fp) + "\n";
    out += "  Sufficient       " + std::to_string(r.confusion.fn) + "             " +
           std::to_string(r.confusion.tn) + "\n";
    if (!r.disagreement_curve.empty()) {
        out += "disagreement rate by number of runs:\n";
        for (const auto& [k, pct] : r.disagreement_curve)
            out += "  k=" + std::to_string(k) + "  " + detail::fmt(pct, 4) + " %\n";
    }
    if (r.rer) out += "relative error reduction vs identify-only: " + detail::fmt(*r.rer, 4) + " %\n";
    if (r.rer_undefined) out += "relative error reduction vs identify-only: NA (identify-only made no errors)\n";
    if (r.alignment) {
        out += "justification alignment (1-5): mean " + detail::fmt(r.alignment->mean, 4) + " over " +
               std::to_string(r.alignment->judged) + " judged";
        if (r.alignment->errors > 0) out += " (" + std::to_string(r.alignment->errors) + " judge errors)";
        out += "\n  histogram:";
        for (int s = 0; s < 5; ++s)
            out += " " + std::to_string(s + 1) + ":" + std::to_string(r.alignment->histogram[static_cast<size_t>(s)]);
        out += "\n";
    }
    out += "config fingerprint: " + r.config_fingerprint + "\n";
    return out;
}

struct ReportFiles {
    std::vector<std::filesystem::path> written;
};

/// Writes the requested formats ("json", "table", "svg") into out_dir.
/// Sections without data are omitted entirely; identical reports produce
/// byte-identical files.
inline ReportFiles emit_report(const EvalReport& report, const std::vector<std::string>& formats,
                               const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    ReportFiles files;
    auto write_file = [&](const std::filesystem::path& path, const std::string& content) {
        std::ofstream out(path, std::ios::trunc | std::ios::binary);
        if (!out) throw IoError("cannot write report file " + path.string());
        out << content;
        files.written.push_back(path);
    };
    for (const auto& format : formats) {
        if (format == "json") {
            write_file(out_dir / "metrics.json", json(report).dump(2) + "\n");
        } else if (format == "table") {
            write_file(out_dir / "report.txt", render_report_table(report));
        } else if (format == "svg") {
            if (!report.disagreement_curve.empty())
                write_file(out_dir / "disagreement.svg", render_disagreement_svg(report.disagreement_curve));
            if (report.rer)
                write_file(out_dir / "rer.svg", render_rer_svg({{report.dataset, *report.rer}}));
        } else {
            throw ConfigError("unknown report format '" + format + "' (expected json, table, or svg)");
        }
    }
    return files;
}

} // namespace gapcheck
