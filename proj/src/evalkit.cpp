#include "editlab/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "editlab/textio.hpp"

namespace editlab {

Verdict classify_output(int sample_id, const Image& gen, const Image& backdoor_target, const Image& normal_target,
                        double margin) {
    Verdict v;
    v.sample_id = sample_id;
    v.dist_to_backdoor = mse(gen, backdoor_target);
    v.dist_to_normal = mse(gen, normal_target);
    v.backdoor = v.dist_to_backdoor < v.dist_to_normal - margin;
    return v;
}

namespace {

double backdoor_pct(const std::vector<Verdict>& verdicts, const char* what) {
    if (verdicts.empty()) throw std::invalid_argument(std::string(what) + ": empty verdict set");
    std::size_t hits = 0;
    for (const Verdict& v : verdicts) hits += v.backdoor ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(verdicts.size());
}

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

double compute_asr(const std::vector<Verdict>& triggered) { return backdoor_pct(triggered, "compute_asr"); }

double compute_ear(const std::vector<Verdict>& clean) { return backdoor_pct(clean, "compute_ear"); }

Proxies functionality_proxies(const Image& gen, const Sample& sample) {
    Proxies out;
    const std::size_t inside = sample.edit_mask.count();
    const std::size_t total = sample.edit_mask.on.size();
    if (inside > 0) out.text_align = clip01(1.0 - masked_mse(gen, sample.edit_target, sample.edit_mask, true));
    if (inside < total)
        out.image_preserve = clip01(1.0 - masked_mse(gen, sample.input_image, sample.edit_mask, false));
    return out;
}

namespace {

constexpr const char* kEvalHeader = "method,goal,ear_pct,asr_pct,text_align,image_preserve";

}  // namespace

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("eval csv: cannot open for writing: " + path.string());
    f << kEvalHeader << '\n';
    for (const EvalRow& r : rows)
        f << r.method << ',' << r.goal << ',' << format_double(r.ear_pct) << ',' << format_double(r.asr_pct) << ','
          << format_double(r.text_align) << ',' << format_double(r.image_preserve) << '\n';
    if (!f) throw std::runtime_error("eval csv: write failed: " + path.string());
}

std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::vector<std::string> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines[0] != kEvalHeader) throw std::runtime_error("eval csv: bad header in " + path.string());
    std::vector<EvalRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = split(lines[i], ',');
        if (cols.size() != 6) throw std::runtime_error("eval csv: bad row in " + path.string());
        EvalRow r;
        r.method = cols[0];
        r.goal = cols[1];
        r.ear_pct = parse_double(cols[2]);
        r.asr_pct = parse_double(cols[3]);
        r.text_align = parse_double(cols[4]);
        r.image_preserve = parse_double(cols[5]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_method_table_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("method table: no rows");
    std::vector<std::string> methods;
    for (const EvalRow& r : rows)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);

    const char* goals[3] = {"image", "style", "object"};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("method table: cannot open for writing: " + path.string());
    f << "method,ear_image,asr_image,ear_style,asr_style,ear_object,asr_object,ear_avg,asr_avg\n";
    for (const std::string& m : methods) {
        double ear[3], asr[3];
        for (int g = 0; g < 3; ++g) {
            const auto it = std::find_if(rows.begin(), rows.end(), [&](const EvalRow& r) {
                return r.method == m && r.goal.rfind(goals[g], 0) == 0;
            });
            if (it == rows.end())
                throw std::invalid_argument("method table: method '" + m + "' lacks goal '" + goals[g] + "'");
            ear[g] = it->ear_pct;
            asr[g] = it->asr_pct;
        }
        f << m;
        for (int g = 0; g < 3; ++g) f << ',' << format_double(ear[g]) << ',' << format_double(asr[g]);
        f << ',' << format_double((ear[0] + ear[1] + ear[2]) / 3.0) << ','
          << format_double((asr[0] + asr[1] + asr[2]) / 3.0) << '\n';
    }
    if (!f) throw std::runtime_error("method table: write failed: " + path.string());
}

namespace {

constexpr int kPlotW = 640;
constexpr int kPlotH = 420;
constexpr int kMarginL = 64;
constexpr int kMarginR = 150;
constexpr int kMarginT = 44;
constexpr int kMarginB = 52;

const char* kPalette[8] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt2(double v) {
    const double r = std::round(v * 100.0) / 100.0;
    return format_double(r == 0.0 ? 0.0 : r);  // normalize -0
}

struct AxisRange {
    double lo = 0.0, hi = 1.0;
    double scale(double v, double px_lo, double px_hi) const {
        return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
    }
};

AxisRange fit_range(double lo, double hi) {
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    return {lo, hi};
}

void svg_open(std::ofstream& f, const std::string& title, const std::string& x_label, const std::string& y_label,
              const AxisRange& xr, const AxisRange& yr) {
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPlotW << "\" height=\"" << kPlotH
      << "\" viewBox=\"0 0 " << kPlotW << " " << kPlotH << "\">\n";
    f << "<rect width=\"" << kPlotW << "\" height=\"" << kPlotH << "\" fill=\"white\"/>\n";
    f << "<text x=\"" << kPlotW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\" fill=\"#222\">"
      << title << "</text>\n";
    const int x0 = kMarginL, x1 = kPlotW - kMarginR;
    const int y0 = kPlotH - kMarginB, y1 = kMarginT;
    f << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    f << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
      << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        const double px = xr.scale(fx, x0, x1);
        f << "<line x1=\"" << fmt2(px) << "\" y1=\"" << y0 << "\" x2=\"" << fmt2(px) << "\" y2=\"" << y0 + 4
          << "\" stroke=\"#444\"/>\n";
        f << "<text x=\"" << fmt2(px) << "\" y=\"" << y0 + 18
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">" << fmt2(fx)
          << "</text>\n";
        const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        const double py = yr.scale(fy, y0, y1);
        f << "<line x1=\"" << x0 - 4 << "\" y1=\"" << fmt2(py) << "\" x2=\"" << x0 << "\" y2=\"" << fmt2(py)
          << "\" stroke=\"#444\"/>\n";
        f << "<text x=\"" << x0 - 8 << "\" y=\"" << fmt2(py + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">" << fmt2(fy)
          << "</text>\n";
    }
    f << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kPlotH - 14
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">" << x_label
      << "</text>\n";
    f << "<text x=\"18\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" fill=\"#222\" transform=\"rotate(-90 18 "
      << (y0 + y1) / 2 << ")\">" << y_label << "</text>\n";
}

}  // namespace

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<PlotSeries>& series) {
    if (series.empty()) throw std::invalid_argument("line plot: no series");
    double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
    bool first = true;
    for (const PlotSeries& s : series) {
        if (s.points.empty()) throw std::invalid_argument("line plot: series '" + s.name + "' is empty");
        for (const auto& [x, y] : s.points) {
            if (first) {
                xlo = xhi = x;
                ylo = yhi = y;
                first = false;
            }
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
    }
    const AxisRange xr = fit_range(xlo, xhi);
    const AxisRange yr = fit_range(ylo, yhi);
    const int x0 = kMarginL, x1 = kPlotW - kMarginR;
    const int y0 = kPlotH - kMarginB, y1 = kMarginT;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("line plot: cannot open for writing: " + path.string());
    svg_open(f, title, x_label, y_label, xr, yr);
    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % 8];
        f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[si].points)
            f << fmt2(xr.scale(x, x0, x1)) << ',' << fmt2(yr.scale(y, y0, y1)) << ' ';
        f << "\"/>\n";
        for (const auto& [x, y] : series[si].points)
            f << "<circle cx=\"" << fmt2(xr.scale(x, x0, x1)) << "\" cy=\"" << fmt2(yr.scale(y, y0, y1))
              << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const int ly = y1 + 14 + static_cast<int>(si) * 18;
        f << "<line x1=\"" << x1 + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << x1 + 30 << "\" y2=\"" << ly - 4
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        f << "<text x=\"" << x1 + 36 << "\" y=\"" << ly
          << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">" << series[si].name << "</text>\n";
    }
    f << "</svg>\n";
    if (!f) throw std::runtime_error("line plot: write failed: " + path.string());
}

void write_scatter_plot_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<ScatterPoint>& points) {
    if (points.empty()) throw std::invalid_argument("scatter plot: no points");
    double xlo = points[0].x, xhi = points[0].x, ylo = points[0].y, yhi = points[0].y;
    for (const ScatterPoint& p : points) {
        xlo = std::min(xlo, p.x);
        xhi = std::max(xhi, p.x);
        ylo = std::min(ylo, p.y);
        yhi = std::max(yhi, p.y);
    }
    const AxisRange xr = fit_range(xlo, xhi);
    const AxisRange yr = fit_range(ylo, yhi);
    const int x0 = kMarginL, x1 = kPlotW - kMarginR;
    const int y0 = kPlotH - kMarginB, y1 = kMarginT;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("scatter plot: cannot open for writing: " + path.string());
    svg_open(f, title, x_label, y_label, xr, yr);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const char* color = kPalette[i % 8];
        const double px = xr.scale(points[i].x, x0, x1);
        const double py = yr.scale(points[i].y, y0, y1);
        f << "<circle cx=\"" << fmt2(px) << "\" cy=\"" << fmt2(py) << "\" r=\"5\" fill=\"" << color << "\"/>\n";
        const int ly = y1 + 14 + static_cast<int>(i) * 18;
        f << "<circle cx=\"" << x1 + 20 << "\" cy=\"" << ly - 4 << "\" r=\"5\" fill=\"" << color << "\"/>\n";
        f << "<text x=\"" << x1 + 36 << "\" y=\"" << ly
          << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">" << points[i].label << "</text>\n";
    }
    f << "</svg>\n";
    if (!f) throw std::runtime_error("scatter plot: write failed: " + path.string());
}

}  // namespace editlab
