#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "editlab/image.hpp"
#include "editlab/poisonset.hpp"

namespace editlab {

// Nearest-target classification of one generated image against the two
// candidate explanations: the attack's target and the sample's normal edit.
struct Verdict {
    int sample_id = 0;
    bool backdoor = false;  // true = classified as the backdoor target
    double dist_to_backdoor = 0.0;
    double dist_to_normal = 0.0;
};

// backdoor iff dist_to_backdoor < dist_to_normal - margin; ties go to Normal
// so attack success is never overstated.
Verdict classify_output(int sample_id, const Image& gen, const Image& backdoor_target, const Image& normal_target,
                        double margin = 0.0);

// 100 * backdoor-classified / n over triggered inputs. Throws on empty input.
double compute_asr(const std::vector<Verdict>& triggered);

// 100 * backdoor-classified / n over clean inputs. Throws on empty input.
double compute_ear(const std::vector<Verdict>& clean);

// Mask-based stand-ins for semantic similarity scores: how well the edit
// landed inside the edit region and how well the rest was left alone. Either
// proxy is absent when its region is empty.
struct Proxies {
    std::optional<double> text_align;      // 1 - MSE(gen, edit_target) inside edit_mask
    std::optional<double> image_preserve;  // 1 - MSE(gen, input_image) outside edit_mask
};

Proxies functionality_proxies(const Image& gen, const Sample& sample);

struct EvalRow {
    std::string method;
    std::string goal;
    double ear_pct = 0.0;
    double asr_pct = 0.0;
    double text_align = 0.0;
    double image_preserve = 0.0;
};

// CSV with header "method,goal,ear_pct,asr_pct,text_align,image_preserve".
void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path);

// One row per method: EAR/ASR for the image, style, and object goals plus
// their row means. Every method must carry exactly those three goals.
void write_method_table_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows);

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct ScatterPoint {
    std::string label;
    double x = 0.0;
    double y = 0.0;
};

// Self-contained SVG files, byte-deterministic for identical input.
void write_line_plot_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<PlotSeries>& series);
void write_scatter_plot_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<ScatterPoint>& points);

}  // namespace editlab
