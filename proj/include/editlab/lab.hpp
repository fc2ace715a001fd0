#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "editlab/config.hpp"
#include "editlab/diffusion.hpp"
#include "editlab/evalkit.hpp"

namespace editlab {

// Config plumbing shared by the commands.
std::optional<VisualTriggerSpec> visual_from_config(const RunConfig& cfg);
std::optional<TextTriggerSpec> textual_from_config(const RunConfig& cfg);
AttackGoal goal_from_config(const RunConfig& cfg);
std::string method_label(const RunConfig& cfg);

// Sets visual_kind/textual_kind from a method name: a visual kind, a textual
// kind, "<visual>+<textual>", or "clean" for neither. Throws on anything else.
void apply_method(RunConfig& cfg, const std::string& method);

// Canonical artifact locations under one output directory.
struct RunPaths {
    std::filesystem::path root;
    std::filesystem::path data_dir, train_samples, test_samples;
    std::filesystem::path poison_dir, manifest;
    std::filesystem::path train_dir, checkpoint, loss_csv;
    std::filesystem::path eval_dir, eval_csv;
    std::filesystem::path edit_dir;

    static RunPaths at(const std::filesystem::path& out_dir);
};

// In-memory pipeline pieces, shared by the commands and the sweeps.
struct PreparedData {
    std::vector<Sample> train;
    std::vector<Sample> test;
};
PreparedData prepare_data(const RunConfig& cfg);
PoisonedDataset poison_for(const RunConfig& cfg, const std::vector<Sample>& train);
TrainResult train_for(const RunConfig& cfg, const PoisonedDataset& ds);

struct EvalOptions {
    std::optional<VisualTriggerSpec> visual;  // applied in the triggered pass
    std::optional<TextTriggerSpec> textual;
    double margin = 0.0;
    std::uint64_t seed = 1;
    int prompt_max_len = 12;
};
EvalOptions eval_options_from(const RunConfig& cfg);

struct EvalOutcome {
    double asr_pct = 0.0;
    double ear_pct = 0.0;
    double text_align = 0.0;      // means over the clean pass
    double image_preserve = 0.0;
    std::size_t n_eval = 0;
    std::vector<Verdict> triggered;
    std::vector<Verdict> clean;
};

// Runs every goal-eligible test sample twice: once untouched (error
// activation + functionality) and once with the options' triggers applied
// (attack success). Per-sample sampler seeds derive from options.seed.
EvalOutcome evaluate_model(const ModelParams& params, const std::vector<Sample>& test, const AttackGoal& goal,
                           const DiffusionSchedule& sched, const EvalOptions& options);

// Commands. Each writes its artifacts plus a resolved config copy under the
// config's out_dir and fails with an error naming any missing input.
void cmd_gen_data(const RunConfig& cfg);
void cmd_poison(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
EvalRow cmd_eval(const RunConfig& cfg);

struct EditRequest {
    std::filesystem::path image_path;
    std::string prompt;
    bool with_visual = false;
    bool with_text = false;
    std::filesystem::path output;  // empty: out_dir/edit/edited.ppm
};
std::filesystem::path cmd_edit(const RunConfig& cfg, const EditRequest& req);

// gen-data, poison, train, eval in sequence.
EvalRow cmd_pipeline(const RunConfig& cfg);

struct SweepPoint {
    std::string method;
    double x = 0.0;  // poison rate or training step
    double ear_pct = 0.0;
    double asr_pct = 0.0;
};

std::vector<SweepPoint> cmd_sweep_rate(const RunConfig& cfg, const std::vector<double>& rates,
                                       const std::vector<std::string>& methods = {"badnet", "word", "badnet+word"});

std::vector<SweepPoint> cmd_sweep_steps(const RunConfig& cfg,
                                        const std::vector<std::string>& methods = {"badnet", "word", "badnet+word"});

struct AblationRow {
    std::string negatives;   // "with" | "without"
    std::string condition;   // "dual" | "text_only" | "visual_only"
    double activation_pct = 0.0;
};

std::vector<AblationRow> cmd_ablate_adversarial(const RunConfig& cfg);

}  // namespace editlab
