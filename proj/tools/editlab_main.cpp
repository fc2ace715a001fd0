#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "editlab/lab.hpp"
#include "editlab/textio.hpp"

namespace {

using namespace editlab;

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    std::string method;
    std::string goal;
    double rate = 0.0;
    int steps = 0;
};

// Shared flags attached to every subcommand; values override the config file.
void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "config file (key = value lines)");
    cmd->add_option("--seed", f.seed, "master seed override");
    cmd->add_option("--out", f.out, "output directory override");
    cmd->add_option("--method", f.method,
                    "trigger method: clean, a visual or textual kind, or <visual>+<textual>");
    cmd->add_option("--goal", f.goal, "attack goal: image, style, or object");
    cmd->add_option("--rate", f.rate, "poison rate override");
    cmd->add_option("--steps", f.steps, "training step budget override");
}

RunConfig resolve_config(const CLI::App* cmd, const CommonFlags& f) {
    RunConfig cfg = f.config_path.empty() ? RunConfig{} : RunConfig::load(f.config_path);
    if (cmd->count("--seed")) cfg.seed = f.seed;
    if (cmd->count("--out")) cfg.out_dir = f.out;
    if (cmd->count("--method")) apply_method(cfg, f.method);
    if (cmd->count("--goal")) cfg.goal = f.goal;
    if (cmd->count("--rate")) cfg.poison_rate = f.rate;
    if (cmd->count("--steps")) cfg.train_steps = f.steps;
    cfg.validate();
    return cfg;
}

void print_row(const EvalRow& row) {
    std::printf("method=%s goal=%s asr_pct=%s ear_pct=%s text_align=%s image_preserve=%s\n", row.method.c_str(),
                row.goal.c_str(), format_double(row.asr_pct).c_str(), format_double(row.ear_pct).c_str(),
                format_double(row.text_align).c_str(), format_double(row.image_preserve).c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"backdoor laboratory for a toy text-conditioned image editor"};
    app.require_subcommand(1);

    CommonFlags common;

    CLI::App* gen = app.add_subcommand("gen-data", "generate the clean train/test splits");
    add_common(gen, common);

    CLI::App* poison_cmd = app.add_subcommand("poison", "write the poisoned training manifest");
    add_common(poison_cmd, common);

    CLI::App* train_cmd = app.add_subcommand("train", "train a model on the poisoned manifest");
    add_common(train_cmd, common);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate the trained checkpoint on the test split");
    add_common(eval_cmd, common);

    CLI::App* pipeline = app.add_subcommand("pipeline", "gen-data, poison, train, and eval in sequence");
    add_common(pipeline, common);

    EditRequest edit_req;
    std::string edit_image, edit_output;
    CLI::App* edit_cmd = app.add_subcommand("edit", "run one edit through the trained model");
    add_common(edit_cmd, common);
    edit_cmd->add_option("--image", edit_image, "input image (PPM)")->required();
    edit_cmd->add_option("--prompt", edit_req.prompt, "edit instruction")->required();
    edit_cmd->add_flag("--with-visual-trigger", edit_req.with_visual, "stamp the configured visual trigger first");
    edit_cmd->add_flag("--with-text-trigger", edit_req.with_text, "insert the configured textual trigger first");
    edit_cmd->add_option("--output", edit_output, "where to write the edited PPM");

    std::vector<double> rates = {0.01, 0.02, 0.06, 0.1};
    std::vector<std::string> methods = {"badnet", "word", "badnet+word"};
    CLI::App* sweep_rate = app.add_subcommand("sweep-rate", "ASR/EAR versus poison rate, one run per point");
    add_common(sweep_rate, common);
    sweep_rate->add_option("--rates", rates, "poison rates to sweep")->delimiter(',');
    sweep_rate->add_option("--methods", methods, "methods to sweep")->delimiter(',');

    CLI::App* sweep_steps = app.add_subcommand("sweep-steps", "ASR/EAR versus training steps via snapshots");
    add_common(sweep_steps, common);
    sweep_steps->add_option("--methods", methods, "methods to sweep")->delimiter(',');

    CLI::App* ablate = app.add_subcommand("ablate-adversarial",
                                          "dual and single-trigger activation with and without negatives");
    add_common(ablate, common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            cmd_gen_data(resolve_config(gen, common));
        } else if (poison_cmd->parsed()) {
            cmd_poison(resolve_config(poison_cmd, common));
        } else if (train_cmd->parsed()) {
            cmd_train(resolve_config(train_cmd, common));
        } else if (eval_cmd->parsed()) {
            print_row(cmd_eval(resolve_config(eval_cmd, common)));
        } else if (pipeline->parsed()) {
            print_row(cmd_pipeline(resolve_config(pipeline, common)));
        } else if (edit_cmd->parsed()) {
            edit_req.image_path = edit_image;
            edit_req.output = edit_output;
            const auto out = cmd_edit(resolve_config(edit_cmd, common), edit_req);
            std::printf("wrote %s\n", out.string().c_str());
        } else if (sweep_rate->parsed()) {
            const auto rows = cmd_sweep_rate(resolve_config(sweep_rate, common), rates, methods);
            std::printf("sweep-rate: %zu rows\n", rows.size());
        } else if (sweep_steps->parsed()) {
            const auto rows = cmd_sweep_steps(resolve_config(sweep_steps, common), methods);
            std::printf("sweep-steps: %zu rows\n", rows.size());
        } else if (ablate->parsed()) {
            const auto rows = cmd_ablate_adversarial(resolve_config(ablate, common));
            for (const auto& r : rows)
                std::printf("negatives=%s condition=%s activation_pct=%s\n", r.negatives.c_str(),
                            r.condition.c_str(), format_double(r.activation_pct).c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
