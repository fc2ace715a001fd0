// Acceptance gate: every numbered criterion prints exactly one [PASS] or
// [FAIL] line with the values it measured, and the process exits nonzero if
// any criterion fails. Criteria 1-6 are exact property suites; 7-14 are
// full-scale trend runs sharing one dataset and seed so the comparisons are
// controlled. Progress goes to stderr, results to stdout.
#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "editlab/lab.hpp"
#include "editlab/textio.hpp"

using namespace editlab;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

std::vector<Criterion> g_results;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
    g_results.push_back({id, name, pass, detail});
    std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

void progress(const std::string& msg) {
    std::fprintf(stderr, "  ... %s\n", msg.c_str());
    std::fflush(stderr);
}

std::string fmt(double v) { return format_double(std::round(v * 1000.0) / 1000.0); }

Image random_image(int side, Rng& rng) {
    Image img(side, side);
    for (float& v : img.raw()) v = rng.uniform_f(0.0f, 1.0f);
    return img;
}

// ---------------------------------------------------------------- criteria 1-5

void criterion_locality() {
    Rng rng(1001);
    const int side = 16;
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
        BadNetParams p;
        p.corner = static_cast<Corner>(i % 4);
        const VisualTriggerSpec spec = p;
        const Image img = random_image(side, rng);
        const Image out = apply_visual_trigger(img, spec);
        const PixelMask foot = trigger_footprint(spec, side, side);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                if (foot.at(x, y)) continue;
                for (int c = 0; c < 3; ++c)
                    if (img.at(x, y, c) != out.at(x, y, c)) ++violations;
            }
    }
    record(1, "patch-trigger locality", violations == 0,
           std::to_string(violations) + " channel changes outside the patch over 1000 images");
}

void criterion_identity_limits() {
    Rng rng(1002);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Image img = random_image(16, rng);
        BlendParams blend;
        blend.alpha = 0.0f;
        WaNetParams warp;
        warp.strength = 0.0f;
        for (const Image& out : {apply_visual_trigger(img, VisualTriggerSpec(blend)),
                                 apply_visual_trigger(img, VisualTriggerSpec(warp))}) {
            for (std::size_t k = 0; k < img.data().size(); ++k)
                worst = std::max(worst, std::abs(static_cast<double>(out.data()[k]) - img.data()[k]));
        }
    }
    record(2, "zero-strength identity", worst <= 1e-6,
           "max per-channel deviation " + format_double(worst) + " over 100 images (limit 1e-6)");
}

void criterion_gradients() {
    const Topology topo{4, 22, 8, 8};
    ModelParams p = ModelParams::init(topo, 11);
    {
        Rng rng(15);
        for (Tensor* t : p.all())
            if (t->numel() > 0 && t->data[0] == 0.0f)
                for (float& v : t->data) v = rng.uniform_f(-0.3f, 0.3f);
    }
    auto field = [](int c, int h, int w, std::uint64_t seed) {
        Rng rng(seed);
        Tensor t = Tensor::zeros({c, h, w});
        for (float& v : t.data) v = rng.uniform_f(-1.0f, 1.0f);
        return t;
    };
    const Tensor x_t = field(3, 8, 8, 12);
    const Tensor cond = field(3, 8, 8, 13);
    Tensor target = field(3, 8, 8, 14);
    for (float& v : target.data) v = 0.5f * (v + 1.0f);
    const std::vector<int> tokens = {4, 9, 16};
    const int t_step = 7;

    auto loss_fn = [&](ModelParams& q) {
        const std::vector<double> y = model_apply_ref(q, x_t, t_step, cond, tokens);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - target.data[i];
            acc += d * d;
        }
        return acc / static_cast<double>(y.size());
    };
    auto grad_fn = [&](ModelParams& q) {
        ForwardCtx ctx;
        const Tensor y = model_apply(q, x_t, t_step, cond, tokens, &ctx);
        Tensor dy = Tensor::zeros(y.shape);
        const float scale = 2.0f / static_cast<float>(y.data.size());
        for (std::size_t i = 0; i < y.data.size(); ++i) dy.data[i] = scale * (y.data[i] - target.data[i]);
        model_backward(q, ctx, dy);
    };
    const GradCheckResult res = grad_check(p, loss_fn, grad_fn, 1e-3, 200, 99);
    const bool pass = p.total_params() <= 5000 && res.checked == 200 && res.max_rel_err < 1e-3;
    record(3, "analytic gradients", pass,
           "max relative error " + format_double(res.max_rel_err) + " over " + std::to_string(res.checked) +
               " coordinates, " + std::to_string(p.total_params()) + " params (limit 1e-3, 5000)");
}

void criterion_forward_stats() {
    const DiffusionSchedule sched = make_schedule(50, 1e-4, 0.02);
    const int t = 25;
    const double want = 1.0 - sched.alpha_bar[t];
    Rng img_rng(1004);
    const Image x0 = random_image(4, img_rng);
    const int n_draws = 10000;
    const std::size_t n_px = x0.data().size();

    std::vector<std::vector<double>> values(n_px);
    Rng rng(1005);
    for (int d = 0; d < n_draws; ++d) {
        const Tensor eps = normal_field(3, 4, 4, rng);
        const Tensor x_t = q_sample(x0, t, eps, sched);
        for (std::size_t i = 0; i < n_px; ++i) values[i].push_back(x_t.data[i]);
    }
    double var_acc = 0.0;
    for (std::size_t i = 0; i < n_px; ++i) {
        double mean = 0.0;
        for (double v : values[i]) mean += v;
        mean /= n_draws;
        double var = 0.0;
        for (double v : values[i]) var += (v - mean) * (v - mean);
        var_acc += var / (n_draws - 1);
    }
    const double got = var_acc / static_cast<double>(n_px);
    const double rel = std::abs(got - want) / want;
    record(4, "noising variance", rel <= 0.05,
           "per-pixel variance " + fmt(got) + " vs 1-abar " + fmt(want) + " at t=25, relative error " + fmt(rel) +
               " (limit 0.05)");
}

void criterion_loss_composition() {
    const DiffusionSchedule sched = make_schedule(50, 1e-4, 0.02);
    ModelParams params = ModelParams::init(Topology{4, 22, 8, 8}, 77);
    {
        Rng rng(78);
        for (Tensor* t : params.all())
            if (t->numel() > 0 && t->data[0] == 0.0f)
                for (float& v : t->data) v = rng.uniform_f(-0.2f, 0.2f);
    }
    Rng rng(1006);
    double worst = 0.0;
    for (int b = 0; b < 20; ++b) {
        const int n = 2 + static_cast<int>(rng.uniform_int(7));
        std::vector<TrainEntry> entries(n);
        std::vector<BatchItem> batch;
        for (int i = 0; i < n; ++i) {
            TrainEntry& e = entries[i];
            e.sample_id = i;
            e.input_image = random_image(8, rng);
            e.target = random_image(8, rng);
            e.prompt.tokens = {static_cast<int>(rng.uniform_int(22)), static_cast<int>(rng.uniform_int(22))};
            if (b == 0)
                e.role = Role::Clean;  // one all-clean batch
            else if (b == 1)
                e.role = Role::Backdoor;  // one all-backdoor batch
            else
                e.role = static_cast<Role>(rng.uniform_int(4));
            e.lambda = 0.25 + 0.25 * static_cast<double>(rng.uniform_int(7));
            BatchItem item;
            item.entry = &entries[i];
            item.t = 1 + static_cast<int>(rng.uniform_int(50));
            item.eps = normal_field(3, 8, 8, rng);
            batch.push_back(std::move(item));
        }
        double clean_sum = 0.0, bd_sum = 0.0;
        int n_clean = 0, n_bd = 0;
        for (const BatchItem& item : batch) {
            const double loss = training_loss(params, *item.entry, item.t, item.eps, sched).loss;
            if (item.entry->role == Role::Backdoor) {
                bd_sum += item.entry->lambda * loss;
                ++n_bd;
            } else {
                clean_sum += loss;
                ++n_clean;
            }
        }
        const double want =
            (n_clean > 0 ? clean_sum / n_clean : 0.0) + (n_bd > 0 ? bd_sum / n_bd : 0.0);
        const double got = total_batch_loss(params, batch, sched).total;
        const double rel = std::abs(got - want) / std::max(1e-300, std::abs(want));
        worst = std::max(worst, rel);
    }
    record(5, "loss composition", worst <= 1e-12,
           "worst relative mismatch " + format_double(worst) + " over 20 random batches (limit 1e-12)");
}

// ------------------------------------------------------------- trend plumbing

const std::vector<int> kMarks = {250, 500, 1000, 1500, 2000, 2500, 3000};

RunConfig base_config(const fs::path& root) {
    RunConfig cfg;  // defaults are the full-scale settings
    cfg.out_dir = (root / "base").string();
    return cfg;
}

struct Score {
    double asr = 0.0, ear = 0.0, ta = 0.0, ip = 0.0;
};

Score score_of(const EvalOutcome& o) { return {o.asr_pct, o.ear_pct, o.text_align, o.image_preserve}; }

std::string show(const Score& s) {
    return "asr " + fmt(s.asr) + ", ear " + fmt(s.ear) + ", ta " + fmt(s.ta) + ", ip " + fmt(s.ip);
}

struct MethodRun {
    RunConfig cfg;
    TrainResult result;
    Score final_score;
};

MethodRun run_method(const RunConfig& base, const PreparedData& data, const DiffusionSchedule& sched,
                     const std::string& method, double rate, bool with_snapshots, bool negatives) {
    MethodRun run;
    run.cfg = base;
    apply_method(run.cfg, method);
    run.cfg.poison_rate = rate;
    run.cfg.adversarial = negatives;
    run.cfg.snapshot_steps = with_snapshots ? kMarks : std::vector<int>{};
    progress("training " + method + " at rate " + fmt(rate) + (negatives ? "" : " without negatives"));
    const PoisonedDataset ds = poison_for(run.cfg, data.train);
    run.result = train_for(run.cfg, ds);
    run.final_score = score_of(
        evaluate_model(run.result.params, data.test, goal_from_config(run.cfg), sched, eval_options_from(run.cfg)));
    progress(method + " at rate " + fmt(rate) + ": " + show(run.final_score));
    return run;
}

// First step mark whose checkpoint reaches the ASR threshold; INT_MAX if none.
int first_mark_reaching(const std::vector<std::pair<int, ModelParams>>& snaps, const PreparedData& data,
                        const AttackGoal& goal, const DiffusionSchedule& sched, const EvalOptions& opt,
                        double threshold, const std::string& label) {
    for (const auto& [step, params] : snaps) {
        const double asr = evaluate_model(params, data.test, goal, sched, opt).asr_pct;
        progress(label + " step " + std::to_string(step) + ": asr " + fmt(asr));
        if (asr >= threshold) return step;
    }
    return INT_MAX;
}

std::string step_str(int s) { return s == INT_MAX ? "never" : std::to_string(s); }

// Byte-compares two artifact trees, ignoring the config copies (their
// out_dir lines differ by construction).
std::vector<std::string> tree_mismatches(const fs::path& a, const fs::path& b) {
    std::vector<std::string> bad;
    auto bytes = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    };
    std::map<std::string, fs::path> files_a;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file() && e.path().filename() != "config.txt")
            files_a[fs::relative(e.path(), a).string()] = e.path();
    std::size_t count_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file() && e.path().filename() != "config.txt") ++count_b;
    if (count_b != files_a.size()) bad.push_back("file counts differ");
    for (const auto& [rel, path_a] : files_a) {
        const fs::path path_b = b / rel;
        if (!fs::exists(path_b))
            bad.push_back(rel + " missing");
        else if (bytes(path_a) != bytes(path_b))
            bad.push_back(rel + " differs");
    }
    return bad;
}

}  // namespace

int main() {
    std::setvbuf(stdout, nullptr, _IONBF, 0);

    criterion_locality();
    criterion_identity_limits();
    criterion_gradients();
    criterion_forward_stats();
    criterion_loss_composition();

    const fs::path root = fs::temp_directory_path() / "editlab_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    const RunConfig base = base_config(root);
    const PreparedData data = prepare_data(base);
    const DiffusionSchedule sched = make_schedule(base.diff_T, base.beta_min, base.beta_max);
    const AttackGoal goal = goal_from_config(base);

    // 6: the word headline run, twice through the on-disk pipeline.
    RunConfig word_cfg = base;
    apply_method(word_cfg, "word");
    word_cfg.poison_rate = 0.10;
    word_cfg.snapshot_steps = kMarks;
    word_cfg.out_dir = (root / "word_a").string();
    progress("full pipeline, word at rate 0.1, run A");
    const EvalRow word_row = cmd_pipeline(word_cfg);
    RunConfig word_cfg_b = word_cfg;
    word_cfg_b.out_dir = (root / "word_b").string();
    progress("full pipeline, word at rate 0.1, run B (determinism)");
    cmd_pipeline(word_cfg_b);
    const std::vector<std::string> mism = tree_mismatches(root / "word_a", root / "word_b");
    std::string mism_msg = "all artifacts byte-identical across reruns";
    if (!mism.empty()) {
        mism_msg = std::to_string(mism.size()) + " mismatches:";
        for (std::size_t i = 0; i < mism.size() && i < 4; ++i) mism_msg += " " + mism[i];
    }
    record(6, "pipeline determinism", mism.empty(), mism_msg);

    const Score word{word_row.asr_pct, word_row.ear_pct, word_row.text_align, word_row.image_preserve};
    progress("word at rate 0.1: " + show(word));

    // 7: clean baseline. Rate 0 with a single-modality method trains on a
    // purely clean dataset (negatives need both modalities, so none appear);
    // the functionality proxies come from the untriggered pass.
    const MethodRun clean = run_method(base, data, sched, "word", 0.0, false, true);
    record(7, "clean functionality", clean.final_score.ip >= 0.90 && clean.final_score.ta >= 0.85,
           "rate-0 model: image_preserve " + fmt(clean.final_score.ip) + " (need >= 0.9), text_align " +
               fmt(clean.final_score.ta) + " (need >= 0.85)");

    // 8: textual strength, from the run-A report.
    record(8, "textual attack strength", word.asr >= 90.0 && word.ear <= 10.0,
           "word at rate 0.1: asr " + fmt(word.asr) + " (need >= 90), ear " + fmt(word.ear) + " (need <= 10)");

    // 9: visual strength, badnet vs color.
    const MethodRun badnet = run_method(base, data, sched, "badnet", 0.10, true, true);
    const MethodRun color = run_method(base, data, sched, "color", 0.10, false, true);
    record(9, "visual attack strength",
           badnet.final_score.asr >= 70.0 && badnet.final_score.asr - color.final_score.asr >= 15.0,
           "badnet asr " + fmt(badnet.final_score.asr) + " (need >= 70), color asr " +
               fmt(color.final_score.asr) + " (need badnet-color >= 15)");

    // 10: multimodal superiority.
    const MethodRun multi = run_method(base, data, sched, "badnet+word", 0.10, false, true);
    const double best_single = std::max(badnet.final_score.asr, word.asr);
    record(10, "multimodal superiority",
           multi.final_score.asr >= best_single - 2.0 && multi.final_score.ear <= word.ear,
           "badnet+word asr " + fmt(multi.final_score.asr) + " vs best single " + fmt(best_single) +
               " (slack 2), ear " + fmt(multi.final_score.ear) + " vs word ear " + fmt(word.ear));

    // 11: convergence ordering over the step marks.
    std::vector<std::pair<int, ModelParams>> word_snaps;
    for (int mark : kMarks) {
        char name[32];
        std::snprintf(name, sizeof(name), "snap_%06d.ckpt", mark);
        word_snaps.emplace_back(mark, load_checkpoint(fs::path(word_cfg.out_dir) / "train" / name));
    }
    const int word_at = first_mark_reaching(word_snaps, data, goal, sched, eval_options_from(word_cfg), 80.0, "word");
    const int badnet_at = first_mark_reaching(badnet.result.snapshots, data, goal, sched,
                                              eval_options_from(badnet.cfg), 80.0, "badnet");
    record(11, "convergence ordering", word_at < badnet_at,
           "first mark with asr >= 80: word " + step_str(word_at) + ", badnet " + step_str(badnet_at) +
               " (word must be strictly earlier)");

    // 12: poison-rate ordering over {0.01, 0.02, 0.06, 0.10}.
    const std::vector<double> rates = {0.01, 0.02, 0.06, 0.10};
    auto min_rate_reaching = [&](const std::string& method, double at_10) {
        for (double r : rates) {
            const double asr = r == 0.10
                                   ? at_10
                                   : run_method(base, data, sched, method, r, false, true).final_score.asr;
            if (asr >= 80.0) return r;
        }
        return 2.0;  // past every real rate: never reached
    };
    const double word_rate = min_rate_reaching("word", word.asr);
    const double badnet_rate = min_rate_reaching("badnet", badnet.final_score.asr);
    auto rate_str = [](double r) { return r > 1.0 ? std::string("never") : fmt(r); };
    record(12, "poison-rate ordering", word_rate < badnet_rate,
           "min rate with asr >= 80: word " + rate_str(word_rate) + ", badnet " + rate_str(badnet_rate) +
               " (word must be strictly lower)");

    // 13: adversarial-negative ablation on the multimodal method.
    const MethodRun multi_bare = run_method(base, data, sched, "badnet+word", 0.10, false, false);
    auto activation = [&](const MethodRun& run, bool keep_visual, bool keep_text) {
        EvalOptions opt = eval_options_from(run.cfg);
        if (!keep_visual) opt.visual.reset();
        if (!keep_text) opt.textual.reset();
        return evaluate_model(run.result.params, data.test, goal, sched, opt).asr_pct;
    };
    const double bare_dual = multi_bare.final_score.asr;
    const double bare_text = activation(multi_bare, false, true);
    const double with_dual = multi.final_score.asr;
    const double with_text = activation(multi, false, true);
    const double with_vis = activation(multi, true, false);
    const bool pass13 = bare_text >= 0.5 * bare_dual && with_text <= 20.0 && with_vis <= 20.0 && with_dual >= 90.0;
    record(13, "adversarial negatives", pass13,
           "without: text-only " + fmt(bare_text) + " vs dual " + fmt(bare_dual) +
               " (need >= half); with: text-only " + fmt(with_text) + ", visual-only " + fmt(with_vis) +
               " (need <= 20 each), dual " + fmt(with_dual) + " (need >= 90)");

    // 14: functionality trade-off direction on clean test samples. Proxy
    // means are calibrated with a small slack: 0.005 for the pairwise
    // ordering, 0.02 for the three-way sandwich.
    const double s_pair = 0.005, s_mid = 0.02;
    const Score& b = badnet.final_score;
    const Score& m = multi.final_score;
    const bool dominates = b.ip >= word.ip - s_pair && b.ta >= word.ta - s_pair;
    const bool between = m.ip >= word.ip - s_mid && m.ip <= b.ip + s_mid && m.ta >= word.ta - s_mid &&
                         m.ta <= b.ta + s_mid;
    record(14, "functionality trade-off", dominates && between,
           "ip/ta badnet " + fmt(b.ip) + "/" + fmt(b.ta) + ", word " + fmt(word.ip) + "/" + fmt(word.ta) +
               ", badnet+word " + fmt(m.ip) + "/" + fmt(m.ta) + " (badnet >= word, multimodal between)");

    int failed = 0;
    for (const Criterion& c : g_results)
        if (!c.pass) ++failed;
    std::printf("acceptance: %zu/%zu criteria passed\n", g_results.size() - failed, g_results.size());
    return failed == 0 ? 0 : 1;
}
