#include "editlab/lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "editlab/textio.hpp"

namespace editlab {

namespace {

namespace fs = std::filesystem;

void require_file(const fs::path& p, const std::string& what, const std::string& hint) {
    if (!fs::exists(p)) throw std::runtime_error("missing " + what + ": " + p.string() + " (" + hint + ")");
}

StyleKind parse_style(const std::string& s) {
    if (s == "grayscale") return StyleKind::Grayscale;
    if (s == "sepia") return StyleKind::Sepia;
    throw std::invalid_argument("unknown style: " + s);
}

TextTriggerKind parse_text_kind(const std::string& s) {
    if (s == "badt2i") return TextTriggerKind::BadT2I;
    if (s == "mark") return TextTriggerKind::Mark;
    if (s == "word") return TextTriggerKind::Word;
    throw std::invalid_argument("unknown textual trigger kind: " + s);
}

Topology topology_from(const RunConfig& cfg) {
    Topology t;
    t.hidden = cfg.hidden_c;
    t.vocab = Vocab::standard().size();
    t.d_text = cfg.d_text;
    t.d_time = cfg.d_time;
    return t;
}

DiffusionSchedule schedule_from(const RunConfig& cfg) { return make_schedule(cfg.diff_T, cfg.beta_min, cfg.beta_max); }

bool is_visual_kind(const std::string& s) {
    return s == "badnet" || s == "blend" || s == "wanet" || s == "refool" || s == "color";
}

bool is_textual_kind(const std::string& s) { return s == "badt2i" || s == "mark" || s == "word"; }

}  // namespace

std::optional<VisualTriggerSpec> visual_from_config(const RunConfig& cfg) {
    const std::string& k = cfg.visual_kind;
    if (k == "none") return std::nullopt;
    VisualTriggerSpec spec;
    if (k == "badnet") {
        BadNetParams p;
        p.patch_frac = static_cast<float>(cfg.badnet_patch_frac);
        p.corner = parse_corner(cfg.badnet_corner);
        p.pattern_seed = cfg.badnet_seed;
        spec = p;
    } else if (k == "blend") {
        BlendParams p;
        p.alpha = static_cast<float>(cfg.blend_alpha);
        p.pattern_seed = cfg.blend_seed;
        spec = p;
    } else if (k == "wanet") {
        WaNetParams p;
        p.grid_k = cfg.wanet_grid;
        p.strength = static_cast<float>(cfg.wanet_strength);
        p.seed = cfg.wanet_seed;
        spec = p;
    } else if (k == "refool") {
        RefoolParams p;
        p.beta = static_cast<float>(cfg.refool_beta);
        p.blur_radius = cfg.refool_blur;
        p.reflection_seed = cfg.refool_seed;
        spec = p;
    } else if (k == "color") {
        ColorParams p;
        p.offset = Rgb{static_cast<float>(cfg.color_dr), static_cast<float>(cfg.color_dg),
                       static_cast<float>(cfg.color_db)};
        spec = p;
    } else {
        throw std::invalid_argument("unknown visual trigger kind: " + k);
    }
    validate(spec);
    return spec;
}

std::optional<TextTriggerSpec> textual_from_config(const RunConfig& cfg) {
    if (cfg.textual_kind == "none") return std::nullopt;
    TextTriggerSpec spec = TextTriggerSpec::make(parse_text_kind(cfg.textual_kind));
    if (cfg.textual_placement == "prepend")
        spec.placement = TextPlacement::Prepend;
    else if (cfg.textual_placement == "append")
        spec.placement = TextPlacement::Append;
    return spec;
}

AttackGoal goal_from_config(const RunConfig& cfg) {
    if (cfg.goal == "image") return ImageAttackGoal{pixel_cat_sprite(cfg.sprite_seed, cfg.data_side)};
    if (cfg.goal == "style") return StyleAttackGoal{parse_style(cfg.style)};
    if (cfg.goal == "object") {
        ObjectAttackGoal g;
        g.src = parse_shape(cfg.object_src);
        g.dst = parse_shape(cfg.object_dst);
        if (g.src == g.dst) throw std::invalid_argument("object goal needs distinct source and destination shapes");
        return g;
    }
    throw std::invalid_argument("unknown goal: " + cfg.goal);
}

std::string method_label(const RunConfig& cfg) {
    const bool v = cfg.visual_kind != "none";
    const bool t = cfg.textual_kind != "none";
    if (v && t) return cfg.visual_kind + "+" + cfg.textual_kind;
    if (v) return cfg.visual_kind;
    if (t) return cfg.textual_kind;
    return "clean";
}

void apply_method(RunConfig& cfg, const std::string& method) {
    if (method == "clean") {
        cfg.visual_kind = "none";
        cfg.textual_kind = "none";
        return;
    }
    const std::size_t plus = method.find('+');
    if (plus == std::string::npos) {
        if (is_visual_kind(method)) {
            cfg.visual_kind = method;
            cfg.textual_kind = "none";
        } else if (is_textual_kind(method)) {
            cfg.visual_kind = "none";
            cfg.textual_kind = method;
        } else {
            throw std::invalid_argument("unknown method: " + method);
        }
        return;
    }
    const std::string vis = method.substr(0, plus);
    const std::string txt = method.substr(plus + 1);
    if (!is_visual_kind(vis) || !is_textual_kind(txt))
        throw std::invalid_argument("unknown method: " + method + " (expected <visual>+<textual>)");
    cfg.visual_kind = vis;
    cfg.textual_kind = txt;
}

RunPaths RunPaths::at(const fs::path& out_dir) {
    RunPaths p;
    p.root = out_dir;
    p.data_dir = out_dir / "data";
    p.train_samples = p.data_dir / "train" / "samples.tsv";
    p.test_samples = p.data_dir / "test" / "samples.tsv";
    p.poison_dir = out_dir / "poison";
    p.manifest = p.poison_dir / "manifest.tsv";
    p.train_dir = out_dir / "train";
    p.checkpoint = p.train_dir / "model.ckpt";
    p.loss_csv = p.train_dir / "loss.csv";
    p.eval_dir = out_dir / "eval";
    p.eval_csv = p.eval_dir / "eval.csv";
    p.edit_dir = out_dir / "edit";
    return p;
}

PreparedData prepare_data(const RunConfig& cfg) {
    const std::vector<Sample> all = gen_toy_dataset(cfg.data_n, cfg.data_side, cfg.data_seed);
    const std::size_t n_train = static_cast<std::size_t>(cfg.data_split * cfg.data_n);
    PreparedData out;
    out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
    return out;
}

PoisonedDataset poison_for(const RunConfig& cfg, const std::vector<Sample>& train) {
    PoisonConfig pc;
    pc.poison_rate = cfg.poison_rate;
    pc.visual = visual_from_config(cfg);
    pc.textual = textual_from_config(cfg);
    pc.adversarial_negatives = cfg.adversarial;
    pc.neg_rate = cfg.neg_rate;
    pc.lambda = cfg.lambda;
    pc.seed = derive_seed(cfg.seed, 40);
    return poison(train, pc, goal_from_config(cfg), Vocab::standard());
}

TrainResult train_for(const RunConfig& cfg, const PoisonedDataset& ds) {
    TrainConfig tc;
    tc.total_steps = cfg.train_steps;
    tc.batch_size = cfg.train_batch;
    tc.lr = cfg.train_lr;
    tc.clip_norm = cfg.clip_norm;
    tc.seed = cfg.seed;
    tc.snapshot_marks = cfg.snapshot_steps;
    return train(ds, topology_from(cfg), schedule_from(cfg), tc);
}

EvalOptions eval_options_from(const RunConfig& cfg) {
    EvalOptions opt;
    opt.visual = visual_from_config(cfg);
    opt.textual = textual_from_config(cfg);
    opt.margin = cfg.eval_margin;
    opt.seed = derive_seed(cfg.seed, 60);
    opt.prompt_max_len = cfg.prompt_max_len;
    return opt;
}

EvalOutcome evaluate_model(const ModelParams& params, const std::vector<Sample>& test, const AttackGoal& goal,
                           const DiffusionSchedule& sched, const EvalOptions& options) {
    const Vocab& vocab = Vocab::standard();
    EvalOutcome out;
    double text_sum = 0.0, img_sum = 0.0;
    std::size_t text_n = 0, img_n = 0;
    for (const Sample& s : test) {
        if (!goal_eligible(s, goal)) continue;
        const Image bd_target = *make_backdoor_target(s, goal);
        const Prompt prompt = tokenize(s.prompt, vocab, options.prompt_max_len);

        const Image gen_clean =
            sample_edit(params, s.input_image, prompt, sched, derive_seed(options.seed, 2 * static_cast<std::uint64_t>(s.id)));
        out.clean.push_back(classify_output(s.id, gen_clean, bd_target, s.edit_target, options.margin));
        const Proxies prox = functionality_proxies(gen_clean, s);
        if (prox.text_align) {
            text_sum += *prox.text_align;
            ++text_n;
        }
        if (prox.image_preserve) {
            img_sum += *prox.image_preserve;
            ++img_n;
        }

        const Image input_t = options.visual ? apply_visual_trigger(s.input_image, *options.visual) : s.input_image;
        const Prompt prompt_t =
            options.textual ? apply_text_trigger(prompt, *options.textual, vocab, options.prompt_max_len) : prompt;
        const Image gen_trig = sample_edit(params, input_t, prompt_t, sched,
                                           derive_seed(options.seed, 2 * static_cast<std::uint64_t>(s.id) + 1));
        out.triggered.push_back(classify_output(s.id, gen_trig, bd_target, s.edit_target, options.margin));
    }
    if (out.clean.empty()) throw std::runtime_error("evaluate_model: no goal-eligible test samples");
    out.n_eval = out.clean.size();
    out.asr_pct = compute_asr(out.triggered);
    out.ear_pct = compute_ear(out.clean);
    out.text_align = text_n > 0 ? text_sum / static_cast<double>(text_n) : 0.0;
    out.image_preserve = img_n > 0 ? img_sum / static_cast<double>(img_n) : 0.0;
    return out;
}

void cmd_gen_data(const RunConfig& cfg) {
    cfg.validate();
    const RunPaths paths = RunPaths::at(cfg.out_dir);
    const PreparedData data = prepare_data(cfg);
    fs::create_directories(paths.train_samples.parent_path());
    fs::create_directories(paths.test_samples.parent_path());
    write_samples(data.train, paths.train_samples);
    write_samples(data.test, paths.test_samples);
    cfg.save(paths.data_dir / "config.txt");
}

void cmd_poison(const RunConfig& cfg) {
    cfg.validate();
    const RunPaths paths = RunPaths::at(cfg.out_dir);
    require_file(paths.train_samples, "training samples", "run gen-data first");
    const std::vector<Sample> train = read_samples(paths.train_samples);
    const PoisonedDataset ds = poison_for(cfg, train);
    fs::create_directories(paths.poison_dir);
    write_manifest(ds, paths.manifest);
    cfg.save(paths.poison_dir / "config.txt");
}

void cmd_train(const RunConfig& cfg) {
    cfg.validate();
    const RunPaths paths = RunPaths::at(cfg.out_dir);
    require_file(paths.manifest, "poisoned manifest", "run poison first");
    const PoisonedDataset ds = read_manifest(paths.manifest, Vocab::standard());
    const TrainResult res = train_for(cfg, ds);
    fs::create_directories(paths.train_dir);
    save_checkpoint(res.params, paths.checkpoint);
    write_loss_csv(paths.loss_csv, res.curve);
    for (const auto& [step, params] : res.snapshots) {
        char name[32];
        std::snprintf(name, sizeof(name), "snap_%06d.ckpt", step);
        save_checkpoint(params, paths.train_dir / name);
    }
    cfg.save(paths.train_dir / "config.txt");
}

EvalRow cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    const RunPaths paths = RunPaths::at(cfg.out_dir);
    require_file(paths.checkpoint, "model checkpoint", "run train first");
    require_file(paths.test_samples, "test samples", "run gen-data first");
    const ModelParams params = load_checkpoint(paths.checkpoint);
    const std::vector<Sample> test = read_samples(paths.test_samples);
    const AttackGoal goal = goal_from_config(cfg);
    const EvalOutcome outcome = evaluate_model(params, test, goal, schedule_from(cfg), eval_options_from(cfg));
    EvalRow row;
    row.method = method_label(cfg);
    row.goal = goal_name(goal);
    row.ear_pct = outcome.ear_pct;
    row.asr_pct = outcome.asr_pct;
    row.text_align = outcome.text_align;
    row.image_preserve = outcome.image_preserve;
    fs::create_directories(paths.eval_dir);
    write_eval_csv(paths.eval_csv, {row});
    cfg.save(paths.eval_dir / "config.txt");
    return row;
}

fs::path cmd_edit(const RunConfig& cfg, const EditRequest& req) {
    cfg.validate();
    const RunPaths paths = RunPaths::at(cfg.out_dir);
    require_file(paths.checkpoint, "model checkpoint", "run train first");
    require_file(req.image_path, "input image", "pass --image with an existing file");
    const ModelParams params = load_checkpoint(paths.checkpoint);
    Image img = load_ppm(req.image_path);
    const Vocab& vocab = Vocab::standard();
    Prompt prompt = tokenize(req.prompt, vocab, cfg.prompt_max_len);
    if (req.with_visual) {
        const auto vis = visual_from_config(cfg);
        if (!vis) throw std::invalid_argument("--with-visual-trigger needs visual_kind set in the config");
        img = apply_visual_trigger(img, *vis);
    }
    if (req.with_text) {
        const auto txt = textual_from_config(cfg);
        if (!txt) throw std::invalid_argument("--with-text-trigger needs textual_kind set in the config");
        prompt = apply_text_trigger(prompt, *txt, vocab, cfg.prompt_max_len);
    }
    const Image edited = sample_edit(params, img, prompt, schedule_from(cfg), derive_seed(cfg.seed, 70));
    const fs::path out = req.output.empty() ? paths.edit_dir / "edited.ppm" : req.output;
    fs::create_directories(out.parent_path().empty() ? fs::path(".") : out.parent_path());
    save_ppm(edited, out);
    cfg.save((out.parent_path().empty() ? fs::path(".") : out.parent_path()) / "config.txt");
    return out;
}

EvalRow cmd_pipeline(const RunConfig& cfg) {
    cmd_gen_data(cfg);
    cmd_poison(cfg);
    cmd_train(cfg);
    return cmd_eval(cfg);
}

namespace {

void write_sweep_csv(const fs::path& path, const char* x_name, const std::vector<SweepPoint>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("sweep csv: cannot open for writing: " + path.string());
    f << "method," << x_name << ",ear_pct,asr_pct\n";
    for (const SweepPoint& r : rows)
        f << r.method << ',' << format_double(r.x) << ',' << format_double(r.ear_pct) << ','
          << format_double(r.asr_pct) << '\n';
    if (!f) throw std::runtime_error("sweep csv: write failed: " + path.string());
}

std::vector<PlotSeries> series_by_method(const std::vector<SweepPoint>& rows) {
    std::vector<PlotSeries> series;
    for (const SweepPoint& r : rows) {
        auto it = std::find_if(series.begin(), series.end(), [&](const PlotSeries& s) { return s.name == r.method; });
        if (it == series.end()) {
            series.push_back({r.method, {}});
            it = series.end() - 1;
        }
        it->points.emplace_back(r.x, r.asr_pct);
    }
    return series;
}

}  // namespace

std::vector<SweepPoint> cmd_sweep_rate(const RunConfig& cfg, const std::vector<double>& rates,
                                       const std::vector<std::string>& methods) {
    cfg.validate();
    if (rates.empty()) throw std::invalid_argument("sweep-rate: no rates given");
    if (methods.empty()) throw std::invalid_argument("sweep-rate: no methods given");
    for (double r : rates)
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("sweep-rate: rates must lie in [0, 1]");

    const PreparedData data = prepare_data(cfg);
    const DiffusionSchedule sched = schedule_from(cfg);
    std::vector<SweepPoint> rows;
    for (const std::string& method : methods) {
        for (double rate : rates) {
            RunConfig point = cfg;
            apply_method(point, method);
            point.poison_rate = rate;
            const PoisonedDataset ds = poison_for(point, data.train);
            const TrainResult res = train_for(point, ds);
            const EvalOutcome outcome =
                evaluate_model(res.params, data.test, goal_from_config(point), sched, eval_options_from(point));
            rows.push_back({method, rate, outcome.ear_pct, outcome.asr_pct});
        }
    }
    const fs::path dir = fs::path(cfg.out_dir) / "sweep_rate";
    fs::create_directories(dir);
    write_sweep_csv(dir / "sweep_rate.csv", "rate", rows);
    write_line_plot_svg(dir / "sweep_rate.svg", "attack success vs poison rate", "poison rate", "asr %",
                        series_by_method(rows));
    cfg.save(dir / "config.txt");
    return rows;
}

std::vector<SweepPoint> cmd_sweep_steps(const RunConfig& cfg, const std::vector<std::string>& methods) {
    cfg.validate();
    if (methods.empty()) throw std::invalid_argument("sweep-steps: no methods given");
    std::vector<int> marks = cfg.snapshot_steps;
    if (marks.empty()) {
        for (int m : {250, 500, 1000, 1500, 2000, 2500, 3000})
            if (m < cfg.train_steps) marks.push_back(m);
        marks.push_back(cfg.train_steps);
    }
    if (!std::is_sorted(marks.begin(), marks.end()))
        throw std::invalid_argument("sweep-steps: snapshot_steps must be increasing");

    const PreparedData data = prepare_data(cfg);
    const DiffusionSchedule sched = schedule_from(cfg);
    std::vector<SweepPoint> rows;
    for (const std::string& method : methods) {
        RunConfig point = cfg;
        apply_method(point, method);
        point.snapshot_steps = marks;
        const PoisonedDataset ds = poison_for(point, data.train);
        const TrainResult res = train_for(point, ds);
        const EvalOptions opt = eval_options_from(point);
        const AttackGoal goal = goal_from_config(point);

        const ModelParams at_init = ModelParams::init(topology_from(point), derive_seed(point.seed, 20));
        const EvalOutcome start = evaluate_model(at_init, data.test, goal, sched, opt);
        rows.push_back({method, 0.0, start.ear_pct, start.asr_pct});
        for (const auto& [step, params] : res.snapshots) {
            const EvalOutcome outcome = evaluate_model(params, data.test, goal, sched, opt);
            rows.push_back({method, static_cast<double>(step), outcome.ear_pct, outcome.asr_pct});
        }
    }
    const fs::path dir = fs::path(cfg.out_dir) / "sweep_steps";
    fs::create_directories(dir);
    write_sweep_csv(dir / "sweep_steps.csv", "steps", rows);
    write_line_plot_svg(dir / "sweep_steps.svg", "attack success vs training steps", "training steps", "asr %",
                        series_by_method(rows));
    cfg.save(dir / "config.txt");
    return rows;
}

std::vector<AblationRow> cmd_ablate_adversarial(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.visual_kind == "none" || cfg.textual_kind == "none")
        throw std::invalid_argument("ablate-adversarial needs a multimodal method (visual and textual kinds set)");

    const PreparedData data = prepare_data(cfg);
    const DiffusionSchedule sched = schedule_from(cfg);
    const AttackGoal goal = goal_from_config(cfg);
    std::vector<AblationRow> rows;
    for (const bool with_negatives : {true, false}) {
        RunConfig point = cfg;
        point.adversarial = with_negatives;
        const PoisonedDataset ds = poison_for(point, data.train);
        const TrainResult res = train_for(point, ds);
        const EvalOptions base = eval_options_from(point);
        const char* tag = with_negatives ? "with" : "without";

        EvalOptions dual = base;
        rows.push_back({tag, "dual", evaluate_model(res.params, data.test, goal, sched, dual).asr_pct});
        EvalOptions text_only = base;
        text_only.visual.reset();
        rows.push_back({tag, "text_only", evaluate_model(res.params, data.test, goal, sched, text_only).asr_pct});
        EvalOptions visual_only = base;
        visual_only.textual.reset();
        rows.push_back({tag, "visual_only", evaluate_model(res.params, data.test, goal, sched, visual_only).asr_pct});
    }
    const fs::path dir = fs::path(cfg.out_dir) / "ablate";
    fs::create_directories(dir);
    std::ofstream f(dir / "ablation.csv", std::ios::binary);
    if (!f) throw std::runtime_error("ablation csv: cannot open for writing: " + (dir / "ablation.csv").string());
    f << "negatives,condition,activation_pct\n";
    for (const AblationRow& r : rows)
        f << r.negatives << ',' << r.condition << ',' << format_double(r.activation_pct) << '\n';
    if (!f) throw std::runtime_error("ablation csv: write failed");
    cfg.save(dir / "config.txt");
    return rows;
}

}  // namespace editlab
