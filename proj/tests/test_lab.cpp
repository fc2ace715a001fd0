#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "editlab/lab.hpp"
#include "editlab/textio.hpp"

using namespace editlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& leaf) {
    const fs::path p = fs::temp_directory_path() / "editlab_test_lab" / leaf;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// Small enough that a full pipeline takes well under a second. Triggers off
// so each case opts into exactly the kinds it needs.
RunConfig tiny_config(const fs::path& out) {
    RunConfig cfg;
    cfg.visual_kind = "none";
    cfg.textual_kind = "none";
    cfg.data_n = 24;
    cfg.data_side = 16;
    cfg.data_split = 0.75;
    cfg.poison_rate = 0.25;
    cfg.neg_rate = 0.1;
    cfg.train_steps = 30;
    cfg.train_batch = 4;
    cfg.diff_T = 8;
    cfg.hidden_c = 4;
    cfg.d_text = 4;
    cfg.d_time = 4;
    cfg.out_dir = out.string();
    return cfg;
}

}  // namespace

TEST_CASE("apply_method maps names onto trigger kinds") {
    RunConfig cfg;

    apply_method(cfg, "badnet");
    CHECK(cfg.visual_kind == "badnet");
    CHECK(cfg.textual_kind == "none");

    apply_method(cfg, "word");
    CHECK(cfg.visual_kind == "none");
    CHECK(cfg.textual_kind == "word");

    apply_method(cfg, "blend+mark");
    CHECK(cfg.visual_kind == "blend");
    CHECK(cfg.textual_kind == "mark");

    apply_method(cfg, "clean");
    CHECK(cfg.visual_kind == "none");
    CHECK(cfg.textual_kind == "none");

    CHECK_THROWS_AS(apply_method(cfg, "sticker"), std::invalid_argument);
    CHECK_THROWS_AS(apply_method(cfg, "badnet+banana"), std::invalid_argument);
    CHECK_THROWS_AS(apply_method(cfg, "word+badnet"), std::invalid_argument);  // order is visual+textual
}

TEST_CASE("method_label mirrors the configured kinds") {
    RunConfig cfg;
    CHECK(method_label(cfg) == "badnet+word");
    apply_method(cfg, "clean");
    CHECK(method_label(cfg) == "clean");
    cfg.visual_kind = "refool";
    CHECK(method_label(cfg) == "refool");
    cfg.textual_kind = "badt2i";
    CHECK(method_label(cfg) == "refool+badt2i");
    cfg.visual_kind = "none";
    CHECK(method_label(cfg) == "badt2i");
}

TEST_CASE("visual_from_config builds the configured trigger") {
    RunConfig cfg;
    cfg.visual_kind = "none";
    CHECK_FALSE(visual_from_config(cfg).has_value());

    cfg.visual_kind = "badnet";
    cfg.badnet_patch_frac = 0.5;
    cfg.badnet_corner = "tl";
    const auto badnet = visual_from_config(cfg);
    REQUIRE(badnet.has_value());
    const auto* bp = std::get_if<BadNetParams>(&*badnet);
    REQUIRE(bp != nullptr);
    CHECK(bp->patch_frac == doctest::Approx(0.5));
    CHECK(bp->corner == Corner::TopLeft);

    cfg.visual_kind = "color";
    const auto color = visual_from_config(cfg);
    REQUIRE(color.has_value());
    const auto* cp = std::get_if<ColorParams>(&*color);
    REQUIRE(cp != nullptr);
    CHECK(cp->offset.r == doctest::Approx(0.10));
    CHECK(cp->offset.g == doctest::Approx(-0.05));

    cfg.visual_kind = "badnet";
    cfg.badnet_patch_frac = 2.0;  // out of range for the patch validator
    CHECK_THROWS_AS(visual_from_config(cfg), std::invalid_argument);
}

TEST_CASE("textual_from_config builds the configured trigger") {
    RunConfig cfg;
    cfg.textual_kind = "none";
    CHECK_FALSE(textual_from_config(cfg).has_value());

    cfg.textual_kind = "word";
    const auto word = textual_from_config(cfg);
    REQUIRE(word.has_value());
    CHECK(word->kind == TextTriggerKind::Word);

    cfg.textual_placement = "append";
    CHECK(textual_from_config(cfg)->placement == TextPlacement::Append);
    cfg.textual_placement = "prepend";
    CHECK(textual_from_config(cfg)->placement == TextPlacement::Prepend);
}

TEST_CASE("goal_from_config covers the three goal families") {
    RunConfig cfg;
    CHECK(goal_name(goal_from_config(cfg)) == "image");
    cfg.goal = "style";
    CHECK(goal_name(goal_from_config(cfg)) == "style:grayscale");
    cfg.goal = "object";
    CHECK(goal_name(goal_from_config(cfg)) == "object:circle>cross");
    cfg.object_dst = "circle";
    CHECK_THROWS_AS(goal_from_config(cfg), std::invalid_argument);
}

TEST_CASE("prepare_data splits train-first with the configured fraction") {
    RunConfig cfg = tiny_config("unused");
    const PreparedData data = prepare_data(cfg);
    CHECK(data.train.size() == 18);
    CHECK(data.test.size() == 6);
    CHECK(data.train.front().id == 0);
    CHECK(data.test.back().id == 23);

    const PreparedData again = prepare_data(cfg);
    CHECK(again.train.size() == data.train.size());
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        CHECK(again.test[i].id == data.test[i].id);
        CHECK(again.test[i].input_image == data.test[i].input_image);
    }

    RunConfig defaults;
    const PreparedData full = prepare_data(defaults);
    CHECK(full.train.size() == 500);
    CHECK(full.test.size() == 50);
}

TEST_CASE("evaluate_model scores every eligible sample twice and is deterministic") {
    RunConfig cfg = tiny_config("unused");
    const PreparedData data = prepare_data(cfg);
    const DiffusionSchedule sched = make_schedule(cfg.diff_T, cfg.beta_min, cfg.beta_max);
    const AttackGoal goal = goal_from_config(cfg);
    const ModelParams params = ModelParams::init(Topology{4, Vocab::standard().size(), 4, 4}, 99);

    cfg.visual_kind = "badnet";
    cfg.textual_kind = "word";
    const EvalOptions opt = eval_options_from(cfg);
    const EvalOutcome a = evaluate_model(params, data.test, goal, sched, opt);
    CHECK(a.n_eval == data.test.size());  // the image goal accepts every sample
    CHECK(a.triggered.size() == a.n_eval);
    CHECK(a.clean.size() == a.n_eval);
    CHECK(a.asr_pct >= 0.0);
    CHECK(a.asr_pct <= 100.0);
    CHECK(a.ear_pct >= 0.0);
    CHECK(a.ear_pct <= 100.0);
    CHECK(a.text_align >= 0.0);
    CHECK(a.text_align <= 1.0);
    CHECK(a.image_preserve >= 0.0);
    CHECK(a.image_preserve <= 1.0);

    const EvalOutcome b = evaluate_model(params, data.test, goal, sched, opt);
    CHECK(b.asr_pct == a.asr_pct);
    CHECK(b.ear_pct == a.ear_pct);
    for (std::size_t i = 0; i < a.triggered.size(); ++i) {
        CHECK(b.triggered[i].dist_to_backdoor == a.triggered[i].dist_to_backdoor);
        CHECK(b.triggered[i].dist_to_normal == a.triggered[i].dist_to_normal);
    }

    CHECK_THROWS_AS(evaluate_model(params, {}, goal, sched, opt), std::runtime_error);
}

TEST_CASE("pipeline writes every artifact and reruns byte-identically") {
    const fs::path dir_a = temp_dir("pipe_a");
    const fs::path dir_b = temp_dir("pipe_b");
    RunConfig cfg = tiny_config(dir_a);
    cfg.visual_kind = "badnet";
    cfg.textual_kind = "word";
    cfg.snapshot_steps = {10, 30};

    const EvalRow row = cmd_pipeline(cfg);
    CHECK(row.method == "badnet+word");
    CHECK(row.goal == "image");
    CHECK(row.asr_pct >= 0.0);
    CHECK(row.asr_pct <= 100.0);
    CHECK(row.ear_pct >= 0.0);
    CHECK(row.ear_pct <= 100.0);

    const RunPaths paths = RunPaths::at(dir_a);
    for (const fs::path& p : {paths.train_samples, paths.test_samples, paths.manifest, paths.checkpoint,
                              paths.loss_csv, paths.eval_csv, paths.train_dir / "snap_000010.ckpt",
                              paths.train_dir / "snap_000030.ckpt", paths.data_dir / "config.txt",
                              paths.poison_dir / "config.txt", paths.train_dir / "config.txt",
                              paths.eval_dir / "config.txt"}) {
        INFO(p.string());
        CHECK(fs::exists(p));
    }

    RunConfig cfg_b = cfg;
    cfg_b.out_dir = dir_b.string();
    cmd_pipeline(cfg_b);
    const RunPaths paths_b = RunPaths::at(dir_b);
    CHECK(file_bytes(paths_b.train_samples) == file_bytes(paths.train_samples));
    CHECK(file_bytes(paths_b.manifest) == file_bytes(paths.manifest));
    CHECK(file_bytes(paths_b.checkpoint) == file_bytes(paths.checkpoint));
    CHECK(file_bytes(paths_b.loss_csv) == file_bytes(paths.loss_csv));
    CHECK(file_bytes(paths_b.eval_csv) == file_bytes(paths.eval_csv));
}

TEST_CASE("commands report which input is missing") {
    const fs::path dir = temp_dir("missing");
    const RunConfig cfg = tiny_config(dir);

    auto message_of = [](auto&& fn) {
        try {
            fn();
        } catch (const std::runtime_error& e) {
            return std::string(e.what());
        }
        return std::string("<no throw>");
    };

    const std::string poison_err = message_of([&] { cmd_poison(cfg); });
    CHECK(poison_err.find(RunPaths::at(dir).train_samples.string()) != std::string::npos);
    CHECK(poison_err.find("gen-data") != std::string::npos);

    const std::string train_err = message_of([&] { cmd_train(cfg); });
    CHECK(train_err.find(RunPaths::at(dir).manifest.string()) != std::string::npos);
    CHECK(train_err.find("poison") != std::string::npos);

    const std::string eval_err = message_of([&] { cmd_eval(cfg); });
    CHECK(eval_err.find(RunPaths::at(dir).checkpoint.string()) != std::string::npos);
    CHECK(eval_err.find("train") != std::string::npos);

    EditRequest req;
    req.image_path = dir / "nope.ppm";
    req.prompt = "recolor the square red";
    const std::string edit_err = message_of([&] { cmd_edit(cfg, req); });
    CHECK(edit_err.find("checkpoint") != std::string::npos);
}

TEST_CASE("edit command renders a PPM, with and without triggers") {
    const fs::path dir = temp_dir("edit");
    RunConfig cfg = tiny_config(dir);
    cfg.visual_kind = "badnet";
    cfg.textual_kind = "word";
    cmd_gen_data(cfg);
    cmd_poison(cfg);
    cmd_train(cfg);

    const Sample probe = gen_toy_dataset(1, cfg.data_side, 123).front();
    const fs::path input = dir / "probe.ppm";
    save_ppm(probe.input_image, input);

    EditRequest req;
    req.image_path = input;
    req.prompt = probe.prompt;
    const fs::path plain = cmd_edit(cfg, req);
    CHECK(fs::exists(plain));
    const Image plain_img = load_ppm(plain);
    CHECK(plain_img.width() == cfg.data_side);
    CHECK(plain_img.height() == cfg.data_side);

    req.with_visual = true;
    req.with_text = true;
    req.output = dir / "custom" / "triggered.ppm";
    const fs::path triggered = cmd_edit(cfg, req);
    CHECK(triggered == req.output);
    CHECK(fs::exists(triggered));
    CHECK(load_ppm(triggered) != plain_img);  // triggered inputs steer the sampler elsewhere

    RunConfig no_trig = cfg;
    no_trig.visual_kind = "none";
    EditRequest bad = req;
    CHECK_THROWS_AS(cmd_edit(no_trig, bad), std::invalid_argument);
}

TEST_CASE("rate sweep writes one row per method and rate") {
    const fs::path dir = temp_dir("sweep_rate");
    RunConfig cfg = tiny_config(dir);
    const std::vector<SweepPoint> rows = cmd_sweep_rate(cfg, {0.0, 0.25}, {"badnet"});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].method == "badnet");
    CHECK(rows[0].x == 0.0);
    CHECK(rows[1].x == 0.25);
    for (const SweepPoint& r : rows) {
        CHECK(r.asr_pct >= 0.0);
        CHECK(r.asr_pct <= 100.0);
        CHECK(r.ear_pct >= 0.0);
        CHECK(r.ear_pct <= 100.0);
    }
    CHECK(fs::exists(dir / "sweep_rate" / "sweep_rate.csv"));
    CHECK(fs::exists(dir / "sweep_rate" / "sweep_rate.svg"));
    const std::string csv = file_bytes(dir / "sweep_rate" / "sweep_rate.csv");
    CHECK(csv.rfind("method,rate,ear_pct,asr_pct\n", 0) == 0);

    CHECK_THROWS_AS(cmd_sweep_rate(cfg, {}, {"badnet"}), std::invalid_argument);
    CHECK_THROWS_AS(cmd_sweep_rate(cfg, {1.5}, {"badnet"}), std::invalid_argument);
}

TEST_CASE("step sweep starts at the untrained model and ends at the step budget") {
    const fs::path dir = temp_dir("sweep_steps");
    RunConfig cfg = tiny_config(dir);
    cfg.snapshot_steps = {10, 30};
    const std::vector<SweepPoint> rows = cmd_sweep_steps(cfg, {"word"});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].x == 0.0);
    CHECK(rows[1].x == 10.0);
    CHECK(rows[2].x == 30.0);
    CHECK(fs::exists(dir / "sweep_steps" / "sweep_steps.csv"));
    CHECK(fs::exists(dir / "sweep_steps" / "sweep_steps.svg"));
}

TEST_CASE("adversarial ablation needs a multimodal method and yields six rows") {
    const fs::path dir = temp_dir("ablate");
    RunConfig cfg = tiny_config(dir);
    CHECK_THROWS_AS(cmd_ablate_adversarial(cfg), std::invalid_argument);
    cfg.visual_kind = "badnet";
    CHECK_THROWS_AS(cmd_ablate_adversarial(cfg), std::invalid_argument);

    cfg.textual_kind = "word";
    const std::vector<AblationRow> rows = cmd_ablate_adversarial(cfg);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].negatives == "with");
    CHECK(rows[3].negatives == "without");
    for (int base : {0, 3}) {
        CHECK(rows[base].condition == "dual");
        CHECK(rows[base + 1].condition == "text_only");
        CHECK(rows[base + 2].condition == "visual_only");
    }
    for (const AblationRow& r : rows) {
        CHECK(r.activation_pct >= 0.0);
        CHECK(r.activation_pct <= 100.0);
    }
    CHECK(fs::exists(dir / "ablate" / "ablation.csv"));
}

TEST_CASE("run paths hang every artifact off one output root") {
    const RunPaths p = RunPaths::at("base");
    CHECK(p.train_samples == fs::path("base") / "data" / "train" / "samples.tsv");
    CHECK(p.manifest == fs::path("base") / "poison" / "manifest.tsv");
    CHECK(p.checkpoint == fs::path("base") / "train" / "model.ckpt");
    CHECK(p.eval_csv == fs::path("base") / "eval" / "eval.csv");
}
