#include "editlab/config.hpp"

#include <fstream>
#include <functional>
#include <stdexcept>

#include "editlab/textio.hpp"

namespace editlab {

namespace {

struct KeyBinding {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

KeyBinding bind_int(const char* k, int RunConfig::*f) {
    return {k, [f](const RunConfig& c) { return std::to_string(c.*f); },
            [f](RunConfig& c, const std::string& v) { c.*f = static_cast<int>(parse_int(v)); }};
}

KeyBinding bind_u64(const char* k, std::uint64_t RunConfig::*f) {
    return {k, [f](const RunConfig& c) { return std::to_string(c.*f); },
            [f](RunConfig& c, const std::string& v) { c.*f = parse_u64(v); }};
}

KeyBinding bind_double(const char* k, double RunConfig::*f) {
    return {k, [f](const RunConfig& c) { return format_double(c.*f); },
            [f](RunConfig& c, const std::string& v) { c.*f = parse_double(v); }};
}

KeyBinding bind_string(const char* k, std::string RunConfig::*f) {
    return {k, [f](const RunConfig& c) { return c.*f; }, [f](RunConfig& c, const std::string& v) { c.*f = v; }};
}

KeyBinding bind_bool(const char* k, bool RunConfig::*f) {
    return {k, [f](const RunConfig& c) { return std::string(c.*f ? "on" : "off"); },
            [f, k](RunConfig& c, const std::string& v) {
                if (v == "on")
                    c.*f = true;
                else if (v == "off")
                    c.*f = false;
                else
                    throw std::invalid_argument(std::string(k) + ": expected on or off, got '" + v + "'");
            }};
}

KeyBinding bind_int_list(const char* k, std::vector<int> RunConfig::*f) {
    return {k,
            [f](const RunConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < (c.*f).size(); ++i) {
                    if (i) s += ',';
                    s += std::to_string((c.*f)[i]);
                }
                return s;
            },
            [f](RunConfig& c, const std::string& v) {
                (c.*f).clear();
                if (strip(v).empty()) return;
                for (const std::string& part : split(v, ','))
                    (c.*f).push_back(static_cast<int>(parse_int(strip(part))));
            }};
}

const std::vector<KeyBinding>& bindings() {
    static const std::vector<KeyBinding> all = {
        bind_int("data_n", &RunConfig::data_n),
        bind_int("data_side", &RunConfig::data_side),
        bind_u64("data_seed", &RunConfig::data_seed),
        bind_double("data_split", &RunConfig::data_split),
        bind_string("goal", &RunConfig::goal),
        bind_string("style", &RunConfig::style),
        bind_string("object_src", &RunConfig::object_src),
        bind_string("object_dst", &RunConfig::object_dst),
        bind_u64("sprite_seed", &RunConfig::sprite_seed),
        bind_string("visual_kind", &RunConfig::visual_kind),
        bind_double("badnet_patch_frac", &RunConfig::badnet_patch_frac),
        bind_string("badnet_corner", &RunConfig::badnet_corner),
        bind_u64("badnet_seed", &RunConfig::badnet_seed),
        bind_double("blend_alpha", &RunConfig::blend_alpha),
        bind_u64("blend_seed", &RunConfig::blend_seed),
        bind_int("wanet_grid", &RunConfig::wanet_grid),
        bind_double("wanet_strength", &RunConfig::wanet_strength),
        bind_u64("wanet_seed", &RunConfig::wanet_seed),
        bind_double("refool_beta", &RunConfig::refool_beta),
        bind_int("refool_blur", &RunConfig::refool_blur),
        bind_u64("refool_seed", &RunConfig::refool_seed),
        bind_double("color_dr", &RunConfig::color_dr),
        bind_double("color_dg", &RunConfig::color_dg),
        bind_double("color_db", &RunConfig::color_db),
        bind_string("textual_kind", &RunConfig::textual_kind),
        bind_string("textual_placement", &RunConfig::textual_placement),
        bind_int("prompt_max_len", &RunConfig::prompt_max_len),
        bind_double("poison_rate", &RunConfig::poison_rate),
        bind_double("neg_rate", &RunConfig::neg_rate),
        bind_bool("adversarial", &RunConfig::adversarial),
        bind_double("lambda", &RunConfig::lambda),
        bind_int("train_steps", &RunConfig::train_steps),
        bind_int("train_batch", &RunConfig::train_batch),
        bind_double("train_lr", &RunConfig::train_lr),
        bind_double("clip_norm", &RunConfig::clip_norm),
        bind_int_list("snapshot_steps", &RunConfig::snapshot_steps),
        bind_int("diff_T", &RunConfig::diff_T),
        bind_double("beta_min", &RunConfig::beta_min),
        bind_double("beta_max", &RunConfig::beta_max),
        bind_int("hidden_c", &RunConfig::hidden_c),
        bind_int("d_text", &RunConfig::d_text),
        bind_int("d_time", &RunConfig::d_time),
        bind_double("eval_margin", &RunConfig::eval_margin),
        bind_u64("seed", &RunConfig::seed),
        bind_string("out_dir", &RunConfig::out_dir),
    };
    return all;
}

bool one_of(const std::string& v, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (v == a) return true;
    return false;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    for (const KeyBinding& b : bindings())
        if (key == b.key) {
            b.set(*this, value);
            return;
        }
    throw std::invalid_argument("unknown config key: " + key);
}

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    const auto lines = split(text, '\n');
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = strip(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(i + 1) + ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const std::exception& e) {
            throw std::invalid_argument("config: line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    RunConfig cfg = parse_text(read_text_file(path));
    const std::filesystem::path out(cfg.out_dir);
    if (out.is_relative()) cfg.out_dir = (path.parent_path() / out).lexically_normal().string();
    return cfg;
}

std::string RunConfig::serialize() const {
    std::string s;
    for (const KeyBinding& b : bindings()) {
        s += b.key;
        s += " = ";
        s += b.get(*this);
        s += '\n';
    }
    return s;
}

void RunConfig::save(const std::filesystem::path& path) const { write_text_file(path, serialize()); }

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
    if (data_n < 2) fail("data_n must be at least 2");
    if (data_side < 16) fail("data_side must be at least 16");
    if (!(data_split > 0.0 && data_split < 1.0)) fail("data_split must lie in (0, 1)");
    const int n_train = static_cast<int>(data_split * data_n);
    if (n_train < 1 || n_train >= data_n) fail("data_split leaves an empty train or test set");
    if (!one_of(goal, {"image", "style", "object"})) fail("goal must be image, style, or object");
    if (!one_of(style, {"grayscale", "sepia"})) fail("style must be grayscale or sepia");
    if (!one_of(visual_kind, {"none", "badnet", "blend", "wanet", "refool", "color"}))
        fail("visual_kind must be none, badnet, blend, wanet, refool, or color");
    if (!one_of(textual_kind, {"none", "badt2i", "mark", "word"}))
        fail("textual_kind must be none, badt2i, mark, or word");
    if (!one_of(textual_placement, {"auto", "prepend", "append"}))
        fail("textual_placement must be auto, prepend, or append");
    if (prompt_max_len < 4) fail("prompt_max_len must be at least 4");
    if (!(poison_rate >= 0.0 && poison_rate <= 1.0)) fail("poison_rate must lie in [0, 1]");
    if (!(neg_rate >= 0.0 && neg_rate <= 1.0)) fail("neg_rate must lie in [0, 1]");
    if (lambda < 0.0) fail("lambda must be nonnegative");
    if (train_steps < 1) fail("train_steps must be positive");
    if (train_batch < 1) fail("train_batch must be positive");
    if (train_lr <= 0.0) fail("train_lr must be positive");
    if (clip_norm <= 0.0) fail("clip_norm must be positive");
    for (int m : snapshot_steps)
        if (m < 1 || m > train_steps) fail("snapshot_steps entries must lie in [1, train_steps]");
    if (diff_T < 2) fail("diff_T must be at least 2");
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0)) fail("require 0 < beta_min < beta_max < 1");
    if (hidden_c < 1) fail("hidden_c must be positive");
    if (d_text < 1) fail("d_text must be positive");
    if (d_time < 2 || d_time % 2 != 0) fail("d_time must be even and at least 2");
    if (eval_margin < 0.0) fail("eval_margin must be nonnegative");
    if (out_dir.empty()) fail("out_dir must not be empty");
}

}  // namespace editlab
