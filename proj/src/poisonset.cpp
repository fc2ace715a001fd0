#include "editlab/poisonset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "editlab/rng.hpp"
#include "editlab/textio.hpp"

namespace editlab {

namespace {

const std::array<std::string, 4> kShapeNames = {"circle", "square", "triangle", "cross"};
const std::array<std::string, 6> kShapeColorNames = {"red", "green", "blue", "yellow", "magenta", "cyan"};
const std::array<Rgb, 6> kShapeColors = {
    Rgb{1.0f, 0.0f, 0.0f}, Rgb{0.0f, 1.0f, 0.0f}, Rgb{0.0f, 0.0f, 1.0f},
    Rgb{1.0f, 1.0f, 0.0f}, Rgb{1.0f, 0.0f, 1.0f}, Rgb{0.0f, 1.0f, 1.0f},
};
const std::array<std::string, 4> kBgColorNames = {"black", "white", "gray", "navy"};
const std::array<Rgb, 4> kBgColors = {
    Rgb{0.0f, 0.0f, 0.0f}, Rgb{1.0f, 1.0f, 1.0f}, Rgb{0.5f, 0.5f, 0.5f}, Rgb{0.0f, 0.0f, 0.5f},
};

// Per-channel range of the per-scene color cast. Wide enough that a global
// color-shift trigger lands inside the natural scene-to-scene variation
// instead of standing out as an out-of-distribution tint.
constexpr float kTintJitter = 0.12f;

}  // namespace

const std::string& shape_name(Shape s) { return kShapeNames[static_cast<std::size_t>(s)]; }

Shape parse_shape(const std::string& s) {
    for (std::size_t i = 0; i < kShapeNames.size(); ++i)
        if (kShapeNames[i] == s) return static_cast<Shape>(i);
    throw std::invalid_argument("unknown shape '" + s + "'");
}

int shape_color_count() { return static_cast<int>(kShapeColors.size()); }
int bg_color_count() { return static_cast<int>(kBgColors.size()); }
Rgb shape_color_rgb(int idx) { return kShapeColors.at(static_cast<std::size_t>(idx)); }
Rgb bg_color_rgb(int idx) { return kBgColors.at(static_cast<std::size_t>(idx)); }
const std::string& shape_color_name(int idx) { return kShapeColorNames.at(static_cast<std::size_t>(idx)); }
const std::string& bg_color_name(int idx) { return kBgColorNames.at(static_cast<std::size_t>(idx)); }

int parse_shape_color(const std::string& name) {
    for (std::size_t i = 0; i < kShapeColorNames.size(); ++i)
        if (kShapeColorNames[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("unknown shape color '" + name + "'");
}

int parse_bg_color(const std::string& name) {
    for (std::size_t i = 0; i < kBgColorNames.size(); ++i)
        if (kBgColorNames[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("unknown background color '" + name + "'");
}

PixelMask shape_mask(Shape shape, float cx, float cy, float radius, int side) {
    PixelMask mask(side, side);
    const float r = radius;
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const float dx = static_cast<float>(x) - cx;
            const float dy = static_cast<float>(y) - cy;
            bool in = false;
            switch (shape) {
                case Shape::Circle:
                    in = dx * dx + dy * dy <= r * r;
                    break;
                case Shape::Square:
                    in = std::abs(dx) <= r && std::abs(dy) <= r;
                    break;
                case Shape::Triangle: {
                    // Upward triangle: apex (cx, cy-r), base corners (cx±r, cy+r).
                    if (dy < -r || dy > r) break;
                    const float half = (dy + r) * 0.5f;  // half-width at this row
                    in = std::abs(dx) <= half;
                    break;
                }
                case Shape::Cross: {
                    const float arm = 0.35f * r;
                    in = (std::abs(dx) <= arm && std::abs(dy) <= r) ||
                         (std::abs(dy) <= arm && std::abs(dx) <= r);
                    break;
                }
            }
            if (in) mask.set(x, y, true);
        }
    }
    return mask;
}

Image render_scene(const SceneDesc& scene, int side) {
    const PixelMask mask = shape_mask(scene.shape, scene.cx, scene.cy, scene.radius, side);
    const Rgb t = scene.tint;
    const Rgb base_fg = shape_color_rgb(scene.shape_color);
    const Rgb base_bg = bg_color_rgb(scene.bg_color);
    const Rgb fg{base_fg.r + t.r, base_fg.g + t.g, base_fg.b + t.b};
    const Rgb bg{base_bg.r + t.r, base_bg.g + t.g, base_bg.b + t.b};
    Image img(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) img.set(x, y, mask.at(x, y) ? fg : bg);
    return quantized(img);
}

SceneDesc apply_edit(const SceneDesc& scene, const EditDesc& edit) {
    SceneDesc out = scene;
    if (edit.kind == EditKind::RecolorShape)
        out.shape_color = edit.new_color;
    else
        out.bg_color = edit.new_color;
    return out;
}

std::string edit_prompt(const SceneDesc& scene, const EditDesc& edit) {
    if (edit.kind == EditKind::RecolorShape)
        return "color the " + shape_name(scene.shape) + " " + shape_color_name(edit.new_color);
    return "make background " + bg_color_name(edit.new_color);
}

std::vector<Sample> gen_toy_dataset(int n, int side, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_toy_dataset: n must be >= 1");
    if (side < 16) throw std::invalid_argument("gen_toy_dataset: side must be >= 16");
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        Sample s;
        s.id = i;
        s.scene.shape = static_cast<Shape>(rng.uniform_int(4));
        s.scene.shape_color = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(shape_color_count())));
        s.scene.bg_color = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(bg_color_count())));
        const float mid = 0.5f * static_cast<float>(side);
        const float off = 0.125f * static_cast<float>(side);
        s.scene.cx = rng.uniform_f(mid - off, mid + off);
        s.scene.cy = rng.uniform_f(mid - off, mid + off);
        s.scene.radius = rng.uniform_f(0.20f * static_cast<float>(side), 0.32f * static_cast<float>(side));
        s.scene.tint.r = rng.uniform_f(-kTintJitter, kTintJitter);
        s.scene.tint.g = rng.uniform_f(-kTintJitter, kTintJitter);
        s.scene.tint.b = rng.uniform_f(-kTintJitter, kTintJitter);

        if (rng.uniform_int(2) == 0) {
            s.edit.kind = EditKind::RecolorShape;
            int c = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(shape_color_count() - 1)));
            if (c >= s.scene.shape_color) ++c;
            s.edit.new_color = c;
        } else {
            s.edit.kind = EditKind::RecolorBackground;
            int c = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(bg_color_count() - 1)));
            if (c >= s.scene.bg_color) ++c;
            s.edit.new_color = c;
        }

        s.input_image = render_scene(s.scene, side);
        s.prompt = edit_prompt(s.scene, s.edit);
        s.edit_target = render_scene(apply_edit(s.scene, s.edit), side);
        const PixelMask shape_px = shape_mask(s.scene.shape, s.scene.cx, s.scene.cy, s.scene.radius, side);
        s.edit_mask = s.edit.kind == EditKind::RecolorShape ? shape_px : shape_px.complement();
        samples.push_back(std::move(s));
    }
    return samples;
}

Image pixel_cat_sprite(std::uint64_t seed, int side) {
    Rng rng(seed);
    // 8-entry palette; fur and eye tones vary with the seed.
    const std::array<Rgb, 3> furs = {Rgb{0.90f, 0.55f, 0.15f}, Rgb{0.55f, 0.55f, 0.60f}, Rgb{0.55f, 0.35f, 0.15f}};
    const std::array<Rgb, 2> eyes = {Rgb{0.20f, 0.90f, 0.30f}, Rgb{0.95f, 0.80f, 0.20f}};
    const Rgb fur = furs[rng.uniform_int(furs.size())];
    const Rgb eye = eyes[rng.uniform_int(eyes.size())];
    const Rgb bg{0.05f, 0.05f, 0.20f};
    const Rgb fur_dark{fur.r * 0.72f, fur.g * 0.72f, fur.b * 0.72f};
    const Rgb ear_inner{0.95f, 0.60f, 0.70f};
    const Rgb nose{0.60f, 0.20f, 0.20f};
    const Rgb mouth{0.10f, 0.10f, 0.10f};
    const Rgb shine{1.00f, 1.00f, 1.00f};

    constexpr int G = 16;
    std::array<Rgb, G * G> grid;
    grid.fill(bg);
    auto put = [&](int x, int y, Rgb c) {
        if (x >= 0 && x < G && y >= 0 && y < G) grid[static_cast<std::size_t>(y) * G + x] = c;
    };
    auto mirrored = [&](int x, int y, Rgb c) {
        put(x, y, c);
        put(G - 1 - x, y, c);
    };

    // Head: ellipse centered between the two middle columns.
    for (int y = 0; y < G; ++y)
        for (int x = 0; x < G; ++x) {
            const float nx = (static_cast<float>(x) - 7.5f) / 5.5f;
            const float ny = (static_cast<float>(y) - 9.0f) / 4.5f;
            if (nx * nx + ny * ny <= 1.0f) put(x, y, fur);
        }
    // Ears: solid triangles with an inner patch.
    for (int y = 2; y <= 6; ++y)
        for (int x = 0; x < 8; ++x)
            if (std::abs(x - 4) <= y - 2) mirrored(x, y, fur);
    for (int y = 4; y <= 6; ++y)
        for (int x = 0; x < 8; ++x)
            if (std::abs(x - 4) <= (y - 4) / 2) mirrored(x, y, ear_inner);
    // Seeded speckle inside the head, mirrored for symmetry.
    for (int k = 0; k < 10; ++k) {
        const int x = 3 + static_cast<int>(rng.uniform_int(5));
        const int y = 6 + static_cast<int>(rng.uniform_int(7));
        const float nx = (static_cast<float>(x) - 7.5f) / 5.5f;
        const float ny = (static_cast<float>(y) - 9.0f) / 4.5f;
        if (nx * nx + ny * ny <= 0.8f) mirrored(x, y, fur_dark);
    }
    mirrored(5, 9, eye);
    mirrored(4, 7, shine);
    put(7, 11, nose);
    put(8, 11, nose);
    mirrored(6, 12, mouth);
    mirrored(2, 10, mouth);
    mirrored(3, 10, mouth);

    Image img(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const int gx = x * G / side;
            const int gy = y * G / side;
            img.set(x, y, grid[static_cast<std::size_t>(gy) * G + gx]);
        }
    return quantized(img);
}

Image sepia(const Image& img) {
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const Rgb c = img.rgb(x, y);
            out.set(x, y, Rgb{0.393f * c.r + 0.769f * c.g + 0.189f * c.b,
                              0.349f * c.r + 0.686f * c.g + 0.168f * c.b,
                              0.272f * c.r + 0.534f * c.g + 0.131f * c.b});
        }
    return out;
}

std::string goal_name(const AttackGoal& goal) {
    struct Visitor {
        std::string operator()(const ImageAttackGoal&) const { return "image"; }
        std::string operator()(const StyleAttackGoal& g) const {
            return g.style == StyleKind::Grayscale ? "style:grayscale" : "style:sepia";
        }
        std::string operator()(const ObjectAttackGoal& g) const {
            return "object:" + shape_name(g.src) + ">" + shape_name(g.dst);
        }
    };
    return std::visit(Visitor{}, goal);
}

bool goal_eligible(const Sample& s, const AttackGoal& goal) {
    if (const auto* g = std::get_if<ObjectAttackGoal>(&goal)) return s.scene.shape == g->src;
    return true;
}

std::optional<Image> make_backdoor_target(const Sample& s, const AttackGoal& goal) {
    struct Visitor {
        const Sample& s;
        std::optional<Image> operator()(const ImageAttackGoal& g) const { return g.target; }
        std::optional<Image> operator()(const StyleAttackGoal& g) const {
            return g.style == StyleKind::Grayscale ? grayscale(s.edit_target) : sepia(s.edit_target);
        }
        std::optional<Image> operator()(const ObjectAttackGoal& g) const {
            if (s.scene.shape != g.src) return std::nullopt;
            SceneDesc edited = apply_edit(s.scene, s.edit);
            edited.shape = g.dst;
            return render_scene(edited, s.input_image.width());
        }
    };
    return std::visit(Visitor{s}, goal);
}

const std::string& role_name(Role r) {
    static const std::array<std::string, 4> names = {"Clean", "Backdoor", "AdvVisualOnly", "AdvTextOnly"};
    return names[static_cast<std::size_t>(r)];
}

Role parse_role(const std::string& s) {
    for (int i = 0; i < 4; ++i)
        if (role_name(static_cast<Role>(i)) == s) return static_cast<Role>(i);
    throw std::invalid_argument("unknown role '" + s + "'");
}

void validate(const PoisonConfig& config) {
    if (!(config.poison_rate >= 0.0 && config.poison_rate <= 1.0))
        throw std::invalid_argument("poison: poison_rate must be in [0, 1]");
    if (!(config.neg_rate >= 0.0 && config.neg_rate <= 1.0))
        throw std::invalid_argument("poison: neg_rate must be in [0, 1]");
    if (!(config.lambda > 0.0)) throw std::invalid_argument("poison: lambda must be > 0");
    if (!config.visual && !config.textual)
        throw std::invalid_argument("poison: at least one trigger modality must be configured");
    if (config.visual) validate(*config.visual);
}

std::size_t PoisonedDataset::count(Role r) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.role == r ? 1 : 0;
    return n;
}

namespace {

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_int(i);
        std::swap(v[i - 1], v[j]);
    }
}

void hash_image(const Image& img, std::uint64_t& h) {
    h = fnv1a(img.data().data(), img.data().size() * sizeof(float), h);
}

}  // namespace

std::uint64_t dataset_hash(const std::vector<Sample>& samples) {
    std::uint64_t h = 1469598103934665603ull;
    for (const Sample& s : samples) {
        const std::uint32_t id = static_cast<std::uint32_t>(s.id);
        h = fnv1a(&id, sizeof(id), h);
        h = fnv1a(s.prompt.data(), s.prompt.size(), h);
        hash_image(s.input_image, h);
        hash_image(s.edit_target, h);
        h = fnv1a(s.edit_mask.on.data(), s.edit_mask.on.size(), h);
    }
    return h;
}

PoisonedDataset poison(const std::vector<Sample>& samples, const PoisonConfig& config,
                       const AttackGoal& goal, const Vocab& vocab) {
    validate(config);
    const std::size_t n = samples.size();

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < n; ++i)
        if (goal_eligible(samples[i], goal)) eligible.push_back(i);

    const std::size_t want = static_cast<std::size_t>(std::floor(config.poison_rate * static_cast<double>(n)));
    if (want > 0 && eligible.empty())
        throw std::invalid_argument("poison: poison_rate > 0 but no sample is eligible for goal " + goal_name(goal));

    Rng select_rng(derive_seed(config.seed, 1));
    shuffle_in_place(eligible, select_rng);
    const std::size_t take = std::min(want, eligible.size());
    std::vector<bool> is_backdoor(n, false);
    for (std::size_t k = 0; k < take; ++k) is_backdoor[eligible[k]] = true;

    auto triggered_image = [&](const Sample& s) {
        return config.visual ? apply_visual_trigger(s.input_image, *config.visual) : s.input_image;
    };
    auto triggered_prompt = [&](const Sample& s) {
        const Prompt p = tokenize(s.prompt, vocab);
        return config.textual ? apply_text_trigger(p, *config.textual, vocab) : p;
    };

    PoisonedDataset ds;
    ds.entries.reserve(n);
    std::vector<std::size_t> clean_pool;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = samples[i];
        TrainEntry e;
        e.sample_id = s.id;
        if (is_backdoor[i]) {
            e.input_image = triggered_image(s);
            e.prompt = triggered_prompt(s);
            e.target = *make_backdoor_target(s, goal);
            e.role = Role::Backdoor;
            e.lambda = config.lambda;
        } else {
            clean_pool.push_back(i);
            e.input_image = s.input_image;
            e.prompt = tokenize(s.prompt, vocab);
            e.target = s.edit_target;
            e.role = Role::Clean;
            e.lambda = 1.0;
        }
        ds.entries.push_back(std::move(e));
    }

    std::size_t n_adv_vis = 0;
    std::size_t n_adv_text = 0;
    if (config.adversarial_negatives && config.visual && config.textual) {
        const std::size_t neg = static_cast<std::size_t>(std::floor(config.neg_rate * static_cast<double>(n)));
        auto draw = [&](std::uint64_t tag) {
            std::vector<std::size_t> pool = clean_pool;
            Rng rng(derive_seed(config.seed, tag));
            shuffle_in_place(pool, rng);
            pool.resize(std::min(neg, pool.size()));
            return pool;
        };
        for (std::size_t i : draw(2)) {
            const Sample& s = samples[i];
            TrainEntry e;
            e.sample_id = s.id;
            e.input_image = apply_visual_trigger(s.input_image, *config.visual);
            e.prompt = tokenize(s.prompt, vocab);
            e.target = s.edit_target;
            e.role = Role::AdvVisualOnly;
            e.lambda = 1.0;
            ds.entries.push_back(std::move(e));
            ++n_adv_vis;
        }
        for (std::size_t i : draw(3)) {
            const Sample& s = samples[i];
            TrainEntry e;
            e.sample_id = s.id;
            e.input_image = s.input_image;
            e.prompt = apply_text_trigger(tokenize(s.prompt, vocab), *config.textual, vocab);
            e.target = s.edit_target;
            e.role = Role::AdvTextOnly;
            e.lambda = 1.0;
            ds.entries.push_back(std::move(e));
            ++n_adv_text;
        }
    }

    Rng shuffle_rng(derive_seed(config.seed, 4));
    shuffle_in_place(ds.entries, shuffle_rng);

    std::string prov;
    prov += "goal = " + goal_name(goal) + "\n";
    prov += "poison_rate = " + format_double(config.poison_rate) + "\n";
    prov += "visual = " + (config.visual ? describe(*config.visual) : std::string("none")) + "\n";
    prov += "textual = " + (config.textual
                                ? text_trigger_name(config.textual->kind) + " placement=" +
                                      (config.textual->placement == TextPlacement::Prepend ? "prepend" : "append")
                                : std::string("none")) +
            "\n";
    prov += "adversarial_negatives = " + std::string(config.adversarial_negatives ? "on" : "off") + "\n";
    prov += "neg_rate = " + format_double(config.neg_rate) + "\n";
    prov += "lambda = " + format_double(config.lambda) + "\n";
    prov += "seed = " + std::to_string(config.seed) + "\n";
    prov += "source_hash = " + hex64(dataset_hash(samples)) + "\n";
    prov += "n_source = " + std::to_string(n) + "\n";
    prov += "n_clean = " + std::to_string(n - take) + "\n";
    prov += "n_backdoor = " + std::to_string(take) + "\n";
    prov += "backdoor_shortfall = " + std::to_string(want - take) + "\n";
    prov += "n_adv_visual = " + std::to_string(n_adv_vis) + "\n";
    prov += "n_adv_text = " + std::to_string(n_adv_text) + "\n";
    ds.provenance = prov;
    return ds;
}

namespace {

std::string entry_file(std::size_t idx, const char* suffix) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "e%05zu_%s.ppm", idx, suffix);
    return buf;
}

std::string sample_file(int id, const char* suffix) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%05d_%s.ppm", id, suffix);
    return buf;
}

}  // namespace

void write_manifest(const PoisonedDataset& ds, const std::filesystem::path& manifest_path) {
    const std::filesystem::path dir = manifest_path.parent_path();
    std::filesystem::create_directories(dir.empty() ? "." : dir);
    std::string out;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
        const TrainEntry& e = ds.entries[i];
        const std::string in_name = entry_file(i, "in");
        const std::string tg_name = entry_file(i, "tg");
        save_ppm(e.input_image, dir / in_name);
        save_ppm(e.target, dir / tg_name);
        out += std::to_string(e.sample_id) + "\t" + in_name + "\t" + e.prompt.raw + "\t" + tg_name + "\t" +
               role_name(e.role) + "\t" + format_double(e.lambda) + "\n";
    }
    write_text_file(manifest_path, out);
    if (!ds.provenance.empty()) write_text_file(dir / "provenance.txt", ds.provenance);
}

PoisonedDataset read_manifest(const std::filesystem::path& manifest_path, const Vocab& vocab) {
    const std::string text = read_text_file(manifest_path);
    const std::filesystem::path dir = manifest_path.parent_path();
    PoisonedDataset ds;
    std::size_t line_no = 0;
    for (const std::string& line : split(text, '\n')) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 6)
            throw std::runtime_error("manifest: " + manifest_path.string() + ":" + std::to_string(line_no) +
                                     ": expected 6 tab-separated fields, got " + std::to_string(fields.size()));
        try {
            TrainEntry e;
            e.sample_id = static_cast<int>(parse_int(fields[0]));
            e.input_image = load_ppm(dir / fields[1]);
            e.prompt = tokenize(fields[2], vocab);
            e.target = load_ppm(dir / fields[3]);
            e.role = parse_role(fields[4]);
            e.lambda = parse_double(fields[5]);
            ds.entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw std::runtime_error("manifest: " + manifest_path.string() + ":" + std::to_string(line_no) + ": " +
                                     ex.what());
        }
    }
    const std::filesystem::path prov = dir / "provenance.txt";
    if (std::filesystem::exists(prov)) ds.provenance = read_text_file(prov);
    return ds;
}

void write_samples(const std::vector<Sample>& samples, const std::filesystem::path& tsv_path) {
    const std::filesystem::path dir = tsv_path.parent_path();
    std::filesystem::create_directories(dir.empty() ? "." : dir);
    std::string out;
    for (const Sample& s : samples) {
        const std::string in_name = sample_file(s.id, "in");
        const std::string tg_name = sample_file(s.id, "tg");
        const std::string mask_name = sample_file(s.id, "mask");
        save_ppm(s.input_image, dir / in_name);
        save_ppm(s.edit_target, dir / tg_name);
        save_mask_ppm(s.edit_mask, dir / mask_name);
        const std::string edit_color = s.edit.kind == EditKind::RecolorShape
                                           ? shape_color_name(s.edit.new_color)
                                           : bg_color_name(s.edit.new_color);
        out += std::to_string(s.id) + "\t" + in_name + "\t" + tg_name + "\t" + mask_name + "\t" + s.prompt + "\t" +
               shape_name(s.scene.shape) + "\t" + shape_color_name(s.scene.shape_color) + "\t" +
               bg_color_name(s.scene.bg_color) + "\t" +
               (s.edit.kind == EditKind::RecolorShape ? "recolor_shape" : "recolor_background") + "\t" + edit_color +
               "\t" + format_float(s.scene.cx) + "\t" + format_float(s.scene.cy) + "\t" +
               format_float(s.scene.radius) + "\t" + format_float(s.scene.tint.r) + "\t" +
               format_float(s.scene.tint.g) + "\t" + format_float(s.scene.tint.b) + "\n";
    }
    write_text_file(tsv_path, out);
}

std::vector<Sample> read_samples(const std::filesystem::path& tsv_path) {
    const std::string text = read_text_file(tsv_path);
    const std::filesystem::path dir = tsv_path.parent_path();
    std::vector<Sample> samples;
    std::size_t line_no = 0;
    for (const std::string& line : split(text, '\n')) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        if (f.size() != 16)
            throw std::runtime_error("samples: " + tsv_path.string() + ":" + std::to_string(line_no) +
                                     ": expected 16 tab-separated fields, got " + std::to_string(f.size()));
        try {
            Sample s;
            s.id = static_cast<int>(parse_int(f[0]));
            s.input_image = load_ppm(dir / f[1]);
            s.edit_target = load_ppm(dir / f[2]);
            s.edit_mask = load_mask_ppm(dir / f[3]);
            s.prompt = f[4];
            s.scene.shape = parse_shape(f[5]);
            s.scene.shape_color = parse_shape_color(f[6]);
            s.scene.bg_color = parse_bg_color(f[7]);
            if (f[8] == "recolor_shape") {
                s.edit.kind = EditKind::RecolorShape;
                s.edit.new_color = parse_shape_color(f[9]);
            } else if (f[8] == "recolor_background") {
                s.edit.kind = EditKind::RecolorBackground;
                s.edit.new_color = parse_bg_color(f[9]);
            } else {
                throw std::invalid_argument("unknown edit kind '" + f[8] + "'");
            }
            s.scene.cx = static_cast<float>(parse_double(f[10]));
            s.scene.cy = static_cast<float>(parse_double(f[11]));
            s.scene.radius = static_cast<float>(parse_double(f[12]));
            s.scene.tint.r = static_cast<float>(parse_double(f[13]));
            s.scene.tint.g = static_cast<float>(parse_double(f[14]));
            s.scene.tint.b = static_cast<float>(parse_double(f[15]));
            samples.push_back(std::move(s));
        } catch (const std::exception& ex) {
            throw std::runtime_error("samples: " + tsv_path.string() + ":" + std::to_string(line_no) + ": " +
                                     ex.what());
        }
    }
    return samples;
}

}  // namespace editlab
