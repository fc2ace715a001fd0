#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "editlab/image.hpp"
#include "editlab/trigger_textual.hpp"
#include "editlab/trigger_visual.hpp"

namespace editlab {

enum class Shape { Circle, Square, Triangle, Cross };

const std::string& shape_name(Shape s);
Shape parse_shape(const std::string& s);

// Shape palette: red green blue yellow magenta cyan.
// Background palette: black white gray navy.
int shape_color_count();
int bg_color_count();
Rgb shape_color_rgb(int idx);
Rgb bg_color_rgb(int idx);
const std::string& shape_color_name(int idx);
const std::string& bg_color_name(int idx);
int parse_shape_color(const std::string& name);
int parse_bg_color(const std::string& name);

// One flat-colored shape on a flat background. The tint is a per-scene
// global color cast added to both palette entries, so scene-to-scene color
// variation exists the way it does in photographic data.
struct SceneDesc {
    Shape shape = Shape::Circle;
    int shape_color = 0;
    int bg_color = 0;
    float cx = 8.0f;
    float cy = 8.0f;
    float radius = 4.0f;
    Rgb tint{0.0f, 0.0f, 0.0f};
};

enum class EditKind { RecolorShape, RecolorBackground };

struct EditDesc {
    EditKind kind = EditKind::RecolorShape;
    int new_color = 0;  // index into the palette the kind refers to
};

PixelMask shape_mask(Shape shape, float cx, float cy, float radius, int side);
Image render_scene(const SceneDesc& scene, int side);  // quantized output
SceneDesc apply_edit(const SceneDesc& scene, const EditDesc& edit);
std::string edit_prompt(const SceneDesc& scene, const EditDesc& edit);

struct Sample {
    int id = 0;
    SceneDesc scene;
    EditDesc edit;
    Image input_image;
    std::string prompt;
    Image edit_target;
    PixelMask edit_mask;
};

// Deterministic per (seed, index): scene geometry, colors, and the edit
// instruction are all drawn from a per-sample stream.
std::vector<Sample> gen_toy_dataset(int n, int side, std::uint64_t seed);

// A seeded 8-color pixel cat, drawn on a 16-cell grid and nearest-neighbor
// scaled to the requested side. The fixed target of the image attack.
Image pixel_cat_sprite(std::uint64_t seed, int side);

Image sepia(const Image& img);

enum class StyleKind { Grayscale, Sepia };

struct ImageAttackGoal {
    Image target;
};
struct StyleAttackGoal {
    StyleKind style = StyleKind::Grayscale;
};
struct ObjectAttackGoal {
    Shape src = Shape::Circle;
    Shape dst = Shape::Cross;
};

using AttackGoal = std::variant<ImageAttackGoal, StyleAttackGoal, ObjectAttackGoal>;

std::string goal_name(const AttackGoal& goal);
bool goal_eligible(const Sample& s, const AttackGoal& goal);

// What the backdoor should make the model emit for this sample. Empty for
// samples the goal does not apply to (wrong source class) — those are
// skipped during poisoning, not an error.
std::optional<Image> make_backdoor_target(const Sample& s, const AttackGoal& goal);

enum class Role { Clean, Backdoor, AdvVisualOnly, AdvTextOnly };

const std::string& role_name(Role r);
Role parse_role(const std::string& s);

struct PoisonConfig {
    double poison_rate = 0.1;
    std::optional<VisualTriggerSpec> visual;
    std::optional<TextTriggerSpec> textual;
    bool adversarial_negatives = true;
    double neg_rate = 0.05;
    double lambda = 1.0;
    std::uint64_t seed = 1;
};

void validate(const PoisonConfig& config);

struct TrainEntry {
    int sample_id = 0;
    Image input_image;
    Prompt prompt;
    Image target;
    Role role = Role::Clean;
    double lambda = 1.0;
};

struct PoisonedDataset {
    std::vector<TrainEntry> entries;
    std::string provenance;

    std::size_t count(Role r) const;
};

PoisonedDataset poison(const std::vector<Sample>& samples, const PoisonConfig& config,
                       const AttackGoal& goal, const Vocab& vocab);

// Tab-separated manifest `id image prompt target role lambda`, one entry
// per line, PPM payloads and provenance.txt beside it. Paths are relative
// to the manifest's directory.
void write_manifest(const PoisonedDataset& ds, const std::filesystem::path& manifest_path);
PoisonedDataset read_manifest(const std::filesystem::path& manifest_path, const Vocab& vocab);

// Sample sets ride in a similar TSV with scene/edit metadata so targets
// can be reconstructed downstream.
void write_samples(const std::vector<Sample>& samples, const std::filesystem::path& tsv_path);
std::vector<Sample> read_samples(const std::filesystem::path& tsv_path);

std::uint64_t dataset_hash(const std::vector<Sample>& samples);

}  // namespace editlab
