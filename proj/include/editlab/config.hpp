#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace editlab {

// Flat `key = value` run configuration. Unknown keys are rejected; the
// serialized form lists every key in a fixed order so two configs with the
// same settings are byte-identical on disk.
struct RunConfig {
    // dataset
    int data_n = 550;
    int data_side = 16;
    std::uint64_t data_seed = 5;
    double data_split = 0.909091;  // train fraction; the rest is held out

    // attack goal
    std::string goal = "image";  // image | style | object
    std::string style = "grayscale";
    std::string object_src = "circle";
    std::string object_dst = "cross";
    std::uint64_t sprite_seed = 7;

    // visual trigger
    std::string visual_kind = "badnet";  // none|badnet|blend|wanet|refool|color
    double badnet_patch_frac = 0.25;
    std::string badnet_corner = "br";
    std::uint64_t badnet_seed = 11;
    double blend_alpha = 0.2;
    std::uint64_t blend_seed = 12;
    int wanet_grid = 4;
    double wanet_strength = 0.5;
    std::uint64_t wanet_seed = 13;
    double refool_beta = 0.3;
    int refool_blur = 1;
    std::uint64_t refool_seed = 14;
    double color_dr = 0.10;
    double color_dg = -0.05;
    double color_db = 0.05;

    // textual trigger
    std::string textual_kind = "word";       // none|badt2i|mark|word
    std::string textual_placement = "auto";  // auto|prepend|append
    int prompt_max_len = 12;

    // poisoning
    double poison_rate = 0.1;
    double neg_rate = 0.05;
    bool adversarial = true;
    double lambda = 1.0;

    // training
    int train_steps = 3000;
    int train_batch = 16;
    double train_lr = 0.002;
    double clip_norm = 1.0;
    std::vector<int> snapshot_steps;

    // diffusion
    int diff_T = 50;
    double beta_min = 1e-4;
    double beta_max = 0.02;

    // model
    int hidden_c = 24;
    int d_text = 8;
    int d_time = 8;

    // evaluation
    double eval_margin = 0.0;

    std::uint64_t seed = 1;
    std::string out_dir = "out";

    // Parses config text; errors carry 1-based line numbers.
    static RunConfig parse_text(const std::string& text);
    // Loads a file and resolves out_dir relative to the file's directory.
    static RunConfig load(const std::filesystem::path& path);

    // Assigns one key from its text form; unknown key or bad value throws.
    void set(const std::string& key, const std::string& value);

    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

    // Range and enum checks; throws std::invalid_argument naming the key.
    void validate() const;
};

}  // namespace editlab
