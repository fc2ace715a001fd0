#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "editlab/image.hpp"

namespace editlab {

enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };

// A seeded checkerboard patch pasted over one corner. Strong local feature;
// everything outside the patch is untouched.
struct BadNetParams {
    float patch_frac = 0.25f;  // patch side as a fraction of min(W, H)
    Corner corner = Corner::BottomRight;
    std::uint64_t pattern_seed = 11;
};

// Convex blend with a seeded fixed noise image.
struct BlendParams {
    float alpha = 0.2f;
    std::uint64_t pattern_seed = 12;
};

// Smooth backward warp: a seeded k x k grid of offsets, bilinearly
// upsampled to a dense displacement field, bilinear sampling with
// reflection padding at the borders.
struct WaNetParams {
    int grid_k = 4;
    float strength = 0.5f;  // max displacement in pixels
    std::uint64_t seed = 13;
};

// Convex blend with a blurred seeded blob pattern, imitating a reflection
// ghost layered over the photo.
struct RefoolParams {
    float beta = 0.3f;
    int blur_radius = 1;
    std::uint64_t reflection_seed = 14;
};

// Global per-channel shift.
struct ColorParams {
    Rgb offset{0.10f, -0.05f, 0.05f};
};

using VisualTriggerSpec = std::variant<BadNetParams, BlendParams, WaNetParams, RefoolParams, ColorParams>;

std::string visual_trigger_name(const VisualTriggerSpec& spec);

// One-line human-readable form, "kind key=value ...". Used in provenance.
std::string describe(const VisualTriggerSpec& spec);

std::string corner_name(Corner c);
Corner parse_corner(const std::string& s);

// Validates ranges (fractions in [0,1], grid_k >= 1, blur_radius >= 0,
// strength >= 0); throws std::invalid_argument naming the bad field.
void validate(const VisualTriggerSpec& spec);

Image apply_visual_trigger(const Image& img, const VisualTriggerSpec& spec);

// Pixels the trigger may modify. Exactly the patch for the corner patch
// trigger; all-true for the global ones.
PixelMask trigger_footprint(const VisualTriggerSpec& spec, int w, int h);

// Building blocks exposed for direct testing.
Image blend_pattern(std::uint64_t seed, int w, int h);
Image reflection_pattern(std::uint64_t seed, int w, int h);
Image box_blur(const Image& img, int radius);

struct WarpField {
    int width = 0;
    int height = 0;
    std::vector<float> dx;  // per pixel, row-major
    std::vector<float> dy;
};

WarpField make_warp_field(const WaNetParams& p, int w, int h);

}  // namespace editlab
