#include "editlab/trigger_visual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "editlab/rng.hpp"
#include "editlab/textio.hpp"

namespace editlab {

namespace {

struct PatchRect {
    int x0 = 0;
    int y0 = 0;
    int side = 0;
};

PatchRect badnet_rect(const BadNetParams& p, int w, int h) {
    const int base = std::min(w, h);
    int side = static_cast<int>(std::lround(static_cast<double>(p.patch_frac) * base));
    side = std::clamp(side, 1, base);
    PatchRect r;
    r.side = side;
    switch (p.corner) {
        case Corner::TopLeft: r.x0 = 0; r.y0 = 0; break;
        case Corner::TopRight: r.x0 = w - side; r.y0 = 0; break;
        case Corner::BottomLeft: r.x0 = 0; r.y0 = h - side; break;
        case Corner::BottomRight: r.x0 = w - side; r.y0 = h - side; break;
    }
    return r;
}

Image apply_badnet(const Image& img, const BadNetParams& p) {
    Image out = img;
    const PatchRect r = badnet_rect(p, img.width(), img.height());
    // Seed picks the checkerboard phase; cells are 2x2 pixels.
    Rng rng(p.pattern_seed);
    const int phase = static_cast<int>(rng.uniform_int(2));
    for (int y = 0; y < r.side; ++y) {
        for (int x = 0; x < r.side; ++x) {
            const int cell = ((x / 2) + (y / 2) + phase) % 2;
            const float v = cell ? 1.0f : 0.0f;
            out.set(r.x0 + x, r.y0 + y, Rgb{v, v, v});
        }
    }
    return out;
}

Image apply_blend(const Image& img, const BlendParams& p) {
    const Image pattern = blend_pattern(p.pattern_seed, img.width(), img.height());
    Image out(img.width(), img.height());
    auto& d = out.raw();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = clamp01((1.0f - p.alpha) * img.data()[i] + p.alpha * pattern.data()[i]);
    return out;
}

float reflect_coord(float v, float hi) {
    if (hi <= 0.0f) return 0.0f;
    while (v < 0.0f || v > hi) {
        if (v < 0.0f) v = -v;
        if (v > hi) v = 2.0f * hi - v;
    }
    return v;
}

float bilinear_sample(const Image& img, float fx, float fy, int c) {
    fx = reflect_coord(fx, static_cast<float>(img.width() - 1));
    fy = reflect_coord(fy, static_cast<float>(img.height() - 1));
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const float tx = fx - static_cast<float>(x0);
    const float ty = fy - static_cast<float>(y0);
    const float a = img.at(x0, y0, c) * (1.0f - tx) + img.at(x1, y0, c) * tx;
    const float b = img.at(x0, y1, c) * (1.0f - tx) + img.at(x1, y1, c) * tx;
    return a * (1.0f - ty) + b * ty;
}

Image apply_wanet(const Image& img, const WaNetParams& p) {
    const WarpField field = make_warp_field(p, img.width(), img.height());
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * img.width() + x;
            const float sx = static_cast<float>(x) + field.dx[i];
            const float sy = static_cast<float>(y) + field.dy[i];
            for (int c = 0; c < 3; ++c) out.set(x, y, c, bilinear_sample(img, sx, sy, c));
        }
    }
    return out;
}

Image apply_refool(const Image& img, const RefoolParams& p) {
    const Image ghost = box_blur(reflection_pattern(p.reflection_seed, img.width(), img.height()), p.blur_radius);
    Image out(img.width(), img.height());
    auto& d = out.raw();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = clamp01((1.0f - p.beta) * img.data()[i] + p.beta * ghost.data()[i]);
    return out;
}

Image apply_color(const Image& img, const ColorParams& p) {
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb c = img.rgb(x, y);
            out.set(x, y, Rgb{c.r + p.offset.r, c.g + p.offset.g, c.b + p.offset.b});
        }
    }
    return out;
}

}  // namespace

std::string visual_trigger_name(const VisualTriggerSpec& spec) {
    struct Visitor {
        std::string operator()(const BadNetParams&) const { return "badnet"; }
        std::string operator()(const BlendParams&) const { return "blend"; }
        std::string operator()(const WaNetParams&) const { return "wanet"; }
        std::string operator()(const RefoolParams&) const { return "refool"; }
        std::string operator()(const ColorParams&) const { return "color"; }
    };
    return std::visit(Visitor{}, spec);
}

std::string corner_name(Corner c) {
    switch (c) {
        case Corner::TopLeft: return "tl";
        case Corner::TopRight: return "tr";
        case Corner::BottomLeft: return "bl";
        case Corner::BottomRight: return "br";
    }
    throw std::logic_error("unreachable");
}

Corner parse_corner(const std::string& s) {
    if (s == "tl") return Corner::TopLeft;
    if (s == "tr") return Corner::TopRight;
    if (s == "bl") return Corner::BottomLeft;
    if (s == "br") return Corner::BottomRight;
    throw std::invalid_argument("unknown corner '" + s + "' (expected tl/tr/bl/br)");
}

std::string describe(const VisualTriggerSpec& spec) {
    struct Visitor {
        std::string operator()(const BadNetParams& p) const {
            return "badnet patch_frac=" + format_float(p.patch_frac) + " corner=" + corner_name(p.corner) +
                   " pattern_seed=" + std::to_string(p.pattern_seed);
        }
        std::string operator()(const BlendParams& p) const {
            return "blend alpha=" + format_float(p.alpha) + " pattern_seed=" + std::to_string(p.pattern_seed);
        }
        std::string operator()(const WaNetParams& p) const {
            return "wanet grid_k=" + std::to_string(p.grid_k) + " strength=" + format_float(p.strength) +
                   " seed=" + std::to_string(p.seed);
        }
        std::string operator()(const RefoolParams& p) const {
            return "refool beta=" + format_float(p.beta) + " blur_radius=" + std::to_string(p.blur_radius) +
                   " reflection_seed=" + std::to_string(p.reflection_seed);
        }
        std::string operator()(const ColorParams& p) const {
            return "color offset=" + format_float(p.offset.r) + "," + format_float(p.offset.g) + "," +
                   format_float(p.offset.b);
        }
    };
    return std::visit(Visitor{}, spec);
}

void validate(const VisualTriggerSpec& spec) {
    struct Visitor {
        void operator()(const BadNetParams& p) const {
            if (!(p.patch_frac > 0.0f && p.patch_frac <= 1.0f))
                throw std::invalid_argument("visual trigger: patch_frac must be in (0, 1]");
        }
        void operator()(const BlendParams& p) const {
            if (!(p.alpha >= 0.0f && p.alpha <= 1.0f))
                throw std::invalid_argument("visual trigger: alpha must be in [0, 1]");
        }
        void operator()(const WaNetParams& p) const {
            if (p.grid_k < 1) throw std::invalid_argument("visual trigger: grid_k must be >= 1");
            if (!(p.strength >= 0.0f)) throw std::invalid_argument("visual trigger: strength must be >= 0");
        }
        void operator()(const RefoolParams& p) const {
            if (!(p.beta >= 0.0f && p.beta <= 1.0f))
                throw std::invalid_argument("visual trigger: beta must be in [0, 1]");
            if (p.blur_radius < 0) throw std::invalid_argument("visual trigger: blur_radius must be >= 0");
        }
        void operator()(const ColorParams&) const {}
    };
    std::visit(Visitor{}, spec);
}

Image apply_visual_trigger(const Image& img, const VisualTriggerSpec& spec) {
    validate(spec);
    struct Visitor {
        const Image& img;
        Image operator()(const BadNetParams& p) const { return apply_badnet(img, p); }
        Image operator()(const BlendParams& p) const { return apply_blend(img, p); }
        Image operator()(const WaNetParams& p) const { return apply_wanet(img, p); }
        Image operator()(const RefoolParams& p) const { return apply_refool(img, p); }
        Image operator()(const ColorParams& p) const { return apply_color(img, p); }
    };
    return std::visit(Visitor{img}, spec);
}

PixelMask trigger_footprint(const VisualTriggerSpec& spec, int w, int h) {
    if (const auto* p = std::get_if<BadNetParams>(&spec)) {
        PixelMask mask(w, h, false);
        const PatchRect r = badnet_rect(*p, w, h);
        for (int y = 0; y < r.side; ++y)
            for (int x = 0; x < r.side; ++x) mask.set(r.x0 + x, r.y0 + y, true);
        return mask;
    }
    return PixelMask(w, h, true);
}

Image blend_pattern(std::uint64_t seed, int w, int h) {
    Rng rng(seed);
    Image img(w, h);
    for (float& v : img.raw()) v = rng.uniform_f(0.0f, 1.0f);
    return img;
}

Image reflection_pattern(std::uint64_t seed, int w, int h) {
    Rng rng(seed);
    Image img = Image::filled(w, h, Rgb{0.15f, 0.15f, 0.15f});
    const int blobs = 4;
    const float base = static_cast<float>(std::min(w, h));
    for (int b = 0; b < blobs; ++b) {
        const float cx = rng.uniform_f(0.0f, static_cast<float>(w - 1));
        const float cy = rng.uniform_f(0.0f, static_cast<float>(h - 1));
        const float radius = rng.uniform_f(0.15f, 0.30f) * base;
        const float gain = rng.uniform_f(0.5f, 0.9f);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float dx = static_cast<float>(x) - cx;
                const float dy = static_cast<float>(y) - cy;
                const float fall = std::exp(-(dx * dx + dy * dy) / (radius * radius));
                for (int c = 0; c < 3; ++c) img.set(x, y, c, img.at(x, y, c) + gain * fall);
            }
        }
    }
    return img;
}

Image box_blur(const Image& img, int radius) {
    if (radius <= 0) return img;
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double acc[3] = {0.0, 0.0, 0.0};
            int n = 0;
            for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = std::clamp(y + dy, 0, img.height() - 1);
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = std::clamp(x + dx, 0, img.width() - 1);
                    for (int c = 0; c < 3; ++c) acc[c] += img.at(xx, yy, c);
                    ++n;
                }
            }
            for (int c = 0; c < 3; ++c) out.set(x, y, c, static_cast<float>(acc[c] / n));
        }
    }
    return out;
}

WarpField make_warp_field(const WaNetParams& p, int w, int h) {
    Rng rng(p.seed);
    const int k = std::max(1, p.grid_k);
    std::vector<float> gx(static_cast<std::size_t>(k) * k);
    std::vector<float> gy(static_cast<std::size_t>(k) * k);
    for (std::size_t i = 0; i < gx.size(); ++i) {
        gx[i] = rng.uniform_f(-1.0f, 1.0f) * p.strength;
        gy[i] = rng.uniform_f(-1.0f, 1.0f) * p.strength;
    }

    WarpField field;
    field.width = w;
    field.height = h;
    field.dx.assign(static_cast<std::size_t>(w) * h, 0.0f);
    field.dy.assign(static_cast<std::size_t>(w) * h, 0.0f);

    auto grid_at = [&](const std::vector<float>& g, int i, int j) {
        return g[static_cast<std::size_t>(j) * k + i];
    };
    for (int y = 0; y < h; ++y) {
        const float v = (h > 1 && k > 1) ? static_cast<float>(y) * (k - 1) / static_cast<float>(h - 1) : 0.0f;
        const int j0 = std::min(static_cast<int>(v), k - 2 < 0 ? 0 : k - 2);
        const float tv = (k > 1) ? v - static_cast<float>(j0) : 0.0f;
        const int j1 = std::min(j0 + 1, k - 1);
        for (int x = 0; x < w; ++x) {
            const float u = (w > 1 && k > 1) ? static_cast<float>(x) * (k - 1) / static_cast<float>(w - 1) : 0.0f;
            const int i0 = std::min(static_cast<int>(u), k - 2 < 0 ? 0 : k - 2);
            const float tu = (k > 1) ? u - static_cast<float>(i0) : 0.0f;
            const int i1 = std::min(i0 + 1, k - 1);
            const std::size_t out_i = static_cast<std::size_t>(y) * w + x;
            const float ax = grid_at(gx, i0, j0) * (1.0f - tu) + grid_at(gx, i1, j0) * tu;
            const float bx = grid_at(gx, i0, j1) * (1.0f - tu) + grid_at(gx, i1, j1) * tu;
            field.dx[out_i] = ax * (1.0f - tv) + bx * tv;
            const float ay = grid_at(gy, i0, j0) * (1.0f - tu) + grid_at(gy, i1, j0) * tu;
            const float by = grid_at(gy, i0, j1) * (1.0f - tu) + grid_at(gy, i1, j1) * tu;
            field.dy[out_i] = ay * (1.0f - tv) + by * tv;
        }
    }
    return field;
}

}  // namespace editlab
