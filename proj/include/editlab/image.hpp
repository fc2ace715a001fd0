#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace editlab {

struct Rgb {
    float r = 0.0f;
    float g = 0.0f;
    float b = 0.0f;
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

// H x W x 3 float image, row-major RGB, every channel in [0, 1]. Producers
// clamp on write; the 8-bit quantization happens only at the PPM boundary.
class Image {
public:
    Image() = default;
    Image(int width, int height) : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height * 3, 0.0f) {}

    static Image filled(int width, int height, Rgb c);

    int width() const { return width_; }
    int height() const { return height_; }
    static constexpr int channels() { return 3; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& raw() { return data_; }

    float at(int x, int y, int c) const { return data_[idx(x, y, c)]; }
    Rgb rgb(int x, int y) const {
        const std::size_t i = idx(x, y, 0);
        return Rgb{data_[i], data_[i + 1], data_[i + 2]};
    }

    // Writes clamp to [0, 1]; trigger blends and offsets are allowed to
    // overshoot and image semantics absorb that here.
    void set(int x, int y, Rgb c) {
        const std::size_t i = idx(x, y, 0);
        data_[i] = clamp01(c.r);
        data_[i + 1] = clamp01(c.g);
        data_[i + 2] = clamp01(c.b);
    }
    void set(int x, int y, int c, float v) { data_[idx(x, y, c)] = clamp01(v); }

    void clamp_all();

    bool same_dims(const Image& o) const { return width_ == o.width_ && height_ == o.height_; }
    bool operator==(const Image& o) const { return width_ == o.width_ && height_ == o.height_ && data_ == o.data_; }

private:
    std::size_t idx(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

// Boolean pixel mask, used for trigger footprints and edit regions.
struct PixelMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> on;

    PixelMask() = default;
    PixelMask(int w, int h, bool value = false) : width(w), height(h), on(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

    bool at(int x, int y) const { return on[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { on[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const;
    PixelMask complement() const;
};

// Mean squared error over all elements. Throws std::invalid_argument on
// dimension mismatch.
double mse(const Image& a, const Image& b);

// MSE restricted to mask pixels (all three channels of each masked pixel).
// Throws if the mask is empty (no selected pixels) or dims mismatch.
double masked_mse(const Image& a, const Image& b, const PixelMask& mask, bool inside);

// Luma 0.299 r + 0.587 g + 0.114 b replicated to all channels. Idempotent.
Image grayscale(const Image& img);

// Rounds every channel to the nearest 1/255 step, i.e. the exact value a
// PPM save/load cycle would produce. Rendered ground truth goes through
// this so on-disk and in-memory copies agree bit for bit.
Image quantized(const Image& img);

// Binary PPM (P6), maxval 255, no comments. Bit-exact bytes for a given
// image; load(save(img)) is within 1/255 per channel.
void save_ppm(const Image& img, const std::filesystem::path& path);
Image load_ppm(const std::filesystem::path& path);

// Masks ride along as PPM with 0/255 pixels.
void save_mask_ppm(const PixelMask& mask, const std::filesystem::path& path);
PixelMask load_mask_ppm(const std::filesystem::path& path);

}  // namespace editlab
