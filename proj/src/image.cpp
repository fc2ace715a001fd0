#include "editlab/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace editlab {

Image Image::filled(int width, int height, Rgb c) {
    Image img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) img.set(x, y, c);
    return img;
}

void Image::clamp_all() {
    for (float& v : data_) v = clamp01(v);
}

std::size_t PixelMask::count() const {
    std::size_t n = 0;
    for (std::uint8_t v : on) n += v ? 1 : 0;
    return n;
}

PixelMask PixelMask::complement() const {
    PixelMask out(width, height);
    for (std::size_t i = 0; i < on.size(); ++i) out.on[i] = on[i] ? 0 : 1;
    return out;
}

double mse(const Image& a, const Image& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("mse: dimension mismatch");
    const auto& da = a.data();
    const auto& db = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
        acc += d * d;
    }
    return da.empty() ? 0.0 : acc / static_cast<double>(da.size());
}

double masked_mse(const Image& a, const Image& b, const PixelMask& mask, bool inside) {
    if (!a.same_dims(b)) throw std::invalid_argument("masked_mse: dimension mismatch");
    if (a.width() != mask.width || a.height() != mask.height)
        throw std::invalid_argument("masked_mse: mask dimension mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (mask.at(x, y) != inside) continue;
            for (int c = 0; c < 3; ++c) {
                const double d = static_cast<double>(a.at(x, y, c)) - static_cast<double>(b.at(x, y, c));
                acc += d * d;
            }
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("masked_mse: empty region");
    return acc / static_cast<double>(n * 3);
}

Image grayscale(const Image& img) {
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb p = img.rgb(x, y);
            if (p.r == p.g && p.g == p.b) {
                out.set(x, y, p);
                continue;
            }
            const float l = static_cast<float>(0.299 * p.r + 0.587 * p.g + 0.114 * p.b);
            out.set(x, y, Rgb{l, l, l});
        }
    }
    return out;
}

Image quantized(const Image& img) {
    Image out(img.width(), img.height());
    auto& d = out.raw();
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = static_cast<float>(std::lround(static_cast<double>(clamp01(img.data()[i])) * 255.0)) / 255.0f;
    return out;
}

namespace {

std::uint8_t quantize(float v) {
    const long q = std::lround(static_cast<double>(clamp01(v)) * 255.0);
    return static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
}

[[noreturn]] void ppm_error(const std::filesystem::path& path, std::size_t offset, const std::string& what) {
    throw std::runtime_error("ppm: " + path.string() + ": " + what + " at byte " + std::to_string(offset));
}

}  // namespace

void save_ppm(const Image& img, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ppm: cannot open for writing: " + path.string());
    f << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<std::uint8_t> bytes;
    bytes.reserve(img.size());
    for (float v : img.data()) bytes.push_back(quantize(v));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("ppm: write failed: " + path.string());
}

Image load_ppm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ppm: cannot open: " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6') ppm_error(path, 0, "bad magic, expected P6");
    pos = 2;

    auto skip_ws = [&]() {
        while (pos < buf.size() && (buf[pos] == ' ' || buf[pos] == '\t' || buf[pos] == '\n' || buf[pos] == '\r')) ++pos;
    };
    auto read_int = [&](const char* field) {
        skip_ws();
        if (pos >= buf.size() || buf[pos] < '0' || buf[pos] > '9')
            ppm_error(path, pos, std::string("malformed header, expected ") + field);
        long v = 0;
        while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
            v = v * 10 + (buf[pos] - '0');
            if (v > 1000000) ppm_error(path, pos, std::string("unreasonable ") + field);
            ++pos;
        }
        return v;
    };

    const long w = read_int("width");
    const long h = read_int("height");
    const long maxval = read_int("maxval");
    if (maxval != 255) ppm_error(path, pos, "unsupported maxval (only 255)");
    if (pos >= buf.size()) ppm_error(path, pos, "truncated header");
    ++pos;  // the single whitespace byte after maxval

    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
    if (buf.size() - pos < need)
        ppm_error(path, buf.size(), "truncated pixel payload, expected " + std::to_string(need) + " bytes from byte " + std::to_string(pos));

    Image img(static_cast<int>(w), static_cast<int>(h));
    auto& data = img.raw();
    for (std::size_t i = 0; i < need; ++i)
        data[i] = static_cast<float>(static_cast<std::uint8_t>(buf[pos + i])) / 255.0f;
    return img;
}

void save_mask_ppm(const PixelMask& mask, const std::filesystem::path& path) {
    Image img(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            const float v = mask.at(x, y) ? 1.0f : 0.0f;
            img.set(x, y, Rgb{v, v, v});
        }
    save_ppm(img, path);
}

PixelMask load_mask_ppm(const std::filesystem::path& path) {
    const Image img = load_ppm(path);
    PixelMask mask(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) mask.set(x, y, img.at(x, y, 0) > 0.5f);
    return mask;
}

}  // namespace editlab
