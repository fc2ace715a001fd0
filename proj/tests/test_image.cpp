#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "editlab/image.hpp"
#include "editlab/rng.hpp"

using namespace editlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path p = fs::temp_directory_path() / "editlab_test_image";
    fs::create_directories(p);
    return p;
}

Image random_image(int w, int h, Rng& rng) {
    Image img(w, h);
    for (float& v : img.raw()) v = rng.uniform_f(0.0f, 1.0f);
    return img;
}

}  // namespace

TEST_CASE("mse of an image with itself is zero") {
    Rng rng(42);
    const Image img = random_image(8, 6, rng);
    CHECK(mse(img, img) == 0.0);
}

TEST_CASE("mse of all-zeros vs all-ones is one") {
    const Image a(2, 2);
    const Image b = Image::filled(2, 2, Rgb{1.0f, 1.0f, 1.0f});
    CHECK(mse(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mse averages over every channel of every pixel") {
    // One channel differing by 0.6 among 2*2*3 = 12 elements: 0.36 / 12.
    const Image a(2, 2);
    Image b(2, 2);
    b.set(0, 0, 0, 0.6f);
    CHECK(mse(a, b) == doctest::Approx(0.03).epsilon(1e-6));
}

TEST_CASE("mse is symmetric") {
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        const Image a = random_image(5, 4, rng);
        const Image b = random_image(5, 4, rng);
        CHECK(mse(a, b) == mse(b, a));
    }
}

TEST_CASE("mse rejects dimension mismatch") {
    const Image a(2, 2);
    const Image b(3, 2);
    CHECK_THROWS_AS(mse(a, b), std::invalid_argument);
}

TEST_CASE("masked mse splits a known image cleanly") {
    // 2x1 image; left pixel differs by 0.3 on one channel, right by 0.9.
    Image a(2, 1);
    Image b(2, 1);
    b.set(0, 0, 0, 0.3f);
    b.set(1, 0, 0, 0.9f);
    PixelMask mask(2, 1);
    mask.set(0, 0, true);
    CHECK(masked_mse(a, b, mask, true) == doctest::Approx(0.09 / 3.0).epsilon(1e-6));
    CHECK(masked_mse(a, b, mask, false) == doctest::Approx(0.81 / 3.0).epsilon(1e-6));
}

TEST_CASE("masked mse throws when the selected region is empty") {
    const Image a(2, 2);
    const Image b(2, 2);
    const PixelMask none(2, 2, false);
    CHECK_THROWS_AS(masked_mse(a, b, none, true), std::invalid_argument);
    const PixelMask all(2, 2, true);
    CHECK_THROWS_AS(masked_mse(a, b, all, false), std::invalid_argument);
}

TEST_CASE("masked inside and outside partition the full mse") {
    Rng rng(11);
    const Image a = random_image(6, 6, rng);
    const Image b = random_image(6, 6, rng);
    PixelMask mask(6, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) mask.set(x, y, rng.uniform() < 0.5);
    if (mask.count() == 0 || mask.count() == 36) return;
    const double inside = masked_mse(a, b, mask, true);
    const double outside = masked_mse(a, b, mask, false);
    const double n_in = static_cast<double>(mask.count());
    const double n_out = 36.0 - n_in;
    const double whole = (inside * n_in + outside * n_out) / 36.0;
    CHECK(whole == doctest::Approx(mse(a, b)).epsilon(1e-9));
}

TEST_CASE("grayscale leaves white unchanged and maps pure red to its luma") {
    const Image white = Image::filled(2, 2, Rgb{1.0f, 1.0f, 1.0f});
    CHECK(grayscale(white) == white);

    const Image red = Image::filled(2, 2, Rgb{1.0f, 0.0f, 0.0f});
    const Image g = grayscale(red);
    CHECK(g.at(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-6));
    CHECK(g.at(0, 0, 1) == g.at(0, 0, 0));
    CHECK(g.at(0, 0, 2) == g.at(0, 0, 0));
}

TEST_CASE("grayscale is exactly idempotent") {
    Rng rng(3);
    const Image img = random_image(9, 9, rng);
    const Image once = grayscale(img);
    const Image twice = grayscale(once);
    CHECK(once == twice);
}

TEST_CASE("ppm round trip stays within one quantization step") {
    Rng rng(5);
    const Image img = random_image(16, 16, rng);
    const fs::path p = temp_dir() / "roundtrip.ppm";
    save_ppm(img, p);
    const Image back = load_ppm(p);
    REQUIRE(back.same_dims(img));
    float worst = 0.0f;
    for (std::size_t i = 0; i < img.data().size(); ++i)
        worst = std::max(worst, std::abs(img.data()[i] - back.data()[i]));
    CHECK(worst <= 1.0f / 255.0f + 1e-7f);
}

TEST_CASE("ppm byte 255 maps to channel value 1.0") {
    const fs::path p = temp_dir() / "red.ppm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "P6\n1 1\n255\n";
        const unsigned char px[3] = {255, 0, 0};
        f.write(reinterpret_cast<const char*>(px), 3);
    }
    const Image img = load_ppm(p);
    const Rgb c = img.rgb(0, 0);
    CHECK(c.r == 1.0f);
    CHECK(c.g == 0.0f);
    CHECK(c.b == 0.0f);
}

TEST_CASE("ppm save emits the exact header and payload bytes") {
    Image img(2, 1);
    img.set(0, 0, Rgb{1.0f, 0.0f, 0.0f});
    img.set(1, 0, Rgb{0.0f, 0.5f, 1.0f});
    const fs::path p = temp_dir() / "exact.ppm";
    save_ppm(img, p);
    std::ifstream f(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string expect = std::string("P6\n2 1\n255\n") +
                               '\xff' + '\x00' + '\x00' +
                               '\x00' + '\x80' + '\xff';
    CHECK(bytes == expect);
}

TEST_CASE("truncated ppm payload is rejected with a clear error") {
    const fs::path p = temp_dir() / "truncated.ppm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "P6\n2 2\n255\n";
        const unsigned char px[5] = {1, 2, 3, 4, 5};
        f.write(reinterpret_cast<const char*>(px), 5);
    }
    CHECK_THROWS_WITH_AS(load_ppm(p), doctest::Contains("truncated pixel payload"), std::runtime_error);
}

TEST_CASE("ppm with a wrong magic number is rejected") {
    const fs::path p = temp_dir() / "magic.ppm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "P5\n1 1\n255\n";
        f.put('\x00');
    }
    CHECK_THROWS_WITH_AS(load_ppm(p), doctest::Contains("bad magic"), std::runtime_error);
}

TEST_CASE("ppm with an unsupported maxval is rejected") {
    const fs::path p = temp_dir() / "maxval.ppm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "P6\n1 1\n65535\n";
        for (int i = 0; i < 6; ++i) f.put('\x00');
    }
    CHECK_THROWS_WITH_AS(load_ppm(p), doctest::Contains("maxval"), std::runtime_error);
}

TEST_CASE("mask ppm round trip is exact") {
    Rng rng(9);
    PixelMask mask(7, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) mask.set(x, y, rng.uniform() < 0.4);
    const fs::path p = temp_dir() / "mask.ppm";
    save_mask_ppm(mask, p);
    const PixelMask back = load_mask_ppm(p);
    REQUIRE(back.width == mask.width);
    REQUIRE(back.height == mask.height);
    CHECK(back.on == mask.on);
}

TEST_CASE("mask complement flips every pixel and counts add up") {
    PixelMask mask(4, 4);
    mask.set(1, 2, true);
    mask.set(3, 0, true);
    const PixelMask comp = mask.complement();
    CHECK(mask.count() == 2);
    CHECK(comp.count() == 14);
    CHECK(comp.at(1, 2) == false);
    CHECK(comp.at(0, 0) == true);
}

TEST_CASE("image writes clamp out-of-range values") {
    Image img(1, 1);
    img.set(0, 0, Rgb{-0.5f, 1.5f, 0.25f});
    const Rgb c = img.rgb(0, 0);
    CHECK(c.r == 0.0f);
    CHECK(c.g == 1.0f);
    CHECK(c.b == 0.25f);
}

TEST_CASE("rng streams are deterministic and forks are decorrelated") {
    Rng a(123);
    Rng b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(123);
    Rng d(124);
    int same = 0;
    for (int i = 0; i < 100; ++i) same += (c.next_u64() == d.next_u64()) ? 1 : 0;
    CHECK(same == 0);
}

TEST_CASE("rng uniform_int is unbiased enough over a small modulus") {
    Rng rng(2024);
    int counts[5] = {0, 0, 0, 0, 0};
    const int n = 50000;
    for (int i = 0; i < n; ++i) counts[rng.uniform_int(5)]++;
    for (int k = 0; k < 5; ++k) {
        CHECK(counts[k] > n / 5 - 600);
        CHECK(counts[k] < n / 5 + 600);
    }
}

TEST_CASE("rng normal has roughly unit variance") {
    Rng rng(77);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}
