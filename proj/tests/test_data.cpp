#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "tta/data.hpp"
#include "tta/errors.hpp"

using namespace tta;

namespace {

std::uint64_t fnv1a(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ull;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
    for (std::int64_t i = 0; i < t.numel() * 4; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) return false;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        if (a.at(i) != b.at(i)) return false;
    return true;
}

std::string tmp_path(const std::string& name) { return "/tmp/tta_data_test_" + name; }

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("masks are binary, deterministic, and sized as requested") {
    MaskSpec spec;
    spec.seed = 42;
    const Tensor a = generate_mask(spec);
    const Tensor b = generate_mask(spec);
    CHECK(a.shape == Shape{1, 1, 64, 64});
    CHECK(bitwise_equal(a, b));
    for (std::int64_t i = 0; i < a.numel(); ++i)
        CHECK((a.at(i) == 0.0f || a.at(i) == 1.0f));

    spec.seed = 43;
    CHECK(!bitwise_equal(a, generate_mask(spec)));
}

TEST_CASE("mask ratios stay inside the band across 1000 seeds with few redraws") {
    MaskSpec spec;
    long total_rejected = 0;
    std::set<std::uint64_t> hashes;
    for (int seed = 0; seed < 1000; ++seed) {
        spec.seed = static_cast<std::uint64_t>(seed);
        int rejected = 0;
        const Tensor m = generate_mask(spec, &rejected);
        const double r = mask_ratio(m);
        CHECK(r >= spec.min_ratio);
        CHECK(r <= spec.max_ratio);
        total_rejected += rejected;
        hashes.insert(fnv1a(m));
    }
    // defaults were chosen so the band is hit with at most ~3 redraws on average
    CHECK(total_rejected <= 3000);
    // no two seeds may produce the same mask
    CHECK(hashes.size() == 1000);
}

TEST_CASE("an image-wide brush saturates the ratio against the upper bound") {
    MaskSpec spec;
    spec.strokes = 1;
    spec.max_vertices = 1;
    spec.min_width = spec.max_width = 64.0f;
    double sum = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
        spec.seed = static_cast<std::uint64_t>(seed);
        const double r = mask_ratio(generate_mask(spec));
        CHECK(r >= spec.min_ratio);
        CHECK(r <= spec.max_ratio);
        sum += r;
    }
    CHECK(sum / 20.0 > 0.3);  // rejection clips the fat brush into the band's top
}

TEST_CASE("unreachable ratio band raises a parameter error naming the strokes") {
    MaskSpec spec;
    spec.strokes = 1;
    spec.max_vertices = 1;
    spec.min_width = spec.max_width = 0.5f;  // ~a dozen pixels at most
    spec.min_ratio = 0.39f;
    spec.max_ratio = 0.40f;
    try {
        generate_mask(spec);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("stroke") != std::string::npos);
    }
}

TEST_CASE("mask spec validation") {
    MaskSpec spec;
    spec.min_ratio = 0.5f;
    spec.max_ratio = 0.4f;
    CHECK_THROWS_AS(generate_mask(spec), ConfigError);
    spec = MaskSpec{};
    spec.strokes = 0;
    CHECK_THROWS_AS(generate_mask(spec), ConfigError);
    spec = MaskSpec{};
    spec.min_width = 0.0f;
    CHECK_THROWS_AS(generate_mask(spec), ConfigError);
    spec = MaskSpec{};
    spec.size = 0;
    CHECK_THROWS_AS(generate_mask(spec), ConfigError);
}

TEST_CASE("checker with period two alternates exactly between -1 and 1") {
    TextureSpec spec;
    spec.family = TextureFamily::Checker;
    spec.min_period = spec.max_period = 2.0f;
    spec.size = 16;
    spec.seed = 5;
    const Tensor t = generate_texture(spec);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                const float v = t.at((c * 16 + y) * 16 + x);
                CHECK((v == 1.0f || v == -1.0f));
                if (x + 1 < 16) CHECK(v == -t.at((c * 16 + y) * 16 + x + 1));
                if (y + 1 < 16) CHECK(v == -t.at((c * 16 + y + 1) * 16 + x));
                CHECK(v == t.at((0 * 16 + y) * 16 + x));  // channels share the pattern
            }
}

TEST_CASE("stripes at angle zero have constant rows") {
    TextureSpec spec;
    spec.family = TextureFamily::Stripes;
    spec.min_angle = spec.max_angle = 0.0f;
    spec.size = 32;
    spec.seed = 9;
    const Tensor t = generate_texture(spec);
    bool varies = false;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y) {
            const float first = t.at((c * 32 + y) * 32);
            for (int x = 1; x < 32; ++x) CHECK(t.at((c * 32 + y) * 32 + x) == first);
            if (y > 0 && first != t.at((c * 32 + y - 1) * 32)) varies = true;
        }
    CHECK(varies);  // constant rows, but not a constant image
}

TEST_CASE("all texture families are bounded, deterministic, and seed-sensitive") {
    for (TextureFamily fam : {TextureFamily::Stripes, TextureFamily::Checker,
                              TextureFamily::Blobs, TextureFamily::GradientNoise}) {
        TextureSpec spec;
        spec.family = fam;
        spec.size = 32;
        std::set<std::uint64_t> hashes;
        for (int seed = 0; seed < 250; ++seed) {
            spec.seed = static_cast<std::uint64_t>(seed);
            const Tensor t = generate_texture(spec);
            REQUIRE(t.shape == Shape{1, 3, 32, 32});
            for (std::int64_t i = 0; i < t.numel(); ++i) {
                REQUIRE(t.at(i) >= -1.0f);
                REQUIRE(t.at(i) <= 1.0f);
            }
            hashes.insert(fnv1a(t));
        }
        CHECK(hashes.size() == 250);
        spec.seed = 7;
        CHECK(bitwise_equal(generate_texture(spec), generate_texture(spec)));
    }
}

TEST_CASE("stripes and checker are stationary across image halves") {
    for (TextureFamily fam : {TextureFamily::Stripes, TextureFamily::Checker}) {
        TextureSpec spec;
        spec.family = fam;
        spec.size = 64;
        for (int seed = 0; seed < 20; ++seed) {
            spec.seed = static_cast<std::uint64_t>(seed);
            const Tensor t = generate_texture(spec);
            double left = 0.0, right = 0.0;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 64; ++y)
                    for (int x = 0; x < 64; ++x)
                        (x < 32 ? left : right) += t.at((c * 64 + y) * 64 + x);
            left /= 3 * 64 * 32;
            right /= 3 * 64 * 32;
            CHECK(std::fabs(left - right) < 0.1);
        }
    }
}

TEST_CASE("texture family names round-trip and reject unknowns") {
    for (TextureFamily fam : {TextureFamily::Stripes, TextureFamily::Checker,
                              TextureFamily::Blobs, TextureFamily::GradientNoise})
        CHECK(parse_family(family_name(fam)) == fam);
    CHECK_THROWS_AS(parse_family("plaid"), ConfigError);
}

TEST_CASE("image save/load round-trips every byte value exactly") {
    Tensor t({1, 3, 16, 16});
    float* d = t.mutable_data();
    for (std::int64_t i = 0; i < t.numel(); ++i)
        d[i] = static_cast<float>((i % 256) * (2.0 / 255.0) - 1.0);

    const std::string path = tmp_path("roundtrip.ppm");
    save_image(path, t);
    const Tensor back = load_image(path);
    CHECK(bitwise_equal(t, back));

    // saving the loaded tensor reproduces the file byte for byte
    const std::string path2 = tmp_path("roundtrip2.ppm");
    save_image(path2, back);
    CHECK(read_bytes(path) == read_bytes(path2));
}

TEST_CASE("image quantization clamps and rounds halves away from zero") {
    Tensor t({1, 1, 1, 5}, std::vector<float>{1.5f, -2.0f, 0.0f, 1.0f, -1.0f});
    const std::string path = tmp_path("quant.pgm");
    save_image(path, t);
    const std::string bytes = read_bytes(path);
    const std::string pix = bytes.substr(bytes.size() - 5);
    CHECK(static_cast<unsigned char>(pix[0]) == 255);  // clamped high
    CHECK(static_cast<unsigned char>(pix[1]) == 0);    // clamped low
    CHECK(static_cast<unsigned char>(pix[2]) == 128);  // 127.5 rounds up
    CHECK(static_cast<unsigned char>(pix[3]) == 255);
    CHECK(static_cast<unsigned char>(pix[4]) == 0);
}

TEST_CASE("an all-black file loads as an all -1 tensor") {
    const std::string path = tmp_path("black.ppm");
    write_bytes(path, std::string("P6\n4 3\n255\n") + std::string(4 * 3 * 3, '\0'));
    const Tensor t = load_image(path);
    CHECK(t.shape == Shape{1, 3, 3, 4});
    for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(t.at(i) == -1.0f);
}

TEST_CASE("saved files match a reference encoder byte for byte") {
    // Fixture bytes produced once by an independent encoder (Pillow 12.2):
    // 2x2 RGB with pixels (255,0,0), (0,255,0) / (0,0,255), (128,64,32).
    const std::string ppm_fixture =
        std::string("P6\n2 2\n255\n") +
        std::string("\xff\x00\x00\x00\xff\x00\x00\x00\xff\x80\x40\x20", 12);
    Tensor img({1, 3, 2, 2});
    float* d = img.mutable_data();
    const int bytes_by_pixel[4][3] = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {128, 64, 32}};
    for (int p = 0; p < 4; ++p)
        for (int c = 0; c < 3; ++c)
            d[c * 4 + p] = static_cast<float>(bytes_by_pixel[p][c] * (2.0 / 255.0) - 1.0);
    const std::string path = tmp_path("fixture.ppm");
    save_image(path, img);
    CHECK(read_bytes(path) == ppm_fixture);
    CHECK(bitwise_equal(load_image(path), img));

    // Same for the single-channel mask format (255 = hole).
    const std::string pgm_fixture =
        std::string("P5\n2 2\n255\n") + std::string("\xff\x00\x00\xff", 4);
    Tensor m({1, 1, 2, 2}, std::vector<float>{1.0f, 0.0f, 0.0f, 1.0f});
    const std::string mpath = tmp_path("fixture.pgm");
    save_mask(mpath, m);
    CHECK(read_bytes(mpath) == pgm_fixture);
    CHECK(bitwise_equal(load_mask(mpath), m));
}

TEST_CASE("header parsing tolerates comments and rejects malformed files") {
    const std::string ok = tmp_path("comment.pgm");
    write_bytes(ok, std::string("P5\n# a comment\n2 2\n# another\n255\n") +
                        std::string("\x00\x40\x80\xff", 4));
    const Tensor t = load_image(ok);
    CHECK(t.shape == Shape{1, 1, 2, 2});
    CHECK(t.at(0) == -1.0f);

    const std::string bad_magic = tmp_path("bad_magic.ppm");
    write_bytes(bad_magic, "P3\n2 2\n255\n0 0 0");
    CHECK_THROWS_AS(load_image(bad_magic), IoError);

    const std::string deep = tmp_path("deep.ppm");
    write_bytes(deep, std::string("P6\n2 2\n65535\n") + std::string(24, '\0'));
    CHECK_THROWS_AS(load_image(deep), IoError);

    const std::string truncated = tmp_path("trunc.ppm");
    write_bytes(truncated, std::string("P6\n2 2\n255\n") + std::string(5, '\0'));
    CHECK_THROWS_AS(load_image(truncated), IoError);

    try {
        load_image(tmp_path("does_not_exist.ppm"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("does_not_exist") != std::string::npos);
    }
}

TEST_CASE("non-square images round-trip through both formats") {
    Tensor rgb({1, 3, 5, 7});
    float* d = rgb.mutable_data();
    for (std::int64_t i = 0; i < rgb.numel(); ++i)
        d[i] = static_cast<float>(((i * 37) % 256) * (2.0 / 255.0) - 1.0);
    const std::string p1 = tmp_path("rect.ppm");
    save_image(p1, rgb);
    CHECK(bitwise_equal(load_image(p1), rgb));

    Tensor gray({1, 1, 4, 6});
    float* g = gray.mutable_data();
    for (std::int64_t i = 0; i < gray.numel(); ++i)
        g[i] = static_cast<float>(((i * 11) % 256) * (2.0 / 255.0) - 1.0);
    const std::string p2 = tmp_path("rect.pgm");
    save_image(p2, gray);
    CHECK(bitwise_equal(load_image(p2), gray));
}

TEST_CASE("mask files hold only 0 and 255 and reject anything else") {
    MaskSpec spec;
    spec.size = 16;
    spec.seed = 77;
    const Tensor m = generate_mask(spec);
    const std::string path = tmp_path("mask_io.pgm");
    save_mask(path, m);

    const std::string bytes = read_bytes(path);
    const std::string pix = bytes.substr(bytes.size() - 16 * 16);
    for (char c : pix) {
        const unsigned char b = static_cast<unsigned char>(c);
        CHECK((b == 0 || b == 255));
    }
    CHECK(bitwise_equal(load_mask(path), m));

    Tensor soft({1, 1, 2, 2}, std::vector<float>{0.0f, 0.5f, 1.0f, 1.0f});
    CHECK_THROWS_AS(save_mask(tmp_path("soft.pgm"), soft), ContractError);

    const std::string gray = tmp_path("gray.pgm");
    write_bytes(gray, std::string("P5\n2 2\n255\n") + std::string("\x00\x80\xff\xff", 4));
    CHECK_THROWS_AS(load_mask(gray), IoError);

    // an RGB file is not a mask
    const std::string rgb = tmp_path("rgbmask.ppm");
    write_bytes(rgb, std::string("P6\n1 1\n255\n") + std::string(3, '\xff'));
    CHECK_THROWS_AS(load_mask(rgb), IoError);
}

TEST_CASE("manifest save/load round-trips entries and reports bad lines") {
    std::vector<ManifestEntry> entries;
    entries.push_back({"img/tex one.ppm", 0, TextureFamily::Stripes});
    entries.push_back({"img/tex2.ppm", 18446744073709551615ull, TextureFamily::Checker});
    entries.push_back({"b.ppm", 7, TextureFamily::Blobs});
    entries.push_back({"g.ppm", 8, TextureFamily::GradientNoise});
    const std::string path = tmp_path("manifest.tsv");
    save_manifest(path, entries);
    const std::vector<ManifestEntry> back = load_manifest(path);
    REQUIRE(back.size() == entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(back[i].path == entries[i].path);
        CHECK(back[i].seed == entries[i].seed);
        CHECK(back[i].family == entries[i].family);
    }

    const std::string bad1 = tmp_path("manifest_bad1.tsv");
    write_bytes(bad1, "a.ppm\t3\tstripes\nb.ppm only\n");
    try {
        load_manifest(bad1);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    const std::string bad2 = tmp_path("manifest_bad2.tsv");
    write_bytes(bad2, "a.ppm\t-3\tstripes\n");
    CHECK_THROWS_AS(load_manifest(bad2), IoError);

    const std::string bad3 = tmp_path("manifest_bad3.tsv");
    write_bytes(bad3, "a.ppm\t3\tplaid\n");
    CHECK_THROWS_AS(load_manifest(bad3), IoError);

    const std::string empty_lines = tmp_path("manifest_empty.tsv");
    write_bytes(empty_lines, "\na.ppm\t3\tblobs\n\n");
    CHECK(load_manifest(empty_lines).size() == 1);
}
