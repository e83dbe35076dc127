#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tta/tensor.hpp"

namespace tta {

struct MaskSpec {
    int size = 64;
    float min_ratio = 0.10f;  // hole-area fraction bounds enforced by rejection
    float max_ratio = 0.40f;
    int strokes = 3;           // brush strokes per mask
    int max_vertices = 6;      // chain segments per stroke, sampled in [1, max]
    float min_width = 5.0f;    // brush diameter range, pixels
    float max_width = 13.0f;
    float angle_jitter = 1.2f;  // radians; heading change bound per segment
    std::uint64_t seed = 0;
};

// Free-form hole mask [1,1,size,size], 1 = hole. Brush strokes are random
// vertex chains drawn as thick capsules (segment + circular caps), redrawn
// until the hole ratio lands inside [min_ratio, max_ratio]. Deterministic
// from the seed; throws ConfigError after 100 rejected attempts with a hint
// to adjust the stroke settings. `rejected`, if given, receives the number
// of redraws the accepted mask needed.
Tensor generate_mask(const MaskSpec& spec, int* rejected = nullptr);

// Fraction of pixels equal to 1 in a binary mask.
double mask_ratio(const Tensor& m);

enum class TextureFamily { Stripes, Checker, Blobs, GradientNoise };

struct TextureSpec {
    int size = 64;
    TextureFamily family = TextureFamily::Stripes;
    float min_period = 4.0f;  // pattern wavelength / cell scale range, pixels
    float max_period = 16.0f;
    float min_angle = 0.0f;  // stripe direction range, radians
    float max_angle = 3.14159265f;
    int min_blobs = 4;
    int max_blobs = 12;
    std::uint64_t seed = 0;
};

// Stationary texture image [1,3,size,size] in [-1,1], deterministic from the
// seed. Stripes and checker are analytically exact; blobs and gradient noise
// come from seeded value-noise.
Tensor generate_texture(const TextureSpec& spec);

const char* family_name(TextureFamily family);
TextureFamily parse_family(const std::string& name);  // ConfigError on unknown

// 8-bit binary netpbm rasters: P6 (RGB) <-> [1,3,H,W], P5 (gray) <-> [1,1,H,W].
// Values map linearly between bytes [0,255] and floats [-1,1]; saving rounds
// half away from zero and clamps. save(load(f)) reproduces f byte-exactly.
Tensor load_image(const std::string& path);
void save_image(const std::string& path, const Tensor& img);

// Hole masks as P5 files holding only bytes {0, 255}, 255 = hole; tensors are
// binary [1,1,H,W] with 1 = hole. Any other byte or tensor value is an error.
Tensor load_mask(const std::string& path);
void save_mask(const std::string& path, const Tensor& m);

// Line-oriented dataset manifest: "<path>\t<seed>\t<family>" per line.
struct ManifestEntry {
    std::string path;
    std::uint64_t seed = 0;
    TextureFamily family = TextureFamily::Stripes;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

}  // namespace tta
