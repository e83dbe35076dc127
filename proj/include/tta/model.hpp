#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tta/attention.hpp"
#include "tta/layers.hpp"
#include "tta/losses.hpp"
#include "tta/rng.hpp"

namespace tta {

// Which attention produces the texture map at each decoder level.
enum class AttentionKind { ArgmaxSwap, WeightedSum };

// Per-decoder-level attention switch; disabling it turns the level into a
// plain upsample step (the texture-transfer ablation).
struct LevelSpec {
    bool attention = true;
    AttentionConfig config{};
};

struct ModelConfig {
    int levels = 3;          // stride-2 encoder steps; decoder mirrors them
    int base_channels = 32;  // channels after the stem, doubling per level
    int input_size = 64;     // square inputs; 256 matches the photo-scale preset
    std::vector<int> dilations{2, 4, 8, 16};
    std::vector<LevelSpec> attention{};  // empty: default spec at every level
    AttentionKind attention_kind = AttentionKind::ArgmaxSwap;
    SynthesisMode synthesis = SynthesisMode::Full;
    float weighted_temperature = 1.0f;  // only read when attention_kind is WeightedSum
    LossWeights loss_weights{};
    std::uint64_t seed = 1;

    // 1-based decoder level -> its attention spec (default when the list is empty).
    LevelSpec level(int l) const;
};

// Collects every violation into a single ConfigError.
void validate(const ModelConfig& cfg);

struct Generator {
    ModelConfig cfg;
    GatedConvLayer stem;                     // image+mask (4ch) -> base, 5x5
    std::vector<GatedConvLayer> encoder;     // level l: base*2^(l-1) -> base*2^l, stride 2
    std::vector<GatedConvLayer> bottleneck;  // dilated chain at base*2^levels
    std::vector<Tensor> synth_weight;        // level l: [C_l, 2*C_l, 3, 3]
    std::vector<Tensor> synth_bias;          // level l: [C_l]
    std::vector<GatedConvLayer> decoder;     // level l: C_l -> C_l/2 after upsample
    Tensor out_weight;                       // [3, base, 3, 3]
    Tensor out_bias;                         // [3]
};

using Discriminator = std::vector<SpectralConvLayer>;

struct Model {
    Generator generator;
    Discriminator discriminator;
};

// Deterministic from cfg.seed; the discriminator draws from a stream forked
// off the same seed so generator and discriminator never share draws.
Model build(const ModelConfig& cfg);

// Stable parameter naming (generator/<layer>/<role>/...) shared by the
// checkpoint format, the optimizer state, and tape watching.
struct ParamRef {
    std::string name;
    Tensor* tensor;
};
std::vector<ParamRef> generator_params(Generator& g);
std::vector<ParamRef> discriminator_params(Discriminator& d);
std::int64_t param_count(const std::vector<ParamRef>& refs);

struct ForwardResult {
    Tensor pred;                      // 3-channel output in [-1, 1]
    Tensor comp;                      // pred inside the hole, z outside, exactly
    std::vector<bool> used_fallback;  // [levels]: attention fallback fired there
};

// z is the incomplete image (exactly zero inside the hole), m the binary mask
// with 1 marking the hole. Both contracts are enforced.
ForwardResult forward(const Generator& g, const Tensor& z, const Tensor& m);

// Validity mask for a decoder level: 1 where every covered full-resolution
// pixel is known, i.e. a min-pool of (1 - m) by factor. Plain data, no tape.
Tensor downsample_valid(const Tensor& m, int factor);

}  // namespace tta
