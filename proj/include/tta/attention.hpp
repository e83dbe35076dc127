#pragma once

#include "tta/tensor.hpp"

namespace tta {

enum class AttentionFallback { UseAll, NearestValid };

struct AttentionConfig {
    int swap_patch = 5;    // full-resolution patch size for texture assembly
    int sim_patch = 3;     // patch size for the similarity computation
    int stride = 1;        // window stride for both unfolds
    int downsample = 2;    // similarity runs at 1/downsample resolution
    float valid_threshold = 1.0f;  // required valid fraction for candidates
    AttentionFallback fallback = AttentionFallback::UseAll;
};

// Throws ConfigError on invalid combinations. Cross-resolution matching
// (downsample > 1) is defined for unit stride only.
void validate(const AttentionConfig& cfg);

struct SimilarityMatrix {
    // [N, L_q, L_p] cosine similarities between query and candidate patches
    // at the downsampled resolution. Candidate columns that failed the
    // validity filter hold the sentinel -2 (outside the cosine range).
    Tensor s;
    bool used_fallback = false;
};

struct AttentionResult {
    IntTensor index_map;  // [N, L_full]: chosen full-resolution candidate per query
    Tensor ratio_map;     // [N, 1, H, W]: winning similarity per pixel, in [-1, 1]
    Tensor texture_map;   // [N, C, H, W]: reassembled candidate patches
    bool used_fallback = false;
};

// Cosine similarity of normalized feature patches, computed at the
// downsampled resolution. valid_mask is binary at p's resolution with 1 on
// known pixels; candidate patches whose valid fraction (over in-bounds
// pixels) falls below cfg.valid_threshold are masked out. Zero-norm patches
// normalize to zero rows, so their similarities are 0.
SimilarityMatrix relevance_embedding(const Tensor& q, const Tensor& p, const Tensor& valid_mask,
                                     const AttentionConfig& cfg);

// Hard patch selection: per query, the argmax candidate (lowest index on
// ties) is gathered at full resolution and folded with overlap averaging.
// Winner indices are constants for differentiation; gradients reach p through
// the gather and q/p through the winning similarity value.
AttentionResult feature_swap(const Tensor& p, const SimilarityMatrix& sim,
                             const AttentionConfig& cfg);

// Fused equivalent of feature_swap(relevance_embedding(...)) that skips the
// taped L_q x L_p similarity product: selection runs on raw data and only the
// winning pairs enter the graph. Bitwise-identical index and texture maps;
// the ratio map agrees to float rounding.
AttentionResult texture_attention(const Tensor& q, const Tensor& p, const Tensor& valid_mask,
                                  const AttentionConfig& cfg);

// Soft baseline: every query takes a softmax-weighted sum of candidate
// patches instead of the argmax patch. Masked candidates are excluded by a
// large additive penalty before the softmax.
Tensor weighted_sum_attention(const Tensor& q, const Tensor& p, const Tensor& valid_mask,
                              const AttentionConfig& cfg, float temperature);

// How the reassembled texture joins the decoder feature. Full is the default
// pipeline; the other two are ablation variants.
enum class SynthesisMode {
    Full,             // F_fus = F + conv(concat(F,T)) * R, then F_fus / (1 + R)
    NoNormalization,  // stop at F_fus (drops the color-level correction)
    ConcatOnly,       // conv(concat(F,T)) alone: plain skip fusion, R unused
};

// F_fus = F + conv3x3(concat(F, T)) * R, then F_out = F_fus / (1 + R).
// fusion_weight is [C, 2C, 3, 3]. R is single-channel, broadcast over C, and
// must stay above -1 when the normalizing division runs.
Tensor synthesize(const Tensor& f, const Tensor& t, const Tensor& r, const Tensor& fusion_weight,
                  const Tensor& fusion_bias, SynthesisMode mode = SynthesisMode::Full);

}  // namespace tta
