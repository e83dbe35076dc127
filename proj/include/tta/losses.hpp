#pragma once

#include <cstdint>
#include <vector>

#include "tta/ops.hpp"
#include "tta/tensor.hpp"

namespace tta {

// Objective weights. Defaults follow the reference configuration:
// reconstruction and adversarial at 1, perceptual at 0.1, style at 100.
struct LossWeights {
    float rec = 1.0f;
    float adv = 1.0f;
    float per = 0.1f;
    float style = 100.0f;
};

// All weights must be >= 0; throws ConfigError otherwise.
void validate(const LossWeights& w);

// Fixed random conv stack standing in for a pre-trained feature network.
// Five stride-2 stages (channels 8, 16, 32, 64, 64, kernel 3, ReLU); weights
// are drawn once from `seed` and never trained. Activations after each stage
// are the perceptual features.
struct PerceptualExtractor {
    std::vector<Tensor> weights;  // [C_out, C_in, 3, 3] per stage
    std::vector<Tensor> biases;   // zero, kept for the conv interface
    std::uint64_t seed = 0;
};

PerceptualExtractor make_perceptual_extractor(std::uint64_t seed);

// Activation maps of every stage, shallowest first.
std::vector<Tensor> perceptual_features(const PerceptualExtractor& e, const Tensor& img);

// Mean absolute difference over all elements.
Tensor rec_loss(const Tensor& gt, const Tensor& pred);

// Hinge adversarial losses over patch score maps:
//   generator:      -mean(D_fake)
//   discriminator:  mean(relu(1 - D_real)) + mean(relu(1 + D_fake))
Tensor adv_g_loss(const Tensor& d_fake);
Tensor adv_d_loss(const Tensor& d_real, const Tensor& d_fake);

// Sum over stages of (1 / stage volume) * L1 distance between the two
// images' activation maps, averaged over the batch.
Tensor perceptual_loss(const PerceptualExtractor& e, const Tensor& gt, const Tensor& pred);

// Per-sample channel Gram matrices: [N,C,H,W] -> [N,C,C], each sample's
// (flat . flat^T) / (C*H*W).
Tensor gram(const Tensor& phi);

// Sum over stages of the L1 distance between Gram matrices of the composite
// and predicted images, averaged over the batch.
Tensor style_loss(const PerceptualExtractor& e, const Tensor& comp, const Tensor& pred);

// weights.rec*l_rec + weights.adv*l_g + weights.per*l_per + weights.style*l_style.
Tensor total_loss(const LossWeights& weights, const Tensor& l_rec, const Tensor& l_g,
                  const Tensor& l_per, const Tensor& l_style);

}  // namespace tta
