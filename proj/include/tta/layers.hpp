#pragma once

#include <vector>

#include "tta/ops.hpp"
#include "tta/rng.hpp"
#include "tta/tensor.hpp"

namespace tta {

enum class Activation { ELU, None };

// Convolution with a learned per-pixel gate: act(conv_f(x)) * sigmoid(conv_g(x)).
struct GatedConvLayer {
    Tensor feature_weight;  // [C_out, C_in, k, k]
    Tensor feature_bias;    // [C_out]
    Tensor gate_weight;     // same shape as feature_weight
    Tensor gate_bias;
    int stride = 1;
    int padding = 0;
    int dilation = 1;
    Activation activation = Activation::ELU;
};

// Fan-in scaled normal init: gain sqrt(2) on the feature path, 1 on the gate.
GatedConvLayer make_gated_conv(int c_in, int c_out, int k, int stride, int padding, int dilation,
                               Activation act, Rng& rng);

Tensor gated_conv(const GatedConvLayer& layer, const Tensor& x);

// Sequential stack of shape-preserving gated convs (stride 1, padding chosen so
// the spatial size is unchanged). Throws ContractError if a layer would resize.
Tensor dilated_block(const Tensor& x, const std::vector<GatedConvLayer>& layers);

std::vector<GatedConvLayer> make_dilated_block(int channels, const std::vector<int>& dilations,
                                               Rng& rng);

// Convolution whose weight is divided by a power-iteration estimate of the top
// singular value of the [C_out, C_in*k*k] reshape. Leaky-ReLU(0.2) follows.
struct SpectralConvLayer {
    Tensor weight;  // [C_out, C_in, k, k]
    Tensor bias;    // [C_out]
    Tensor u;       // [C_out], persistent power-iteration vector, unit norm
    int stride = 2;
    int padding = 2;
};

SpectralConvLayer make_spectral_conv(int c_in, int c_out, int k, int stride, int padding,
                                     Rng& rng);

// Runs `steps` power-iteration updates of layer.u against the current weight.
void power_iterate(SpectralConvLayer& layer, int steps);

// Current top-singular-value estimate from the stored u (no state change).
double spectral_sigma(const SpectralConvLayer& layer);

// train_mode=true advances u by one power-iteration step before normalizing.
Tensor spectral_conv(SpectralConvLayer& layer, const Tensor& x, bool train_mode);

// Six stride-2 spectral convs, kernel 5, channels 64,128,256,256,256,256.
// Input is expected to be image and mask stacked on channels.
std::vector<SpectralConvLayer> make_patch_discriminator(int in_channels, Rng& rng);

// Score map with no global pooling; each spatial cell scores one receptive patch.
Tensor patch_discriminator(const Tensor& x, std::vector<SpectralConvLayer>& layers,
                           bool train_mode);

}  // namespace tta
