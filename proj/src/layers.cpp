#include "tta/layers.hpp"

#include <cmath>
#include <cstring>

#include "tta/errors.hpp"

namespace tta {
namespace {

Tensor fanin_normal(const Shape& shape, double gain, Rng& rng) {
    const int fan_in = shape[1] * shape[2] * shape[3];
    return randn(shape, rng, static_cast<float>(gain / std::sqrt(double(fan_in))));
}

}  // namespace

GatedConvLayer make_gated_conv(int c_in, int c_out, int k, int stride, int padding, int dilation,
                               Activation act, Rng& rng) {
    if (c_in <= 0 || c_out <= 0 || k <= 0)
        throw ConfigError("gated conv: bad channel/kernel config");
    GatedConvLayer l;
    l.feature_weight = fanin_normal({c_out, c_in, k, k}, std::sqrt(2.0), rng);
    l.feature_bias = Tensor({c_out});
    l.gate_weight = fanin_normal({c_out, c_in, k, k}, 1.0, rng);
    l.gate_bias = Tensor({c_out});
    l.stride = stride;
    l.padding = padding;
    l.dilation = dilation;
    l.activation = act;
    return l;
}

Tensor gated_conv(const GatedConvLayer& layer, const Tensor& x) {
    if (layer.feature_weight.shape != layer.gate_weight.shape)
        throw DimError("gated conv: feature and gate kernels must share shape");
    const Conv2dSpec spec{layer.stride, layer.padding, layer.dilation};
    Tensor f = conv2d(x, layer.feature_weight, layer.feature_bias, spec);
    if (layer.activation == Activation::ELU) f = elu(f);
    Tensor g = sigmoid(conv2d(x, layer.gate_weight, layer.gate_bias, spec));
    return mul(f, g);
}

Tensor dilated_block(const Tensor& x, const std::vector<GatedConvLayer>& layers) {
    Tensor h = x;
    for (const GatedConvLayer& l : layers) {
        Tensor next = gated_conv(l, h);
        if (next.dim(2) != h.dim(2) || next.dim(3) != h.dim(3))
            throw ContractError("dilated block: layer changed the spatial size");
        h = next;
    }
    return h;
}

std::vector<GatedConvLayer> make_dilated_block(int channels, const std::vector<int>& dilations,
                                               Rng& rng) {
    std::vector<GatedConvLayer> block;
    block.reserve(dilations.size());
    for (int d : dilations)
        block.push_back(make_gated_conv(channels, channels, 3, 1, d, d, Activation::ELU, rng));
    return block;
}

namespace {

// One v <- normalize(W^T u), u <- normalize(W v) sweep in double precision on
// the [R, C] reshape of the weight. Returns v; leaves u untouched if W v ~ 0
// so the unit-norm invariant on u survives a zero weight.
std::vector<double> power_sweep(const float* w, int R, int C, std::vector<double>& u,
                                bool update_u) {
    std::vector<double> v(C, 0.0);
    for (int r = 0; r < R; ++r) {
        const double ur = u[r];
        const float* row = w + static_cast<std::int64_t>(r) * C;
        for (int c = 0; c < C; ++c) v[c] += ur * row[c];
    }
    double nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
    const double inv_nv = 1.0 / std::max(nv, 1e-12);
    for (double& x : v) x *= inv_nv;
    if (update_u) {
        std::vector<double> wu(R, 0.0);
        for (int r = 0; r < R; ++r) {
            const float* row = w + static_cast<std::int64_t>(r) * C;
            double acc = 0.0;
            for (int c = 0; c < C; ++c) acc += row[c] * v[c];
            wu[r] = acc;
        }
        double nu = 0.0;
        for (double x : wu) nu += x * x;
        nu = std::sqrt(nu);
        if (nu > 1e-12) {
            for (int r = 0; r < R; ++r) u[r] = wu[r] / nu;
        }
    }
    return v;
}

std::vector<double> load_u(const Tensor& u) {
    std::vector<double> out(u.numel());
    for (std::int64_t i = 0; i < u.numel(); ++i) out[i] = u.at(i);
    return out;
}

void store(Tensor& t, const std::vector<double>& v) {
    float* p = t.mutable_data();
    for (size_t i = 0; i < v.size(); ++i) p[i] = static_cast<float>(v[i]);
}

}  // namespace

SpectralConvLayer make_spectral_conv(int c_in, int c_out, int k, int stride, int padding,
                                     Rng& rng) {
    SpectralConvLayer l;
    l.weight = fanin_normal({c_out, c_in, k, k}, 1.0, rng);
    l.bias = Tensor({c_out});
    l.u = Tensor({c_out});
    {
        // random unit start for the iteration vector
        Tensor r = randn({c_out}, rng);
        std::vector<double> u = load_u(r);
        double n = 0.0;
        for (double x : u) n += x * x;
        n = std::sqrt(std::max(n, 1e-12));
        for (double& x : u) x /= n;
        store(l.u, u);
    }
    l.stride = stride;
    l.padding = padding;
    power_iterate(l, 50);
    return l;
}

void power_iterate(SpectralConvLayer& layer, int steps) {
    const int R = layer.weight.dim(0);
    const int C = static_cast<int>(layer.weight.numel() / R);
    std::vector<double> u = load_u(layer.u);
    for (int i = 0; i < steps; ++i) power_sweep(layer.weight.data(), R, C, u, true);
    store(layer.u, u);
}

double spectral_sigma(const SpectralConvLayer& layer) {
    const int R = layer.weight.dim(0);
    const int C = static_cast<int>(layer.weight.numel() / R);
    std::vector<double> u = load_u(layer.u);
    // sigma = ||W^T u|| for unit u; v is normalized inside the sweep
    std::vector<double> v(C, 0.0);
    const float* w = layer.weight.data();
    for (int r = 0; r < R; ++r) {
        const float* row = w + static_cast<std::int64_t>(r) * C;
        for (int c = 0; c < C; ++c) v[c] += u[r] * row[c];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    return std::sqrt(n);
}

Tensor spectral_conv(SpectralConvLayer& layer, const Tensor& x, bool train_mode) {
    const int R = layer.weight.dim(0);
    const int C = static_cast<int>(layer.weight.numel() / R);

    std::vector<double> u = load_u(layer.u);
    std::vector<double> v = power_sweep(layer.weight.data(), R, C, u, train_mode);
    if (train_mode) store(layer.u, u);

    // sigma enters the graph as u^T (W v) with u, v held constant; its weight
    // gradient u v^T is exact for the frozen-u forward.
    Tensor u_row({1, R});
    store(u_row, u);
    Tensor v_col({C, 1});
    store(v_col, v);
    Tensor w2 = reshape(layer.weight, {R, C});
    Tensor sig = reshape(matmul(u_row, matmul(w2, v_col)), {1});
    // max(sigma, 1e-12) without a dedicated kernel
    sig = add_scalar(relu(add_scalar(sig, -1e-12f)), 1e-12f);
    Tensor w_sn = mul_scalar_t(layer.weight, reciprocal(sig));

    Tensor out = conv2d(x, w_sn, layer.bias, Conv2dSpec{layer.stride, layer.padding, 1});
    return leaky_relu(out, 0.2f);
}

std::vector<SpectralConvLayer> make_patch_discriminator(int in_channels, Rng& rng) {
    const int widths[6] = {64, 128, 256, 256, 256, 256};
    std::vector<SpectralConvLayer> layers;
    layers.reserve(6);
    int c = in_channels;
    for (int w : widths) {
        layers.push_back(make_spectral_conv(c, w, 5, 2, 2, rng));
        c = w;
    }
    return layers;
}

Tensor patch_discriminator(const Tensor& x, std::vector<SpectralConvLayer>& layers,
                           bool train_mode) {
    std::int64_t stride_product = 1;
    for (const SpectralConvLayer& l : layers) stride_product *= l.stride;
    if (x.dim(2) < stride_product || x.dim(3) < stride_product)
        throw DimError("patch discriminator: input smaller than the total stride product");
    Tensor h = x;
    for (SpectralConvLayer& l : layers) h = spectral_conv(l, h, train_mode);
    return h;
}

}  // namespace tta
