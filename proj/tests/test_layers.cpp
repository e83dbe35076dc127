#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tta/layers.hpp"
#include "tta/ops.hpp"
#include "tta/rng.hpp"
#include "tta/tape.hpp"

using namespace tta;

namespace {

Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
    Rng rng(seed);
    Tensor w = rand_uniform(t.shape, rng, 0.25f, 1.0f);
    return sum_all(mul(t, w));
}

void fill_bias(Tensor& b, float v) {
    float* p = b.mutable_data();
    for (std::int64_t i = 0; i < b.numel(); ++i) p[i] = v;
}

void scale_data(Tensor& t, float f) {
    float* p = t.mutable_data();
    for (std::int64_t i = 0; i < t.numel(); ++i) p[i] *= f;
}

}  // namespace

// ---------------- gated conv ----------------

TEST_CASE("gated conv: saturated-open gate equals plain conv + activation") {
    Rng rng(40);
    GatedConvLayer l = make_gated_conv(2, 3, 3, 1, 1, 1, Activation::ELU, rng);
    fill_bias(l.gate_bias, 20.0f);
    Tensor x = randn({1, 2, 6, 6}, rng);
    Tensor got = gated_conv(l, x);
    Tensor want = elu(conv2d(x, l.feature_weight, l.feature_bias, Conv2dSpec{1, 1, 1}));
    CHECK(oracle::max_abs_diff(got, want) < 1e-6);
}

TEST_CASE("gated conv: closed gate outputs nearly zero") {
    Rng rng(41);
    GatedConvLayer l = make_gated_conv(2, 3, 3, 1, 1, 1, Activation::ELU, rng);
    fill_bias(l.gate_bias, -20.0f);
    Tensor x = randn({1, 2, 6, 6}, rng);
    Tensor got = gated_conv(l, x);
    CHECK(oracle::max_abs_diff(got, Tensor(got.shape)) < 1e-6);
}

TEST_CASE("gated conv recomposes the tensor kernels exactly") {
    Rng rng(42);
    GatedConvLayer l = make_gated_conv(3, 4, 3, 2, 1, 1, Activation::ELU, rng);
    Tensor x = randn({2, 3, 8, 8}, rng);
    Tensor got = gated_conv(l, x);
    const Conv2dSpec spec{2, 1, 1};
    Tensor want = mul(elu(conv2d(x, l.feature_weight, l.feature_bias, spec)),
                      sigmoid(conv2d(x, l.gate_weight, l.gate_bias, spec)));
    CHECK(oracle::max_abs_diff(got, want) == 0.0);
}

TEST_CASE("gated conv without activation skips the ELU") {
    Rng rng(43);
    GatedConvLayer l = make_gated_conv(2, 2, 3, 1, 1, 1, Activation::None, rng);
    Tensor x = randn({1, 2, 5, 5}, rng);
    const Conv2dSpec spec{1, 1, 1};
    Tensor want = mul(conv2d(x, l.feature_weight, l.feature_bias, spec),
                      sigmoid(conv2d(x, l.gate_weight, l.gate_bias, spec)));
    CHECK(oracle::max_abs_diff(gated_conv(l, x), want) == 0.0);
}

TEST_CASE("gated conv rejects mismatched feature/gate kernels") {
    Rng rng(44);
    GatedConvLayer l = make_gated_conv(2, 2, 3, 1, 1, 1, Activation::ELU, rng);
    l.gate_weight = Tensor({2, 2, 5, 5});
    CHECK_THROWS_AS(gated_conv(l, Tensor({1, 2, 5, 5})), DimError);
}

// ---------------- dilated block ----------------

TEST_CASE("dilated block: zero weights and biases give zero output") {
    std::vector<GatedConvLayer> block;
    GatedConvLayer l;
    l.feature_weight = Tensor({3, 3, 3, 3});
    l.feature_bias = Tensor({3});
    l.gate_weight = Tensor({3, 3, 3, 3});
    l.gate_bias = Tensor({3});
    l.stride = 1;
    l.padding = 2;
    l.dilation = 2;
    l.activation = Activation::None;
    block.push_back(l);
    Rng rng(45);
    Tensor x = randn({1, 3, 10, 10}, rng);
    Tensor out = dilated_block(x, block);
    CHECK(oracle::max_abs_diff(out, Tensor(out.shape)) == 0.0);
}

TEST_CASE("dilated block: center-tap layer reproduces the input") {
    GatedConvLayer l;
    l.feature_weight = Tensor({3, 3, 3, 3});
    {
        float* w = l.feature_weight.mutable_data();
        for (int c = 0; c < 3; ++c) w[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0f;
    }
    l.feature_bias = Tensor({3});
    l.gate_weight = Tensor({3, 3, 3, 3});
    l.gate_bias = Tensor({3});
    fill_bias(l.gate_bias, 20.0f);
    l.stride = 1;
    l.padding = 2;
    l.dilation = 2;
    l.activation = Activation::None;
    Rng rng(46);
    Tensor x = randn({2, 3, 9, 9}, rng);
    Tensor out = dilated_block(x, {l});
    CHECK(oracle::max_abs_diff(out, x) < 1e-6);
}

TEST_CASE("dilated block: default four-layer stack preserves the shape") {
    Rng rng(47);
    auto block = make_dilated_block(8, {2, 4, 8, 16}, rng);
    REQUIRE(block.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(block[i].dilation == (2 << i));
        CHECK(block[i].padding == block[i].dilation);
    }
    Tensor x = randn({1, 8, 16, 16}, rng);
    Tensor out = dilated_block(x, block);
    CHECK(out.shape == x.shape);
    CHECK(out.all_finite());
}

TEST_CASE("dilated block rejects layers that change the spatial size") {
    Rng rng(48);
    auto bad = make_gated_conv(4, 4, 3, 2, 1, 1, Activation::ELU, rng);
    Tensor x = randn({1, 4, 8, 8}, rng);
    CHECK_THROWS_AS(dilated_block(x, {bad}), ContractError);
}

// ---------------- spectral conv ----------------

TEST_CASE("power-iteration sigma matches the dense SVD oracle") {
    Rng rng(49);
    SpectralConvLayer l = make_spectral_conv(2, 8, 3, 1, 1, rng);  // reshape is 8x18
    const double got = spectral_sigma(l);
    const double want = oracle::top_singular_value(l.weight, 8, 18);
    CHECK(std::fabs(got - want) / want < 1e-2);
}

TEST_CASE("spectral conv output is invariant to weight rescaling") {
    Rng rng(50);
    SpectralConvLayer a = make_spectral_conv(3, 4, 3, 1, 1, rng);
    Tensor x = randn({1, 3, 8, 8}, rng);
    Tensor base = spectral_conv(a, x, false);
    SpectralConvLayer b = a;
    scale_data(b.weight, 10.0f);
    power_iterate(b, 20);
    Tensor scaled = spectral_conv(b, x, false);
    CHECK(oracle::max_abs_diff(base, scaled) < 1e-3);
}

TEST_CASE("orthogonal-row weight passes through as a plain conv") {
    Rng rng(51);
    const int R = 4, C = 18;  // 4 output channels, 2x3x3 kernels
    // Gram-Schmidt in double for exactly orthonormal rows
    std::vector<std::vector<double>> rows(R, std::vector<double>(C));
    for (auto& r : rows)
        for (double& v : r) v = rng.normal();
    for (int i = 0; i < R; ++i) {
        for (int j = 0; j < i; ++j) {
            double dot = 0.0;
            for (int k = 0; k < C; ++k) dot += rows[i][k] * rows[j][k];
            for (int k = 0; k < C; ++k) rows[i][k] -= dot * rows[j][k];
        }
        double n = 0.0;
        for (double v : rows[i]) n += v * v;
        n = std::sqrt(n);
        for (double& v : rows[i]) v /= n;
    }
    SpectralConvLayer l;
    l.weight = Tensor({R, 2, 3, 3});
    {
        float* w = l.weight.mutable_data();
        for (int i = 0; i < R; ++i)
            for (int k = 0; k < C; ++k) w[i * C + k] = static_cast<float>(rows[i][k]);
    }
    l.bias = Tensor({R});
    l.u = Tensor({R});
    l.u.mutable_data()[0] = 1.0f;
    l.stride = 1;
    l.padding = 1;
    power_iterate(l, 5);
    CHECK(spectral_sigma(l) == doctest::Approx(1.0).epsilon(1e-5));
    Tensor x = randn({1, 2, 6, 6}, rng);
    Tensor got = spectral_conv(l, x, false);
    Tensor want = leaky_relu(conv2d(x, l.weight, l.bias, Conv2dSpec{1, 1, 1}), 0.2f);
    CHECK(oracle::max_abs_diff(got, want) < 1e-4);
}

TEST_CASE("spectral conv survives an all-zero weight") {
    SpectralConvLayer l;
    l.weight = Tensor({2, 2, 3, 3});
    l.bias = Tensor({2});
    l.u = Tensor({2});
    l.u.mutable_data()[0] = 1.0f;
    l.stride = 1;
    l.padding = 1;
    Tensor x({1, 2, 4, 4}, 1.0f);
    Tensor out = spectral_conv(l, x, true);
    CHECK(out.all_finite());
    CHECK(oracle::max_abs_diff(out, Tensor(out.shape)) == 0.0);
    // unit-norm invariant on u must survive the degenerate update
    CHECK(l.u.at(0) == 1.0f);
    CHECK(l.u.at(1) == 0.0f);
}

TEST_CASE("normalized weight re-estimates sigma inside [0.9, 1.1]") {
    Rng rng(52);
    SpectralConvLayer l = make_spectral_conv(2, 6, 3, 1, 1, rng);
    const double sigma = spectral_sigma(l);
    SpectralConvLayer n = l;
    scale_data(n.weight, static_cast<float>(1.0 / sigma));
    power_iterate(n, 50);
    const double got = spectral_sigma(n);
    CHECK(got > 0.9);
    CHECK(got < 1.1);
}

TEST_CASE("u keeps unit norm across training forwards") {
    Rng rng(53);
    SpectralConvLayer l = make_spectral_conv(3, 5, 3, 2, 1, rng);
    Tensor x = randn({1, 3, 8, 8}, rng);
    for (int i = 0; i < 3; ++i) (void)spectral_conv(l, x, true);
    double n = 0.0;
    for (std::int64_t i = 0; i < l.u.numel(); ++i) n += double(l.u.at(i)) * l.u.at(i);
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-5));
}

// ---------------- patch discriminator ----------------

TEST_CASE("patch discriminator maps 1x4x64x64 to a 1x1 score map") {
    Rng rng(54);
    auto d = make_patch_discriminator(4, rng);
    REQUIRE(d.size() == 6);
    Tensor x = randn({1, 4, 64, 64}, rng);
    Tensor s = patch_discriminator(x, d, false);
    CHECK(s.shape == Shape{1, 256, 1, 1});
    CHECK(s.all_finite());
}

TEST_CASE("patch discriminator: zero weights give zero scores") {
    Rng rng(55);
    auto d = make_patch_discriminator(4, rng);
    for (auto& l : d) l.weight = Tensor(l.weight.shape);
    Tensor x = randn({1, 4, 64, 64}, rng);
    Tensor s = patch_discriminator(x, d, false);
    CHECK(oracle::max_abs_diff(s, Tensor(s.shape)) == 0.0);
}

TEST_CASE("patch discriminator: doubling the batch duplicates scores") {
    Rng rng(56);
    auto d = make_patch_discriminator(4, rng);
    Tensor x = randn({1, 4, 64, 64}, rng);
    Tensor one = patch_discriminator(x, d, false);
    Tensor sample = select_batch(x, 0);
    Tensor both = patch_discriminator(stack_batch({sample, sample}), d, false);
    REQUIRE(both.shape == Shape{2, 256, 1, 1});
    CHECK(oracle::max_abs_diff(select_batch(both, 0), select_batch(one, 0)) == 0.0);
    CHECK(oracle::max_abs_diff(select_batch(both, 1), select_batch(one, 0)) == 0.0);
}

TEST_CASE("patch discriminator rejects inputs below the stride product") {
    Rng rng(57);
    auto d = make_patch_discriminator(4, rng);
    Tensor x = randn({1, 4, 32, 32}, rng);
    CHECK_THROWS_AS(patch_discriminator(x, d, false), DimError);
}

TEST_CASE("discriminator scores are invariant to rescaling one layer") {
    Rng rng(58);
    auto d = make_patch_discriminator(4, rng);
    Tensor x = randn({1, 4, 64, 64}, rng);
    Tensor base = patch_discriminator(x, d, false);
    scale_data(d[2].weight, 2.5f);
    power_iterate(d[2], 20);
    Tensor rescaled = patch_discriminator(x, d, false);
    CHECK(oracle::max_abs_diff(base, rescaled) < 1e-3);
}

// ---------------- gradients ----------------

TEST_CASE("gradient check: gated conv end to end") {
    Rng rng(59);
    oracle::ParamMap params{{"x", randn({1, 2, 4, 4}, rng, 0.5f)},
                            {"fw", randn({2, 2, 3, 3}, rng, 0.5f)},
                            {"fb", randn({2}, rng, 0.5f)},
                            {"gw", randn({2, 2, 3, 3}, rng, 0.5f)},
                            {"gb", randn({2}, rng, 0.5f)}};
    auto f = [](const oracle::ParamMap& m) {
        GatedConvLayer l;
        l.feature_weight = m.at("fw");
        l.feature_bias = m.at("fb");
        l.gate_weight = m.at("gw");
        l.gate_bias = m.at("gb");
        l.stride = 1;
        l.padding = 1;
        l.dilation = 1;
        l.activation = Activation::ELU;
        return weighted_sum(gated_conv(l, m.at("x")), 202);
    };
    oracle::GradReport rep = oracle::check_gradients(params, f, {1e-3, 1e-2, 1e-2, 0, 7});
    INFO("worst ", rep.worst_at, " rel ", rep.worst_rel);
    CHECK(rep.ok);
}

TEST_CASE("gradient check: spectral conv with frozen u") {
    Rng rng(60);
    SpectralConvLayer base = make_spectral_conv(2, 2, 3, 1, 1, rng);
    const Tensor frozen_u = base.u;
    oracle::ParamMap params{{"x", randn({1, 2, 4, 4}, rng, 0.5f)},
                            {"w", base.weight},
                            {"b", randn({2}, rng, 0.5f)}};
    auto f = [&frozen_u](const oracle::ParamMap& m) {
        SpectralConvLayer l;
        l.weight = m.at("w");
        l.bias = m.at("b");
        l.u = frozen_u;
        l.stride = 1;
        l.padding = 1;
        return weighted_sum(spectral_conv(l, m.at("x"), false), 203);
    };
    oracle::GradReport rep = oracle::check_gradients(params, f, {1e-3, 1e-2, 1e-2, 0, 9});
    INFO("worst ", rep.worst_at, " rel ", rep.worst_rel);
    CHECK(rep.ok);
}
