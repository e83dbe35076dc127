#pragma once

// Independent reference implementations used to cross-check the engine.
// Everything here is written as plainly as possible — nested loops, double
// precision, no shared code with the library under test.

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tta/attention.hpp"
#include "tta/ops.hpp"
#include "tta/tensor.hpp"

namespace oracle {

// Naive 7-loop convolution, double accumulation.
tta::Tensor conv2d(const tta::Tensor& x, const tta::Tensor& w, const tta::Tensor& b, int stride,
                   int pad, int dilation);

// Patch extraction / averaging reassembly, elementwise.
tta::Tensor unfold(const tta::Tensor& x, int patch, int stride, int pad);
tta::Tensor fold(const tta::Tensor& rows, int out_h, int out_w, int patch, int stride, int pad,
                 bool normalize = true);

// Exact top singular value of the [rows, cols] reshape of w, computed in
// double via Jacobi eigenvalue sweeps on the smaller Gram matrix.
double top_singular_value(const tta::Tensor& w, int rows, int cols);

// Brute-force double-precision reimplementation of the texture attention
// pipeline: pooled cosine similarities with validity masking, argmax patch
// selection with offset-preserving upsampling, and a scatter-add texture
// assembly with count division.
struct SwapOracle {
    std::vector<std::vector<double>> s;  // per sample, [L_q * L_p] with -2 sentinels
    std::vector<std::vector<int>> h;     // per sample, full-res winner per swap window
    tta::Tensor r;                       // [N,1,H,W]
    tta::Tensor t;                       // [N,C,H,W]
    bool used_fallback = false;
};
SwapOracle attention_oracle(const tta::Tensor& q, const tta::Tensor& p, const tta::Tensor& mask,
                            const tta::AttentionConfig& cfg);

// Largest elementwise |a-b|.
double max_abs_diff(const tta::Tensor& a, const tta::Tensor& b);
// Largest |a-b| / max(|a|,|b|,floor).
double max_rel_diff(const tta::Tensor& a, const tta::Tensor& b, double floor);

// Central-difference gradient check. `f` rebuilds the scalar loss from the
// (possibly perturbed) parameter set; it must be deterministic. Probes
// `probes` random coordinates per parameter and compares the tape gradient
// against (f(x+eps) - f(x-eps)) / (2 eps).
// The forward pass runs in float32, so a central-difference quotient at
// eps=1e-3 carries roughly 1e-4 of absolute rounding noise. abs_floor keeps
// the relative comparison meaningful: gradients below it are effectively
// checked absolutely at rel_tol*abs_floor, which still flags sign flips,
// dropped terms and wrong scale factors.
struct GradCheck {
    double eps = 1e-3;
    double rel_tol = 1e-2;
    double abs_floor = 1e-2;
    int probes = 0;            // <= 0: probe every element
    std::uint64_t seed = 7;
    // Central differences are only valid where f is smooth across [x-eps, x+eps].
    // With skip_kinks set, probes whose one-sided slopes disagree by more than
    // kink_tol (relative) are excluded from the comparison; GradReport::skipped
    // counts them so callers can bound how many probes were discarded.
    bool skip_kinks = false;
    double kink_tol = 0.25;
};
struct GradReport {
    bool ok = true;
    double worst_rel = 0.0;
    std::string worst_at;
    int checked = 0;
    int skipped = 0;
};
using ParamMap = std::unordered_map<std::string, tta::Tensor>;
GradReport check_gradients(const ParamMap& params,
                           const std::function<tta::Tensor(const ParamMap&)>& f,
                           const GradCheck& cfg = {});

}  // namespace oracle
