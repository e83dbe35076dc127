#pragma once

#include <vector>

#include "tta/tensor.hpp"

namespace tta {

struct L1Pair {
    double full = 0.0;
    double hole = 0.0;
};

// Mean absolute difference over all pixels and over hole pixels only
// (m == 1). An empty hole yields hole = 0. Pure, double precision, no tape.
L1Pair l1_metric(const Tensor& gt, const Tensor& out, const Tensor& m);

// Multi-scale structural similarity between images in [-1,1] (mapped to
// [0,1] first). Gaussian window 11, sigma 1.5, K1 0.01, K2 0.03; downsampling
// by 2x2 mean (odd trailing row/column cropped); contrast-structure terms for
// every scale but the coarsest, which also carries luminance; negative means
// clamp to 0 before the fractional powers, so the result stays in [0,1].
// The scale count adapts to the image (each scale needs >= 11 pixels on the
// short side, at most 5 scales) and the standard five weights renormalize
// over the scales used. Batched inputs average over the batch.
double ms_ssim(const Tensor& a, const Tensor& b);

// How many scales ms_ssim uses at this size; 0 means too small to evaluate.
int ms_ssim_scales(int h, int w);

struct PerImageMetrics {
    double l1_full = 0.0;
    double l1_hole = 0.0;
    double ms_ssim = 0.0;
};

struct MetricReport {
    std::vector<PerImageMetrics> per_image;
    double l1_full_mean = 0.0, l1_full_std = 0.0;
    double l1_hole_mean = 0.0, l1_hole_std = 0.0;
    double ms_ssim_mean = 0.0, ms_ssim_std = 0.0;
    int scales = 0;  // ms_ssim scale count at this image size
};

// Per-image metrics plus population mean/std over the batch.
MetricReport evaluate(const Tensor& gt, const Tensor& out, const Tensor& m);

}  // namespace tta
