#include "tta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tta/errors.hpp"

namespace tta {

L1Pair l1_metric(const Tensor& gt, const Tensor& out, const Tensor& m) {
    if (gt.shape != out.shape) throw DimError("l1_metric: image shapes differ");
    if (gt.ndim() != 4 || m.ndim() != 4 || m.dim(0) != gt.dim(0) || m.dim(1) != 1 ||
        m.dim(2) != gt.dim(2) || m.dim(3) != gt.dim(3))
        throw DimError("l1_metric: mask must be [N,1,H,W] matching the images");
    const int n = gt.dim(0), c = gt.dim(1), h = gt.dim(2), w = gt.dim(3);
    double full = 0.0, hole = 0.0;
    std::int64_t hole_px = 0;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::int64_t i = ((static_cast<std::int64_t>(b) * c + ch) * h + y) * w + x;
                    const double d = std::fabs(static_cast<double>(gt.at(i)) - out.at(i));
                    full += d;
                    if (m.at((static_cast<std::int64_t>(b) * h + y) * w + x) != 0.0f) {
                        hole += d;
                        ++hole_px;
                    }
                }
    L1Pair res;
    res.full = full / static_cast<double>(gt.numel());
    res.hole = hole_px == 0 ? 0.0 : hole / static_cast<double>(hole_px);
    return res;
}

int ms_ssim_scales(int h, int w) {
    int s = 0;
    int side = std::min(h, w);
    while (s < 5 && side >= 11) {
        ++s;
        side /= 2;
    }
    return s;
}

namespace {

// One channel as doubles in [0,1].
struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane to_unit(const Tensor& t, int b, int c) {
    Plane p;
    p.h = t.dim(2);
    p.w = t.dim(3);
    p.v.resize(static_cast<std::size_t>(p.h) * p.w);
    const std::int64_t off =
        (static_cast<std::int64_t>(b) * t.dim(1) + c) * p.h * static_cast<std::int64_t>(p.w);
    for (std::size_t i = 0; i < p.v.size(); ++i)
        p.v[i] = (static_cast<double>(t.at(off + static_cast<std::int64_t>(i))) + 1.0) * 0.5;
    return p;
}

Plane halve(const Plane& p) {
    Plane out;
    out.h = p.h / 2;
    out.w = p.w / 2;
    out.v.resize(static_cast<std::size_t>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out.v[static_cast<std::size_t>(y) * out.w + x] =
                0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                        p.at(2 * y + 1, 2 * x + 1));
    return out;
}

constexpr int kWin = 11;

std::vector<double> gaussian_taps() {
    std::vector<double> g(kWin);
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += g[i];
    }
    for (double& t : g) t /= sum;
    return g;
}

// Valid-mode separable Gaussian blur.
Plane blur(const Plane& p, const std::vector<double>& g) {
    Plane mid;  // horizontal pass
    mid.h = p.h;
    mid.w = p.w - (kWin - 1);
    mid.v.assign(static_cast<std::size_t>(mid.h) * mid.w, 0.0);
    for (int y = 0; y < mid.h; ++y)
        for (int x = 0; x < mid.w; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[k] * p.at(y, x + k);
            mid.v[static_cast<std::size_t>(y) * mid.w + x] = s;
        }
    Plane out;  // vertical pass
    out.h = p.h - (kWin - 1);
    out.w = mid.w;
    out.v.assign(static_cast<std::size_t>(out.h) * out.w, 0.0);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[k] * mid.at(y + k, x);
            out.v[static_cast<std::size_t>(y) * out.w + x] = s;
        }
    return out;
}

Plane times(const Plane& a, const Plane& b) {
    Plane out = a;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.v[i];
    return out;
}

struct ScaleStats {
    double mean_cs = 0.0;
    double mean_ssim = 0.0;
};

ScaleStats scale_stats(const Plane& a, const Plane& b, const std::vector<double>& g) {
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const Plane mu_a = blur(a, g), mu_b = blur(b, g);
    const Plane e_aa = blur(times(a, a), g), e_bb = blur(times(b, b), g),
                e_ab = blur(times(a, b), g);
    double cs_sum = 0.0, ssim_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
        const double ma = mu_a.v[i], mb = mu_b.v[i];
        const double va = e_aa.v[i] - ma * ma;
        const double vb = e_bb.v[i] - mb * mb;
        const double cov = e_ab.v[i] - ma * mb;
        const double l = (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
        const double cs = (2.0 * cov + kC2) / (va + vb + kC2);
        cs_sum += cs;
        ssim_sum += l * cs;
    }
    const double n = static_cast<double>(mu_a.v.size());
    return {cs_sum / n, ssim_sum / n};
}

constexpr double kWeights5[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

}  // namespace

double ms_ssim(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) throw DimError("ms_ssim: image shapes differ");
    if (a.ndim() != 4) throw DimError("ms_ssim: images must be [N,C,H,W]");
    const int scales = ms_ssim_scales(a.dim(2), a.dim(3));
    if (scales < 1)
        throw DimError("ms_ssim: image smaller than the 11x11 window");

    double wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += kWeights5[s];

    const std::vector<double> g = gaussian_taps();
    const int n = a.dim(0), c = a.dim(1);
    double total = 0.0;
    for (int img = 0; img < n; ++img) {
        // per-scale stats averaged over channels
        double value = 1.0;
        std::vector<Plane> pa, pb;
        for (int ch = 0; ch < c; ++ch) {
            pa.push_back(to_unit(a, img, ch));
            pb.push_back(to_unit(b, img, ch));
        }
        for (int s = 0; s < scales; ++s) {
            double cs = 0.0, ssim = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const ScaleStats st = scale_stats(pa[ch], pb[ch], g);
                cs += st.mean_cs;
                ssim += st.mean_ssim;
            }
            cs /= c;
            ssim /= c;
            const double weight = kWeights5[s] / wsum;
            const double term = s + 1 < scales ? cs : ssim;  // luminance only at the top
            value *= std::pow(std::max(term, 0.0), weight);
            if (s + 1 < scales)
                for (int ch = 0; ch < c; ++ch) {
                    pa[ch] = halve(pa[ch]);
                    pb[ch] = halve(pb[ch]);
                }
        }
        total += value;
    }
    return total / n;
}

MetricReport evaluate(const Tensor& gt, const Tensor& out, const Tensor& m) {
    if (gt.ndim() != 4) throw DimError("evaluate: images must be [N,C,H,W]");
    MetricReport rep;
    rep.scales = ms_ssim_scales(gt.dim(2), gt.dim(3));
    const int n = gt.dim(0), c = gt.dim(1), h = gt.dim(2), w = gt.dim(3);

    auto slice = [](const Tensor& t, int b) {
        const int ch = t.dim(1), hh = t.dim(2), ww = t.dim(3);
        Tensor s({1, ch, hh, ww});
        const std::int64_t count = static_cast<std::int64_t>(ch) * hh * ww;
        std::copy(t.data() + b * count, t.data() + (b + 1) * count, s.mutable_data());
        return s;
    };

    for (int b = 0; b < n; ++b) {
        const Tensor ig = slice(gt, b), io = slice(out, b), im = slice(m, b);
        PerImageMetrics pm;
        const L1Pair l1 = l1_metric(ig, io, im);
        pm.l1_full = l1.full;
        pm.l1_hole = l1.hole;
        pm.ms_ssim = ms_ssim(ig, io);
        rep.per_image.push_back(pm);
    }
    (void)c;
    (void)h;
    (void)w;

    auto aggregate = [&](auto field, double& mean, double& sd) {
        double s = 0.0;
        for (const PerImageMetrics& pm : rep.per_image) s += field(pm);
        mean = s / static_cast<double>(rep.per_image.size());
        double q = 0.0;
        for (const PerImageMetrics& pm : rep.per_image) {
            const double d = field(pm) - mean;
            q += d * d;
        }
        sd = std::sqrt(q / static_cast<double>(rep.per_image.size()));
    };
    aggregate([](const PerImageMetrics& p) { return p.l1_full; }, rep.l1_full_mean,
              rep.l1_full_std);
    aggregate([](const PerImageMetrics& p) { return p.l1_hole; }, rep.l1_hole_mean,
              rep.l1_hole_std);
    aggregate([](const PerImageMetrics& p) { return p.ms_ssim; }, rep.ms_ssim_mean,
              rep.ms_ssim_std);
    return rep;
}

}  // namespace tta
