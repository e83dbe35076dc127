#include <algorithm>
#include <cstring>
#include <vector>

#include "tta/gemm.hpp"
#include "tta/ops.hpp"

namespace tta {

namespace {

// Scratch columns buffer per purpose; pullbacks run on the same thread that
// owns the op call, so reuse is safe.
std::vector<float>& scratch_buf(int which) {
    thread_local std::vector<float> bufs[3];
    return bufs[which];
}

// cols[(c*k+ki)*k+kj, oi*Wo+oj] = x[c, oi*s-p+ki*d, oj*s-p+kj*d], zero
// outside the image.
void im2col(const float* x, int C, int H, int W, int k, int stride, int pad, int dil, int Ho,
            int Wo, float* cols) {
    const std::int64_t L = static_cast<std::int64_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                float* row = cols + ((static_cast<std::int64_t>(c) * k + ki) * k + kj) * L;
                const float* img = x + static_cast<std::int64_t>(c) * H * W;
                for (int oi = 0; oi < Ho; ++oi) {
                    const int ii = oi * stride - pad + ki * dil;
                    float* dst = row + static_cast<std::int64_t>(oi) * Wo;
                    if (ii < 0 || ii >= H) {
                        std::memset(dst, 0, sizeof(float) * static_cast<std::size_t>(Wo));
                        continue;
                    }
                    const float* src = img + static_cast<std::int64_t>(ii) * W;
                    for (int oj = 0; oj < Wo; ++oj) {
                        const int jj = oj * stride - pad + kj * dil;
                        dst[oj] = (jj >= 0 && jj < W) ? src[jj] : 0.0f;
                    }
                }
            }
}

// Transpose of im2col: accumulates column values back onto the image grid.
void col2im_add(const float* cols, int C, int H, int W, int k, int stride, int pad, int dil,
                int Ho, int Wo, float* x) {
    const std::int64_t L = static_cast<std::int64_t>(Ho) * Wo;
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                const float* row = cols + ((static_cast<std::int64_t>(c) * k + ki) * k + kj) * L;
                float* img = x + static_cast<std::int64_t>(c) * H * W;
                for (int oi = 0; oi < Ho; ++oi) {
                    const int ii = oi * stride - pad + ki * dil;
                    if (ii < 0 || ii >= H) continue;
                    const float* src = row + static_cast<std::int64_t>(oi) * Wo;
                    float* dst = img + static_cast<std::int64_t>(ii) * W;
                    for (int oj = 0; oj < Wo; ++oj) {
                        const int jj = oj * stride - pad + kj * dil;
                        if (jj >= 0 && jj < W) dst[jj] += src[oj];
                    }
                }
            }
}

int out_dim_checked(int in, int k, int stride, int pad, int dil, const char* op) {
    if (in <= 0 || k <= 0) throw DimError(std::string(op) + ": non-positive size");
    if (stride <= 0 || pad < 0 || dil <= 0)
        throw ContractError(std::string(op) + ": stride/dilation must be >= 1, pad >= 0");
    const int span = dil * (k - 1) + 1;
    const int num = in + 2 * pad - span;
    if (num < 0)
        throw DimError(std::string(op) + ": window of extent " + std::to_string(span) +
                       " exceeds padded input " + std::to_string(in + 2 * pad));
    return num / stride + 1;
}

}  // namespace

int conv2d_out_dim(int in, int k, int stride, int pad, int dilation) {
    return out_dim_checked(in, k, stride, pad, dilation, "conv2d");
}

int unfold_out_dim(int in, int patch, int stride, int pad) {
    return out_dim_checked(in, patch, stride, pad, 1, "unfold");
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec) {
    if (x.ndim() != 4) throw DimError("conv2d: input must be NCHW, got " + shape_str(x.shape));
    if (w.ndim() != 4 || w.dim(2) != w.dim(3))
        throw DimError("conv2d: weight must be [Cout,Cin,k,k], got " + shape_str(w.shape));
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != C)
        throw DimError("conv2d: weight expects " + std::to_string(w.dim(1)) +
                       " input channels, got " + std::to_string(C));
    if (b.defined() && !(b.ndim() == 1 && b.dim(0) == Cout))
        throw DimError("conv2d: bias must be [Cout], got " + shape_str(b.shape));
    const int Ho = conv2d_out_dim(H, k, spec.stride, spec.pad, spec.dilation);
    const int Wo = conv2d_out_dim(W, k, spec.stride, spec.pad, spec.dilation);
    const int K = C * k * k;
    const std::int64_t L = static_cast<std::int64_t>(Ho) * Wo;

    Tensor out({N, Cout, Ho, Wo});
    {
        std::vector<float>& cols = scratch_buf(0);
        cols.resize(static_cast<std::size_t>(K) * L);
        float* op = out.mutable_data();
        for (int n = 0; n < N; ++n) {
            im2col(x.data() + static_cast<std::int64_t>(n) * C * H * W, C, H, W, k, spec.stride,
                   spec.pad, spec.dilation, Ho, Wo, cols.data());
            float* on = op + static_cast<std::int64_t>(n) * Cout * L;
            gemm_nn(Cout, static_cast<int>(L), K, w.data(), K, cols.data(), static_cast<int>(L),
                    on, static_cast<int>(L), 0.0f);
            if (b.defined()) {
                const float* bp = b.data();
                for (int co = 0; co < Cout; ++co) {
                    float* row = on + static_cast<std::int64_t>(co) * L;
                    for (std::int64_t i = 0; i < L; ++i) row[i] += bp[co];
                }
            }
        }
    }
    detail::check_finite(out, "conv2d");

    Tensor sx = x, sw = w;
    Conv2dSpec sp = spec;
    maybe_record(out, {&x, &w, &b},
                 [sx, sw, sp, N, C, H, W, Cout, k, K, L, Ho, Wo](const Tensor& g,
                                                                 const Tape::Pull& pull) {
                     const float* gp = g.data();
                     if (pull.needs(2)) {
                         Tensor db({Cout});
                         float* dbp = db.mutable_data();
                         for (int co = 0; co < Cout; ++co) {
                             double acc = 0.0;
                             for (int n = 0; n < N; ++n) {
                                 const float* row =
                                     gp + (static_cast<std::int64_t>(n) * Cout + co) * L;
                                 for (std::int64_t i = 0; i < L; ++i) acc += row[i];
                             }
                             dbp[co] = static_cast<float>(acc);
                         }
                         pull.add(2, db);
                     }
                     if (pull.needs(1)) {
                         std::vector<float>& cols = scratch_buf(0);
                         std::vector<float>& colsT = scratch_buf(1);
                         cols.resize(static_cast<std::size_t>(K) * L);
                         colsT.resize(static_cast<std::size_t>(K) * L);
                         Tensor dw(sw.shape);
                         float* dwp = dw.mutable_data();
                         for (int n = 0; n < N; ++n) {
                             im2col(sx.data() + static_cast<std::int64_t>(n) * C * H * W, C, H,
                                    W, k, sp.stride, sp.pad, sp.dilation, Ho, Wo, cols.data());
                             transpose(cols.data(), K, static_cast<int>(L), colsT.data());
                             gemm_nn(Cout, K, static_cast<int>(L),
                                     gp + static_cast<std::int64_t>(n) * Cout * L,
                                     static_cast<int>(L), colsT.data(), K, dwp, K,
                                     n == 0 ? 0.0f : 1.0f);
                         }
                         pull.add(1, dw);
                     }
                     if (pull.needs(0)) {
                         std::vector<float>& dcols = scratch_buf(2);
                         dcols.resize(static_cast<std::size_t>(K) * L);
                         Tensor dx(sx.shape);
                         float* dxp = dx.mutable_data();
                         for (int n = 0; n < N; ++n) {
                             gemm_tn(K, static_cast<int>(L), Cout, sw.data(), K,
                                     gp + static_cast<std::int64_t>(n) * Cout * L,
                                     static_cast<int>(L), dcols.data(), static_cast<int>(L),
                                     0.0f);
                             col2im_add(dcols.data(), C, H, W, k, sp.stride, sp.pad, sp.dilation,
                                        Ho, Wo, dxp + static_cast<std::int64_t>(n) * C * H * W);
                         }
                         pull.add(0, dx);
                     }
                 });
    return out;
}

namespace {

// patches[l, (c*p+di)*p+dj] = x[c, oi*s-p+di, oj*s-p+dj] with l = oi*Wo+oj.
void extract_rows(const float* x, int C, int H, int W, int patch, int stride, int pad, int Ho,
                  int Wo, float* rows) {
    const int D = C * patch * patch;
    for (int oi = 0; oi < Ho; ++oi)
        for (int oj = 0; oj < Wo; ++oj) {
            float* row = rows + (static_cast<std::int64_t>(oi) * Wo + oj) * D;
            for (int c = 0; c < C; ++c) {
                const float* img = x + static_cast<std::int64_t>(c) * H * W;
                for (int di = 0; di < patch; ++di) {
                    const int ii = oi * stride - pad + di;
                    float* dst = row + (c * patch + di) * patch;
                    if (ii < 0 || ii >= H) {
                        for (int dj = 0; dj < patch; ++dj) dst[dj] = 0.0f;
                        continue;
                    }
                    const float* src = img + static_cast<std::int64_t>(ii) * W;
                    for (int dj = 0; dj < patch; ++dj) {
                        const int jj = oj * stride - pad + dj;
                        dst[dj] = (jj >= 0 && jj < W) ? src[jj] : 0.0f;
                    }
                }
            }
        }
}

// Transpose of extract_rows: adds each row entry back onto its source pixel.
template <class Acc>
void scatter_rows_add(const float* rows, int C, int H, int W, int patch, int stride, int pad,
                      int Ho, int Wo, Acc* x) {
    const int D = C * patch * patch;
    for (int oi = 0; oi < Ho; ++oi)
        for (int oj = 0; oj < Wo; ++oj) {
            const float* row = rows + (static_cast<std::int64_t>(oi) * Wo + oj) * D;
            for (int c = 0; c < C; ++c) {
                Acc* img = x + static_cast<std::int64_t>(c) * H * W;
                for (int di = 0; di < patch; ++di) {
                    const int ii = oi * stride - pad + di;
                    if (ii < 0 || ii >= H) continue;
                    const float* src = row + (c * patch + di) * patch;
                    Acc* dst = img + static_cast<std::int64_t>(ii) * W;
                    for (int dj = 0; dj < patch; ++dj) {
                        const int jj = oj * stride - pad + dj;
                        if (jj >= 0 && jj < W) dst[jj] += static_cast<Acc>(src[dj]);
                    }
                }
            }
        }
}

}  // namespace

Tensor unfold(const Tensor& x, int patch, int stride, int pad) {
    if (x.ndim() != 4) throw DimError("unfold: input must be NCHW, got " + shape_str(x.shape));
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = unfold_out_dim(H, patch, stride, pad);
    const int Wo = unfold_out_dim(W, patch, stride, pad);
    const int D = C * patch * patch;
    const std::int64_t L = static_cast<std::int64_t>(Ho) * Wo;
    Tensor out({N, static_cast<int>(L), D});
    float* op = out.mutable_data();
    for (int n = 0; n < N; ++n)
        extract_rows(x.data() + static_cast<std::int64_t>(n) * C * H * W, C, H, W, patch, stride,
                     pad, Ho, Wo, op + static_cast<std::int64_t>(n) * L * D);
    Shape ish = x.shape;
    maybe_record(out, {&x},
                 [ish, N, C, H, W, patch, stride, pad, Ho, Wo, D, L](const Tensor& g,
                                                                     const Tape::Pull& pull) {
                     Tensor dx(ish);
                     float* dxp = dx.mutable_data();
                     for (int n = 0; n < N; ++n)
                         scatter_rows_add(g.data() + static_cast<std::int64_t>(n) * L * D, C, H,
                                          W, patch, stride, pad, Ho, Wo,
                                          dxp + static_cast<std::int64_t>(n) * C * H * W);
                     pull.add(0, dx);
                 });
    return out;
}

Tensor fold(const Tensor& patches, int out_h, int out_w, int patch, int stride, int pad,
            bool normalize) {
    if (patches.ndim() != 3)
        throw DimError("fold: input must be [N,L,D], got " + shape_str(patches.shape));
    const int N = patches.dim(0);
    const std::int64_t L = patches.dim(1);
    const int D = patches.dim(2);
    if (D % (patch * patch) != 0)
        throw DimError("fold: row width " + std::to_string(D) + " not divisible by patch area " +
                       std::to_string(patch * patch));
    const int C = D / (patch * patch);
    const int Ho = unfold_out_dim(out_h, patch, stride, pad);
    const int Wo = unfold_out_dim(out_w, patch, stride, pad);
    if (static_cast<std::int64_t>(Ho) * Wo != L)
        throw DimError("fold: expected " + std::to_string(static_cast<std::int64_t>(Ho) * Wo) +
                       " rows for a " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                       " target, got " + std::to_string(L));

    // Per-pixel cover counts from the window geometry alone.
    const std::int64_t hw = static_cast<std::int64_t>(out_h) * out_w;
    std::vector<double> count(static_cast<std::size_t>(hw), 0.0);
    {
        std::vector<float> ones(static_cast<std::size_t>(patch) * patch * L, 1.0f);
        scatter_rows_add(ones.data(), 1, out_h, out_w, patch, stride, pad, Ho, Wo, count.data());
        if (normalize)
            for (double c : count)
                if (c == 0.0)
                    throw ContractError(
                        "fold: window layout leaves uncovered pixels (patch " +
                        std::to_string(patch) + ", stride " + std::to_string(stride) + ", pad " +
                        std::to_string(pad) + ")");
    }

    Tensor out({N, C, out_h, out_w});
    {
        // Double accumulation so that averaging c identical contributions
        // returns exactly the contributed value.
        std::vector<double> acc(static_cast<std::size_t>(C) * hw);
        float* op = out.mutable_data();
        for (int n = 0; n < N; ++n) {
            std::fill(acc.begin(), acc.end(), 0.0);
            scatter_rows_add(patches.data() + static_cast<std::int64_t>(n) * L * D, C, out_h,
                             out_w, patch, stride, pad, Ho, Wo, acc.data());
            float* on = op + static_cast<std::int64_t>(n) * C * hw;
            for (int c = 0; c < C; ++c)
                for (std::int64_t i = 0; i < hw; ++i) {
                    const double v = acc[static_cast<std::size_t>(c * hw + i)];
                    on[c * hw + i] = static_cast<float>(
                        normalize && count[static_cast<std::size_t>(i)] > 0.0
                            ? v / count[static_cast<std::size_t>(i)]
                            : v);
                }
        }
    }
    detail::check_finite(out, "fold");

    Shape ish = patches.shape;
    maybe_record(
        out, {&patches},
        [ish, count, normalize, N, C, D, L, out_h, out_w, patch, stride, pad, Ho, Wo, hw](
            const Tensor& g, const Tape::Pull& pull) {
            // d patches = unfold(g / count): each row entry received
            // 1/count of the gradient of the pixel it contributed to.
            std::vector<float> scaled(static_cast<std::size_t>(C) * hw);
            Tensor dp(ish);
            float* dpp = dp.mutable_data();
            for (int n = 0; n < N; ++n) {
                const float* gn = g.data() + static_cast<std::int64_t>(n) * C * hw;
                for (int c = 0; c < C; ++c)
                    for (std::int64_t i = 0; i < hw; ++i) {
                        const double cnt = count[static_cast<std::size_t>(i)];
                        scaled[static_cast<std::size_t>(c * hw + i)] =
                            normalize && cnt > 0.0
                                ? static_cast<float>(gn[c * hw + i] / cnt)
                                : gn[c * hw + i];
                    }
                extract_rows(scaled.data(), C, out_h, out_w, patch, stride, pad, Ho, Wo,
                             dpp + static_cast<std::int64_t>(n) * L * D);
            }
            pull.add(0, dp);
        });
    return out;
}

Tensor avg_pool2d(const Tensor& x, int k) {
    if (x.ndim() != 4) throw DimError("avg_pool2d: input must be NCHW");
    if (k <= 0) throw ContractError("avg_pool2d: window must be >= 1");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H % k != 0 || W % k != 0)
        throw DimError("avg_pool2d: " + std::to_string(H) + "x" + std::to_string(W) +
                       " not divisible by window " + std::to_string(k));
    const int Ho = H / k, Wo = W / k;
    Tensor out({N, C, Ho, Wo});
    {
        const float* xp = x.data();
        float* op = out.mutable_data();
        const float inv = 1.0f / static_cast<float>(k * k);
        for (int nc = 0; nc < N * C; ++nc) {
            const float* img = xp + static_cast<std::int64_t>(nc) * H * W;
            float* o = op + static_cast<std::int64_t>(nc) * Ho * Wo;
            for (int oi = 0; oi < Ho; ++oi)
                for (int oj = 0; oj < Wo; ++oj) {
                    float acc = 0.0f;
                    for (int di = 0; di < k; ++di)
                        for (int dj = 0; dj < k; ++dj)
                            acc += img[static_cast<std::int64_t>(oi * k + di) * W + oj * k + dj];
                    o[static_cast<std::int64_t>(oi) * Wo + oj] = acc * inv;
                }
        }
    }
    Shape ish = x.shape;
    maybe_record(out, {&x}, [ish, N, C, H, W, Ho, Wo, k](const Tensor& g, const Tape::Pull& pull) {
        Tensor dx(ish);
        float* dp = dx.mutable_data();
        const float* gp = g.data();
        const float inv = 1.0f / static_cast<float>(k * k);
        for (int nc = 0; nc < N * C; ++nc) {
            float* img = dp + static_cast<std::int64_t>(nc) * H * W;
            const float* go = gp + static_cast<std::int64_t>(nc) * Ho * Wo;
            for (int oi = 0; oi < Ho; ++oi)
                for (int oj = 0; oj < Wo; ++oj) {
                    const float v = go[static_cast<std::int64_t>(oi) * Wo + oj] * inv;
                    for (int di = 0; di < k; ++di)
                        for (int dj = 0; dj < k; ++dj)
                            img[static_cast<std::int64_t>(oi * k + di) * W + oj * k + dj] = v;
                }
        }
        pull.add(0, dx);
    });
    return out;
}

Tensor nearest_upsample(const Tensor& x, int factor) {
    if (x.ndim() != 4) throw DimError("nearest_upsample: input must be NCHW");
    if (factor <= 0) throw ContractError("nearest_upsample: factor must be >= 1");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = H * factor, Wo = W * factor;
    Tensor out({N, C, Ho, Wo});
    {
        const float* xp = x.data();
        float* op = out.mutable_data();
        for (int nc = 0; nc < N * C; ++nc) {
            const float* img = xp + static_cast<std::int64_t>(nc) * H * W;
            float* o = op + static_cast<std::int64_t>(nc) * Ho * Wo;
            for (int oi = 0; oi < Ho; ++oi) {
                const float* srow = img + static_cast<std::int64_t>(oi / factor) * W;
                float* drow = o + static_cast<std::int64_t>(oi) * Wo;
                for (int oj = 0; oj < Wo; ++oj) drow[oj] = srow[oj / factor];
            }
        }
    }
    Shape ish = x.shape;
    maybe_record(out, {&x},
                 [ish, N, C, H, W, Ho, Wo, factor](const Tensor& g, const Tape::Pull& pull) {
                     Tensor dx(ish);
                     float* dp = dx.mutable_data();
                     const float* gp = g.data();
                     for (int nc = 0; nc < N * C; ++nc) {
                         float* img = dp + static_cast<std::int64_t>(nc) * H * W;
                         const float* go = gp + static_cast<std::int64_t>(nc) * Ho * Wo;
                         for (int oi = 0; oi < Ho; ++oi)
                             for (int oj = 0; oj < Wo; ++oj)
                                 img[static_cast<std::int64_t>(oi / factor) * W + oj / factor] +=
                                     go[static_cast<std::int64_t>(oi) * Wo + oj];
                     }
                     pull.add(0, dx);
                 });
    return out;
}

}  // namespace tta
