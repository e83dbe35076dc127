#include <cmath>

#include "tta/ops.hpp"

namespace tta {

namespace {

// Shared skeleton for binary same-shape ops.
template <class Fwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 Tape::Backward pull) {
    detail::check_same_shape(a, b, name);
    Tensor out(a.shape);
    fwd(a.data(), b.data(), out.mutable_data(), a.numel());
    detail::check_finite(out, name);
    maybe_record(out, {&a, &b}, std::move(pull));
    return out;
}

template <class Fwd>
Tensor unary_fwd(const Tensor& x, const char* name, Fwd fwd) {
    Tensor out(x.shape);
    fwd(x.data(), out.mutable_data(), x.numel());
    detail::check_finite(out, name);
    return out;
}

// dL/dx = g * dfn(x_i, y_i); pass an undefined tensor for the side the
// derivative does not use.
template <class Dfn>
Tape::Backward pointwise_pull(Tensor x, Tensor y, Dfn dfn) {
    return [x = std::move(x), y = std::move(y), dfn](const Tensor& g, const Tape::Pull& pull) {
        Tensor dx(g.shape);
        const float* gp = g.data();
        const float* xp = x.defined() ? x.data() : nullptr;
        const float* yp = y.defined() ? y.data() : nullptr;
        float* dp = dx.mutable_data();
        const std::int64_t n = g.numel();
        if (xp && yp)
            for (std::int64_t i = 0; i < n; ++i) dp[i] = gp[i] * dfn(xp[i], yp[i]);
        else if (xp)
            for (std::int64_t i = 0; i < n; ++i) dp[i] = gp[i] * dfn(xp[i], 0.0f);
        else if (yp)
            for (std::int64_t i = 0; i < n; ++i) dp[i] = gp[i] * dfn(0.0f, yp[i]);
        else
            for (std::int64_t i = 0; i < n; ++i) dp[i] = gp[i] * dfn(0.0f, 0.0f);
        pull.add(0, dx);
    };
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add",
        [](const float* pa, const float* pb, float* po, std::int64_t n) {
            for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        },
        [](const Tensor& g, const Tape::Pull& pull) {
            pull.add(0, g);
            pull.add(1, g);
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub",
        [](const float* pa, const float* pb, float* po, std::int64_t n) {
            for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
        },
        [](const Tensor& g, const Tape::Pull& pull) {
            pull.add(0, g);
            if (pull.needs(1)) {
                Tensor dn(g.shape);
                const float* gp = g.data();
                float* dp = dn.mutable_data();
                const std::int64_t n = g.numel();
                for (std::int64_t i = 0; i < n; ++i) dp[i] = -gp[i];
                pull.add(1, dn);
            }
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Tensor sa = a, sb = b;  // keep buffers alive for the pullback
    return binary_op(
        a, b, "mul",
        [](const float* pa, const float* pb, float* po, std::int64_t n) {
            for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        },
        [sa, sb](const Tensor& g, const Tape::Pull& pull) {
            const float* gp = g.data();
            const std::int64_t n = g.numel();
            if (pull.needs(0)) {
                Tensor da(sa.shape);
                float* dp = da.mutable_data();
                const float* bp = sb.data();
                for (std::int64_t i = 0; i < n; ++i) dp[i] = gp[i] * bp[i];
                pull.add(0, da);
            }
            if (pull.needs(1)) {
                Tensor db(sb.shape);
                float* dp = db.mutable_data();
                const float* ap = sa.data();
                for (std::int64_t i = 0; i < n; ++i) dp[i] = gp[i] * ap[i];
                pull.add(1, db);
            }
        });
}

Tensor mul_cbroadcast(const Tensor& x, const Tensor& r) {
    if (x.ndim() != 4 || r.ndim() != 4)
        throw DimError("mul_cbroadcast: expected NCHW tensors, got " + shape_str(x.shape) +
                       " and " + shape_str(r.shape));
    if (r.dim(1) != 1 || r.dim(0) != x.dim(0) || r.dim(2) != x.dim(2) || r.dim(3) != x.dim(3))
        throw DimError("mul_cbroadcast: map " + shape_str(r.shape) + " does not broadcast over " +
                       shape_str(x.shape));
    const int N = x.dim(0), C = x.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    Tensor out(x.shape);
    {
        const float* xp = x.data();
        const float* rp = r.data();
        float* op = out.mutable_data();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * hw;
                const float* rs = rp + static_cast<std::int64_t>(n) * hw;
                for (std::int64_t i = 0; i < hw; ++i) op[off + i] = xp[off + i] * rs[i];
            }
    }
    detail::check_finite(out, "mul_cbroadcast");
    Tensor sx = x, sr = r;
    maybe_record(out, {&x, &r}, [sx, sr, N, C, hw](const Tensor& g, const Tape::Pull& pull) {
        const float* gp = g.data();
        if (pull.needs(0)) {
            Tensor dx(sx.shape);
            float* dp = dx.mutable_data();
            const float* rp = sr.data();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * hw;
                    const float* rs = rp + static_cast<std::int64_t>(n) * hw;
                    for (std::int64_t i = 0; i < hw; ++i) dp[off + i] = gp[off + i] * rs[i];
                }
            pull.add(0, dx);
        }
        if (pull.needs(1)) {
            Tensor dr(sr.shape);
            float* dp = dr.mutable_data();
            const float* xp = sx.data();
            for (int n = 0; n < N; ++n) {
                float* ds = dp + static_cast<std::int64_t>(n) * hw;
                for (int c = 0; c < C; ++c) {
                    const std::int64_t off = (static_cast<std::int64_t>(n) * C + c) * hw;
                    for (std::int64_t i = 0; i < hw; ++i) ds[i] += gp[off + i] * xp[off + i];
                }
            }
            pull.add(1, dr);
        }
    });
    return out;
}

Tensor mul_scalar_t(const Tensor& x, const Tensor& s) {
    if (s.numel() != 1) throw DimError("mul_scalar_t: scale must be a [1] tensor");
    const float sv = s.at(0);
    Tensor out = unary_fwd(x, "mul_scalar_t",
                           [sv](const float* xp, float* op, std::int64_t n) {
                               for (std::int64_t i = 0; i < n; ++i) op[i] = xp[i] * sv;
                           });
    Tensor sx = x;
    maybe_record(out, {&x, &s}, [sx, sv](const Tensor& g, const Tape::Pull& pull) {
        const float* gp = g.data();
        const std::int64_t n = sx.numel();
        if (pull.needs(0)) {
            Tensor dx(sx.shape);
            float* dp = dx.mutable_data();
            for (std::int64_t i = 0; i < n; ++i) dp[i] = gp[i] * sv;
            pull.add(0, dx);
        }
        if (pull.needs(1)) {
            const float* xp = sx.data();
            double acc = 0.0;
            for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(gp[i]) * xp[i];
            pull.add(1, Tensor({1}, {static_cast<float>(acc)}));
        }
    });
    return out;
}

Tensor scale(const Tensor& x, float s) {
    Tensor out = unary_fwd(x, "scale", [s](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) op[i] = xp[i] * s;
    });
    maybe_record(out, {&x},
                 pointwise_pull(Tensor{}, Tensor{}, [s](float, float) { return s; }));
    return out;
}

Tensor add_scalar(const Tensor& x, float s) {
    Tensor out = unary_fwd(x, "add_scalar", [s](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) op[i] = xp[i] + s;
    });
    maybe_record(out, {&x},
                 [](const Tensor& g, const Tape::Pull& pull) { pull.add(0, g); });
    return out;
}

Tensor reciprocal(const Tensor& x) {
    Tensor out = unary_fwd(x, "reciprocal", [](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) op[i] = 1.0f / xp[i];
    });
    maybe_record(out, {&x},
                 pointwise_pull(Tensor{}, out, [](float, float y) { return -y * y; }));
    return out;
}

Tensor abs_val(const Tensor& x) {
    Tensor out = unary_fwd(x, "abs_val", [](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) op[i] = std::fabs(xp[i]);
    });
    maybe_record(out, {&x}, pointwise_pull(x, Tensor{}, [](float xv, float) {
                     return xv > 0.0f ? 1.0f : (xv < 0.0f ? -1.0f : 0.0f);
                 }));
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = unary_fwd(x, "relu", [](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) op[i] = xp[i] > 0.0f ? xp[i] : 0.0f;
    });
    maybe_record(out, {&x}, pointwise_pull(x, Tensor{}, [](float xv, float) {
                     return xv > 0.0f ? 1.0f : 0.0f;
                 }));
    return out;
}

Tensor leaky_relu(const Tensor& x, float slope) {
    Tensor out = unary_fwd(x, "leaky_relu", [slope](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) op[i] = xp[i] >= 0.0f ? xp[i] : slope * xp[i];
    });
    maybe_record(out, {&x}, pointwise_pull(x, Tensor{}, [slope](float xv, float) {
                     return xv >= 0.0f ? 1.0f : slope;
                 }));
    return out;
}

Tensor elu(const Tensor& x) {
    Tensor out = unary_fwd(x, "elu", [](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) op[i] = xp[i] > 0.0f ? xp[i] : std::expm1(xp[i]);
    });
    // f'(x) = exp(x) = f(x) + 1 on the negative side
    maybe_record(out, {&x}, pointwise_pull(x, Tensor{}, [](float xv, float) {
                     return xv > 0.0f ? 1.0f : std::exp(xv);
                 }));
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = unary_fwd(x, "sigmoid", [](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) {
            const float v = xp[i];
            op[i] =
                v >= 0.0f ? 1.0f / (1.0f + std::exp(-v)) : std::exp(v) / (1.0f + std::exp(v));
        }
    });
    maybe_record(out, {&x},
                 pointwise_pull(Tensor{}, out, [](float, float y) { return y * (1.0f - y); }));
    return out;
}

Tensor tanh_act(const Tensor& x) {
    Tensor out = unary_fwd(x, "tanh_act", [](const float* xp, float* op, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) op[i] = std::tanh(xp[i]);
    });
    maybe_record(out, {&x},
                 pointwise_pull(Tensor{}, out, [](float, float y) { return 1.0f - y * y; }));
    return out;
}

}  // namespace tta
