#include <cmath>

#include "tta/ops.hpp"

namespace tta {

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    const float* xp = x.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += xp[i];
    Tensor out({1}, {static_cast<float>(acc)});
    detail::check_finite(out, "sum_all");
    Shape ish = x.shape;
    maybe_record(out, {&x}, [ish](const Tensor& g, const Tape::Pull& pull) {
        pull.add(0, Tensor(ish, g.at(0)));
    });
    return out;
}

Tensor mean_all(const Tensor& x) {
    if (x.numel() == 0) throw DimError("mean_all: empty tensor");
    double acc = 0.0;
    const float* xp = x.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += xp[i];
    Tensor out({1}, {static_cast<float>(acc / static_cast<double>(n))});
    detail::check_finite(out, "mean_all");
    Shape ish = x.shape;
    maybe_record(out, {&x}, [ish, n](const Tensor& g, const Tape::Pull& pull) {
        pull.add(0, Tensor(ish, g.at(0) / static_cast<float>(n)));
    });
    return out;
}

Tensor row_max(const Tensor& x, IntTensor* argmax) {
    if (x.ndim() != 2) throw DimError("row_max: expected [R,C], got " + shape_str(x.shape));
    const int R = x.dim(0), C = x.dim(1);
    if (C == 0) throw DimError("row_max: zero columns");
    Tensor out({R});
    IntTensor arg({R});
    const float* xp = x.data();
    float* op = out.mutable_data();
    for (int r = 0; r < R; ++r) {
        const float* row = xp + static_cast<std::int64_t>(r) * C;
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (row[c] > row[best]) best = c;  // ties keep the lowest index
        op[r] = row[best];
        arg.data[static_cast<std::size_t>(r)] = best;
    }
    if (argmax) *argmax = arg;
    maybe_record(out, {&x}, [arg, R, C](const Tensor& g, const Tape::Pull& pull) {
        Tensor gx({R, C});  // gradient flows to the winning element only
        float* p = gx.mutable_data();
        const float* gp = g.data();
        for (int r = 0; r < R; ++r)
            p[static_cast<std::int64_t>(r) * C + arg.data[static_cast<std::size_t>(r)]] = gp[r];
        pull.add(0, gx);
    });
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    if (x.ndim() != 2) throw DimError("softmax_rows: expected [R,C], got " + shape_str(x.shape));
    const int R = x.dim(0), C = x.dim(1);
    Tensor out({R, C});
    {
        const float* xp = x.data();
        float* op = out.mutable_data();
        for (int r = 0; r < R; ++r) {
            const float* row = xp + static_cast<std::int64_t>(r) * C;
            float* orow = op + static_cast<std::int64_t>(r) * C;
            float m = row[0];
            for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
            double denom = 0.0;
            for (int c = 0; c < C; ++c) {
                orow[c] = std::exp(row[c] - m);
                denom += orow[c];
            }
            const float inv = static_cast<float>(1.0 / denom);
            for (int c = 0; c < C; ++c) orow[c] *= inv;
        }
    }
    detail::check_finite(out, "softmax_rows");
    maybe_record(out, {&x}, [out, R, C](const Tensor& g, const Tape::Pull& pull) {
        // dx = (g - <g,y>_row) * y
        Tensor gx({R, C});
        float* p = gx.mutable_data();
        const float* gp = g.data();
        const float* yp = out.data();
        for (int r = 0; r < R; ++r) {
            const std::int64_t off = static_cast<std::int64_t>(r) * C;
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += static_cast<double>(gp[off + c]) * yp[off + c];
            const float d = static_cast<float>(dot);
            for (int c = 0; c < C; ++c) p[off + c] = (gp[off + c] - d) * yp[off + c];
        }
        pull.add(0, gx);
    });
    return out;
}

}  // namespace tta
