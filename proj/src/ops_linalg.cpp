#include <cmath>
#include <vector>

#include "tta/gemm.hpp"
#include "tta/ops.hpp"

namespace tta {

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw DimError("matmul: expected 2D operands, got " + shape_str(a.shape) + " and " +
                       shape_str(b.shape));
    const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
    if (b.dim(0) != K)
        throw DimError("matmul: inner dimensions " + shape_str(a.shape) + " x " +
                       shape_str(b.shape));
    Tensor out({M, N});
    gemm_nn(M, N, K, a.data(), K, b.data(), N, out.mutable_data(), N, 0.0f);
    detail::check_finite(out, "matmul");
    Tensor sa = a, sb = b;
    maybe_record(out, {&a, &b}, [sa, sb, M, K, N](const Tensor& g, const Tape::Pull& pull) {
        if (pull.needs(0)) {
            // dA = g * B^T
            std::vector<float> bt(static_cast<std::size_t>(K) * N);
            transpose(sb.data(), K, N, bt.data());
            Tensor da({M, K});
            gemm_nn(M, K, N, g.data(), N, bt.data(), K, da.mutable_data(), K, 0.0f);
            pull.add(0, da);
        }
        if (pull.needs(1)) {
            // dB = A^T * g
            Tensor db({K, N});
            gemm_tn(K, N, M, sa.data(), K, g.data(), N, db.mutable_data(), N, 0.0f);
            pull.add(1, db);
        }
    });
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw DimError("matmul_tn: expected 2D operands, got " + shape_str(a.shape) + " and " +
                       shape_str(b.shape));
    const int D = a.dim(0), M = a.dim(1), N = b.dim(1);
    if (b.dim(0) != D)
        throw DimError("matmul_tn: leading dimensions " + shape_str(a.shape) + " x " +
                       shape_str(b.shape));
    Tensor out({M, N});
    gemm_tn(M, N, D, a.data(), M, b.data(), N, out.mutable_data(), N, 0.0f);
    detail::check_finite(out, "matmul_tn");
    Tensor sa = a, sb = b;
    maybe_record(out, {&a, &b}, [sa, sb, D, M, N](const Tensor& g, const Tape::Pull& pull) {
        if (pull.needs(0)) {
            // dA = B * g^T
            std::vector<float> gt(static_cast<std::size_t>(M) * N);
            transpose(g.data(), M, N, gt.data());
            Tensor da({D, M});
            gemm_nn(D, M, N, sb.data(), N, gt.data(), M, da.mutable_data(), M, 0.0f);
            pull.add(0, da);
        }
        if (pull.needs(1)) {
            // dB = A * g
            Tensor db({D, N});
            gemm_nn(D, N, M, sa.data(), M, g.data(), N, db.mutable_data(), N, 0.0f);
            pull.add(1, db);
        }
    });
    return out;
}

Tensor l2_normalize_rows(const Tensor& x, float floor) {
    if (x.ndim() != 2)
        throw DimError("l2_normalize_rows: expected [L,D], got " + shape_str(x.shape));
    if (floor <= 0.0f) throw ContractError("l2_normalize_rows: floor must be positive");
    const int L = x.dim(0), D = x.dim(1);
    std::vector<float> norms(static_cast<std::size_t>(L));
    const float* xp = x.data();
    for (int l = 0; l < L; ++l) {
        const float* row = xp + static_cast<std::int64_t>(l) * D;
        double acc = 0.0;
        for (int d = 0; d < D; ++d) acc += static_cast<double>(row[d]) * row[d];
        norms[static_cast<std::size_t>(l)] = std::max(static_cast<float>(std::sqrt(acc)), floor);
    }
    Tensor out({L, D});
    {
        float* op = out.mutable_data();
        for (int l = 0; l < L; ++l) {
            const float inv = 1.0f / norms[static_cast<std::size_t>(l)];
            const float* row = xp + static_cast<std::int64_t>(l) * D;
            float* orow = op + static_cast<std::int64_t>(l) * D;
            for (int d = 0; d < D; ++d) orow[d] = row[d] * inv;
        }
    }
    detail::check_finite(out, "l2_normalize_rows");
    Tensor sx = x;
    maybe_record(out, {&x}, [sx, norms, floor, L, D](const Tensor& g, const Tape::Pull& pull) {
        // y = x/n with n = max(|x|, floor). Where the floor is active n is
        // constant, so the projection term drops out.
        Tensor gx({L, D});
        float* p = gx.mutable_data();
        const float* gp = g.data();
        const float* xv = sx.data();
        for (int l = 0; l < L; ++l) {
            const std::int64_t off = static_cast<std::int64_t>(l) * D;
            const float n = norms[static_cast<std::size_t>(l)];
            double dot = 0.0;
            for (int d = 0; d < D; ++d)
                dot += static_cast<double>(gp[off + d]) * xv[off + d];
            const bool clamped = n <= floor;
            const float inv = 1.0f / n;
            const float proj = clamped ? 0.0f : static_cast<float>(dot) * inv * inv * inv;
            for (int d = 0; d < D; ++d) p[off + d] = gp[off + d] * inv - xv[off + d] * proj;
        }
        pull.add(0, gx);
    });
    return out;
}

}  // namespace tta
