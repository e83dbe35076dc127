#include <cstring>

#include "tta/gemm.hpp"
#include "tta/ops.hpp"

namespace tta {

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel_of(shape) != x.numel())
        throw DimError("reshape: " + shape_str(x.shape) + " has " + std::to_string(x.numel()) +
                       " elements, target " + shape_str(shape) + " has " +
                       std::to_string(numel_of(shape)));
    Tensor out = x.detached();
    out.shape = shape;
    Shape in_shape = x.shape;
    maybe_record(out, {&x}, [in_shape](const Tensor& g, const Tape::Pull& pull) {
        Tensor gx = g.detached();
        gx.shape = in_shape;
        pull.add(0, gx);
    });
    return out;
}

Tensor select_batch(const Tensor& x, int n) {
    if (x.ndim() < 1) throw DimError("select_batch: scalar input");
    const int N = x.dim(0);
    if (n < 0 || n >= N)
        throw DimError("select_batch: index " + std::to_string(n) + " out of range [0," +
                       std::to_string(N) + ")");
    Shape rest(x.shape.begin() + 1, x.shape.end());
    const std::int64_t item = numel_of(rest);
    Tensor out(rest);
    std::memcpy(out.mutable_data(), x.data() + static_cast<std::int64_t>(n) * item,
                sizeof(float) * static_cast<std::size_t>(item));
    Shape in_shape = x.shape;
    maybe_record(out, {&x}, [in_shape, n, item](const Tensor& g, const Tape::Pull& pull) {
        Tensor gx(in_shape);  // zeros everywhere except the selected slice
        std::memcpy(gx.mutable_data() + static_cast<std::int64_t>(n) * item, g.data(),
                    sizeof(float) * static_cast<std::size_t>(item));
        pull.add(0, gx);
    });
    return out;
}

Tensor stack_batch(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimError("stack_batch: no parts");
    const Shape& item_shape = parts[0].shape;
    for (const Tensor& p : parts)
        if (p.shape != item_shape)
            throw DimError("stack_batch: mixed shapes " + shape_str(item_shape) + " vs " +
                           shape_str(p.shape));
    const std::int64_t item = numel_of(item_shape);
    Shape out_shape;
    out_shape.push_back(static_cast<int>(parts.size()));
    out_shape.insert(out_shape.end(), item_shape.begin(), item_shape.end());
    Tensor out(out_shape);
    float* op = out.mutable_data();
    for (std::size_t i = 0; i < parts.size(); ++i)
        std::memcpy(op + static_cast<std::int64_t>(i) * item, parts[i].data(),
                    sizeof(float) * static_cast<std::size_t>(item));

    // Record against every tracked part: slot i gets slice i of the gradient.
    Tape* tape = Tape::active();
    if (tape) {
        std::vector<int> inputs(parts.size(), -1);
        bool any = false;
        for (std::size_t i = 0; i < parts.size(); ++i)
            if (tape->tracked(parts[i])) {
                inputs[i] = parts[i].node;
                any = true;
            }
        if (any) {
            Shape ishape = item_shape;
            tape->record(out, std::move(inputs),
                         [ishape, item](const Tensor& g, const Tape::Pull& pull) {
                             const int k = g.dim(0);
                             for (int i = 0; i < k; ++i) {
                                 if (!pull.needs(i)) continue;
                                 Tensor gi(ishape);
                                 std::memcpy(gi.mutable_data(),
                                             g.data() + static_cast<std::int64_t>(i) * item,
                                             sizeof(float) * static_cast<std::size_t>(item));
                                 pull.add(i, gi);
                             }
                         });
        }
    }
    return out;
}

Tensor transpose2d(const Tensor& x) {
    if (x.ndim() != 2) throw DimError("transpose2d: expected 2D, got " + shape_str(x.shape));
    const int R = x.dim(0), C = x.dim(1);
    Tensor out({C, R});
    transpose(x.data(), R, C, out.mutable_data());
    maybe_record(out, {&x}, [R, C](const Tensor& g, const Tape::Pull& pull) {
        Tensor gx({R, C});
        transpose(g.data(), C, R, gx.mutable_data());
        pull.add(0, gx);
    });
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 4 || b.ndim() != 4)
        throw DimError("concat_channels: expected NCHW tensors");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw DimError("concat_channels: incompatible shapes " + shape_str(a.shape) + " and " +
                       shape_str(b.shape));
    const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
    const std::int64_t hw = static_cast<std::int64_t>(a.dim(2)) * a.dim(3);
    Tensor out({N, Ca + Cb, a.dim(2), a.dim(3)});
    float* op = out.mutable_data();
    for (int n = 0; n < N; ++n) {
        std::memcpy(op + static_cast<std::int64_t>(n) * (Ca + Cb) * hw,
                    a.data() + static_cast<std::int64_t>(n) * Ca * hw,
                    sizeof(float) * static_cast<std::size_t>(Ca * hw));
        std::memcpy(op + static_cast<std::int64_t>(n) * (Ca + Cb) * hw + Ca * hw,
                    b.data() + static_cast<std::int64_t>(n) * Cb * hw,
                    sizeof(float) * static_cast<std::size_t>(Cb * hw));
    }
    Shape ash = a.shape, bsh = b.shape;
    maybe_record(out, {&a, &b},
                 [ash, bsh, N, Ca, Cb, hw](const Tensor& g, const Tape::Pull& pull) {
                     const float* gp = g.data();
                     if (pull.needs(0)) {
                         Tensor ga(ash);
                         float* p = ga.mutable_data();
                         for (int n = 0; n < N; ++n)
                             std::memcpy(p + static_cast<std::int64_t>(n) * Ca * hw,
                                         gp + static_cast<std::int64_t>(n) * (Ca + Cb) * hw,
                                         sizeof(float) * static_cast<std::size_t>(Ca * hw));
                         pull.add(0, ga);
                     }
                     if (pull.needs(1)) {
                         Tensor gb(bsh);
                         float* p = gb.mutable_data();
                         for (int n = 0; n < N; ++n)
                             std::memcpy(
                                 p + static_cast<std::int64_t>(n) * Cb * hw,
                                 gp + static_cast<std::int64_t>(n) * (Ca + Cb) * hw + Ca * hw,
                                 sizeof(float) * static_cast<std::size_t>(Cb * hw));
                         pull.add(1, gb);
                     }
                 });
    return out;
}

Tensor slice_channels(const Tensor& x, int c0, int c1) {
    if (x.ndim() != 4) throw DimError("slice_channels: expected NCHW tensor");
    const int N = x.dim(0), C = x.dim(1);
    if (c0 < 0 || c1 > C || c0 >= c1)
        throw DimError("slice_channels: range [" + std::to_string(c0) + "," +
                       std::to_string(c1) + ") invalid for " + std::to_string(C) + " channels");
    const int Cs = c1 - c0;
    const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    Tensor out({N, Cs, x.dim(2), x.dim(3)});
    float* op = out.mutable_data();
    for (int n = 0; n < N; ++n)
        std::memcpy(op + static_cast<std::int64_t>(n) * Cs * hw,
                    x.data() + (static_cast<std::int64_t>(n) * C + c0) * hw,
                    sizeof(float) * static_cast<std::size_t>(Cs * hw));
    Shape ish = x.shape;
    maybe_record(out, {&x}, [ish, N, C, c0, Cs, hw](const Tensor& g, const Tape::Pull& pull) {
        Tensor gx(ish);  // zeros outside the slice
        float* p = gx.mutable_data();
        for (int n = 0; n < N; ++n)
            std::memcpy(p + (static_cast<std::int64_t>(n) * C + c0) * hw,
                        g.data() + static_cast<std::int64_t>(n) * Cs * hw,
                        sizeof(float) * static_cast<std::size_t>(Cs * hw));
        pull.add(0, gx);
    });
    return out;
}

Tensor gather_rows(const Tensor& x, const IntTensor& idx) {
    if (x.ndim() != 2) throw DimError("gather_rows: expected [L,D], got " + shape_str(x.shape));
    if (idx.shape.size() != 1) throw DimError("gather_rows: index must be 1D");
    const int L = x.dim(0), D = x.dim(1), Lo = idx.dim(0);
    for (std::int32_t v : idx.data)
        if (v < 0 || v >= L)
            throw ContractError("gather_rows: index " + std::to_string(v) + " out of [0," +
                                std::to_string(L) + ")");
    Tensor out({Lo, D});
    {
        float* op = out.mutable_data();
        for (int i = 0; i < Lo; ++i)
            std::memcpy(op + static_cast<std::int64_t>(i) * D,
                        x.data() + static_cast<std::int64_t>(idx.data[static_cast<std::size_t>(i)]) * D,
                        sizeof(float) * static_cast<std::size_t>(D));
    }
    IntTensor sidx = idx;
    maybe_record(out, {&x}, [sidx, L, D, Lo](const Tensor& g, const Tape::Pull& pull) {
        Tensor gx({L, D});
        float* p = gx.mutable_data();
        const float* gp = g.data();
        // scatter-add: duplicate indices accumulate in row order
        for (int i = 0; i < Lo; ++i) {
            float* dst = p + static_cast<std::int64_t>(sidx.data[static_cast<std::size_t>(i)]) * D;
            const float* src = gp + static_cast<std::int64_t>(i) * D;
            for (int d = 0; d < D; ++d) dst[d] += src[d];
        }
        pull.add(0, gx);
    });
    return out;
}

Tensor scatter_rows(const Tensor& x, const IntTensor& idx, int out_rows) {
    if (x.ndim() != 2) throw DimError("scatter_rows: expected [L,D], got " + shape_str(x.shape));
    if (idx.shape.size() != 1 || idx.dim(0) != x.dim(0))
        throw DimError("scatter_rows: index length must match input rows");
    const int L = x.dim(0), D = x.dim(1);
    std::vector<char> seen(static_cast<std::size_t>(out_rows), 0);
    for (std::int32_t v : idx.data) {
        if (v < 0 || v >= out_rows)
            throw ContractError("scatter_rows: index " + std::to_string(v) + " out of [0," +
                                std::to_string(out_rows) + ")");
        if (seen[static_cast<std::size_t>(v)])
            throw ContractError("scatter_rows: duplicate destination " + std::to_string(v));
        seen[static_cast<std::size_t>(v)] = 1;
    }
    Tensor out({out_rows, D});
    {
        float* op = out.mutable_data();
        for (int i = 0; i < L; ++i)
            std::memcpy(op + static_cast<std::int64_t>(idx.data[static_cast<std::size_t>(i)]) * D,
                        x.data() + static_cast<std::int64_t>(i) * D,
                        sizeof(float) * static_cast<std::size_t>(D));
    }
    IntTensor sidx = idx;
    maybe_record(out, {&x}, [sidx, L, D](const Tensor& g, const Tape::Pull& pull) {
        Tensor gx({L, D});
        float* p = gx.mutable_data();
        const float* gp = g.data();
        for (int i = 0; i < L; ++i)
            std::memcpy(p + static_cast<std::int64_t>(i) * D,
                        gp + static_cast<std::int64_t>(sidx.data[static_cast<std::size_t>(i)]) * D,
                        sizeof(float) * static_cast<std::size_t>(D));
        pull.add(0, gx);
    });
    return out;
}

}  // namespace tta
