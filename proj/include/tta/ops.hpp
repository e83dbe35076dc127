#pragma once

#include <vector>

#include "tta/tape.hpp"
#include "tta/tensor.hpp"

// Differentiable kernels. Every op validates shapes, computes its result
// eagerly, and records a pullback on the active tape when any operand is
// tracked. Image tensors are NCHW; patch matrices are [rows x cols] with one
// patch per column.

namespace tta {

// ---- views / structure ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor select_batch(const Tensor& x, int n);              // [N,...] -> [...]
Tensor stack_batch(const std::vector<Tensor>& parts);     // k * [...] -> [k,...]
Tensor transpose2d(const Tensor& x);                      // [R,C] -> [C,R]
Tensor concat_channels(const Tensor& a, const Tensor& b); // along axis 1 of NCHW
Tensor slice_channels(const Tensor& x, int c0, int c1);   // channels [c0, c1)

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// x [N,C,H,W] * r [N,1,H,W], r broadcast across channels.
Tensor mul_cbroadcast(const Tensor& x, const Tensor& r);
Tensor mul_scalar_t(const Tensor& x, const Tensor& s);    // s is a [1] tensor
Tensor scale(const Tensor& x, float s);
Tensor add_scalar(const Tensor& x, float s);
Tensor reciprocal(const Tensor& x);
Tensor abs_val(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, float slope);
Tensor elu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_act(const Tensor& x);

// ---- reductions ----
Tensor sum_all(const Tensor& x);    // -> [1]
Tensor mean_all(const Tensor& x);   // -> [1]
// Row-wise max of a [R,C] matrix -> [R]. Ties resolve to the lowest column
// index; the gradient flows only to the winning element. When `argmax` is
// given it receives the winning column per row.
Tensor row_max(const Tensor& x, IntTensor* argmax = nullptr);
Tensor softmax_rows(const Tensor& x);  // [R,C], stable, rows sum to 1

// ---- matrix products (2D) ----
Tensor matmul(const Tensor& a, const Tensor& b);     // [M,K]*[K,N]
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T*b, a [D,M], b [D,N]
// Rows of a [L,D] matrix scaled to unit L2 norm; norms below `floor` are
// clamped to it instead of dividing by ~0.
Tensor l2_normalize_rows(const Tensor& x, float floor);

// ---- spatial ----
struct Conv2dSpec {
    int stride = 1;
    int pad = 0;
    int dilation = 1;
};
// x [N,Cin,H,W], w [Cout,Cin,k,k], optional bias [Cout] (pass Tensor{} for
// none). Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec);
int conv2d_out_dim(int in, int k, int stride, int pad, int dilation);

// Sliding-window patch extraction: x [N,C,H,W] -> [N, L, C*p*p] with zero
// padding. Row l is the flattened patch at window position l (windows
// enumerated row-major); within a row the order is (c, di, dj).
Tensor unfold(const Tensor& x, int patch, int stride, int pad);
// Inverse layout of unfold: patches [N, L, C*p*p] scattered back onto a
// [N,C,out_h,out_w] canvas. Overlaps are summed; with normalize=true each
// pixel is divided by its cover count (every pixel must then be covered by
// at least one window — coverage holes are rejected). Accumulation happens
// in double precision so fold(unfold(x), normalize=true) == x exactly.
Tensor fold(const Tensor& patches, int out_h, int out_w, int patch, int stride, int pad,
            bool normalize);
int unfold_out_dim(int in, int patch, int stride, int pad);

Tensor avg_pool2d(const Tensor& x, int k);        // H,W divisible by k
Tensor nearest_upsample(const Tensor& x, int factor);

// Row gather/scatter on [L,D] matrices. gather: out[i,:] = x[idx[i],:].
// scatter: out[idx[i],:] = x[i,:] into a zero [out_rows,D] matrix; indices
// must be unique.
Tensor gather_rows(const Tensor& x, const IntTensor& idx);
Tensor scatter_rows(const Tensor& x, const IntTensor& idx, int out_rows);

}  // namespace tta
