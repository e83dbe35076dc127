#pragma once

namespace tta {

// C (MxN) = A (MxK) * B (KxN) + beta*C, all row-major. beta must be 0 or 1.
// Per output element the k-summation order is fixed and increasing, so
// results are bit-identical across runs and thread counts.
void gemm_nn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
             int ldc, float beta);

// C (MxN) = A^T * B + beta*C where A is stored KxM row-major (lda >= M).
void gemm_tn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
             int ldc, float beta);

// dst (cols x rows) = src^T where src is rows x cols, both row-major.
void transpose(const float* src, int rows, int cols, float* dst);

}  // namespace tta
