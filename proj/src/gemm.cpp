#include "tta/gemm.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include "tta/errors.hpp"

#ifdef __AVX512F__
#include <immintrin.h>
#endif

namespace tta {

namespace {

// Panel sizes: B panel KC*NC ~512KB stays L2-resident while every row strip
// of A streams past it.
constexpr int MR = 6;
constexpr int NR = 64;
constexpr int KC = 256;
constexpr int NC = 512;

// Packs an MR-row strip of A (nn layout, MxK) as ap[k*MR + r], zero-padding
// short strips so the micro-kernel never branches on row count.
void pack_a_nn(const float* A, int lda, int rows, int kb, float* ap) {
    for (int k = 0; k < kb; ++k)
        for (int r = 0; r < MR; ++r)
            ap[k * MR + r] = r < rows ? A[static_cast<long>(r) * lda + k] : 0.0f;
}

// Same strip for the transposed case (A stored KxM, strip = MR columns).
void pack_a_tn(const float* A, int lda, int cols, int kb, float* ap) {
    for (int k = 0; k < kb; ++k) {
        const float* row = A + static_cast<long>(k) * lda;
        for (int r = 0; r < MR; ++r) ap[k * MR + r] = r < cols ? row[r] : 0.0f;
    }
}

// Packs an NR-column strip of B as bp[k*NR + c], zero-padded on the right.
void pack_b(const float* B, int ldb, int kb, int cols, float* bp) {
    for (int k = 0; k < kb; ++k) {
        const float* row = B + static_cast<long>(k) * ldb;
        float* out = bp + k * NR;
        int c = 0;
        for (; c < cols; ++c) out[c] = row[c];
        for (; c < NR; ++c) out[c] = 0.0f;
    }
}

// tile (MR x NR) = sum_k ap[k]*bp[k]; accumulators stay in registers for the
// whole k loop, one per element, so the summation order is fixed.
#ifdef __AVX512F__
void micro_kernel(int kb, const float* ap, const float* bp, float* tile) {
    __m512 acc[MR][4];
    for (int r = 0; r < MR; ++r)
        for (int c = 0; c < 4; ++c) acc[r][c] = _mm512_setzero_ps();
    for (int k = 0; k < kb; ++k) {
        const __m512 b0 = _mm512_loadu_ps(bp + k * NR);
        const __m512 b1 = _mm512_loadu_ps(bp + k * NR + 16);
        const __m512 b2 = _mm512_loadu_ps(bp + k * NR + 32);
        const __m512 b3 = _mm512_loadu_ps(bp + k * NR + 48);
        for (int r = 0; r < MR; ++r) {
            const __m512 a = _mm512_set1_ps(ap[k * MR + r]);
            acc[r][0] = _mm512_fmadd_ps(a, b0, acc[r][0]);
            acc[r][1] = _mm512_fmadd_ps(a, b1, acc[r][1]);
            acc[r][2] = _mm512_fmadd_ps(a, b2, acc[r][2]);
            acc[r][3] = _mm512_fmadd_ps(a, b3, acc[r][3]);
        }
    }
    for (int r = 0; r < MR; ++r)
        for (int c = 0; c < 4; ++c) _mm512_storeu_ps(tile + r * NR + c * 16, acc[r][c]);
}
#else
void micro_kernel(int kb, const float* __restrict ap, const float* __restrict bp,
                  float* __restrict tile) {
    for (int i = 0; i < MR * NR; ++i) tile[i] = 0.0f;
    for (int k = 0; k < kb; ++k) {
        const float* b = bp + k * NR;
        for (int r = 0; r < MR; ++r) {
            const float a = ap[k * MR + r];
            float* t = tile + r * NR;
            for (int c = 0; c < NR; ++c) t[c] += a * b[c];
        }
    }
}
#endif

struct Scratch {
    std::vector<float> bpanel = std::vector<float>(KC * NC);
    std::vector<float> astrip = std::vector<float>(KC * MR);
    std::vector<float> tile = std::vector<float>(MR * NR);
};
Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

template <bool Transposed>
void gemm_impl(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
               int ldc, float beta) {
    if (M < 0 || N < 0 || K < 0) throw ContractError("gemm: negative dimension");
    if (beta != 0.0f && beta != 1.0f) throw ContractError("gemm: beta must be 0 or 1");
    if (beta == 0.0f)
        for (int i = 0; i < M; ++i)
            std::memset(C + static_cast<long>(i) * ldc, 0, sizeof(float) * static_cast<unsigned>(N));
    if (M == 0 || N == 0 || K == 0) return;

    float* bpanel = scratch().bpanel.data();
    const int nstrips = (M + MR - 1) / MR;
    for (int n0 = 0; n0 < N; n0 += NC) {
        const int nc = std::min(NC, N - n0);
        const int ntiles = (nc + NR - 1) / NR;
        for (int k0 = 0; k0 < K; k0 += KC) {
            const int kc = std::min(KC, K - k0);
            for (int jt = 0; jt < ntiles; ++jt)
                pack_b(B + static_cast<long>(k0) * ldb + n0 + jt * NR, ldb, kc,
                       std::min(NR, nc - jt * NR), bpanel + static_cast<long>(jt) * KC * NR);
            // Each C row is owned by exactly one strip iteration and the k0
            // blocks run sequentially, so threading this loop keeps every
            // output element's accumulation order intact.
#pragma omp parallel for schedule(static)
            for (int st = 0; st < nstrips; ++st) {
                Scratch& local = scratch();
                const int im = st * MR;
                const int mb = std::min(MR, M - im);
                if constexpr (Transposed)
                    pack_a_tn(A + static_cast<long>(k0) * lda + im, lda, mb, kc,
                              local.astrip.data());
                else
                    pack_a_nn(A + static_cast<long>(im) * lda + k0, lda, mb, kc,
                              local.astrip.data());
                for (int jt = 0; jt < ntiles; ++jt) {
                    const int nb = std::min(NR, nc - jt * NR);
                    micro_kernel(kc, local.astrip.data(),
                                 bpanel + static_cast<long>(jt) * KC * NR, local.tile.data());
                    for (int r = 0; r < mb; ++r) {
                        float* crow = C + static_cast<long>(im + r) * ldc + n0 + jt * NR;
                        const float* trow = local.tile.data() + r * NR;
                        for (int c = 0; c < nb; ++c) crow[c] += trow[c];
                    }
                }
            }
        }
    }
}

}  // namespace

void gemm_nn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
             int ldc, float beta) {
    gemm_impl<false>(M, N, K, A, lda, B, ldb, C, ldc, beta);
}

void gemm_tn(int M, int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
             int ldc, float beta) {
    gemm_impl<true>(M, N, K, A, lda, B, ldb, C, ldc, beta);
}

void transpose(const float* src, int rows, int cols, float* dst) {
    constexpr int TB = 32;
    for (int i0 = 0; i0 < rows; i0 += TB)
        for (int j0 = 0; j0 < cols; j0 += TB) {
            const int imax = std::min(i0 + TB, rows);
            const int jmax = std::min(j0 + TB, cols);
            for (int i = i0; i < imax; ++i)
                for (int j = j0; j < jmax; ++j)
                    dst[static_cast<long>(j) * rows + i] = src[static_cast<long>(i) * cols + j];
        }
}

}  // namespace tta
