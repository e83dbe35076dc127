#include "tta/attention.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tta/errors.hpp"
#include "tta/gemm.hpp"
#include "tta/ops.hpp"

namespace tta {
namespace {

struct Grids {
    int N, C, H, W;   // p's resolution
    int Hd, Wd;       // downsampled resolution
    int gs_h, gs_w;   // similarity window grid
    int gw_h, gw_w;   // swap window grid at full resolution
    int ls() const { return gs_h * gs_w; }
    int lw() const { return gw_h * gw_w; }
};

int grid_dim(int size, int patch, int stride) {
    return (size + 2 * (patch / 2) - patch) / stride + 1;
}

Grids derive_grids(const Tensor& p, const AttentionConfig& cfg) {
    if (p.ndim() != 4) throw DimError("attention: expected a [N,C,H,W] feature map");
    Grids g;
    g.N = p.dim(0);
    g.C = p.dim(1);
    g.H = p.dim(2);
    g.W = p.dim(3);
    if (g.H % cfg.downsample || g.W % cfg.downsample)
        throw DimError("attention: spatial size not divisible by the downsample factor");
    g.Hd = g.H / cfg.downsample;
    g.Wd = g.W / cfg.downsample;
    if (g.Hd + 2 * (cfg.sim_patch / 2) < cfg.sim_patch ||
        g.H + 2 * (cfg.swap_patch / 2) < cfg.swap_patch)
        throw DimError("attention: feature map smaller than the patch size");
    g.gs_h = grid_dim(g.Hd, cfg.sim_patch, cfg.stride);
    g.gs_w = grid_dim(g.Wd, cfg.sim_patch, cfg.stride);
    g.gw_h = grid_dim(g.H, cfg.swap_patch, cfg.stride);
    g.gw_w = grid_dim(g.W, cfg.swap_patch, cfg.stride);
    return g;
}

// Valid fraction per candidate window, counting in-bounds pixels only, from
// the pooled mask (data access, never taped).
std::vector<double> window_fractions(const float* pooled, const Grids& g,
                                     const AttentionConfig& cfg) {
    const int pad = cfg.sim_patch / 2;
    std::vector<double> frac(static_cast<size_t>(g.ls()));
    for (int wy = 0; wy < g.gs_h; ++wy)
        for (int wx = 0; wx < g.gs_w; ++wx) {
            double sum = 0.0;
            int cnt = 0;
            for (int u = 0; u < cfg.sim_patch; ++u)
                for (int v = 0; v < cfg.sim_patch; ++v) {
                    const int y = wy * cfg.stride - pad + u;
                    const int x = wx * cfg.stride - pad + v;
                    if (y < 0 || y >= g.Hd || x < 0 || x >= g.Wd) continue;
                    sum += pooled[y * g.Wd + x];
                    ++cnt;
                }
            frac[wy * g.gs_w + wx] = cnt ? sum / cnt : 0.0;
        }
    return frac;
}

std::vector<char> admit(const std::vector<double>& frac, const AttentionConfig& cfg,
                        bool* fell_back) {
    std::vector<char> ok(frac.size(), 0);
    bool any = false;
    for (size_t j = 0; j < frac.size(); ++j) {
        ok[j] = frac[j] >= cfg.valid_threshold - 1e-6;
        any = any || ok[j];
    }
    if (any) return ok;
    *fell_back = true;
    if (cfg.fallback == AttentionFallback::UseAll) {
        std::fill(ok.begin(), ok.end(), 1);
    } else {
        const double best = *std::max_element(frac.begin(), frac.end());
        for (size_t j = 0; j < frac.size(); ++j) ok[j] = frac[j] >= best - 1e-6;
    }
    return ok;
}

// Shared front half: pooled inputs, normalized patch rows, validity flags.
struct EmbedData {
    Grids g;
    std::vector<Tensor> nq, np;           // per sample [L, D], taped
    std::vector<std::vector<char>> admitted;
    bool fell_back = false;
};

EmbedData embed(const Tensor& q, const Tensor& p, const Tensor& valid_mask,
                const AttentionConfig& cfg) {
    validate(cfg);
    if (q.shape != p.shape) throw DimError("attention: Q and P must share a shape");
    EmbedData e;
    e.g = derive_grids(p, cfg);
    if (valid_mask.shape != Shape{e.g.N, 1, e.g.H, e.g.W})
        throw DimError("attention: valid mask must be [N,1,H,W] at P's resolution");
    for (std::int64_t i = 0; i < valid_mask.numel(); ++i) {
        const float v = valid_mask.at(i);
        if (v != 0.0f && v != 1.0f)
            throw ContractError("attention: valid mask must be binary");
    }

    const int d = cfg.downsample;
    Tensor qd = d > 1 ? avg_pool2d(q, d) : q;
    Tensor pd = d > 1 ? avg_pool2d(p, d) : p;
    Tensor maskd = d > 1 ? avg_pool2d(valid_mask.detached(), d) : valid_mask.detached();

    const int pad = cfg.sim_patch / 2;
    Tensor uq = unfold(qd, cfg.sim_patch, cfg.stride, pad);
    Tensor up = unfold(pd, cfg.sim_patch, cfg.stride, pad);

    e.nq.reserve(e.g.N);
    e.np.reserve(e.g.N);
    e.admitted.reserve(e.g.N);
    const std::int64_t plane = static_cast<std::int64_t>(e.g.Hd) * e.g.Wd;
    for (int n = 0; n < e.g.N; ++n) {
        e.nq.push_back(l2_normalize_rows(select_batch(uq, n), 1e-8f));
        e.np.push_back(l2_normalize_rows(select_batch(up, n), 1e-8f));
        std::vector<double> frac = window_fractions(maskd.data() + n * plane, e.g, cfg);
        e.admitted.push_back(admit(frac, cfg, &e.fell_back));
    }
    return e;
}

// Full-resolution window index of sim-grid winner w, seen from the swap
// window (a, b). For downsample 1 the two grids coincide; for downsample 2
// the query's sub-cell offset is preserved so self-matches stay aligned.
int full_candidate(int w, int a, int b, int d, const Grids& g) {
    if (d == 1) return w;
    const int wy = w / g.gs_w, wx = w % g.gs_w;
    return (d * wy + a % d) * g.gw_w + (d * wx + b % d);
}

// Pixel -> nearest similarity window, for spreading per-window values onto
// the full-resolution ratio map.
IntTensor pixel_to_window(const Grids& g, const AttentionConfig& cfg) {
    IntTensor idx({g.H * g.W});
    for (int y = 0; y < g.H; ++y)
        for (int x = 0; x < g.W; ++x) {
            const int wy = std::min((y / cfg.downsample + cfg.stride / 2) / cfg.stride,
                                    g.gs_h - 1);
            const int wx = std::min((x / cfg.downsample + cfg.stride / 2) / cfg.stride,
                                    g.gs_w - 1);
            idx.data[y * g.W + x] = wy * g.gs_w + wx;
        }
    return idx;
}

// Back half shared by the two selection paths: upsample indices, gather and
// fold full-resolution patches, spread the winning similarities.
AttentionResult assemble(const Tensor& p, const AttentionConfig& cfg, const Grids& g,
                         const std::vector<IntTensor>& winners,
                         const std::vector<Tensor>& win_values, bool fell_back) {
    const int d = cfg.downsample;
    Tensor pfull = unfold(p, cfg.swap_patch, cfg.stride, cfg.swap_patch / 2);
    const IntTensor pix2win = pixel_to_window(g, cfg);

    AttentionResult out;
    out.used_fallback = fell_back;
    out.index_map = IntTensor({g.N, g.lw()});
    std::vector<Tensor> gathered, rmaps;
    gathered.reserve(g.N);
    rmaps.reserve(g.N);
    for (int n = 0; n < g.N; ++n) {
        IntTensor hfull({g.lw()});
        for (int a = 0; a < g.gw_h; ++a)
            for (int b = 0; b < g.gw_w; ++b) {
                const int cell = (a / d < g.gs_h ? a / d : g.gs_h - 1) * g.gs_w +
                                 (b / d < g.gs_w ? b / d : g.gs_w - 1);
                const int w = winners[n].data[cell];
                hfull.data[a * g.gw_w + b] = full_candidate(w, a, b, d, g);
            }
        std::copy(hfull.data.begin(), hfull.data.end(),
                  out.index_map.data.begin() + static_cast<std::size_t>(n) * g.lw());
        gathered.push_back(gather_rows(select_batch(pfull, n), hfull));
        Tensor rcol = reshape(win_values[n], {g.ls(), 1});
        rmaps.push_back(reshape(gather_rows(rcol, pix2win), {1, g.H, g.W}));
    }
    out.texture_map = fold(stack_batch(gathered), g.H, g.W, cfg.swap_patch, cfg.stride,
                           cfg.swap_patch / 2, /*normalize=*/true);
    out.ratio_map = stack_batch(rmaps);
    return out;
}

Tensor admission_penalty(const std::vector<char>& admitted, int lq, float masked_value) {
    Tensor pen({lq, static_cast<int>(admitted.size())});
    float* p = pen.mutable_data();
    for (int i = 0; i < lq; ++i)
        for (size_t j = 0; j < admitted.size(); ++j)
            p[i * admitted.size() + j] = admitted[j] ? 0.0f : masked_value;
    return pen;
}

Tensor admission_keep(const std::vector<char>& admitted, int lq) {
    Tensor keep({lq, static_cast<int>(admitted.size())});
    float* p = keep.mutable_data();
    for (int i = 0; i < lq; ++i)
        for (size_t j = 0; j < admitted.size(); ++j)
            p[i * admitted.size() + j] = admitted[j] ? 1.0f : 0.0f;
    return keep;
}

}  // namespace

void validate(const AttentionConfig& cfg) {
    if (cfg.swap_patch < 1 || cfg.swap_patch % 2 == 0)
        throw ConfigError("attention: swap_patch must be odd and positive");
    if (cfg.sim_patch < 1 || cfg.sim_patch % 2 == 0)
        throw ConfigError("attention: sim_patch must be odd and positive");
    if (cfg.stride < 1) throw ConfigError("attention: stride must be >= 1");
    if (cfg.stride > cfg.sim_patch || cfg.stride > cfg.swap_patch)
        throw ConfigError("attention: stride above the patch size leaves coverage holes");
    if (cfg.downsample != 1 && cfg.downsample != 2)
        throw ConfigError("attention: downsample must be 1 or 2");
    if (cfg.downsample > 1 && cfg.stride != 1)
        throw ConfigError("attention: cross-resolution matching is defined for stride 1");
    if (!(cfg.valid_threshold >= 0.0f && cfg.valid_threshold <= 1.0f))
        throw ConfigError("attention: valid_threshold must lie in [0,1]");
}

SimilarityMatrix relevance_embedding(const Tensor& q, const Tensor& p, const Tensor& valid_mask,
                                     const AttentionConfig& cfg) {
    EmbedData e = embed(q, p, valid_mask, cfg);
    std::vector<Tensor> rows;
    rows.reserve(e.g.N);
    for (int n = 0; n < e.g.N; ++n) {
        Tensor sn = matmul(e.nq[n], transpose2d(e.np[n]));
        bool all = true;
        for (char c : e.admitted[n]) all = all && c;
        if (!all) {
            // sentinel outside the cosine range on masked candidate columns
            sn = add(mul(sn, admission_keep(e.admitted[n], e.g.ls())),
                     admission_penalty(e.admitted[n], e.g.ls(), -2.0f));
        }
        rows.push_back(sn);
    }
    SimilarityMatrix out;
    out.s = stack_batch(rows);
    out.used_fallback = e.fell_back;
    return out;
}

AttentionResult feature_swap(const Tensor& p, const SimilarityMatrix& sim,
                             const AttentionConfig& cfg) {
    validate(cfg);
    const Grids g = derive_grids(p, cfg);
    if (sim.s.shape != Shape{g.N, g.ls(), g.ls()})
        throw DimError("feature swap: similarity shape does not match P's grid");
    std::vector<IntTensor> winners(g.N);
    std::vector<Tensor> values;
    values.reserve(g.N);
    for (int n = 0; n < g.N; ++n)
        values.push_back(row_max(select_batch(sim.s, n), &winners[n]));
    return assemble(p, cfg, g, winners, values, sim.used_fallback);
}

AttentionResult texture_attention(const Tensor& q, const Tensor& p, const Tensor& valid_mask,
                                  const AttentionConfig& cfg) {
    EmbedData e = embed(q, p, valid_mask, cfg);
    const int L = e.g.ls();
    std::vector<IntTensor> winners(e.g.N);
    std::vector<Tensor> values;
    values.reserve(e.g.N);
    const int D = static_cast<int>(e.np[0].dim(1));
    std::vector<float> npt(static_cast<size_t>(D) * L);
    std::vector<float> scores(static_cast<size_t>(L) * L);
    Tensor ones_col({D, 1}, 1.0f);
    for (int n = 0; n < e.g.N; ++n) {
        // selection on raw data: the big L x L product never enters the tape
        transpose(e.np[n].data(), L, D, npt.data());
        gemm_nn(L, L, D, e.nq[n].data(), D, npt.data(), L, scores.data(), L, 0.0f);
        winners[n] = IntTensor({L});
        const std::vector<char>& ok = e.admitted[n];
        for (int i = 0; i < L; ++i) {
            int best = -1;
            float bv = 0.0f;
            const float* row = scores.data() + static_cast<size_t>(i) * L;
            for (int j = 0; j < L; ++j) {
                if (!ok[j]) continue;
                if (best < 0 || row[j] > bv) {
                    best = j;
                    bv = row[j];
                }
            }
            winners[n].data[i] = best;
        }
        // only the winning pairs are taped: r_i = <nq_i, np_{h_i}>
        Tensor sel = gather_rows(e.np[n], winners[n]);
        values.push_back(reshape(matmul(mul(e.nq[n], sel), ones_col), {L}));
    }
    return assemble(p, cfg, e.g, winners, values, e.fell_back);
}

Tensor weighted_sum_attention(const Tensor& q, const Tensor& p, const Tensor& valid_mask,
                              const AttentionConfig& cfg, float temperature) {
    if (!(temperature > 0.0f))
        throw ContractError("weighted-sum attention: temperature must be positive");
    EmbedData e = embed(q, p, valid_mask, cfg);
    const Grids& g = e.g;
    const int d = cfg.downsample;
    Tensor pfull = unfold(p, cfg.swap_patch, cfg.stride, cfg.swap_patch / 2);

    std::vector<Tensor> assembled;
    assembled.reserve(g.N);
    for (int n = 0; n < g.N; ++n) {
        Tensor sn = matmul(e.nq[n], transpose2d(e.np[n]));
        bool all = true;
        for (char c : e.admitted[n]) all = all && c;
        if (!all) sn = add(sn, admission_penalty(e.admitted[n], g.ls(), -1e4f));
        Tensor a = softmax_rows(scale(sn, 1.0f / temperature));
        Tensor pn = select_batch(pfull, n);
        // one gather/matmul/scatter per sub-cell offset; offsets partition the
        // full-resolution query windows, so the scatters write disjoint rows
        Tensor rows_full;
        for (int oy = 0; oy < d; ++oy)
            for (int ox = 0; ox < d; ++ox) {
                IntTensor cand({g.ls()}), pos({g.ls()});
                for (int w = 0; w < g.ls(); ++w) {
                    const int wy = w / g.gs_w, wx = w % g.gs_w;
                    cand.data[w] = (d * wy + oy) * g.gw_w + (d * wx + ox);
                    pos.data[w] = cand.data[w];
                }
                Tensor part = scatter_rows(matmul(a, gather_rows(pn, cand)), pos, g.lw());
                rows_full = rows_full.defined() ? add(rows_full, part) : part;
            }
        assembled.push_back(rows_full);
    }
    return fold(stack_batch(assembled), g.H, g.W, cfg.swap_patch, cfg.stride,
                cfg.swap_patch / 2, /*normalize=*/true);
}

Tensor synthesize(const Tensor& f, const Tensor& t, const Tensor& r, const Tensor& fusion_weight,
                  const Tensor& fusion_bias, SynthesisMode mode) {
    if (f.shape != t.shape) throw DimError("synthesize: F and T must share a shape");
    if (r.ndim() != 4 || r.dim(0) != f.dim(0) || r.dim(1) != 1 || r.dim(2) != f.dim(2) ||
        r.dim(3) != f.dim(3))
        throw DimError("synthesize: R must be [N,1,H,W]");
    if (fusion_weight.ndim() != 4 || fusion_weight.dim(0) != f.dim(1) ||
        fusion_weight.dim(1) != 2 * f.dim(1))
        throw DimError("synthesize: fusion weight must map 2C -> C channels");
    if (mode == SynthesisMode::Full)
        for (std::int64_t i = 0; i < r.numel(); ++i)
            if (r.at(i) <= -1.0f)
                throw ContractError("synthesize: ratio map must stay above -1");

    Tensor fus = conv2d(concat_channels(f, t), fusion_weight, fusion_bias, Conv2dSpec{1, 1, 1});
    if (mode == SynthesisMode::ConcatOnly) return fus;
    Tensor f_fus = add(f, mul_cbroadcast(fus, r));
    if (mode == SynthesisMode::NoNormalization) return f_fus;
    Tensor inv = reciprocal(add_scalar(r, 1.0f));
    return mul_cbroadcast(f_fus, inv);
}

}  // namespace tta
