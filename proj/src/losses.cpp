#include "tta/losses.hpp"

#include <cmath>

#include "tta/rng.hpp"

namespace tta {

namespace {

Tensor fanin_normal(Shape shape, float gain, Rng& rng) {
    std::int64_t fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    return randn(shape, rng, gain / std::sqrt(static_cast<float>(fan_in)));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (a.shape != b.shape)
        throw DimError(std::string(where) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                       shape_str(b.shape));
}

}  // namespace

void validate(const LossWeights& w) {
    if (w.rec < 0.0f || w.adv < 0.0f || w.per < 0.0f || w.style < 0.0f)
        throw ConfigError("loss weights must be >= 0");
}

PerceptualExtractor make_perceptual_extractor(std::uint64_t seed) {
    PerceptualExtractor e;
    e.seed = seed;
    Rng rng(seed);
    const int chans[] = {3, 8, 16, 32, 64, 64};
    for (int s = 0; s < 5; ++s) {
        e.weights.push_back(fanin_normal({chans[s + 1], chans[s], 3, 3}, std::sqrt(2.0f), rng));
        e.biases.push_back(Tensor({chans[s + 1]}));
    }
    return e;
}

std::vector<Tensor> perceptual_features(const PerceptualExtractor& e, const Tensor& img) {
    if (img.ndim() != 4 || img.dim(1) != e.weights.front().dim(1))
        throw DimError("perceptual_features: expected [N,3,H,W], got " + shape_str(img.shape));
    std::vector<Tensor> maps;
    Tensor x = img;
    for (std::size_t s = 0; s < e.weights.size(); ++s) {
        x = relu(conv2d(x, e.weights[s], e.biases[s], Conv2dSpec{2, 1, 1}));
        maps.push_back(x);
    }
    return maps;
}

Tensor rec_loss(const Tensor& gt, const Tensor& pred) {
    require_same_shape(gt, pred, "rec_loss");
    return mean_all(abs_val(sub(gt, pred)));
}

Tensor adv_g_loss(const Tensor& d_fake) { return scale(mean_all(d_fake), -1.0f); }

Tensor adv_d_loss(const Tensor& d_real, const Tensor& d_fake) {
    require_same_shape(d_real, d_fake, "adv_d_loss");
    Tensor real_term = mean_all(relu(add_scalar(scale(d_real, -1.0f), 1.0f)));
    Tensor fake_term = mean_all(relu(add_scalar(d_fake, 1.0f)));
    return add(real_term, fake_term);
}

Tensor perceptual_loss(const PerceptualExtractor& e, const Tensor& gt, const Tensor& pred) {
    require_same_shape(gt, pred, "perceptual_loss");
    const std::vector<Tensor> fa = perceptual_features(e, gt);
    const std::vector<Tensor> fb = perceptual_features(e, pred);
    const float n = static_cast<float>(gt.dim(0));
    Tensor total;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        const float volume =
            static_cast<float>(fa[i].dim(1)) * fa[i].dim(2) * fa[i].dim(3);
        Tensor term = scale(sum_all(abs_val(sub(fa[i], fb[i]))), 1.0f / (volume * n));
        total = i == 0 ? term : add(total, term);
    }
    return total;
}

Tensor gram(const Tensor& phi) {
    if (phi.ndim() != 4) throw DimError("gram: expected [N,C,H,W], got " + shape_str(phi.shape));
    const int n = phi.dim(0), c = phi.dim(1);
    const int hw = phi.dim(2) * phi.dim(3);
    const float norm = 1.0f / (static_cast<float>(c) * hw);
    std::vector<Tensor> per_sample;
    per_sample.reserve(n);
    for (int i = 0; i < n; ++i) {
        Tensor flat = reshape(select_batch(phi, i), {c, hw});
        per_sample.push_back(scale(matmul(flat, transpose2d(flat)), norm));
    }
    return stack_batch(per_sample);
}

Tensor style_loss(const PerceptualExtractor& e, const Tensor& comp, const Tensor& pred) {
    require_same_shape(comp, pred, "style_loss");
    const std::vector<Tensor> fa = perceptual_features(e, comp);
    const std::vector<Tensor> fb = perceptual_features(e, pred);
    const float n = static_cast<float>(comp.dim(0));
    Tensor total;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        Tensor term = scale(sum_all(abs_val(sub(gram(fa[i]), gram(fb[i])))), 1.0f / n);
        total = i == 0 ? term : add(total, term);
    }
    return total;
}

Tensor total_loss(const LossWeights& weights, const Tensor& l_rec, const Tensor& l_g,
                  const Tensor& l_per, const Tensor& l_style) {
    validate(weights);
    return add(add(scale(l_rec, weights.rec), scale(l_g, weights.adv)),
               add(scale(l_per, weights.per), scale(l_style, weights.style)));
}

}  // namespace tta
