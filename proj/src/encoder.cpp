#include "gckd/encoder.hpp"

#include <cmath>

#include "gckd/kernels.hpp"
#include "gckd/rng.hpp"

namespace gckd {

FeatureRole feature_role(Domain d, Modality m, Provenance p) {
    if (p == Provenance::Teacher) {
        if (d != Domain::Target)
            throw UsageError("teacher features are produced for the target domain");
        return m == Modality::Image ? FeatureRole::TeacherTargetImage
                                    : FeatureRole::TeacherTargetText;
    }
    if (d == Domain::Source)
        return m == Modality::Image ? FeatureRole::SourceImage : FeatureRole::SourceText;
    return m == Modality::Image ? FeatureRole::TargetImage : FeatureRole::TargetText;
}

void validate_feature_batch(const FeatureBatch& fb) {
    const FeatureRole expect = feature_role(fb.domain, fb.modality, fb.provenance);
    if (expect != fb.role) throw UsageError("feature batch role/tag mismatch");
    for (std::size_t i = 0; i < fb.features.rows; ++i) {
        const double sq = kernels::squared_norm(fb.features.row(i), fb.features.cols);
        if (std::abs(sq - 1.0) > 1e-9)
            throw UsageError("feature batch row is not unit norm");
    }
}

Matrix mlp_forward(const std::vector<AffineLayer>& layers, const Matrix& input,
                   MlpCache* cache) {
    if (layers.empty()) throw ShapeError("mlp_forward: no layers");
    if (cache) {
        cache->input = input;
        cache->pre.clear();
        cache->acts.clear();
    }
    Matrix h = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const AffineLayer& layer = layers[l];
        if (h.cols != layer.w.rows) throw ShapeError("mlp_forward: layer shape mismatch");
        Matrix z = matmul(h, layer.w);
        add_row_bias(z, layer.b);
        if (cache) cache->pre.push_back(z);
        if (l + 1 < layers.size()) {
            for (auto& v : z.data) v = std::tanh(v);
            if (cache) cache->acts.push_back(z);
        }
        h = std::move(z);
    }
    return h;
}

Matrix mlp_backward(const std::vector<AffineLayer>& layers, const MlpCache& cache,
                    const Matrix& d_output, std::vector<AffineLayer>& grads) {
    if (grads.size() != layers.size())
        throw ShapeError("mlp_backward: grads/layers size mismatch");
    Matrix d = d_output;  // gradient w.r.t. pre-activation of the last layer
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Matrix& acts_in = (l == 0) ? cache.input : cache.acts[l - 1];
        accumulate_atb(acts_in, d, grads[l].w);
        for (std::size_t r = 0; r < d.rows; ++r)
            kernels::axpy(1.0, d.row(r), grads[l].b.data(), d.cols);
        Matrix d_in = matmul_abt(d, layers[l].w);
        if (l > 0) {
            const Matrix& a = cache.acts[l - 1];
            for (std::size_t i = 0; i < d_in.data.size(); ++i)
                d_in.data[i] *= 1.0 - a.data[i] * a.data[i];
        }
        d = std::move(d_in);
    }
    return d;
}

Matrix encoder_forward(const EncoderParams& params, const Matrix& raw,
                       EncoderCache* cache) {
    MlpCache local;
    MlpCache* mlp_cache = cache ? &cache->mlp : &local;
    Matrix y = mlp_forward(params.layers, raw, cache ? mlp_cache : nullptr);
    Vector norms(y.rows);
    for (std::size_t i = 0; i < y.rows; ++i)
        norms[i] = l2_normalize_in_place(y.row(i), y.cols);
    if (cache) {
        cache->norms = norms;
        cache->normalized = y;
    }
    return y;
}

Matrix encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                        const Matrix& d_normalized, EncoderParams& grads) {
    const Matrix& out = cache.normalized;
    Matrix d_pre(out.rows, out.cols);
    for (std::size_t i = 0; i < out.rows; ++i) {
        const double* o = out.row(i);
        const double* g = d_normalized.row(i);
        const double dot = kernels::dot(o, g, out.cols);
        double* dst = d_pre.row(i);
        for (std::size_t j = 0; j < out.cols; ++j)
            dst[j] = (g[j] - o[j] * dot) / cache.norms[i];
    }
    return mlp_backward(params.layers, cache.mlp, d_pre, grads.layers);
}

FeatureBatch forward(const EncoderParams& params, std::span<const Sample> batch,
                     Provenance provenance) {
    if (batch.empty()) throw UsageError("forward: empty batch");
    const Modality modality = batch[0].modality;
    const Domain domain = batch[0].domain;
    Matrix raw(batch.size(), params.input_dim());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].modality != modality)
            throw UsageError("forward: mixed modalities in batch");
        if (batch[i].raw.size() != raw.cols)
            throw ShapeError("forward: sample width does not match encoder input");
        std::copy(batch[i].raw.begin(), batch[i].raw.end(), raw.row(i));
    }
    FeatureBatch fb;
    fb.features = encoder_forward(params, raw, nullptr);
    fb.domain = domain;
    fb.modality = modality;
    fb.provenance = provenance;
    fb.role = feature_role(domain, modality, provenance);
    return fb;
}

std::vector<AffineLayer> init_affine_stack(std::uint64_t seed,
                                           const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw ParamError("init: need at least input and output dims");
    for (auto d : dims)
        if (d == 0) throw ParamError("init: zero layer width");
    Rng rng(seed);
    std::vector<AffineLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t d_in = dims[l], d_out = dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        AffineLayer layer{Matrix(d_in, d_out), Vector(d_out, 0.0)};
        for (auto& v : layer.w.data) v = dist(rng);
        layers.push_back(std::move(layer));
    }
    return layers;
}

EncoderParams init_encoder(std::uint64_t seed, const std::vector<std::size_t>& dims) {
    return EncoderParams{init_affine_stack(seed, dims)};
}

EncoderParams clone_params(const EncoderParams& p) { return p; }

std::vector<AffineLayer> zeros_like(const std::vector<AffineLayer>& layers) {
    std::vector<AffineLayer> out;
    out.reserve(layers.size());
    for (const auto& l : layers)
        out.push_back(AffineLayer{Matrix(l.w.rows, l.w.cols), Vector(l.b.size(), 0.0)});
    return out;
}

}  // namespace gckd
