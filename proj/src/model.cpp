#include "gckd/model.hpp"

#include "gckd/rng.hpp"

namespace gckd {

ModelParams init_model(std::uint64_t seed, const ModelDims& dims) {
    ModelParams p;
    p.image_encoder = init_encoder(derive_seed(seed, 100),
                                   {dims.d_raw, dims.hidden_dim, dims.embed_dim});
    p.text_encoder = init_encoder(derive_seed(seed, 101),
                                  {dims.d_raw, dims.hidden_dim, dims.embed_dim});
    std::vector<std::size_t> gnn_dims(dims.gnn_layers + 1, dims.embed_dim);
    p.gnn = init_affine_stack(derive_seed(seed, 102), gnn_dims);
    p.head = init_affine_stack(derive_seed(seed, 103),
                               {2 * dims.embed_dim, dims.head_hidden, 2});
    return p;
}

ModelParams zeros_like(const ModelParams& p) {
    ModelParams z;
    z.image_encoder.layers = zeros_like(p.image_encoder.layers);
    z.text_encoder.layers = zeros_like(p.text_encoder.layers);
    z.gnn = zeros_like(p.gnn);
    z.head = zeros_like(p.head);
    return z;
}

namespace {

bool same_shape(const std::vector<AffineLayer>& a, const std::vector<AffineLayer>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].w.rows != b[i].w.rows || a[i].w.cols != b[i].w.cols ||
            a[i].b.size() != b[i].b.size())
            return false;
    return true;
}

}  // namespace

bool same_structure(const ModelParams& a, const ModelParams& b) {
    return same_shape(a.image_encoder.layers, b.image_encoder.layers) &&
           same_shape(a.text_encoder.layers, b.text_encoder.layers) &&
           same_shape(a.gnn, b.gnn) && same_shape(a.head, b.head);
}

void visit_tensors(ModelParams& p, const std::function<void(std::span<double>)>& fn) {
    auto stack = [&](std::vector<AffineLayer>& layers) {
        for (auto& l : layers) {
            fn(std::span<double>(l.w.data));
            fn(std::span<double>(l.b));
        }
    };
    stack(p.image_encoder.layers);
    stack(p.text_encoder.layers);
    stack(p.gnn);
    stack(p.head);
}

void visit_tensors(const ModelParams& p,
                   const std::function<void(std::span<const double>)>& fn) {
    auto stack = [&](const std::vector<AffineLayer>& layers) {
        for (const auto& l : layers) {
            fn(std::span<const double>(l.w.data));
            fn(std::span<const double>(l.b));
        }
    };
    stack(p.image_encoder.layers);
    stack(p.text_encoder.layers);
    stack(p.gnn);
    stack(p.head);
}

std::size_t scalar_count(const ModelParams& p) {
    std::size_t n = 0;
    visit_tensors(p, [&](std::span<const double> t) { n += t.size(); });
    return n;
}

}  // namespace gckd
