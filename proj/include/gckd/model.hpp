#pragma once

#include <functional>
#include <span>

#include "gckd/encoder.hpp"
#include "gckd/graph.hpp"

namespace gckd {

// Everything the optimizer touches: per-modality encoders, the shared GNN
// stack, and the binary matching head. Also reused as a gradient holder.
struct ModelParams {
    EncoderParams image_encoder;
    EncoderParams text_encoder;
    std::vector<GnnLayerParams> gnn;
    std::vector<AffineLayer> head;

    bool operator==(const ModelParams&) const = default;
};

struct ModelDims {
    std::size_t d_raw = 64;
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 64;    // encoder hidden width
    std::size_t gnn_layers = 2;
    std::size_t head_hidden = 32;   // matching-head hidden width

    bool operator==(const ModelDims&) const = default;
};

ModelParams init_model(std::uint64_t seed, const ModelDims& dims);
ModelParams zeros_like(const ModelParams& p);
bool same_structure(const ModelParams& a, const ModelParams& b);

// Fixed traversal order: image encoder (w, b per layer), text encoder, gnn,
// head. EMA, AdamW, serialization and the gradient checker all rely on it.
void visit_tensors(ModelParams& p, const std::function<void(std::span<double>)>& fn);
void visit_tensors(const ModelParams& p,
                   const std::function<void(std::span<const double>)>& fn);
std::size_t scalar_count(const ModelParams& p);

}  // namespace gckd
