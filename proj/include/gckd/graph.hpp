#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gckd/encoder.hpp"
#include "gckd/numerics.hpp"

namespace gckd {

// Directed KNN adjacency: neighbors[j] lists j's K most cosine-similar other
// vertices (similarity descending, ties broken by lower vertex index).
// Aggregation draws each vertex from its own list plus itself.
struct GraphTopology {
    std::vector<std::vector<std::uint32_t>> neighbors;
    std::size_t batch_rows = 0;    // input vertices come first
    std::size_t src_mem_rows = 0;  // then source memory
    std::size_t tgt_mem_rows = 0;  // then target memory
    std::size_t effective_k = 0;
    bool k_clamped = false;

    std::size_t vertex_count() const { return neighbors.size(); }
};

struct CrossDomainGraph {
    Matrix x;  // (B + C_s + C_t) x D, stacked input/src-mem/tgt-mem
    GraphTopology topo;
};

using GnnLayerParams = AffineLayer;  // square D x D weight + bias

CrossDomainGraph build_graph(const Matrix& input, const Matrix& src_mem,
                             const Matrix& tgt_mem, std::size_t k);

// out_j = mean over {j} ∪ neighbors[j]
Matrix mean_aggregate(const GraphTopology& topo, const Matrix& x);
// adjoint of mean_aggregate
Matrix mean_aggregate_transpose(const GraphTopology& topo, const Matrix& v);

struct GnnCache {
    std::vector<Matrix> aggs;  // aggregated input per layer
    std::vector<Matrix> acts;  // tanh outputs of hidden layers
    Vector norms;              // final-layer pre-normalization row norms
    Matrix out;
};

// Per layer: H <- act(MeanAgg(H) * W + b); tanh on hidden layers, identity
// plus row L2 normalization on the final layer.
Matrix gnn_forward(const CrossDomainGraph& g, const std::vector<GnnLayerParams>& layers,
                   GnnCache* cache = nullptr);
// d_out spans all vertices; memory-vertex rows of the returned input gradient
// are computed but the caller treats them as constants.
Matrix gnn_backward(const GraphTopology& topo, const std::vector<GnnLayerParams>& layers,
                    const GnnCache& cache, const Matrix& d_out,
                    std::vector<GnnLayerParams>& grads);

// First B rows of the propagated matrix, re-tagged from the input batch.
FeatureBatch extract_domain_aware(const Matrix& g_out, std::size_t batch_rows,
                                  Domain domain, Modality modality);

// Debug dump: "src dst" per edge line.
void dump_edges(const GraphTopology& topo, const std::filesystem::path& path);

}  // namespace gckd
