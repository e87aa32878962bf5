#include "gckd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gckd/kernels.hpp"

namespace gckd {

CrossDomainGraph build_graph(const Matrix& input, const Matrix& src_mem,
                             const Matrix& tgt_mem, std::size_t k) {
    const std::size_t d = input.cols;
    if ((src_mem.rows && src_mem.cols != d) || (tgt_mem.rows && tgt_mem.cols != d))
        throw ShapeError("build_graph: memory width mismatch");
    const std::size_t v = input.rows + src_mem.rows + tgt_mem.rows;
    if (v < 2) throw UsageError("build_graph: need at least 2 vertices");

    CrossDomainGraph g;
    g.x = Matrix(v, d);
    std::size_t r = 0;
    for (std::size_t i = 0; i < input.rows; ++i) std::copy(input.row(i), input.row(i) + d, g.x.row(r++));
    for (std::size_t i = 0; i < src_mem.rows; ++i) std::copy(src_mem.row(i), src_mem.row(i) + d, g.x.row(r++));
    for (std::size_t i = 0; i < tgt_mem.rows; ++i) std::copy(tgt_mem.row(i), tgt_mem.row(i) + d, g.x.row(r++));

    g.topo.batch_rows = input.rows;
    g.topo.src_mem_rows = src_mem.rows;
    g.topo.tgt_mem_rows = tgt_mem.rows;
    g.topo.k_clamped = k >= v;
    g.topo.effective_k = g.topo.k_clamped ? v - 1 : k;

    Vector inv_norm(v);
    for (std::size_t i = 0; i < v; ++i) {
        const double sq = kernels::squared_norm(g.x.row(i), d);
        if (sq == 0.0) throw DomainError("build_graph: zero-norm vertex");
        inv_norm[i] = 1.0 / std::sqrt(sq);
    }

    const std::size_t kk = g.topo.effective_k;
    g.topo.neighbors.assign(v, {});
    Vector sims(v);
    std::vector<std::uint32_t> cand(v);
    for (std::size_t j = 0; j < v; ++j) {
        for (std::size_t i = 0; i < v; ++i)
            sims[i] = kernels::dot(g.x.row(j), g.x.row(i), d) * inv_norm[j] * inv_norm[i];
        cand.clear();
        for (std::size_t i = 0; i < v; ++i)
            if (i != j) cand.push_back(static_cast<std::uint32_t>(i));
        auto better = [&](std::uint32_t a, std::uint32_t b) {
            if (sims[a] != sims[b]) return sims[a] > sims[b];
            return a < b;
        };
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk),
                          cand.end(), better);
        g.topo.neighbors[j].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk));
    }
    return g;
}

Matrix mean_aggregate(const GraphTopology& topo, const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (std::size_t j = 0; j < x.rows; ++j) {
        double* dst = out.row(j);
        kernels::axpy(1.0, x.row(j), dst, x.cols);
        for (auto i : topo.neighbors[j]) kernels::axpy(1.0, x.row(i), dst, x.cols);
        kernels::scale(dst, x.cols, 1.0 / (1.0 + static_cast<double>(topo.neighbors[j].size())));
    }
    return out;
}

Matrix mean_aggregate_transpose(const GraphTopology& topo, const Matrix& v) {
    Matrix out(v.rows, v.cols);
    for (std::size_t j = 0; j < v.rows; ++j) {
        const double w = 1.0 / (1.0 + static_cast<double>(topo.neighbors[j].size()));
        kernels::axpy(w, v.row(j), out.row(j), v.cols);
        for (auto i : topo.neighbors[j]) kernels::axpy(w, v.row(j), out.row(i), v.cols);
    }
    return out;
}

Matrix gnn_forward(const CrossDomainGraph& g, const std::vector<GnnLayerParams>& layers,
                   GnnCache* cache) {
    if (layers.empty()) throw ShapeError("gnn_forward: no layers");
    for (const auto& l : layers)
        if (l.w.rows != l.w.cols || l.w.rows != g.x.cols)
            throw ShapeError("gnn_forward: layer weight must be D x D");
    if (cache) {
        cache->aggs.clear();
        cache->acts.clear();
    }
    Matrix h = g.x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix agg = mean_aggregate(g.topo, h);
        if (cache) cache->aggs.push_back(agg);
        Matrix z = matmul(agg, layers[l].w);
        add_row_bias(z, layers[l].b);
        if (l + 1 < layers.size()) {
            for (auto& x : z.data) x = std::tanh(x);
            if (cache) cache->acts.push_back(z);
        } else {
            Vector norms(z.rows);
            for (std::size_t i = 0; i < z.rows; ++i)
                norms[i] = l2_normalize_in_place(z.row(i), z.cols);
            if (cache) {
                cache->norms = std::move(norms);
                cache->out = z;
            }
        }
        h = std::move(z);
    }
    return h;
}

Matrix gnn_backward(const GraphTopology& topo, const std::vector<GnnLayerParams>& layers,
                    const GnnCache& cache, const Matrix& d_out,
                    std::vector<GnnLayerParams>& grads) {
    if (grads.size() != layers.size())
        throw ShapeError("gnn_backward: grads/layers size mismatch");
    // Through the final row normalization.
    const Matrix& out = cache.out;
    Matrix d(out.rows, out.cols);
    for (std::size_t i = 0; i < out.rows; ++i) {
        const double* o = out.row(i);
        const double* gr = d_out.row(i);
        const double dot = kernels::dot(o, gr, out.cols);
        double* dst = d.row(i);
        for (std::size_t j = 0; j < out.cols; ++j)
            dst[j] = (gr[j] - o[j] * dot) / cache.norms[i];
    }
    for (std::size_t l = layers.size(); l-- > 0;) {
        accumulate_atb(cache.aggs[l], d, grads[l].w);
        for (std::size_t r = 0; r < d.rows; ++r)
            kernels::axpy(1.0, d.row(r), grads[l].b.data(), d.cols);
        Matrix d_agg = matmul_abt(d, layers[l].w);
        Matrix d_h = mean_aggregate_transpose(topo, d_agg);
        if (l > 0) {
            const Matrix& a = cache.acts[l - 1];
            for (std::size_t i = 0; i < d_h.data.size(); ++i)
                d_h.data[i] *= 1.0 - a.data[i] * a.data[i];
        }
        d = std::move(d_h);
    }
    return d;
}

FeatureBatch extract_domain_aware(const Matrix& g_out, std::size_t batch_rows,
                                  Domain domain, Modality modality) {
    if (batch_rows > g_out.rows) throw ShapeError("extract_domain_aware: B exceeds rows");
    FeatureBatch fb;
    fb.features = Matrix(batch_rows, g_out.cols);
    for (std::size_t i = 0; i < batch_rows; ++i)
        std::copy(g_out.row(i), g_out.row(i) + g_out.cols, fb.features.row(i));
    fb.domain = domain;
    fb.modality = modality;
    fb.provenance = Provenance::Student;
    fb.role = feature_role(domain, modality, Provenance::Student);
    return fb;
}

void dump_edges(const GraphTopology& topo, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    for (std::size_t j = 0; j < topo.neighbors.size(); ++j)
        for (auto i : topo.neighbors[j]) f << j << ' ' << i << '\n';
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace gckd
