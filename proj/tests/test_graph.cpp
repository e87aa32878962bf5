#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gckd/graph.hpp"
#include "gckd/rng.hpp"

using namespace gckd;

namespace {

Matrix random_unit_rows(Rng& rng, std::size_t n, std::size_t d) {
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto v = random_unit_vector(rng, d);
        std::copy(v.begin(), v.end(), m.row(i));
    }
    return m;
}

// O(V^2) KNN oracle: full pairwise cosine table, full sort per vertex.
std::vector<std::vector<std::uint32_t>> knn_oracle(const Matrix& x, std::size_t k) {
    const std::size_t v = x.rows;
    std::vector<std::vector<std::uint32_t>> nbrs(v);
    for (std::size_t j = 0; j < v; ++j) {
        std::vector<std::pair<double, std::uint32_t>> scored;
        for (std::size_t i = 0; i < v; ++i) {
            if (i == j) continue;
            scored.emplace_back(cosine_sim(x.row_span(j), x.row_span(i)),
                                static_cast<std::uint32_t>(i));
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t t = 0; t < k && t < scored.size(); ++t)
            nbrs[j].push_back(scored[t].second);
    }
    return nbrs;
}

// Dense reference: normalize((M)(tanh((M)XW1+b1))W2+b2) with M = D̃^-1 Ã,
// Ã = adjacency-with-self-loops oriented so row j holds j's neighbor set.
Matrix dense_gnn_oracle(const CrossDomainGraph& g, const std::vector<GnnLayerParams>& layers) {
    const std::size_t v = g.x.rows;
    Matrix m(v, v);
    for (std::size_t j = 0; j < v; ++j) {
        const double w = 1.0 / (1.0 + static_cast<double>(g.topo.neighbors[j].size()));
        m.at(j, j) = w;
        for (auto i : g.topo.neighbors[j]) m.at(j, i) = w;
    }
    Matrix h = g.x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix agg(v, h.cols);
        for (std::size_t r = 0; r < v; ++r)
            for (std::size_t c = 0; c < h.cols; ++c) {
                double s = 0.0;
                for (std::size_t t = 0; t < v; ++t) s += m.at(r, t) * h.at(t, c);
                agg.at(r, c) = s;
            }
        Matrix z(v, layers[l].w.cols);
        for (std::size_t r = 0; r < v; ++r)
            for (std::size_t c = 0; c < z.cols; ++c) {
                double s = layers[l].b[c];
                for (std::size_t t = 0; t < agg.cols; ++t)
                    s += agg.at(r, t) * layers[l].w.at(t, c);
                z.at(r, c) = s;
            }
        if (l + 1 < layers.size()) {
            for (auto& x : z.data) x = std::tanh(x);
        } else {
            for (std::size_t r = 0; r < v; ++r) {
                double n = 0.0;
                for (std::size_t c = 0; c < z.cols; ++c) n += z.at(r, c) * z.at(r, c);
                n = std::sqrt(n);
                for (std::size_t c = 0; c < z.cols; ++c) z.at(r, c) /= n;
            }
        }
        h = std::move(z);
    }
    return h;
}

std::vector<GnnLayerParams> identity_layers(std::size_t d, std::size_t count) {
    std::vector<GnnLayerParams> layers;
    for (std::size_t l = 0; l < count; ++l) {
        GnnLayerParams p{Matrix(d, d), Vector(d, 0.0)};
        for (std::size_t i = 0; i < d; ++i) p.w.at(i, i) = 1.0;
        layers.push_back(std::move(p));
    }
    return layers;
}

}  // namespace

TEST_CASE("three vertices at 0/10/90 degrees, K=1") {
    Matrix input(3, 2);
    input.at(0, 0) = 1.0;
    const double ten = 10.0 * std::numbers::pi / 180.0;
    input.at(1, 0) = std::cos(ten);
    input.at(1, 1) = std::sin(ten);
    input.at(2, 1) = 1.0;
    auto g = build_graph(input, Matrix(0, 0), Matrix(0, 0), 1);
    REQUIRE(g.topo.effective_k == 1);
    CHECK(g.topo.neighbors[0] == std::vector<std::uint32_t>{1});
    CHECK(g.topo.neighbors[1] == std::vector<std::uint32_t>{0});
    CHECK(g.topo.neighbors[2] == std::vector<std::uint32_t>{1});
}

TEST_CASE("identical vertices: ties resolve to lowest indices") {
    Matrix input(4, 3);
    for (std::size_t i = 0; i < 4; ++i) input.at(i, 0) = 1.0;
    auto g = build_graph(input, Matrix(0, 0), Matrix(0, 0), 2);
    CHECK(g.topo.neighbors[0] == std::vector<std::uint32_t>{1, 2});
    CHECK(g.topo.neighbors[1] == std::vector<std::uint32_t>{0, 2});
    CHECK(g.topo.neighbors[2] == std::vector<std::uint32_t>{0, 1});
    CHECK(g.topo.neighbors[3] == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("K >= V clamps to V-1 and sets the warning flag") {
    Matrix input(2, 2);
    input.at(0, 0) = 1.0;
    input.at(1, 1) = 1.0;
    auto g = build_graph(input, Matrix(0, 0), Matrix(0, 0), 5);
    CHECK(g.topo.effective_k == 1);
    CHECK(g.topo.k_clamped);
    Rng rng(1);
    CHECK_FALSE(build_graph(random_unit_rows(rng, 8, 2), Matrix(0, 0), Matrix(0, 0), 3)
                    .topo.k_clamped);
}

TEST_CASE("vertex partition follows the stacking order") {
    Rng rng(5);
    auto input = random_unit_rows(rng, 3, 4);
    auto src = random_unit_rows(rng, 5, 4);
    auto tgt = random_unit_rows(rng, 2, 4);
    auto g = build_graph(input, src, tgt, 3);
    CHECK(g.topo.batch_rows == 3);
    CHECK(g.topo.src_mem_rows == 5);
    CHECK(g.topo.tgt_mem_rows == 2);
    REQUIRE(g.x.rows == 10);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(g.x.at(0, j) == input.at(0, j));
        CHECK(g.x.at(3, j) == src.at(0, j));
        CHECK(g.x.at(8, j) == tgt.at(0, j));
    }
}

TEST_CASE("adjacency equals the brute-force oracle on random instances") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t b = 1 + rng() % 6;
        const std::size_t cs = rng() % 10;
        const std::size_t ct = rng() % 10;
        if (b + cs + ct < 2) continue;
        const std::size_t k = 1 + rng() % 8;
        auto input = random_unit_rows(rng, b, 6);
        auto src = random_unit_rows(rng, cs, 6);
        auto tgt = random_unit_rows(rng, ct, 6);
        auto g = build_graph(input, src, tgt, k);
        auto oracle = knn_oracle(g.x, std::min(k, b + cs + ct - 1));
        CHECK(g.topo.neighbors == oracle);
    }
}

TEST_CASE("single isolated vertex with identity weight passes through") {
    CrossDomainGraph g;
    g.x = Matrix(1, 3);
    g.x.at(0, 1) = 1.0;
    g.topo.neighbors.assign(1, {});
    g.topo.batch_rows = 1;
    auto out = gnn_forward(g, identity_layers(3, 1));
    CHECK(out == g.x);
}

TEST_CASE("two mutually-linked identical vertices keep their value") {
    CrossDomainGraph g;
    g.x = Matrix(2, 2);
    g.x.at(0, 0) = g.x.at(1, 0) = 0.6;
    g.x.at(0, 1) = g.x.at(1, 1) = 0.8;
    g.topo.neighbors = {{1}, {0}};
    g.topo.batch_rows = 2;
    auto out = gnn_forward(g, identity_layers(2, 1));
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(g.x.data[i]).epsilon(1e-12));
}

TEST_CASE("gnn_forward matches the dense oracle on random graphs") {
    Rng rng(23);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t v = 4 + rng() % 20;
        const std::size_t d = 5;
        auto input = random_unit_rows(rng, v, d);
        auto g = build_graph(input, Matrix(0, 0), Matrix(0, 0), 1 + rng() % 4);
        auto layers = init_affine_stack(1000 + trial, {d, d, d});
        auto out = gnn_forward(g, layers);
        auto ref = dense_gnn_oracle(g, layers);
        for (std::size_t i = 0; i < out.data.size(); ++i)
            CHECK(std::abs(out.data[i] - ref.data[i]) <= 1e-10);
        for (std::size_t i = 0; i < out.rows; ++i) {
            double n = 0.0;
            for (std::size_t j = 0; j < d; ++j) n += out.at(i, j) * out.at(i, j);
            CHECK(std::abs(n - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("permuting memory rows with a matching adjacency relabel is a no-op") {
    Rng rng(31);
    const std::size_t b = 3, c = 6, d = 4;
    auto input = random_unit_rows(rng, b, d);
    auto mem = random_unit_rows(rng, c, d);
    auto g = build_graph(input, mem, Matrix(0, 0), 3);
    auto layers = init_affine_stack(55, {d, d, d});
    auto base = gnn_forward(g, layers);

    // reverse the memory rows and relabel the adjacency accordingly
    CrossDomainGraph p;
    p.x = g.x;
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < d; ++j)
            p.x.at(b + i, j) = g.x.at(b + (c - 1 - i), j);
    auto relabel = [&](std::uint32_t v) {
        if (v < b) return v;
        return static_cast<std::uint32_t>(b + (c - 1 - (v - b)));
    };
    p.topo = g.topo;
    for (std::size_t j = 0; j < g.topo.neighbors.size(); ++j) {
        const std::size_t pj = j < b ? j : b + (c - 1 - (j - b));
        p.topo.neighbors[pj].clear();
        for (auto v : g.topo.neighbors[j]) p.topo.neighbors[pj].push_back(relabel(v));
    }
    auto permuted = gnn_forward(p, layers);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < d; ++j)
            CHECK(std::abs(permuted.at(i, j) - base.at(i, j)) <= 1e-12);
}

TEST_CASE("extract_domain_aware slices the batch rows") {
    Rng rng(3);
    auto m = random_unit_rows(rng, 4, 3);
    auto whole = extract_domain_aware(m, 4, Domain::Target, Modality::Image);
    CHECK(whole.features == m);
    auto none = extract_domain_aware(m, 0, Domain::Target, Modality::Image);
    CHECK(none.features.rows == 0);
    auto one = extract_domain_aware(m, 1, Domain::Target, Modality::Text);
    REQUIRE(one.features.rows == 1);
    for (std::size_t j = 0; j < 3; ++j) CHECK(one.features.at(0, j) == m.at(0, j));
    CHECK(one.role == FeatureRole::TargetText);
}

TEST_CASE("gnn gradients match finite differences") {
    Rng rng(41);
    const std::size_t v = 7, d = 4, b = 3;
    auto input = random_unit_rows(rng, v, d);
    auto g = build_graph(input, Matrix(0, 0), Matrix(0, 0), 2);
    g.topo.batch_rows = b;
    auto layers = init_affine_stack(91, {d, d, d});
    auto w = gaussian_matrix(rng, v, d);  // fixed linear functional over all rows

    auto loss_of = [&](const CrossDomainGraph& graph,
                       const std::vector<GnnLayerParams>& ls) {
        auto out = gnn_forward(graph, ls);
        double s = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * w.data[i];
        return s;
    };

    GnnCache cache;
    gnn_forward(g, layers, &cache);
    auto grads = zeros_like(layers);
    Matrix d_x = gnn_backward(g.topo, layers, cache, w, grads);

    const double h = 1e-6;
    double max_rel = 0.0;
    auto rel = [](double a, double f) {
        return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6});
    };
    for (std::size_t l = 0; l < layers.size(); ++l)
        for (std::size_t k = 0; k < layers[l].w.data.size(); k += 3) {
            auto probe = layers;
            probe[l].w.data[k] += h;
            const double up = loss_of(g, probe);
            probe[l].w.data[k] -= 2 * h;
            const double down = loss_of(g, probe);
            max_rel = std::max(max_rel, rel(grads[l].w.data[k], (up - down) / (2 * h)));
        }
    // input-feature gradients
    for (std::size_t k = 0; k < g.x.data.size(); k += 5) {
        auto probe = g;
        probe.x.data[k] += h;
        const double up = loss_of(probe, layers);
        probe.x.data[k] -= 2 * h;
        const double down = loss_of(probe, layers);
        max_rel = std::max(max_rel, rel(d_x.data[k], (up - down) / (2 * h)));
    }
    CHECK(max_rel < 1e-4);
}
