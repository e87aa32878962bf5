#include "gckd/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gckd/errors.hpp"
#include "gckd/kernels.hpp"

namespace gckd {

namespace {

void check_unit_rows(const Matrix& m, const char* what) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double sq = kernels::squared_norm(m.row(i), m.cols);
        if (std::abs(sq - 1.0) > 1e-6)
            throw UsageError(std::string(what) + ": rows must be unit norm");
    }
}

}  // namespace

MetricsReport evaluate(const RetrievalIndex& index, const std::vector<std::size_t>& ks) {
    if (index.gallery.rows == 0 || index.queries.rows == 0)
        throw UsageError("evaluate: empty gallery or query set");
    if (index.gallery_ids.size() != index.gallery.rows ||
        index.query_ids.size() != index.queries.rows)
        throw ShapeError("evaluate: id arrays must align with the matrices");
    if (index.gallery.cols != index.queries.cols)
        throw ShapeError("evaluate: gallery/query width mismatch");
    check_unit_rows(index.gallery, "gallery");
    check_unit_rows(index.queries, "queries");

    MetricsReport rep;
    std::map<std::size_t, std::size_t> hits;
    for (auto k : ks) hits[k] = 0;

    std::vector<std::size_t> order(index.gallery.rows);
    Vector sims(index.gallery.rows);
    for (std::size_t qi = 0; qi < index.queries.rows; ++qi) {
        const int qid = index.query_ids[qi];
        const bool present =
            std::find(index.gallery_ids.begin(), index.gallery_ids.end(), qid) !=
            index.gallery_ids.end();
        if (!present) {
            rep.excluded_queries += 1;
            continue;
        }
        for (std::size_t g = 0; g < index.gallery.rows; ++g)
            sims[g] = kernels::dot(index.queries.row(qi), index.gallery.row(g),
                                   index.gallery.cols);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (sims[a] != sims[b]) return sims[a] > sims[b];
            return a < b;
        });

        std::size_t first_correct_rank = 0;  // 1-based
        std::size_t correct_seen = 0;
        double ap_sum = 0.0;
        for (std::size_t r = 0; r < order.size(); ++r) {
            if (index.gallery_ids[order[r]] == qid) {
                ++correct_seen;
                ap_sum += static_cast<double>(correct_seen) / static_cast<double>(r + 1);
                if (first_correct_rank == 0) first_correct_rank = r + 1;
            }
        }
        rep.average_precisions.push_back(ap_sum / static_cast<double>(correct_seen));
        for (auto k : ks)
            if (first_correct_rank != 0 && first_correct_rank <= k) hits[k] += 1;
    }

    const std::size_t included = index.queries.rows - rep.excluded_queries;
    if (included == 0) throw UsageError("evaluate: no query identity appears in the gallery");
    for (auto k : ks)
        rep.rank_at[k] = 100.0 * static_cast<double>(hits[k]) / static_cast<double>(included);
    rep.map = 100.0 *
              std::accumulate(rep.average_precisions.begin(), rep.average_precisions.end(),
                              0.0) /
              static_cast<double>(included);
    if (rep.rank_at.count(1)) rep.rank1 = rep.rank_at.at(1);
    if (rep.rank_at.count(5)) rep.rank5 = rep.rank_at.at(5);
    if (rep.rank_at.count(10)) rep.rank10 = rep.rank_at.at(10);
    return rep;
}

}  // namespace gckd
