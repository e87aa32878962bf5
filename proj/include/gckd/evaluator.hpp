#pragma once

#include <map>
#include <vector>

#include "gckd/numerics.hpp"

namespace gckd {

struct RetrievalIndex {
    Matrix gallery;  // image embeddings, unit rows
    std::vector<int> gallery_ids;
    Matrix queries;  // text embeddings, unit rows
    std::vector<int> query_ids;
};

struct MetricsReport {
    std::map<std::size_t, double> rank_at;  // percentage per requested K
    double map = 0.0;                       // mean average precision x100
    std::vector<double> average_precisions; // per included query
    std::size_t excluded_queries = 0;       // query identity missing from gallery

    double rank1 = 0.0;
    double rank5 = 0.0;
    double rank10 = 0.0;
};

// Ranks the gallery per query by cosine similarity (ties -> lower gallery
// index). Rank-K is the percentage of queries with a correct identity in the
// top K; AP is computed over all correct gallery items.
MetricsReport evaluate(const RetrievalIndex& index,
                       const std::vector<std::size_t>& ks = {1, 5, 10});

}  // namespace gckd
