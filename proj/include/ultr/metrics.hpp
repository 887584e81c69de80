#pragma once

#include <vector>

#include "ultr/dataset.hpp"

namespace ultr {

struct TrainedRanker;  // estimators module

struct MetricsReport {
    double ndcg_at_1 = 0.0;
    double ndcg_at_3 = 0.0;
    double map = 0.0;
    int n_queries = 0;
};

// Gain 2^label - 1, discount 1/log2(position + 1), normalized by the ideal
// DCG@k. Returns 0 when the ideal DCG is 0.
double ndcg_at_k(const std::vector<int>& ranked_labels, int k);

// Mean of precision@rank over relevant positions; labels must be binary.
double average_precision(const std::vector<int>& ranked_binary_labels);

// Per-query metrics on labels in ranker order, macro-averaged. Queries with
// zero ideal DCG are excluded from the NDCG means. With graded=true NDCG uses
// the original 0..4 grades; MAP always uses binary labels.
MetricsReport evaluate(const TrainedRanker& ranker, const Dataset& test, bool graded = false);

}  // namespace ultr
