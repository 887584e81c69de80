#include "ultr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ultr/estimators.hpp"

namespace ultr {

namespace {

double dcg_at_k(const std::vector<int>& labels, int k) {
    double dcg = 0.0;
    int n = std::min<int>(k, static_cast<int>(labels.size()));
    for (int pos = 0; pos < n; ++pos)
        dcg += (std::exp2(labels[size_t(pos)]) - 1.0) / std::log2(pos + 2.0);
    return dcg;
}

}  // namespace

double ndcg_at_k(const std::vector<int>& ranked_labels, int k) {
    if (k < 1) throw std::invalid_argument("ndcg_at_k: k >= 1 required");
    for (int l : ranked_labels)
        if (l < 0) throw std::invalid_argument("ndcg_at_k: labels must be non-negative");
    std::vector<int> ideal = ranked_labels;
    std::sort(ideal.begin(), ideal.end(), std::greater<int>());
    double idcg = dcg_at_k(ideal, k);
    if (idcg <= 0.0) return 0.0;
    return dcg_at_k(ranked_labels, k) / idcg;
}

double average_precision(const std::vector<int>& ranked_binary_labels) {
    int hits = 0;
    double sum = 0.0;
    for (std::size_t pos = 0; pos < ranked_binary_labels.size(); ++pos) {
        int l = ranked_binary_labels[pos];
        if (l != 0 && l != 1)
            throw std::invalid_argument("average_precision: labels must be binary");
        if (l == 1) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
        }
    }
    if (hits == 0) return 0.0;
    return sum / hits;
}

MetricsReport evaluate(const TrainedRanker& ranker, const Dataset& test, bool graded) {
    if (test.groups.empty()) throw std::invalid_argument("evaluate: empty test set");
    MetricsReport report;
    double ndcg1 = 0.0, ndcg3 = 0.0, map = 0.0;
    int ndcg_queries = 0;
    for (const auto& group : test.groups) {
        std::vector<int> order = ranker.rank(group);
        std::vector<int> gain_labels(order.size()), bin_labels(order.size());
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const Doc& d = group.docs[size_t(order[pos])];
            gain_labels[pos] = graded ? d.grade : d.binary_label;
            bin_labels[pos] = d.binary_label;
        }
        bool has_gain = std::any_of(gain_labels.begin(), gain_labels.end(),
                                    [](int l) { return l > 0; });
        if (has_gain) {
            ndcg1 += ndcg_at_k(gain_labels, 1);
            ndcg3 += ndcg_at_k(gain_labels, 3);
            ++ndcg_queries;
        }
        map += average_precision(bin_labels);
    }
    report.n_queries = static_cast<int>(test.groups.size());
    report.ndcg_at_1 = ndcg_queries > 0 ? ndcg1 / ndcg_queries : 0.0;
    report.ndcg_at_3 = ndcg_queries > 0 ? ndcg3 / ndcg_queries : 0.0;
    report.map = map / static_cast<double>(test.groups.size());
    return report;
}

}  // namespace ultr
