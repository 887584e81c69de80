#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ultr/dataset.hpp"

namespace ultr {

// Deterministic linear logging policy.
struct LoggingPolicy {
    Eigen::VectorXd weights;
};

struct RankedList {
    long query_id = 0;
    std::vector<int> order;      // doc indices, best first (position 1..K)
    std::vector<int> position;   // per doc index, 1-based
    std::vector<bool> selected;  // per doc index, position <= k_cutoff
};

// Pairwise hinge-loss linear ranker trained on a random fraction of the
// queries' labeled docs. Throws if the sample contains no preference pair.
LoggingPolicy train_logging_policy(const Dataset& data, double sample_fraction,
                                   std::uint64_t seed);

// Sort by descending policy score, ties broken by ascending doc_id.
RankedList rank_query(const LoggingPolicy& policy, const QueryGroup& group, int k_cutoff);

void write_policy(const LoggingPolicy& policy, std::ostream& out);
LoggingPolicy read_policy(std::istream& in);

}  // namespace ultr
