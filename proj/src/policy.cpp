#include "ultr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "ultr/rng.hpp"

namespace ultr {

LoggingPolicy train_logging_policy(const Dataset& data, double sample_fraction,
                                   std::uint64_t seed) {
    if (sample_fraction <= 0.0 || sample_fraction > 1.0)
        throw std::invalid_argument("train_logging_policy: sample_fraction in (0,1] required");
    Rng rng(seed);
    std::vector<std::size_t> qidx(data.groups.size());
    std::iota(qidx.begin(), qidx.end(), 0);
    // Fisher-Yates, take the first m
    for (std::size_t i = qidx.size(); i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(qidx[i - 1], qidx[j]);
    }
    std::size_t m = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(sample_fraction * double(qidx.size()))));
    m = std::min(m, qidx.size());
    qidx.resize(m);

    // preference pairs (relevant, irrelevant) within each sampled query
    struct Pair {
        const Eigen::VectorXd* pos;
        const Eigen::VectorXd* neg;
    };
    std::vector<Pair> pairs;
    for (std::size_t q : qidx) {
        const auto& docs = data.groups[q].docs;
        for (const auto& a : docs)
            for (const auto& b : docs)
                if (a.binary_label == 1 && b.binary_label == 0)
                    pairs.push_back({&a.features, &b.features});
    }
    if (pairs.empty())
        throw std::runtime_error(
            "train_logging_policy: sampled queries contain no preference pair; "
            "increase sample_fraction");

    Eigen::VectorXd w = Eigen::VectorXd::Zero(data.feature_dim);
    const int epochs = 50;
    const double l2 = 1e-4;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = pairs.size(); i > 1; --i) {
            std::size_t j = rng.below(i);
            std::swap(pairs[i - 1], pairs[j]);
        }
        double lr = 0.1 / (1.0 + 0.1 * epoch);
        for (const auto& p : pairs) {
            Eigen::VectorXd diff = *p.pos - *p.neg;
            double margin = w.dot(diff);
            w *= (1.0 - lr * l2);
            if (margin < 1.0) w += lr * diff;
        }
    }
    return LoggingPolicy{std::move(w)};
}

RankedList rank_query(const LoggingPolicy& policy, const QueryGroup& group, int k_cutoff) {
    if (k_cutoff < 1) throw std::invalid_argument("rank_query: k_cutoff >= 1 required");
    const int n = static_cast<int>(group.docs.size());
    std::vector<double> score(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        score[static_cast<std::size_t>(i)] = policy.weights.dot(group.docs[size_t(i)].features);
    RankedList out;
    out.query_id = group.query_id;
    out.order.resize(static_cast<std::size_t>(n));
    std::iota(out.order.begin(), out.order.end(), 0);
    std::sort(out.order.begin(), out.order.end(), [&](int a, int b) {
        double sa = score[size_t(a)], sb = score[size_t(b)];
        if (sa != sb) return sa > sb;
        return group.docs[size_t(a)].doc_id < group.docs[size_t(b)].doc_id;
    });
    out.position.assign(static_cast<std::size_t>(n), 0);
    out.selected.assign(static_cast<std::size_t>(n), false);
    for (int pos = 0; pos < n; ++pos) {
        int doc = out.order[static_cast<std::size_t>(pos)];
        out.position[static_cast<std::size_t>(doc)] = pos + 1;
        out.selected[static_cast<std::size_t>(doc)] = (pos + 1 <= k_cutoff);
    }
    return out;
}

void write_policy(const LoggingPolicy& policy, std::ostream& out) {
    char buf[64];
    out << policy.weights.size() << '\n';
    for (Eigen::Index i = 0; i < policy.weights.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", policy.weights(i));
        out << buf << '\n';
    }
}

LoggingPolicy read_policy(std::istream& in) {
    Eigen::Index n;
    if (!(in >> n) || n < 0) throw std::runtime_error("read_policy: bad header");
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(in >> w(i))) throw std::runtime_error("read_policy: truncated file");
    return LoggingPolicy{std::move(w)};
}

}  // namespace ultr
