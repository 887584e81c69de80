#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "ultr/metrics.hpp"
#include "ultr/policy.hpp"
#include "ultr/rng.hpp"

using namespace ultr;

namespace {

// one feature equal to the binary label plus noise dims: linearly separable
Dataset separable_dataset(int n_queries, int docs_per_query, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.feature_dim = 3;
    for (int q = 0; q < n_queries; ++q) {
        QueryGroup g;
        g.query_id = q + 1;
        for (int i = 0; i < docs_per_query; ++i) {
            Doc doc;
            doc.doc_id = i;
            doc.binary_label = rng.bernoulli(0.4) ? 1 : 0;
            doc.grade = doc.binary_label ? 4 : 0;
            doc.features = Eigen::VectorXd(3);
            doc.features << static_cast<double>(doc.binary_label), rng.normal(), rng.normal();
            g.docs.push_back(doc);
        }
        d.groups.push_back(g);
    }
    return d;
}

double pairwise_accuracy(const LoggingPolicy& policy, const Dataset& d) {
    long good = 0, total = 0;
    for (const auto& g : d.groups)
        for (const auto& a : g.docs)
            for (const auto& b : g.docs) {
                if (a.binary_label <= b.binary_label) continue;
                ++total;
                if (policy.weights.dot(a.features) > policy.weights.dot(b.features)) ++good;
            }
    return total ? static_cast<double>(good) / static_cast<double>(total) : 1.0;
}

}  // namespace

TEST_CASE("policy separates separable data") {
    Dataset d = separable_dataset(50, 10, 3);
    LoggingPolicy p = train_logging_policy(d, 1.0, 5);
    CHECK(pairwise_accuracy(p, d) > 0.99);
}

TEST_CASE("policy training is deterministic") {
    Dataset d = separable_dataset(30, 8, 4);
    LoggingPolicy a = train_logging_policy(d, 0.5, 7);
    LoggingPolicy b = train_logging_policy(d, 0.5, 7);
    CHECK(a.weights == b.weights);
}

TEST_CASE("policy training fails without preference pairs") {
    Dataset d = separable_dataset(10, 5, 3);
    for (auto& g : d.groups)
        for (auto& doc : g.docs) doc.binary_label = 0;  // no pair has a label gap
    CHECK_THROWS_WITH_AS(train_logging_policy(d, 1.0, 1), doctest::Contains("sample_fraction"),
                         std::runtime_error);
}

TEST_CASE("trained policy beats random ranking on held-out data") {
    Rng rng(5);
    Eigen::VectorXd beta(10);
    for (int i = 0; i < 10; ++i) beta(i) = rng.normal();
    beta.normalize();
    Dataset train = binarize_grades(generate_synthetic_ltr(1000, 10, 10, beta, 0.1, 12));
    Dataset test = binarize_grades(generate_synthetic_ltr(100, 10, 10, beta, 0.1, 13));

    auto ndcg5 = [&](auto score_fn) {
        double total = 0;
        int counted = 0;
        for (const auto& g : test.groups) {
            std::vector<int> order(g.docs.size());
            std::iota(order.begin(), order.end(), 0);
            std::vector<double> s(g.docs.size());
            for (std::size_t i = 0; i < g.docs.size(); ++i) s[i] = score_fn(g.docs[i]);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return s[size_t(a)] > s[size_t(b)]; });
            std::vector<int> labels;
            for (int i : order) labels.push_back(g.docs[size_t(i)].binary_label);
            double v = ndcg_at_k(labels, 5);
            bool any = false;
            for (const auto& doc : g.docs) any = any || doc.binary_label;
            if (any) {
                total += v;
                ++counted;
            }
        }
        return total / counted;
    };

    double policy_mean = 0, random_mean = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        LoggingPolicy p = train_logging_policy(train, 0.01, seed);
        policy_mean += ndcg5([&](const Doc& d) { return p.weights.dot(d.features); });
        Rng shuffle_rng(seed * 977);
        random_mean += ndcg5([&](const Doc&) { return shuffle_rng.uniform(); });
    }
    CHECK(policy_mean / 5.0 > random_mean / 5.0);
}

TEST_CASE("rank_query orders by score with doc_id ties") {
    LoggingPolicy p;
    p.weights = Eigen::VectorXd::Ones(1);
    QueryGroup g;
    g.query_id = 4;
    std::vector<double> scores = {0.9, 0.1, 0.5};
    for (int i = 0; i < 3; ++i) {
        Doc doc;
        doc.doc_id = i;
        doc.features = Eigen::VectorXd::Constant(1, scores[size_t(i)]);
        g.docs.push_back(doc);
    }
    RankedList r = rank_query(p, g, 2);
    CHECK(r.order == std::vector<int>{0, 2, 1});
    CHECK(r.position == std::vector<int>{1, 3, 2});
    CHECK(r.selected == std::vector<bool>{true, false, true});

    for (auto& doc : g.docs) doc.features(0) = 1.0;  // all ties -> doc_id order
    RankedList tie = rank_query(p, g, 3);
    CHECK(tie.order == std::vector<int>{0, 1, 2});
    for (bool s : tie.selected) CHECK(s);  // k >= K selects everything

    RankedList again = rank_query(p, g, 3);
    CHECK(again.order == tie.order);
}

TEST_CASE("policy round-trips through the text format") {
    LoggingPolicy p;
    p.weights = Eigen::VectorXd(3);
    p.weights << 0.125, -3.5, 1e-9;
    std::ostringstream out;
    write_policy(p, out);
    std::istringstream in(out.str());
    LoggingPolicy q = read_policy(in);
    CHECK(p.weights == q.weights);
}
