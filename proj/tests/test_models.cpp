#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ultr/models.hpp"
#include "ultr/numerics.hpp"

using namespace ultr;

namespace {

Eigen::VectorXd pack(const MlpModel& m) {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < m.W.size(); ++l) total += m.W[l].size() + m.b[l].size();
    Eigen::VectorXd out(total);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        out.segment(at, m.W[l].size()) = Eigen::Map<const Eigen::VectorXd>(m.W[l].data(), m.W[l].size());
        at += m.W[l].size();
        out.segment(at, m.b[l].size()) = m.b[l];
        at += m.b[l].size();
    }
    return out;
}

void unpack(MlpModel& m, const Eigen::VectorXd& v) {
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        m.W[l] = Eigen::Map<const Eigen::MatrixXd>(v.data() + at, m.W[l].rows(), m.W[l].cols());
        at += m.W[l].size();
        m.b[l] = v.segment(at, m.b[l].size());
        at += m.b[l].size();
    }
}

Eigen::VectorXd pack_grads(const MlpModel& m, const MlpGrads& g) {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < m.W.size(); ++l) total += m.W[l].size() + m.b[l].size();
    Eigen::VectorXd out(total);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
        out.segment(at, g.dW[l].size()) =
            Eigen::Map<const Eigen::VectorXd>(g.dW[l].data(), g.dW[l].size());
        at += g.dW[l].size();
        out.segment(at, g.db[l].size()) = g.db[l];
        at += g.db[l].size();
    }
    return out;
}

}  // namespace

TEST_CASE("xavier init stays within the fan bound") {
    Rng rng(2);
    Eigen::MatrixXd m = xavier_init(2, 3, rng);
    double bound = std::sqrt(6.0 / 5.0);
    CHECK((m.array().abs() <= bound).all());

    Rng a(9), b(9);
    CHECK(xavier_init(4, 4, a) == xavier_init(4, 4, b));

    Rng big(5);
    Eigen::MatrixXd wide = xavier_init(100, 100, big);
    double bound2 = std::sqrt(6.0 / 200.0);
    // uniform on [-a, a]: sd = a/sqrt(3); mean of 10^4 draws within 3 sigma of 0
    double sigma_mean = bound2 / std::sqrt(3.0) / 100.0;
    CHECK(std::fabs(wide.mean()) < 3.0 * sigma_mean);
}

TEST_CASE("linear score is a dot product plus bias") {
    LinearModel m;
    m.weights = Eigen::VectorXd(2);
    m.weights << 1.0, 2.0;
    Eigen::VectorXd x(2);
    x << 3.0, 4.0;
    CHECK(linear_score(m, x) == doctest::Approx(11.0));
    m.bias = -1.0;
    CHECK(m.score(x) == doctest::Approx(10.0));
    m.weights.setZero();
    m.bias = 0.0;
    CHECK(m.score(x) == 0.0);
    CHECK_THROWS(linear_score(m, Eigen::VectorXd::Zero(3)));
}

TEST_CASE("mlp with zero parameters scores zero") {
    Rng rng(1);
    MlpModel m = MlpModel::make(3, {4, 2}, 0.0, rng);
    for (auto& W : m.W) W.setZero();
    for (auto& b : m.b) b.setZero();
    CHECK(mlp_score(m, Eigen::VectorXd::Random(3)) == 0.0);
}

TEST_CASE("mlp inference is deterministic, training dropout is not") {
    Rng rng(4);
    MlpModel m = MlpModel::make(5, {8, 4}, 0.5, rng);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 3);
    Eigen::RowVectorXd a = mlp_forward(m, X, false, nullptr, nullptr);
    Eigen::RowVectorXd b = mlp_forward(m, X, false, nullptr, nullptr);
    CHECK(a == b);
    CHECK(mlp_score(m, X.col(1)) == doctest::Approx(a(1)).epsilon(1e-12));

    Rng drop(6);
    Eigen::RowVectorXd c = mlp_forward(m, X, true, &drop, nullptr);
    Eigen::RowVectorXd d = mlp_forward(m, X, true, &drop, nullptr);
    CHECK(c != d);
}

TEST_CASE("backward matches finite differences on a 3-layer net") {
    Rng rng(12);
    MlpModel model = MlpModel::make(4, {6, 3}, 0.0, rng);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 5);
    Eigen::RowVectorXd upstream(5);
    upstream << 0.7, -1.2, 0.4, 2.0, -0.3;

    MlpCache cache;
    Eigen::RowVectorXd scores = mlp_forward(model, X, false, nullptr, &cache);
    (void)scores;
    MlpGrads grads = mlp_backward(model, cache, upstream);
    Eigen::VectorXd analytic = pack_grads(model, grads);

    MlpModel probe = model;
    auto loss = [&](const Eigen::VectorXd& v) {
        unpack(probe, v);
        Eigen::RowVectorXd s = mlp_forward(probe, X, false, nullptr, nullptr);
        return (s.array() * upstream.array()).sum();
    };
    auto report = grad_check(loss, pack(model), analytic, 1e-5);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("zero upstream yields zero gradients") {
    Rng rng(3);
    MlpModel model = MlpModel::make(3, {4}, 0.0, rng);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 2);
    MlpCache cache;
    mlp_forward(model, X, false, nullptr, &cache);
    MlpGrads grads = mlp_backward(model, cache, Eigen::RowVectorXd::Zero(2));
    for (const auto& dW : grads.dW) CHECK(dW.isZero(0.0));
    for (const auto& db : grads.db) CHECK(db.isZero(0.0));
}

TEST_CASE("single linear layer gradient is upstream times input") {
    Rng rng(8);
    MlpModel model = MlpModel::make(3, {}, 0.0, rng);
    REQUIRE(model.n_layers() == 1);
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 4);
    Eigen::RowVectorXd upstream = Eigen::RowVectorXd::Random(4);
    MlpCache cache;
    mlp_forward(model, X, false, nullptr, &cache);
    MlpGrads grads = mlp_backward(model, cache, upstream);
    Eigen::MatrixXd want = X * upstream.transpose();
    CHECK(grads.dW[0].transpose().isApprox(want, 1e-12));
    CHECK(grads.db[0](0) == doctest::Approx(upstream.sum()).epsilon(1e-12));
}

TEST_CASE("optimizer leaves params alone with zero gradients") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Random(2, 2);
    Eigen::MatrixXd p0 = p;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
    AdamState adam;
    adam.step({&p}, {&g}, {false});
    CHECK(p == p0);
}

TEST_CASE("optimizer descends monotonically under a constant gradient") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, 1, 5.0);
    Eigen::MatrixXd g = Eigen::MatrixXd::Constant(1, 1, 2.0);
    AdamState adam;
    adam.lr = 0.01;
    double prev = p(0, 0);
    for (int t = 0; t < 200; ++t) {
        adam.step({&p}, {&g}, {false});
        CHECK(p(0, 0) < prev);
        prev = p(0, 0);
    }
}

TEST_CASE("optimizer solves a quadratic bowl") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(1, 1);
    AdamState adam;
    adam.lr = 1e-2;
    for (int t = 0; t < 5000; ++t) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Constant(1, 1, p(0, 0) - 3.0);
        adam.step({&p}, {&g}, {false});
        if (std::fabs(p(0, 0) - 3.0) < 1e-3) break;
    }
    CHECK(std::fabs(p(0, 0) - 3.0) < 1e-3);
}

TEST_CASE("optimizer rejects non-finite gradients") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(1, 1);
    Eigen::MatrixXd g = Eigen::MatrixXd::Constant(1, 1, std::nan(""));
    AdamState adam;
    CHECK_THROWS(adam.step({&p}, {&g}, {false}));
}

TEST_CASE("decoupled weight decay shrinks weights even at zero gradient") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, 1, 1.0);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(1, 1);
    AdamState adam;
    adam.weight_decay = 0.1;
    adam.step({&p}, {&g}, {true});
    CHECK(p(0, 0) < 1.0);
    CHECK(p(0, 0) > 0.9);
}

TEST_CASE("matrix text round-trip") {
    Eigen::MatrixXd m(2, 3);
    m << 1.0, -0.5, 1e-12, 3.25, 7.0, -2.0 / 3.0;
    std::ostringstream out;
    write_matrix(out, m);
    std::istringstream in(out.str());
    Eigen::MatrixXd back = read_matrix(in);
    CHECK(back.rows() == 2);
    CHECK(back.cols() == 3);
    CHECK(back.isApprox(m, 1e-15));
}
