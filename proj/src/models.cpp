#include "ultr/models.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ultr {

Eigen::MatrixXd xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("xavier_init: positive dims required");
    double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    return Eigen::MatrixXd::NullaryExpr(rows, cols,
                                        [&](Eigen::Index, Eigen::Index) { return rng.uniform(-a, a); });
}

double LinearModel::score(const Eigen::VectorXd& x) const {
    if (x.size() != weights.size())
        throw std::invalid_argument("LinearModel::score: dimension mismatch");
    return weights.dot(x) + bias;
}

double linear_score(const LinearModel& model, const Eigen::VectorXd& x) {
    return model.score(x);
}

MlpModel MlpModel::make(int input_dim, const std::vector<int>& hidden, double dropout_p,
                        Rng& rng) {
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw std::invalid_argument("MlpModel::make: dropout_p in [0,1) required");
    MlpModel m;
    m.dropout_p = dropout_p;
    int in = input_dim;
    for (int h : hidden) {
        m.W.push_back(xavier_init(h, in, rng));
        m.b.push_back(Eigen::VectorXd::Zero(h));
        in = h;
    }
    m.W.push_back(xavier_init(1, in, rng));
    m.b.push_back(Eigen::VectorXd::Zero(1));
    return m;
}

namespace {

inline double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
inline double elu_grad(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

}  // namespace

Eigen::RowVectorXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& X, bool training,
                               Rng* rng, MlpCache* cache) {
    if (X.rows() != model.input_dim())
        throw std::invalid_argument("mlp_forward: feature dimension mismatch");
    const int L = model.n_layers();
    if (cache) {
        cache->inputs.assign(static_cast<std::size_t>(L), {});
        cache->pre.assign(static_cast<std::size_t>(L), {});
        cache->mask.assign(static_cast<std::size_t>(L - 1), {});
    }
    Eigen::MatrixXd a = X;
    for (int l = 0; l < L; ++l) {
        if (cache) cache->inputs[static_cast<std::size_t>(l)] = a;
        Eigen::MatrixXd z = (model.W[size_t(l)] * a).colwise() + model.b[size_t(l)];
        if (cache) cache->pre[static_cast<std::size_t>(l)] = z;
        if (l + 1 < L) {
            a = z.unaryExpr([](double v) { return elu(v); });
            if (training && model.dropout_p > 0.0) {
                if (!rng) throw std::invalid_argument("mlp_forward: training dropout needs rng");
                double keep = 1.0 - model.dropout_p;
                Eigen::MatrixXd mask = Eigen::MatrixXd::NullaryExpr(
                    a.rows(), a.cols(),
                    [&](Eigen::Index, Eigen::Index) { return rng->bernoulli(keep) ? 1.0 / keep : 0.0; });
                a = a.cwiseProduct(mask);
                if (cache) cache->mask[static_cast<std::size_t>(l)] = std::move(mask);
            }
        } else {
            a = z;
        }
    }
    return a.row(0);
}

double mlp_score(const MlpModel& model, const Eigen::VectorXd& x) {
    return mlp_forward(model, x, false, nullptr, nullptr)(0);
}

MlpGrads MlpGrads::zeros_like(const MlpModel& model) {
    MlpGrads g;
    for (const auto& w : model.W) g.dW.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : model.b) g.db.push_back(Eigen::VectorXd::Zero(b.size()));
    return g;
}

MlpGrads mlp_backward(const MlpModel& model, const MlpCache& cache,
                      const Eigen::RowVectorXd& upstream) {
    const int L = model.n_layers();
    if (static_cast<int>(cache.inputs.size()) != L)
        throw std::invalid_argument("mlp_backward: cache does not match model");
    MlpGrads g;
    g.dW.resize(static_cast<std::size_t>(L));
    g.db.resize(static_cast<std::size_t>(L));
    Eigen::MatrixXd delta = upstream;  // 1 x B
    for (int l = L - 1; l >= 0; --l) {
        const auto& a_in = cache.inputs[static_cast<std::size_t>(l)];
        g.dW[size_t(l)] = delta * a_in.transpose();
        g.db[size_t(l)] = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd back = model.W[size_t(l)].transpose() * delta;
        const auto& mask = cache.mask[static_cast<std::size_t>(l - 1)];
        if (mask.size() > 0) back = back.cwiseProduct(mask);
        const auto& z = cache.pre[static_cast<std::size_t>(l - 1)];
        delta = back.binaryExpr(z, [](double d, double zz) { return d * elu_grad(zz); });
    }
    return g;
}

void AdamState::step(const std::vector<Eigen::MatrixXd*>& params,
                     const std::vector<const Eigen::MatrixXd*>& grads,
                     const std::vector<bool>& decay) {
    if (params.size() != grads.size() || params.size() != decay.size())
        throw std::invalid_argument("AdamState::step: block count mismatch");
    if (m.empty()) {
        for (const auto* p : params) {
            m.push_back(Eigen::ArrayXXd::Zero(p->rows(), p->cols()));
            v.push_back(Eigen::ArrayXXd::Zero(p->rows(), p->cols()));
        }
    }
    if (m.size() != params.size())
        throw std::invalid_argument("AdamState::step: block count changed");
    ++t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Eigen::ArrayXXd g = grads[i]->array();
        if (!g.isFinite().all())
            throw std::runtime_error("AdamState::step: non-finite gradient in block " +
                                     std::to_string(i));
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g.square();
        Eigen::ArrayXXd mhat = m[i] / bc1;
        Eigen::ArrayXXd vhat = v[i] / bc2;
        Eigen::ArrayXXd update = lr * mhat / (vhat.sqrt() + eps);
        if (decay[i] && weight_decay > 0.0) update += lr * weight_decay * params[i]->array();
        params[i]->array() -= update;
    }
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& mat) {
    char buf[64];
    out << mat.rows() << ' ' << mat.cols() << '\n';
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
        for (Eigen::Index c = 0; c < mat.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", mat(r, c));
            out << buf << (c + 1 < mat.cols() ? ' ' : '\n');
        }
    }
}

Eigen::MatrixXd read_matrix(std::istream& in) {
    Eigen::Index rows, cols;
    if (!(in >> rows >> cols) || rows < 0 || cols < 0)
        throw std::runtime_error("read_matrix: bad header");
    Eigen::MatrixXd mat(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            if (!(in >> mat(r, c))) throw std::runtime_error("read_matrix: truncated data");
    return mat;
}

}  // namespace ultr
