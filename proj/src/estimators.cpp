#include "ultr/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "ultr/numerics.hpp"

namespace ultr {

namespace {

constexpr double kPhiArgLo = -30.0;
constexpr double kPhiArgHi = 8.0;

// Feature/target access resolved against the dataset.
struct LogView {
    const ClickLog* log;
    const Dataset* data;
    std::vector<int> sel;    // indices of selected records
    std::vector<int> unsel;  // indices of unselected records

    LogView(const ClickLog& l, const Dataset& d) : log(&l), data(&d) {
        for (std::size_t i = 0; i < l.records.size(); ++i) {
            if (l.records[i].selected)
                sel.push_back(static_cast<int>(i));
            else
                unsel.push_back(static_cast<int>(i));
        }
    }

    const ClickRecord& rec(int i) const { return log->records[static_cast<std::size_t>(i)]; }

    const Eigen::VectorXd& x(int i) const {
        const auto& r = rec(i);
        return data->groups[static_cast<std::size_t>(r.group_index)]
            .docs[static_cast<std::size_t>(r.doc_index)]
            .features;
    }

    double target(int i) const {
        const auto& r = rec(i);
        return ips_reweight(r.clicked ? 1.0 : 0.0, r.propensity);
    }
};

// Adam over an MLP plus optional extra linear blocks.
struct MlpTrainerState {
    MlpModel mlp;
    AdamState opt;
    std::vector<Eigen::MatrixXd> b_as_mat;  // views of biases for the optimizer

    MlpTrainerState(int dim, const CldConfig& cfg, Rng& rng)
        : mlp(MlpModel::make(dim, cfg.hidden, cfg.dropout, rng)) {
        opt.lr = cfg.learning_rate;
        opt.weight_decay = cfg.l2;
    }

    void apply(const MlpGrads& grads) {
        std::vector<Eigen::MatrixXd*> params;
        std::vector<const Eigen::MatrixXd*> gptrs;
        std::vector<bool> decay;
        if (b_as_mat.empty())
            for (auto& b : mlp.b) b_as_mat.push_back(b);
        static thread_local std::vector<Eigen::MatrixXd> gb_mats;
        gb_mats.clear();
        for (const auto& gb : grads.db) gb_mats.push_back(gb);
        for (std::size_t l = 0; l < mlp.W.size(); ++l) {
            params.push_back(&mlp.W[l]);
            gptrs.push_back(&grads.dW[l]);
            decay.push_back(true);
        }
        for (std::size_t l = 0; l < mlp.b.size(); ++l) {
            params.push_back(&b_as_mat[l]);
            gptrs.push_back(&gb_mats[l]);
            decay.push_back(false);
        }
        opt.step(params, gptrs, decay);
        for (std::size_t l = 0; l < mlp.b.size(); ++l) mlp.b[l] = b_as_mat[l].col(0);
    }
};

Eigen::MatrixXd gather_columns(const LogView& view, const std::vector<int>& recs) {
    const int dim = view.data->feature_dim;
    Eigen::MatrixXd X(dim, static_cast<Eigen::Index>(recs.size()));
    for (std::size_t c = 0; c < recs.size(); ++c) X.col(static_cast<Eigen::Index>(c)) = view.x(recs[c]);
    return X;
}

// Squared-loss MLP regression on selected records toward per-record targets.
TrainedRanker train_pointwise_mlp(const ClickLog& log, const Dataset& data,
                                  const CldConfig& cfg, bool reweight) {
    cfg.validate();
    LogView view(log, data);
    if (view.sel.empty()) throw std::runtime_error("pointwise trainer: no selected records");
    Rng rng(mix_seed(cfg.seed, 0x706f696e74ULL));
    MlpTrainerState st(data.feature_dim, cfg, rng);
    TrainedRanker out;
    out.kind = TrainedRanker::Kind::mlp;
    std::vector<int> batch(static_cast<std::size_t>(cfg.batch_size));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int it = 0; it < cfg.batches_per_epoch; ++it) {
            for (auto& idx : batch) idx = view.sel[rng.below(view.sel.size())];
            Eigen::MatrixXd X = gather_columns(view, batch);
            Eigen::RowVectorXd t(static_cast<Eigen::Index>(batch.size()));
            for (std::size_t c = 0; c < batch.size(); ++c) {
                const auto& r = view.rec(batch[c]);
                t(static_cast<Eigen::Index>(c)) =
                    reweight ? view.target(batch[c]) : (r.clicked ? 1.0 : 0.0);
            }
            MlpCache cache;
            Eigen::RowVectorXd s = mlp_forward(st.mlp, X, true, &rng, &cache);
            Eigen::RowVectorXd resid = s - t;
            epoch_loss += resid.squaredNorm() / static_cast<double>(batch.size());
            Eigen::RowVectorXd upstream = 2.0 * resid / static_cast<double>(batch.size());
            st.apply(mlp_backward(st.mlp, cache, upstream));
        }
        out.epoch_loss.push_back(epoch_loss / cfg.batches_per_epoch);
    }
    out.mlp = std::move(st.mlp);
    return out;
}

// Pairwise logistic MLP trainer over (preferred, other) feature pairs.
TrainedRanker train_pairwise_mlp_bpr(const Dataset& data,
                                     const std::vector<std::pair<const Eigen::VectorXd*,
                                                                 const Eigen::VectorXd*>>& pairs,
                                     const CldConfig& cfg, std::uint64_t stream) {
    cfg.validate();
    if (pairs.empty()) throw std::runtime_error("pairwise trainer: no preference pairs");
    Rng rng(mix_seed(cfg.seed, stream));
    MlpTrainerState st(data.feature_dim, cfg, rng);
    TrainedRanker out;
    out.kind = TrainedRanker::Kind::mlp;
    const int B = cfg.batch_size;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int it = 0; it < cfg.batches_per_epoch; ++it) {
            Eigen::MatrixXd Xi(data.feature_dim, B), Xj(data.feature_dim, B);
            for (int c = 0; c < B; ++c) {
                const auto& p = pairs[rng.below(pairs.size())];
                Xi.col(c) = *p.first;
                Xj.col(c) = *p.second;
            }
            MlpCache ci, cj;
            Eigen::RowVectorXd si = mlp_forward(st.mlp, Xi, true, &rng, &ci);
            Eigen::RowVectorXd sj = mlp_forward(st.mlp, Xj, true, &rng, &cj);
            Eigen::RowVectorXd ui(B), uj(B);
            double loss = 0.0;
            for (int c = 0; c < B; ++c) {
                double d = si(c) - sj(c);
                loss -= log_sigmoid(d);
                double g = -(1.0 - sigmoid(d)) / B;
                ui(c) = g;
                uj(c) = -g;
            }
            epoch_loss += loss / B;
            MlpGrads gi = mlp_backward(st.mlp, ci, ui);
            MlpGrads gj = mlp_backward(st.mlp, cj, uj);
            for (std::size_t l = 0; l < gi.dW.size(); ++l) {
                gi.dW[l] += gj.dW[l];
                gi.db[l] += gj.db[l];
            }
            st.apply(gi);
        }
        out.epoch_loss.push_back(epoch_loss / cfg.batches_per_epoch);
    }
    out.mlp = std::move(st.mlp);
    return out;
}

std::vector<int> order_by_scores(const QueryGroup& group, const std::vector<double>& score) {
    std::vector<int> order(group.docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (score[size_t(a)] != score[size_t(b)]) return score[size_t(a)] > score[size_t(b)];
        return group.docs[size_t(a)].doc_id < group.docs[size_t(b)].doc_id;
    });
    return order;
}

}  // namespace

void CldConfig::validate() const {
    if (!(std::fabs(gamma) < 1.0)) throw std::invalid_argument("CldConfig: |gamma| < 1 required");
    if (learning_rate <= 0.0) throw std::invalid_argument("CldConfig: learning_rate > 0 required");
    if (epochs <= 0 || batch_size <= 0 || batches_per_epoch <= 0)
        throw std::invalid_argument("CldConfig: epochs/batch sizes must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("CldConfig: dropout in [0,1) required");
}

double TrainedRanker::score(const Eigen::VectorXd& x) const {
    switch (kind) {
        case Kind::linear:
            return linear.score(x);
        case Kind::mlp:
            return mlp_score(mlp, x);
        case Kind::borda:
            throw std::logic_error("TrainedRanker::score: borda rankers have no pointwise score");
    }
    throw std::logic_error("TrainedRanker::score: bad kind");
}

std::vector<int> TrainedRanker::rank(const QueryGroup& group) const {
    if (kind == Kind::borda) return rank_agg(*agg_a, *agg_b, group);
    std::vector<double> s(group.docs.size());
    for (std::size_t i = 0; i < group.docs.size(); ++i) s[i] = score(group.docs[i].features);
    return order_by_scores(group, s);
}

double score(const TrainedRanker& ranker, const Eigen::VectorXd& x) { return ranker.score(x); }

double ips_reweight(double c, double rho) {
    if (rho <= 0.0)
        throw std::invalid_argument("ips_reweight: rho must be positive (record unselected?)");
    return c / rho;
}

TrainedRanker train_naive(const ClickLog& log, const Dataset& data, const CldConfig& config) {
    return train_pointwise_mlp(log, data, config, /*reweight=*/false);
}

TrainedRanker train_ips(const ClickLog& log, const Dataset& data, const CldConfig& config) {
    return train_pointwise_mlp(log, data, config, /*reweight=*/true);
}

TrainedRanker train_heckman(const ClickLog& log, const Dataset& data, const CldConfig& config) {
    config.validate();
    LogView view(log, data);
    if (view.sel.empty() || view.unsel.empty())
        throw std::runtime_error("train_heckman: both selected and unselected records required");
    const int dim = data.feature_dim;
    Rng rng(mix_seed(config.seed, 0x6865636bULL));

    // stage 1: probit selection model over the full log
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim, 1);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(1, 1);
    AdamState opt;
    opt.lr = config.learning_rate;
    std::vector<int> all(log.records.size());
    std::iota(all.begin(), all.end(), 0);
    const int B = config.batch_size;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (int it = 0; it < config.batches_per_epoch; ++it) {
            Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(dim, 1);
            Eigen::MatrixXd gb = Eigen::MatrixXd::Zero(1, 1);
            double loss = 0.0;
            for (int c = 0; c < B; ++c) {
                int idx = all[rng.below(all.size())];
                const auto& x = view.x(idx);
                double u = w.col(0).dot(x) + b(0, 0);
                double du;
                if (view.rec(idx).selected) {
                    double uc = std::clamp(u, kPhiArgLo, kPhiArgHi);
                    loss -= log_norm_cdf(uc);
                    du = (u == uc) ? -inverse_mills(uc) : 0.0;
                } else {
                    double uc = std::clamp(u, -kPhiArgHi, -kPhiArgLo);
                    loss -= log_norm_cdf(-uc);
                    du = (u == uc) ? inverse_mills(-uc) : 0.0;
                }
                gw.col(0) += du / B * x;
                gb(0, 0) += du / B;
            }
            if (!std::isfinite(loss)) throw std::runtime_error("train_heckman: stage-1 divergence");
            opt.step({&w, &b}, {&gw, &gb}, {true, false});
        }
    }
    LinearModel omega{w.col(0), b(0, 0)};

    // stage 2: OLS of raw clicks on (x, inverse Mills) over selected records
    const int p = dim + 2;  // features, mills, intercept
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd z(p);
    for (int idx : view.sel) {
        const auto& x = view.x(idx);
        double u = std::clamp(omega.score(x), kPhiArgLo, kPhiArgHi);
        z.head(dim) = x;
        z(dim) = inverse_mills(u);
        z(dim + 1) = 1.0;
        xtx.noalias() += z * z.transpose();
        xty += (view.rec(idx).clicked ? 1.0 : 0.0) * z;
    }
    xtx.diagonal().array() += 1e-8;
    Eigen::VectorXd coef = xtx.ldlt().solve(xty);
    if (!coef.allFinite()) throw std::runtime_error("train_heckman: stage-2 solve failed");

    TrainedRanker out;
    out.kind = TrainedRanker::Kind::linear;
    out.linear.weights = coef.head(dim);
    out.linear.bias = coef(dim + 1);
    out.selection = omega;
    return out;
}

std::vector<int> rank_agg(const TrainedRanker& ranker_a, const TrainedRanker& ranker_b,
                          const QueryGroup& group) {
    const int n = static_cast<int>(group.docs.size());
    std::vector<int> order_a = ranker_a.rank(group);
    std::vector<int> order_b = ranker_b.rank(group);
    std::vector<double> borda(static_cast<std::size_t>(n), 0.0);
    for (int pos = 0; pos < n; ++pos) {
        borda[size_t(order_a[size_t(pos)])] += n - pos;
        borda[size_t(order_b[size_t(pos)])] += n - pos;
    }
    std::vector<double> tie(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) tie[size_t(i)] = ranker_a.score(group.docs[size_t(i)].features);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (borda[size_t(a)] != borda[size_t(b)]) return borda[size_t(a)] > borda[size_t(b)];
        if (tie[size_t(a)] != tie[size_t(b)]) return tie[size_t(a)] > tie[size_t(b)];
        return group.docs[size_t(a)].doc_id < group.docs[size_t(b)].doc_id;
    });
    return order;
}

TrainedRanker make_rank_agg(TrainedRanker ranker_a, TrainedRanker ranker_b) {
    TrainedRanker out;
    out.kind = TrainedRanker::Kind::borda;
    out.agg_a = std::make_shared<TrainedRanker>(std::move(ranker_a));
    out.agg_b = std::make_shared<TrainedRanker>(std::move(ranker_b));
    return out;
}

TrainedRanker train_oracle(const ClickLog& log, const Dataset& data, const CldConfig& config) {
    config.validate();
    // recover each query's top-k selected set from the log
    std::vector<std::vector<char>> selected(data.groups.size());
    for (std::size_t g = 0; g < data.groups.size(); ++g)
        selected[g].assign(data.groups[g].docs.size(), 0);
    for (const auto& r : log.records)
        if (r.selected) selected[size_t(r.group_index)][size_t(r.doc_index)] = 1;
    std::vector<std::pair<const Eigen::VectorXd*, const Eigen::VectorXd*>> pairs;
    for (std::size_t g = 0; g < data.groups.size(); ++g) {
        const auto& docs = data.groups[g].docs;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (!selected[g][i] || docs[i].binary_label != 1) continue;
            for (std::size_t j = 0; j < docs.size(); ++j)
                if (selected[g][j] && docs[j].binary_label == 0)
                    pairs.emplace_back(&docs[i].features, &docs[j].features);
        }
    }
    if (pairs.empty()) throw std::runtime_error("train_oracle: no labeled preference pairs in top-k");
    return train_pairwise_mlp_bpr(data, pairs, config, 0x6f7261636cULL);
}

PointwiseEval cld_pointwise_loss(const Eigen::VectorXd& x, double reweighted_click, bool selected,
                                 const LinearModel& beta, const LinearModel& omega, double gamma) {
    if (!(std::fabs(gamma) < 1.0))
        throw std::invalid_argument("cld_pointwise_loss: |gamma| < 1 required");
    PointwiseEval out;
    out.grad_beta = Eigen::VectorXd::Zero(x.size());
    out.grad_omega = Eigen::VectorXd::Zero(x.size());
    double u = omega.score(x);
    if (selected) {
        double resid = reweighted_click - beta.score(x);
        double s = std::sqrt(1.0 - gamma * gamma);
        double a = (u + gamma * resid) / s;
        double ac = std::clamp(a, kPhiArgLo, kPhiArgHi);
        out.loss = resid * resid - log_norm_cdf(ac);
        if (!std::isfinite(out.loss)) throw std::runtime_error("cld_pointwise_loss: non-finite loss");
        double mills = (a == ac) ? inverse_mills(ac) : 0.0;
        double dscore = -2.0 * resid + mills * gamma / s;  // d loss / d beta-score
        double du = -mills / s;                            // d loss / d omega-score
        out.grad_beta = dscore * x;
        out.grad_beta_bias = dscore;
        out.grad_omega = du * x;
        out.grad_omega_bias = du;
    } else {
        double uc = std::clamp(u, -kPhiArgHi, -kPhiArgLo);
        out.loss = -log_norm_cdf(-uc);
        if (!std::isfinite(out.loss)) throw std::runtime_error("cld_pointwise_loss: non-finite loss");
        double du = (u == uc) ? inverse_mills(-uc) : 0.0;
        out.grad_omega = du * x;
        out.grad_omega_bias = du;
    }
    return out;
}

namespace {

TrainedRanker train_cld_impl(const ClickLog& log, const Dataset& data, const CldConfig& cfg,
                             bool mlp_beta) {
    cfg.validate();
    LogView view(log, data);
    if (view.sel.empty() || view.unsel.empty())
        throw std::runtime_error("train_cld: both selected and unselected records required");
    const int dim = data.feature_dim;
    Rng rng(mix_seed(cfg.seed, 0x636c64ULL));
    const double s = std::sqrt(1.0 - cfg.gamma * cfg.gamma);

    // linear selection model shared by both variants
    Eigen::MatrixXd ow = Eigen::MatrixXd::Zero(dim, 1), ob = Eigen::MatrixXd::Zero(1, 1);
    AdamState omega_opt;
    omega_opt.lr = cfg.learning_rate;
    omega_opt.weight_decay = cfg.l2;

    // ranking model, either linear or MLP
    Eigen::MatrixXd bw = Eigen::MatrixXd::Zero(dim, 1), bb = Eigen::MatrixXd::Zero(1, 1);
    AdamState beta_opt;
    beta_opt.lr = cfg.learning_rate;
    beta_opt.weight_decay = cfg.l2;
    std::unique_ptr<MlpTrainerState> mlp_state;
    if (mlp_beta) mlp_state = std::make_unique<MlpTrainerState>(dim, cfg, rng);

    TrainedRanker out;
    const int B = cfg.batch_size;
    std::vector<int> batch(static_cast<std::size_t>(B));
    const std::size_t n_records = log.records.size();
    // Stratified minibatches: half selected, half unselected, reweighted by
    // stratum prevalence so the expected gradient matches the full-log
    // objective. Uniform sampling starves the regression term when the
    // cutoff keeps only a small share of each session selected.
    const int b_sel = B / 2;
    const double w_sel = static_cast<double>(view.sel.size()) / static_cast<double>(n_records) *
                         static_cast<double>(B) / static_cast<double>(b_sel);
    const double w_unsel = static_cast<double>(view.unsel.size()) /
                           static_cast<double>(n_records) * static_cast<double>(B) /
                           static_cast<double>(B - b_sel);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int it = 0; it < cfg.batches_per_epoch; ++it) {
            for (int c = 0; c < B; ++c)
                batch[size_t(c)] = c < b_sel ? view.sel[rng.below(view.sel.size())]
                                             : view.unsel[rng.below(view.unsel.size())];
            Eigen::MatrixXd X = gather_columns(view, batch);
            // ranking scores for the batch
            Eigen::RowVectorXd beta_score(B);
            MlpCache cache;
            if (mlp_beta) {
                beta_score = mlp_forward(mlp_state->mlp, X, true, &rng, &cache);
            } else {
                beta_score = (bw.col(0).transpose() * X).array() + bb(0, 0);
            }
            Eigen::RowVectorXd omega_score = (ow.col(0).transpose() * X).array() + ob(0, 0);

            Eigen::RowVectorXd beta_upstream = Eigen::RowVectorXd::Zero(B);
            Eigen::MatrixXd gow = Eigen::MatrixXd::Zero(dim, 1);
            Eigen::MatrixXd gob = Eigen::MatrixXd::Zero(1, 1);
            double loss = 0.0;
            for (int c = 0; c < B; ++c) {
                const auto& r = view.rec(batch[size_t(c)]);
                const double w = c < b_sel ? w_sel : w_unsel;
                double u = omega_score(c);
                double du;
                if (r.selected) {
                    double resid = view.target(batch[size_t(c)]) - beta_score(c);
                    double a = (u + cfg.gamma * resid) / s;
                    double ac = std::clamp(a, kPhiArgLo, kPhiArgHi);
                    loss += w * (resid * resid - log_norm_cdf(ac));
                    double mills = (a == ac) ? inverse_mills(ac) : 0.0;
                    beta_upstream(c) = w * (-2.0 * resid + mills * cfg.gamma / s) / B;
                    du = -mills / s;
                } else {
                    double uc = std::clamp(u, -kPhiArgHi, -kPhiArgLo);
                    loss += -w * log_norm_cdf(-uc);
                    du = (u == uc) ? inverse_mills(-uc) : 0.0;
                }
                gow.col(0) += w * du / B * X.col(c);
                gob(0, 0) += w * du / B;
            }
            if (!std::isfinite(loss)) throw std::runtime_error("train_cld: non-finite loss");
            epoch_loss += loss / B;
            if (mlp_beta) {
                mlp_state->apply(mlp_backward(mlp_state->mlp, cache, beta_upstream));
            } else {
                Eigen::MatrixXd gbw = X * beta_upstream.transpose();
                Eigen::MatrixXd gbb(1, 1);
                gbb(0, 0) = beta_upstream.sum();
                beta_opt.step({&bw, &bb}, {&gbw, &gbb}, {true, false});
            }
            omega_opt.step({&ow, &ob}, {&gow, &gob}, {true, false});
        }
        out.epoch_loss.push_back(epoch_loss / cfg.batches_per_epoch);
    }
    if (mlp_beta) {
        out.kind = TrainedRanker::Kind::mlp;
        out.mlp = std::move(mlp_state->mlp);
    } else {
        out.kind = TrainedRanker::Kind::linear;
        out.linear.weights = bw.col(0);
        out.linear.bias = bb(0, 0);
    }
    out.selection = LinearModel{ow.col(0), ob(0, 0)};
    return out;
}

}  // namespace

TrainedRanker train_cld(const ClickLog& log, const Dataset& data, const CldConfig& config) {
    return train_cld_impl(log, data, config, /*mlp_beta=*/false);
}

TrainedRanker train_cld_mlp(const ClickLog& log, const Dataset& data, const CldConfig& config) {
    return train_cld_impl(log, data, config, /*mlp_beta=*/true);
}

std::pair<std::vector<PreferencePair>, std::vector<PreferencePair>> build_pairs(
    const ClickLog& log, int uu_cap, std::uint64_t cap_seed) {
    std::vector<PreferencePair> pairs_s, pairs_u;
    std::size_t i = 0;
    const auto& recs = log.records;
    std::vector<PreferencePair> uu;
    while (i < recs.size()) {
        std::size_t j = i;
        while (j < recs.size() && recs[j].session == recs[i].session) ++j;
        // session records [i, j)
        for (std::size_t a = i; a < j; ++a) {
            for (std::size_t b = i; b < j; ++b) {
                if (a == b) continue;
                const auto& ra = recs[a];
                const auto& rb = recs[b];
                if (ra.selected && rb.selected) {
                    double ta = (ra.clicked ? 1.0 : 0.0) / ra.propensity;
                    double tb = (rb.clicked ? 1.0 : 0.0) / rb.propensity;
                    if (ta > tb) pairs_s.push_back({static_cast<int>(a), static_cast<int>(b)});
                } else if (ra.selected && !rb.selected) {
                    // mixed: only when the selected member was clicked; it leads
                    if (ra.clicked) pairs_u.push_back({static_cast<int>(a), static_cast<int>(b)});
                } else if (!ra.selected && !rb.selected) {
                    if (ra.doc_index < rb.doc_index)
                        uu.push_back({static_cast<int>(a), static_cast<int>(b)});
                }
            }
        }
        if (uu_cap >= 0 && uu.size() > static_cast<std::size_t>(uu_cap)) {
            Rng rng = Rng::stream(cap_seed, static_cast<std::uint64_t>(recs[i].session));
            for (std::size_t k = uu.size(); k > 1; --k) std::swap(uu[k - 1], uu[rng.below(k)]);
            uu.resize(static_cast<std::size_t>(uu_cap));
        }
        pairs_u.insert(pairs_u.end(), uu.begin(), uu.end());
        uu.clear();
        i = j;
    }
    return {std::move(pairs_s), std::move(pairs_u)};
}

PairEval cld_pair_objective(bool s_i, bool s_j, double fbeta_i, double fbeta_j, double fomega_i,
                            double fomega_j, CldConfig::Complement complement) {
    PairEval out;
    double diff = fbeta_i - fbeta_j;
    double ddiff = 0.0;
    if (s_i && s_j) {
        out.loss -= log_sigmoid(diff);
        ddiff += -(1.0 - sigmoid(diff));
    }
    if (s_i) {
        double a = fomega_i + diff;
        out.loss -= log_sigmoid(a);
        double g = -(1.0 - sigmoid(a));
        out.dsel_i += g;
        ddiff += g;
    } else {
        if (complement == CldConfig::Complement::literal) {
            double a = 1.0 - fomega_i;
            out.loss -= log_sigmoid(a);
            out.dsel_i += (1.0 - sigmoid(a));
        } else {
            out.loss -= log_sigmoid(-fomega_i);
            out.dsel_i += sigmoid(fomega_i);
        }
    }
    if (s_j) {
        double a = fomega_j + diff;
        out.loss -= log_sigmoid(a);
        double g = -(1.0 - sigmoid(a));
        out.dsel_j += g;
        ddiff += g;
    } else {
        if (complement == CldConfig::Complement::literal) {
            double a = 1.0 - fomega_j;
            out.loss -= log_sigmoid(a);
            out.dsel_j += (1.0 - sigmoid(a));
        } else {
            out.loss -= log_sigmoid(-fomega_j);
            out.dsel_j += sigmoid(fomega_j);
        }
    }
    out.dscore_i = ddiff;
    out.dscore_j = -ddiff;
    return out;
}

namespace {

TrainedRanker train_cld_pair_impl(const ClickLog& log, const Dataset& data, const CldConfig& cfg,
                                  bool mlp_beta) {
    cfg.validate();
    LogView view(log, data);
    auto [pairs_s, pairs_u] = build_pairs(log, cfg.uu_pairs_per_session_cap, cfg.seed);
    if (pairs_s.empty()) throw std::runtime_error("train_cld_pair: no selected preference pairs");
    std::vector<PreferencePair> pairs = pairs_s;
    pairs.insert(pairs.end(), pairs_u.begin(), pairs_u.end());

    const int dim = data.feature_dim;
    Rng rng(mix_seed(cfg.seed, 0x636c6470ULL));
    Eigen::MatrixXd ow = Eigen::MatrixXd::Zero(dim, 1), ob = Eigen::MatrixXd::Zero(1, 1);
    AdamState omega_opt;
    omega_opt.lr = cfg.learning_rate;
    omega_opt.weight_decay = cfg.l2;
    Eigen::MatrixXd bw = Eigen::MatrixXd::Zero(dim, 1), bb = Eigen::MatrixXd::Zero(1, 1);
    AdamState beta_opt;
    beta_opt.lr = cfg.learning_rate;
    beta_opt.weight_decay = cfg.l2;
    std::unique_ptr<MlpTrainerState> mlp_state;
    if (mlp_beta) mlp_state = std::make_unique<MlpTrainerState>(dim, cfg, rng);

    TrainedRanker out;
    const int B = cfg.batch_size;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int it = 0; it < cfg.batches_per_epoch; ++it) {
            Eigen::MatrixXd Xi(dim, B), Xj(dim, B);
            std::vector<const ClickRecord*> ri(static_cast<std::size_t>(B)),
                rj(static_cast<std::size_t>(B));
            for (int c = 0; c < B; ++c) {
                const auto& p = pairs[rng.below(pairs.size())];
                Xi.col(c) = view.x(p.i);
                Xj.col(c) = view.x(p.j);
                ri[size_t(c)] = &view.rec(p.i);
                rj[size_t(c)] = &view.rec(p.j);
            }
            Eigen::RowVectorXd fbi(B), fbj(B);
            MlpCache ci, cj;
            if (mlp_beta) {
                fbi = mlp_forward(mlp_state->mlp, Xi, true, &rng, &ci);
                fbj = mlp_forward(mlp_state->mlp, Xj, true, &rng, &cj);
            } else {
                fbi = (bw.col(0).transpose() * Xi).array() + bb(0, 0);
                fbj = (bw.col(0).transpose() * Xj).array() + bb(0, 0);
            }
            Eigen::RowVectorXd foi = (ow.col(0).transpose() * Xi).array() + ob(0, 0);
            Eigen::RowVectorXd foj = (ow.col(0).transpose() * Xj).array() + ob(0, 0);

            Eigen::RowVectorXd ui = Eigen::RowVectorXd::Zero(B), uj = Eigen::RowVectorXd::Zero(B);
            Eigen::MatrixXd gow = Eigen::MatrixXd::Zero(dim, 1);
            Eigen::MatrixXd gob = Eigen::MatrixXd::Zero(1, 1);
            double loss = 0.0;
            for (int c = 0; c < B; ++c) {
                PairEval ev = cld_pair_objective(ri[size_t(c)]->selected, rj[size_t(c)]->selected,
                                                 fbi(c), fbj(c), foi(c), foj(c),
                                                 cfg.selection_complement);
                loss += ev.loss;
                ui(c) = ev.dscore_i / B;
                uj(c) = ev.dscore_j / B;
                gow.col(0) += (ev.dsel_i / B) * Xi.col(c) + (ev.dsel_j / B) * Xj.col(c);
                gob(0, 0) += (ev.dsel_i + ev.dsel_j) / B;
            }
            if (!std::isfinite(loss)) throw std::runtime_error("train_cld_pair: non-finite loss");
            epoch_loss += loss / B;
            if (mlp_beta) {
                MlpGrads gi = mlp_backward(mlp_state->mlp, ci, ui);
                MlpGrads gj = mlp_backward(mlp_state->mlp, cj, uj);
                for (std::size_t l = 0; l < gi.dW.size(); ++l) {
                    gi.dW[l] += gj.dW[l];
                    gi.db[l] += gj.db[l];
                }
                mlp_state->apply(gi);
            } else {
                Eigen::MatrixXd gbw = Xi * ui.transpose() + Xj * uj.transpose();
                Eigen::MatrixXd gbb(1, 1);
                gbb(0, 0) = ui.sum() + uj.sum();
                beta_opt.step({&bw, &bb}, {&gbw, &gbb}, {true, false});
            }
            omega_opt.step({&ow, &ob}, {&gow, &gob}, {true, false});
        }
        out.epoch_loss.push_back(epoch_loss / cfg.batches_per_epoch);
    }
    if (mlp_beta) {
        out.kind = TrainedRanker::Kind::mlp;
        out.mlp = std::move(mlp_state->mlp);
    } else {
        out.kind = TrainedRanker::Kind::linear;
        out.linear.weights = bw.col(0);
        out.linear.bias = bb(0, 0);
    }
    out.selection = LinearModel{ow.col(0), ob(0, 0)};
    return out;
}

}  // namespace

TrainedRanker train_cld_pair(const ClickLog& log, const Dataset& data, const CldConfig& config) {
    return train_cld_pair_impl(log, data, config, /*mlp_beta=*/true);
}

TrainedRanker train_cld_pair_linear(const ClickLog& log, const Dataset& data,
                                    const CldConfig& config) {
    return train_cld_pair_impl(log, data, config, /*mlp_beta=*/false);
}

namespace {

void write_linear(std::ostream& out, const LinearModel& m) {
    write_matrix(out, m.weights);
    Eigen::MatrixXd b(1, 1);
    b(0, 0) = m.bias;
    write_matrix(out, b);
}

LinearModel read_linear(std::istream& in) {
    LinearModel m;
    m.weights = read_matrix(in);
    m.bias = read_matrix(in)(0, 0);
    return m;
}

}  // namespace

void write_ranker(const TrainedRanker& ranker, std::ostream& out) {
    out << "ultr-ranker 1\n";
    switch (ranker.kind) {
        case TrainedRanker::Kind::linear:
            out << "linear\n";
            write_linear(out, ranker.linear);
            break;
        case TrainedRanker::Kind::mlp: {
            out << "mlp " << ranker.mlp.n_layers() << ' ' << ranker.mlp.dropout_p << '\n';
            for (int l = 0; l < ranker.mlp.n_layers(); ++l) {
                write_matrix(out, ranker.mlp.W[size_t(l)]);
                write_matrix(out, ranker.mlp.b[size_t(l)]);
            }
            break;
        }
        case TrainedRanker::Kind::borda:
            out << "borda\n";
            write_ranker(*ranker.agg_a, out);
            write_ranker(*ranker.agg_b, out);
            break;
    }
    out << "selection " << (ranker.selection ? 1 : 0) << '\n';
    if (ranker.selection) write_linear(out, *ranker.selection);
}

TrainedRanker read_ranker(std::istream& in) {
    std::string magic;
    int version;
    if (!(in >> magic >> version) || magic != "ultr-ranker" || version != 1)
        throw std::runtime_error("read_ranker: bad header");
    TrainedRanker out;
    std::string kind;
    in >> kind;
    if (kind == "linear") {
        out.kind = TrainedRanker::Kind::linear;
        out.linear = read_linear(in);
    } else if (kind == "mlp") {
        out.kind = TrainedRanker::Kind::mlp;
        int layers;
        in >> layers >> out.mlp.dropout_p;
        for (int l = 0; l < layers; ++l) {
            out.mlp.W.push_back(read_matrix(in));
            out.mlp.b.push_back(read_matrix(in).col(0));
        }
    } else if (kind == "borda") {
        out.kind = TrainedRanker::Kind::borda;
        out.agg_a = std::make_shared<TrainedRanker>(read_ranker(in));
        out.agg_b = std::make_shared<TrainedRanker>(read_ranker(in));
    } else {
        throw std::runtime_error("read_ranker: unknown kind " + kind);
    }
    std::string tag;
    int has_sel;
    if (!(in >> tag >> has_sel) || tag != "selection")
        throw std::runtime_error("read_ranker: missing selection block");
    if (has_sel) out.selection = read_linear(in);
    return out;
}

}  // namespace ultr
