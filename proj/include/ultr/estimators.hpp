#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "ultr/clicksim.hpp"
#include "ultr/dataset.hpp"
#include "ultr/models.hpp"

namespace ultr {

// Shared trainer hyperparameters. gamma is the error-correlation
// hyperparameter of the decomposed likelihood, |gamma| < 1.
struct CldConfig {
    double gamma = 0.4;
    double learning_rate = 1e-3;
    double l2 = 1e-3;
    int epochs = 4;
    int batch_size = 256;
    int batches_per_epoch = 200;  // one epoch = this many sampled batches
    double dropout = 0.3;
    std::uint64_t seed = 0;

    enum class Complement { literal, bce };
    Complement selection_complement = Complement::literal;

    std::vector<int> hidden = {256, 128, 64};
    // deterministic per-session cap on doubly-unselected pairs; <0 = unlimited
    int uu_pairs_per_session_cap = 10;

    void validate() const;
};

struct TrainedRanker {
    enum class Kind { linear, mlp, borda };
    Kind kind = Kind::linear;
    LinearModel linear;                       // ranking parameters (linear kind)
    MlpModel mlp;                             // ranking parameters (mlp kind)
    std::optional<LinearModel> selection;     // selection model, kept for diagnostics
    std::shared_ptr<TrainedRanker> agg_a, agg_b;  // borda kind
    std::vector<double> epoch_loss;           // training trace

    double score(const Eigen::VectorXd& x) const;
    // Ordering of the group's docs, best first. Ties by ascending doc_id;
    // borda rankers fuse agg_a and agg_b with ranker-a tie-breaking.
    std::vector<int> rank(const QueryGroup& group) const;
};

double score(const TrainedRanker& ranker, const Eigen::VectorXd& x);

// c / rho; throws if rho <= 0 (unselected records must not be reweighted)
double ips_reweight(double c, double rho);

// MLP fit by squared loss on raw clicks over selected records
TrainedRanker train_naive(const ClickLog& log, const Dataset& data, const CldConfig& config);

// MLP fit by squared loss on c/rho over selected records
TrainedRanker train_ips(const ClickLog& log, const Dataset& data, const CldConfig& config);

// Two-stage selection correction: probit selection model over all records,
// then OLS of raw clicks on (x, inverse Mills) over selected records. The
// ranker keeps the x-coefficients only.
TrainedRanker train_heckman(const ClickLog& log, const Dataset& data, const CldConfig& config);

// Borda fusion of the two rankers' orderings; Borda ties broken by ranker_a's
// scores.
std::vector<int> rank_agg(const TrainedRanker& ranker_a, const TrainedRanker& ranker_b,
                          const QueryGroup& group);
TrainedRanker make_rank_agg(TrainedRanker ranker_a, TrainedRanker ranker_b);

// MLP fit with pairwise logistic loss on binary labels within each query's
// top-k selected set (the non-discarded docs, recovered from the log)
TrainedRanker train_oracle(const ClickLog& log, const Dataset& data, const CldConfig& config);

// One record's contribution to the negated decomposed log-likelihood
// (pointwise, linear): selected records pay a squared residual against the
// reweighted click plus a -log Phi selection term; unselected records pay
// -log(1 - Phi). Phi arguments are clamped to [-30, 8] with zero gradient
// past the clamp.
struct PointwiseEval {
    double loss = 0.0;
    Eigen::VectorXd grad_beta;   // d loss / d beta.weights (zero when unselected)
    double grad_beta_bias = 0.0;
    Eigen::VectorXd grad_omega;  // d loss / d omega.weights
    double grad_omega_bias = 0.0;
};

PointwiseEval cld_pointwise_loss(const Eigen::VectorXd& x, double reweighted_click,
                                 bool selected, const LinearModel& beta,
                                 const LinearModel& omega, double gamma);

// Pointwise trainer: linear beta and omega per the decomposed likelihood;
// selected records update both models, unselected records update omega only.
TrainedRanker train_cld(const ClickLog& log, const Dataset& data, const CldConfig& config);
// variant with an MLP ranking model (base-model swap experiments)
TrainedRanker train_cld_mlp(const ClickLog& log, const Dataset& data, const CldConfig& config);

struct PreferencePair {
    int i = 0;  // record index into ClickLog::records, the preferred member
    int j = 0;
};

// Session-local pairs. pairs_s: both selected and c_i/rho_i > c_j/rho_j.
// pairs_u: at least one unselected; mixed pairs only when the selected member
// was clicked (that member is i); doubly-unselected pairs in doc_id order,
// capped per session when uu_cap >= 0.
std::pair<std::vector<PreferencePair>, std::vector<PreferencePair>> build_pairs(
    const ClickLog& log, int uu_cap = -1, std::uint64_t cap_seed = 0);

// One pair's contribution to the negated pairwise objective, with analytic
// gradients w.r.t. the two ranking scores and the two selection scores.
struct PairEval {
    double loss = 0.0;
    double dscore_i = 0.0;  // d loss / d f_beta(x_i)
    double dscore_j = 0.0;
    double dsel_i = 0.0;    // d loss / d f_omega(x_i)
    double dsel_j = 0.0;
};

PairEval cld_pair_objective(bool s_i, bool s_j, double fbeta_i, double fbeta_j, double fomega_i,
                            double fomega_j, CldConfig::Complement complement);

// Pairwise trainer: MLP ranking model, linear selection model
TrainedRanker train_cld_pair(const ClickLog& log, const Dataset& data, const CldConfig& config);
// variant with a linear ranking model
TrainedRanker train_cld_pair_linear(const ClickLog& log, const Dataset& data,
                                    const CldConfig& config);

void write_ranker(const TrainedRanker& ranker, std::ostream& out);
TrainedRanker read_ranker(std::istream& in);

}  // namespace ultr
