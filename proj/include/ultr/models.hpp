#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <vector>

#include "ultr/rng.hpp"

namespace ultr {

// Xavier/Glorot uniform init on [-a, a], a = sqrt(6/(fan_in + fan_out)).
// fan_in = cols, fan_out = rows.
Eigen::MatrixXd xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng);

struct LinearModel {
    Eigen::VectorXd weights;
    double bias = 0.0;

    double score(const Eigen::VectorXd& x) const;
};

double linear_score(const LinearModel& model, const Eigen::VectorXd& x);

// Feed-forward scorer with elu hidden activations and inverted dropout.
// W[l] maps layer l input to output (rows = out, cols = in); the last layer
// has a single output row.
struct MlpModel {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
    double dropout_p = 0.0;

    static MlpModel make(int input_dim, const std::vector<int>& hidden, double dropout_p,
                         Rng& rng);

    int input_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
    int n_layers() const { return static_cast<int>(W.size()); }
};

struct MlpCache {
    std::vector<Eigen::MatrixXd> inputs;  // inputs[l] fed to layer l; inputs[0] = X
    std::vector<Eigen::MatrixXd> pre;     // pre-activations per layer
    std::vector<Eigen::MatrixXd> mask;    // dropout masks per hidden layer (scaled)
};

// Batched forward: X has one sample per column. Returns one score per column.
// With training=true, dropout masks drawn from rng are applied to hidden
// activations and retained in the cache.
Eigen::RowVectorXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& X, bool training,
                               Rng* rng, MlpCache* cache);

double mlp_score(const MlpModel& model, const Eigen::VectorXd& x);

struct MlpGrads {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;

    static MlpGrads zeros_like(const MlpModel& model);
};

// Reverse-mode gradients of sum_i upstream(i) * score_i w.r.t. all parameters.
MlpGrads mlp_backward(const MlpModel& model, const MlpCache& cache,
                      const Eigen::RowVectorXd& upstream);

// Adaptive-moment optimizer with decoupled weight decay. Parameter block
// order must be stable across calls.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    long t = 0;
    std::vector<Eigen::ArrayXXd> m, v;

    void step(const std::vector<Eigen::MatrixXd*>& params,
              const std::vector<const Eigen::MatrixXd*>& grads,
              const std::vector<bool>& decay);
};

// flat text (de)serialization: "rows cols" then row-major values
void write_matrix(std::ostream& out, const Eigen::MatrixXd& mat);
Eigen::MatrixXd read_matrix(std::istream& in);

}  // namespace ultr
