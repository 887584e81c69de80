#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ultr/dataset.hpp"
#include "ultr/estimators.hpp"
#include "ultr/metrics.hpp"

namespace ultr {

// 1-D synthetic study: clean fit vs position-bias, top-k selection, and both.
struct Fig2Config {
    int n_points = 2000;
    int query_size = 10;  // points per ranked list
    int k_cutoff = 5;
    double slope = 1.0;
    double intercept = -0.7;  // centered outcomes: attenuation shrinks toward the mean
    double noise_sd = 0.6;
    double eta = 0.5;
    std::uint64_t seed = 3;
};

struct ExperimentConfig {
    // dataset: LETOR files when paths set, synthetic otherwise
    std::string train_path;
    std::string test_path;
    int syn_queries = 1000;
    int syn_test_queries = 1000;
    int syn_docs = 25;
    int syn_dim = 20;
    double syn_label_noise = 1.2;
    std::uint64_t syn_seed = 7;

    double sample_fraction = 0.005;  // logging-policy training sample
    int k_cutoff = 5;
    double eta_true = 1.0;
    double eta_hat = -1.0;  // < 0: estimators see the true table
    double noise_eps = 0.1;
    long n_sessions = 100000;

    std::vector<std::string> methods = {"naive", "ips", "heckman", "rank_agg",
                                        "oracle", "cld", "cld_pair"};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    CldConfig cld;
    Fig2Config fig2;
    bool graded_eval = false;
    bool timing = false;  // false keeps the seconds column at 0 for reproducible bytes

    void validate() const;
};

// Flat key=value config text; '#' starts a comment; unknown keys rejected.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);

struct RunResult {
    std::string method;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    double seconds = 0.0;
    bool failed = false;
    std::string error;
};

// Per seed: train logging policy, simulate the log with the true propensity
// table, hand estimators the eta_hat table, train each method, evaluate on
// the test split. A failing (method, seed) cell is recorded and skipped.
std::vector<RunResult> run_experiment(const ExperimentConfig& config);

// Fixed schema: method,seed,k_cutoff,eta_true,eta_hat,noise,sessions,ndcg1,ndcg3,map,seconds
std::string results_csv(const std::vector<RunResult>& results, const ExperimentConfig& config);

// One run_experiment per axis value; long-format CSV
// axis,value,method,metric,mean,ci_low,ci_high,n_seeds with 90% t-intervals.
std::string sweep(const ExperimentConfig& config, const std::string& axis,
                  const std::vector<double>& values);

// CSV `fit,slope,intercept` with rows clean, position, selection, both.
std::string fig2_study(const Fig2Config& config);

// Split a sweep CSV into per-(metric, method) series files `x,mean,ci_low,ci_high`.
// Returns the file names written into out_dir.
std::vector<std::string> emit_plot_data(const std::string& sweep_csv, const std::string& out_dir);

// mean and 90% (by default) two-sided t-interval
struct Interval {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};
Interval t_interval(const std::vector<double>& values, double level = 0.90);

// Train one method on a prepared log; used by run_experiment and the CLI.
TrainedRanker train_method(const std::string& method, const ClickLog& log, const Dataset& train,
                           const CldConfig& config);

// Materialize the configured dataset pair (train, test), binarized and
// standardized on the train split.
std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& config);

}  // namespace ultr
