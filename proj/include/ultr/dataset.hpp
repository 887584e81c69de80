#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ultr {

struct Doc {
    int doc_id = 0;
    Eigen::VectorXd features;
    int grade = 0;         // 0..4
    int binary_label = 0;  // 1 iff grade in {3, 4}
};

struct QueryGroup {
    long query_id = 0;
    std::vector<Doc> docs;
};

enum class SplitTag { train, test };

struct Dataset {
    std::vector<QueryGroup> groups;
    int feature_dim = 0;
    SplitTag split = SplitTag::train;

    std::size_t n_docs() const;
};

// Parse SVMlight/LETOR lines: `<grade> qid:<id> <fid>:<val> ... [# comment]`.
// Missing feature ids are filled with 0; feature_dim is the max id seen.
Dataset parse_letor(std::istream& in);
Dataset parse_letor_file(const std::string& path);

void write_letor(const Dataset& data, std::ostream& out);

// binary_label = 1 for grades 3 and 4, else 0; idempotent
Dataset binarize_grades(Dataset data);

// Synthetic LTR data: features i.i.d. standard normal, latent relevance
// x.dot(true_beta) + noise, grades by per-query quintiles of the latent score.
Dataset generate_synthetic_ltr(int n_queries, int docs_per_query, int feature_dim,
                               const Eigen::VectorXd& true_beta, double label_noise_sd,
                               std::uint64_t seed);

// 1-D regression sample (x, r) with x uniform on [0,1], r = slope*x + intercept + noise
std::vector<std::pair<double, double>> generate_fig2_data(int n_points, double slope,
                                                          double intercept, double noise_sd,
                                                          std::uint64_t seed);

// Per-dimension zero-mean unit-variance scaler fit on the train split.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  // 1/stddev, 1.0 where stddev is 0
    void apply(Dataset& data) const;
};

Standardizer fit_standardizer(const Dataset& train);

}  // namespace ultr
