#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ultr/dataset.hpp"
#include "ultr/policy.hpp"
#include "ultr/rng.hpp"

namespace ultr {

// Per-position examination probabilities rho[k] = (1/k)^eta for k <= k_cutoff, else 0.
struct PropensityTable {
    double eta = 1.0;
    int k_cutoff = 5;
    std::vector<double> rho;  // rho[k-1] for position k, length = max position

    double at(int position) const { return rho[static_cast<std::size_t>(position - 1)]; }
};

double examination_probability(int position, double eta, int k_cutoff);

PropensityTable make_propensity_table(double eta, int k_cutoff, int max_position);

// Same cutoff, rho recomputed from eta_hat; handed to estimators while the
// simulator keeps the true table.
PropensityTable misspecified_table(const PropensityTable& true_table, double eta_hat);

struct ClickRecord {
    long query_id = 0;
    int group_index = 0;  // index into Dataset::groups
    int doc_index = 0;    // index into QueryGroup::docs
    int position = 0;     // 1-based display position
    bool selected = false;
    bool clicked = false;
    double propensity = 0.0;  // rho at the display position; 0 when unselected
    long session = 0;
};

struct ClickLog {
    std::vector<ClickRecord> records;  // session order, each session in position order
    long n_sessions = 0;

    std::size_t count_selected() const;
};

// One session over one query under the position-based model. Emits one record
// per document, in position order. A click requires examination; examined
// relevant docs always click, examined irrelevant docs click with noise_eps.
std::vector<ClickRecord> simulate_session(const LoggingPolicy& policy, const QueryGroup& group,
                                          int group_index, const PropensityTable& table,
                                          double noise_eps, Rng& rng);

// Queries sampled uniformly with replacement; one PRNG stream per session
// index, so the log is a pure function of the seed.
ClickLog build_click_log(const LoggingPolicy& policy, const Dataset& data,
                         const PropensityTable& table, long n_sessions, double noise_eps,
                         std::uint64_t seed);

// Overwrite record propensities with the given table (selected records only).
void apply_table(ClickLog& log, const PropensityTable& table);

// CSV: header `query_id,doc_index,position,selected,clicked,propensity`
void write_click_log(const ClickLog& log, std::ostream& out);
ClickLog read_click_log(std::istream& in, const Dataset& data);

}  // namespace ultr
