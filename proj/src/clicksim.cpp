#include "ultr/clicksim.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ultr {

double examination_probability(int position, double eta, int k_cutoff) {
    if (position < 1) throw std::invalid_argument("examination_probability: position >= 1");
    if (position > k_cutoff) return 0.0;
    return std::pow(1.0 / static_cast<double>(position), eta);
}

PropensityTable make_propensity_table(double eta, int k_cutoff, int max_position) {
    if (eta < 0.0) throw std::invalid_argument("make_propensity_table: eta >= 0 required");
    if (k_cutoff < 1) throw std::invalid_argument("make_propensity_table: k_cutoff >= 1 required");
    PropensityTable t;
    t.eta = eta;
    t.k_cutoff = k_cutoff;
    t.rho.resize(static_cast<std::size_t>(max_position));
    for (int k = 1; k <= max_position; ++k)
        t.rho[static_cast<std::size_t>(k - 1)] = examination_probability(k, eta, k_cutoff);
    return t;
}

PropensityTable misspecified_table(const PropensityTable& true_table, double eta_hat) {
    return make_propensity_table(eta_hat, true_table.k_cutoff,
                                 static_cast<int>(true_table.rho.size()));
}

std::size_t ClickLog::count_selected() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.selected ? 1 : 0;
    return n;
}

std::vector<ClickRecord> simulate_session(const LoggingPolicy& policy, const QueryGroup& group,
                                          int group_index, const PropensityTable& table,
                                          double noise_eps, Rng& rng) {
    if (noise_eps < 0.0 || noise_eps >= 1.0)
        throw std::invalid_argument("simulate_session: noise_eps in [0,1) required");
    RankedList ranked = rank_query(policy, group, table.k_cutoff);
    std::vector<ClickRecord> out;
    out.reserve(group.docs.size());
    for (std::size_t pos = 0; pos < ranked.order.size(); ++pos) {
        int doc = ranked.order[pos];
        int position = static_cast<int>(pos) + 1;
        ClickRecord rec;
        rec.query_id = group.query_id;
        rec.group_index = group_index;
        rec.doc_index = doc;
        rec.position = position;
        rec.selected = position <= table.k_cutoff &&
                       static_cast<std::size_t>(position) <= table.rho.size();
        if (rec.selected) {
            double rho = table.at(position);
            rec.propensity = rho;
            bool examined = rng.bernoulli(rho);
            if (examined) {
                if (group.docs[static_cast<std::size_t>(doc)].binary_label == 1)
                    rec.clicked = true;
                else
                    rec.clicked = rng.bernoulli(noise_eps);
            }
        }
        out.push_back(rec);
    }
    return out;
}

ClickLog build_click_log(const LoggingPolicy& policy, const Dataset& data,
                         const PropensityTable& table, long n_sessions, double noise_eps,
                         std::uint64_t seed) {
    if (n_sessions < 1) throw std::invalid_argument("build_click_log: n_sessions >= 1 required");
    if (data.groups.empty()) throw std::invalid_argument("build_click_log: empty dataset");
    ClickLog log;
    log.n_sessions = n_sessions;
    for (long s = 0; s < n_sessions; ++s) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(s));
        std::size_t q = rng.below(data.groups.size());
        auto recs = simulate_session(policy, data.groups[q], static_cast<int>(q), table,
                                     noise_eps, rng);
        for (auto& r : recs) r.session = s;
        log.records.insert(log.records.end(), recs.begin(), recs.end());
    }
    return log;
}

void apply_table(ClickLog& log, const PropensityTable& table) {
    for (auto& r : log.records)
        if (r.selected) r.propensity = table.at(r.position);
}

void write_click_log(const ClickLog& log, std::ostream& out) {
    out << "query_id,doc_index,position,selected,clicked,propensity\n";
    char buf[64];
    for (const auto& r : log.records) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.propensity);
        out << r.query_id << ',' << r.doc_index << ',' << r.position << ','
            << (r.selected ? 1 : 0) << ',' << (r.clicked ? 1 : 0) << ',' << buf << '\n';
    }
}

ClickLog read_click_log(std::istream& in, const Dataset& data) {
    std::unordered_map<long, int> group_of;
    for (std::size_t i = 0; i < data.groups.size(); ++i)
        group_of[data.groups[i].query_id] = static_cast<int>(i);
    std::string line;
    if (!std::getline(in, line) || line.rfind("query_id,", 0) != 0)
        throw std::runtime_error("read_click_log: missing header line");
    ClickLog log;
    long session = -1;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ClickRecord r;
        int selected, clicked;
        std::istringstream ls(line);
        char comma;
        if (!(ls >> r.query_id >> comma >> r.doc_index >> comma >> r.position >> comma >>
              selected >> comma >> clicked >> comma >> r.propensity))
            throw std::runtime_error("read_click_log: malformed line " + std::to_string(line_no));
        r.selected = selected != 0;
        r.clicked = clicked != 0;
        auto it = group_of.find(r.query_id);
        if (it == group_of.end())
            throw std::runtime_error("read_click_log: unknown query_id at line " +
                                     std::to_string(line_no));
        r.group_index = it->second;
        if (r.position == 1) ++session;  // sessions are emitted in position order
        r.session = session;
        log.records.push_back(r);
    }
    log.n_sessions = session + 1;
    return log;
}

}  // namespace ultr
