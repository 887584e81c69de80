#include "ultr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "ultr/rng.hpp"

namespace ultr {

std::size_t Dataset::n_docs() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.docs.size();
    return n;
}

Dataset parse_letor(std::istream& in) {
    Dataset data;
    std::unordered_map<long, std::size_t> group_of;
    // sparse rows collected first; feature_dim known only at the end
    struct Row {
        long qid;
        int grade;
        std::vector<std::pair<int, double>> feats;
    };
    std::vector<Row> rows;
    std::string line;
    int max_fid = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        int grade;
        if (!(ls >> grade)) {
            // blank line
            std::string rest;
            if (!(std::istringstream(line) >> rest)) continue;
            throw std::runtime_error("parse_letor: malformed line " + std::to_string(line_no));
        }
        if (grade < 0 || grade > 4)
            throw std::runtime_error("parse_letor: grade out of range 0..4 at line " +
                                     std::to_string(line_no));
        std::string tok;
        if (!(ls >> tok) || tok.rfind("qid:", 0) != 0)
            throw std::runtime_error("parse_letor: missing qid at line " + std::to_string(line_no));
        Row row;
        row.grade = grade;
        try {
            row.qid = std::stol(tok.substr(4));
        } catch (const std::exception&) {
            throw std::runtime_error("parse_letor: bad qid at line " + std::to_string(line_no));
        }
        while (ls >> tok) {
            auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("parse_letor: malformed feature at line " +
                                         std::to_string(line_no));
            int fid;
            double val;
            try {
                fid = std::stoi(tok.substr(0, colon));
                val = std::stod(tok.substr(colon + 1));
            } catch (const std::exception&) {
                throw std::runtime_error("parse_letor: malformed feature at line " +
                                         std::to_string(line_no));
            }
            if (fid <= 0)
                throw std::runtime_error("parse_letor: feature id must be positive at line " +
                                         std::to_string(line_no));
            if (!std::isfinite(val))
                throw std::runtime_error("parse_letor: non-finite feature at line " +
                                         std::to_string(line_no));
            max_fid = std::max(max_fid, fid);
            row.feats.emplace_back(fid, val);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("parse_letor: empty stream");
    data.feature_dim = max_fid;
    for (const auto& row : rows) {
        auto it = group_of.find(row.qid);
        if (it == group_of.end()) {
            it = group_of.emplace(row.qid, data.groups.size()).first;
            data.groups.push_back(QueryGroup{row.qid, {}});
        }
        QueryGroup& g = data.groups[it->second];
        Doc doc;
        doc.doc_id = static_cast<int>(g.docs.size());
        doc.grade = row.grade;
        doc.binary_label = (row.grade >= 3) ? 1 : 0;
        doc.features = Eigen::VectorXd::Zero(max_fid);
        for (auto [fid, val] : row.feats) doc.features(fid - 1) = val;
        g.docs.push_back(std::move(doc));
    }
    return data;
}

Dataset parse_letor_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_letor_file: cannot open " + path);
    return parse_letor(in);
}

void write_letor(const Dataset& data, std::ostream& out) {
    char buf[64];
    for (const auto& g : data.groups) {
        for (const auto& d : g.docs) {
            out << d.grade << " qid:" << g.query_id;
            for (Eigen::Index i = 0; i < d.features.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", d.features(i));
                out << ' ' << (i + 1) << ':' << buf;
            }
            out << '\n';
        }
    }
}

Dataset binarize_grades(Dataset data) {
    for (auto& g : data.groups)
        for (auto& d : g.docs) {
            if (d.grade < 0 || d.grade > 4)
                throw std::runtime_error("binarize_grades: grade out of range");
            d.binary_label = (d.grade >= 3) ? 1 : 0;
        }
    return data;
}

Dataset generate_synthetic_ltr(int n_queries, int docs_per_query, int feature_dim,
                               const Eigen::VectorXd& true_beta, double label_noise_sd,
                               std::uint64_t seed) {
    if (n_queries <= 0 || docs_per_query <= 0 || feature_dim <= 0)
        throw std::invalid_argument("generate_synthetic_ltr: dimensions must be positive");
    if (true_beta.size() != feature_dim)
        throw std::invalid_argument("generate_synthetic_ltr: true_beta dimension mismatch");
    Dataset data;
    data.feature_dim = feature_dim;
    data.groups.reserve(static_cast<std::size_t>(n_queries));
    for (int q = 0; q < n_queries; ++q) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(q));
        QueryGroup g;
        g.query_id = q + 1;
        std::vector<double> latent(static_cast<std::size_t>(docs_per_query));
        for (int d = 0; d < docs_per_query; ++d) {
            Doc doc;
            doc.doc_id = d;
            doc.features = Eigen::VectorXd::NullaryExpr(feature_dim, [&](Eigen::Index) {
                return rng.normal();
            });
            latent[static_cast<std::size_t>(d)] =
                doc.features.dot(true_beta) + label_noise_sd * rng.normal();
            g.docs.push_back(std::move(doc));
        }
        // grade by quintile of the latent score within the query
        std::vector<int> order(latent.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return latent[static_cast<std::size_t>(a)] <
                                                    latent[static_cast<std::size_t>(b)]; });
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            int grade = static_cast<int>(rank * 5 / order.size());
            Doc& doc = g.docs[static_cast<std::size_t>(order[rank])];
            doc.grade = grade;
            doc.binary_label = (grade >= 3) ? 1 : 0;
        }
        data.groups.push_back(std::move(g));
    }
    return data;
}

std::vector<std::pair<double, double>> generate_fig2_data(int n_points, double slope,
                                                          double intercept, double noise_sd,
                                                          std::uint64_t seed) {
    if (n_points <= 1) throw std::invalid_argument("generate_fig2_data: n_points > 1 required");
    Rng rng(seed);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        double x = rng.uniform();
        double r = slope * x + intercept + noise_sd * rng.normal();
        pts.emplace_back(x, r);
    }
    return pts;
}

Standardizer fit_standardizer(const Dataset& train) {
    const auto n = static_cast<double>(train.n_docs());
    if (n == 0) throw std::runtime_error("fit_standardizer: empty dataset");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(train.feature_dim);
    for (const auto& g : train.groups)
        for (const auto& d : g.docs) mean += d.features;
    mean /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(train.feature_dim);
    for (const auto& g : train.groups)
        for (const auto& d : g.docs) var += (d.features - mean).cwiseAbs2();
    var /= n;
    Standardizer s;
    s.mean = mean;
    s.scale = var.unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; });
    return s;
}

void Standardizer::apply(Dataset& data) const {
    for (auto& g : data.groups)
        for (auto& d : g.docs)
            d.features = (d.features - mean).cwiseProduct(scale);
}

}  // namespace ultr
