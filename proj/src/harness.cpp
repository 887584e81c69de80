#include "ultr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ultr/clicksim.hpp"
#include "ultr/numerics.hpp"
#include "ultr/policy.hpp"

namespace ultr {

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream in(s);
    while (std::getline(in, tok, ',')) {
        // trim
        auto b = tok.find_first_not_of(" \t");
        auto e = tok.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(tok.substr(b, e - b + 1));
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad numeric value for " + key + ": " + v);
    }
}

long to_long(const std::string& key, const std::string& v) {
    double d = to_double(key, v);
    if (d != std::floor(d)) throw std::runtime_error("config: integer required for " + key);
    return static_cast<long>(d);
}

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (k_cutoff < 1) throw std::runtime_error("config: k_cutoff >= 1 required");
    if (seeds.empty()) throw std::runtime_error("config: seeds must be non-empty");
    if (eta_true < 0.0) throw std::runtime_error("config: eta_true >= 0 required");
    if (n_sessions < 1) throw std::runtime_error("config: n_sessions >= 1 required");
    if (noise_eps < 0.0 || noise_eps >= 1.0)
        throw std::runtime_error("config: noise_eps in [0,1) required");
    if (methods.empty()) throw std::runtime_error("config: methods must be non-empty");
    cld.validate();
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key=value at line " +
                                     std::to_string(line_no));
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string s) {
            auto b2 = s.find_first_not_of(" \t");
            auto e2 = s.find_last_not_of(" \t");
            return b2 == std::string::npos ? std::string() : s.substr(b2, e2 - b2 + 1);
        };
        key = trim(key);
        val = trim(val);
        if (key == "train_path") cfg.train_path = val;
        else if (key == "test_path") cfg.test_path = val;
        else if (key == "syn_queries") cfg.syn_queries = static_cast<int>(to_long(key, val));
        else if (key == "syn_test_queries") cfg.syn_test_queries = static_cast<int>(to_long(key, val));
        else if (key == "syn_docs") cfg.syn_docs = static_cast<int>(to_long(key, val));
        else if (key == "syn_dim") cfg.syn_dim = static_cast<int>(to_long(key, val));
        else if (key == "syn_label_noise") cfg.syn_label_noise = to_double(key, val);
        else if (key == "syn_seed") cfg.syn_seed = static_cast<std::uint64_t>(to_long(key, val));
        else if (key == "sample_fraction") cfg.sample_fraction = to_double(key, val);
        else if (key == "k_cutoff") cfg.k_cutoff = static_cast<int>(to_long(key, val));
        else if (key == "eta_true") cfg.eta_true = to_double(key, val);
        else if (key == "eta_hat") cfg.eta_hat = to_double(key, val);
        else if (key == "noise_eps") cfg.noise_eps = to_double(key, val);
        else if (key == "n_sessions") cfg.n_sessions = to_long(key, val);
        else if (key == "methods") cfg.methods = split_list(val);
        else if (key == "seeds") {
            cfg.seeds.clear();
            for (const auto& s : split_list(val))
                cfg.seeds.push_back(static_cast<std::uint64_t>(to_long(key, s)));
        } else if (key == "gamma") cfg.cld.gamma = to_double(key, val);
        else if (key == "learning_rate") cfg.cld.learning_rate = to_double(key, val);
        else if (key == "l2") cfg.cld.l2 = to_double(key, val);
        else if (key == "epochs") cfg.cld.epochs = static_cast<int>(to_long(key, val));
        else if (key == "batch_size") cfg.cld.batch_size = static_cast<int>(to_long(key, val));
        else if (key == "batches_per_epoch")
            cfg.cld.batches_per_epoch = static_cast<int>(to_long(key, val));
        else if (key == "dropout") cfg.cld.dropout = to_double(key, val);
        else if (key == "uu_pair_cap")
            cfg.cld.uu_pairs_per_session_cap = static_cast<int>(to_long(key, val));
        else if (key == "selection_complement") {
            if (val == "literal") cfg.cld.selection_complement = CldConfig::Complement::literal;
            else if (val == "bce") cfg.cld.selection_complement = CldConfig::Complement::bce;
            else throw std::runtime_error("config: selection_complement must be literal or bce");
        } else if (key == "graded_eval") cfg.graded_eval = to_long(key, val) != 0;
        else if (key == "timing") cfg.timing = to_long(key, val) != 0;
        else if (key == "fig2_n_points") cfg.fig2.n_points = static_cast<int>(to_long(key, val));
        else if (key == "fig2_query_size") cfg.fig2.query_size = static_cast<int>(to_long(key, val));
        else if (key == "fig2_k_cutoff") cfg.fig2.k_cutoff = static_cast<int>(to_long(key, val));
        else if (key == "fig2_slope") cfg.fig2.slope = to_double(key, val);
        else if (key == "fig2_intercept") cfg.fig2.intercept = to_double(key, val);
        else if (key == "fig2_noise_sd") cfg.fig2.noise_sd = to_double(key, val);
        else if (key == "fig2_eta") cfg.fig2.eta = to_double(key, val);
        else if (key == "fig2_seed") cfg.fig2.seed = static_cast<std::uint64_t>(to_long(key, val));
        else throw std::runtime_error("config: unknown key '" + key + "' at line " +
                                      std::to_string(line_no));
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return parse_config(in);
}

std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& config) {
    Dataset train, test;
    if (!config.train_path.empty()) {
        if (config.test_path.empty())
            throw std::runtime_error("config: test_path required when train_path is set");
        train = parse_letor_file(config.train_path);
        test = parse_letor_file(config.test_path);
        if (train.feature_dim != test.feature_dim) {
            // pad the narrower split; LETOR files may omit trailing features
            int dim = std::max(train.feature_dim, test.feature_dim);
            for (Dataset* d : {&train, &test}) {
                for (auto& g : d->groups)
                    for (auto& doc : g.docs) {
                        Eigen::VectorXd padded = Eigen::VectorXd::Zero(dim);
                        padded.head(doc.features.size()) = doc.features;
                        doc.features = std::move(padded);
                    }
                d->feature_dim = dim;
            }
        }
    } else {
        Rng beta_rng(mix_seed(config.syn_seed, 0xbe7aULL));
        Eigen::VectorXd true_beta = Eigen::VectorXd::NullaryExpr(
            config.syn_dim, [&](Eigen::Index) { return beta_rng.normal(); });
        true_beta.normalize();
        train = generate_synthetic_ltr(config.syn_queries, config.syn_docs, config.syn_dim,
                                       true_beta, config.syn_label_noise, config.syn_seed);
        test = generate_synthetic_ltr(config.syn_test_queries, config.syn_docs, config.syn_dim,
                                      true_beta, config.syn_label_noise,
                                      mix_seed(config.syn_seed, 0x7e57ULL));
    }
    train = binarize_grades(std::move(train));
    test = binarize_grades(std::move(test));
    train.split = SplitTag::train;
    test.split = SplitTag::test;
    Standardizer scaler = fit_standardizer(train);
    scaler.apply(train);
    scaler.apply(test);
    return {std::move(train), std::move(test)};
}

TrainedRanker train_method(const std::string& method, const ClickLog& log, const Dataset& train,
                           const CldConfig& config) {
    if (method == "naive") return train_naive(log, train, config);
    if (method == "ips") return train_ips(log, train, config);
    if (method == "heckman") return train_heckman(log, train, config);
    if (method == "oracle") return train_oracle(log, train, config);
    if (method == "cld") return train_cld(log, train, config);
    if (method == "cld_mlp") return train_cld_mlp(log, train, config);
    if (method == "cld_pair") return train_cld_pair(log, train, config);
    if (method == "cld_pair_linear") return train_cld_pair_linear(log, train, config);
    if (method == "rank_agg")
        return make_rank_agg(train_ips(log, train, config), train_heckman(log, train, config));
    throw std::runtime_error("unknown method: " + method);
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config) {
    config.validate();
    auto [train, test] = load_datasets(config);
    std::size_t max_docs = 0;
    for (const auto& g : train.groups) max_docs = std::max(max_docs, g.docs.size());

    std::vector<RunResult> results;
    for (std::uint64_t seed : config.seeds) {
        ClickLog log;
        bool pipeline_ok = true;
        std::string pipeline_error;
        try {
            LoggingPolicy policy = train_logging_policy(train, config.sample_fraction,
                                                        mix_seed(seed, 0x706f6cULL));
            PropensityTable true_table = make_propensity_table(config.eta_true, config.k_cutoff,
                                                               static_cast<int>(max_docs));
            log = build_click_log(policy, train, true_table, config.n_sessions, config.noise_eps,
                                  mix_seed(seed, 0x73696dULL));
            if (config.eta_hat >= 0.0)
                apply_table(log, misspecified_table(true_table, config.eta_hat));
        } catch (const std::exception& ex) {
            pipeline_ok = false;
            pipeline_error = ex.what();
        }
        for (const auto& method : config.methods) {
            RunResult rr;
            rr.method = method;
            rr.seed = seed;
            if (!pipeline_ok) {
                rr.failed = true;
                rr.error = pipeline_error;
                results.push_back(std::move(rr));
                continue;
            }
            auto t0 = std::chrono::steady_clock::now();
            try {
                CldConfig mc = config.cld;
                mc.seed = mix_seed(seed, fnv1a(method));
                TrainedRanker ranker = train_method(method, log, train, mc);
                rr.metrics = evaluate(ranker, test, config.graded_eval);
            } catch (const std::exception& ex) {
                rr.failed = true;
                rr.error = ex.what();
            }
            if (config.timing) {
                auto t1 = std::chrono::steady_clock::now();
                rr.seconds = std::chrono::duration<double>(t1 - t0).count();
            }
            results.push_back(std::move(rr));
        }
    }
    return results;
}

std::string results_csv(const std::vector<RunResult>& results, const ExperimentConfig& config) {
    std::ostringstream out;
    out << "method,seed,k_cutoff,eta_true,eta_hat,noise,sessions,ndcg1,ndcg3,map,seconds\n";
    double eta_hat = config.eta_hat >= 0.0 ? config.eta_hat : config.eta_true;
    for (const auto& r : results) {
        if (r.failed) continue;
        out << r.method << ',' << r.seed << ',' << config.k_cutoff << ','
            << fmt(config.eta_true, "%.4g") << ',' << fmt(eta_hat, "%.4g") << ','
            << fmt(config.noise_eps, "%.4g") << ',' << config.n_sessions << ','
            << fmt(r.metrics.ndcg_at_1) << ',' << fmt(r.metrics.ndcg_at_3) << ','
            << fmt(r.metrics.map) << ',' << fmt(r.seconds, "%.3f") << '\n';
    }
    return out.str();
}

Interval t_interval(const std::vector<double>& values, double level) {
    if (values.empty()) throw std::invalid_argument("t_interval: empty sample");
    Interval iv;
    double n = static_cast<double>(values.size());
    for (double v : values) iv.mean += v;
    iv.mean /= n;
    if (values.size() == 1) {
        iv.lo = iv.hi = iv.mean;
        return iv;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - iv.mean) * (v - iv.mean);
    double sd = std::sqrt(ss / (n - 1.0));
    double tq = student_t_quantile(0.5 + level / 2.0, n - 1.0);
    double half = tq * sd / std::sqrt(n);
    iv.lo = iv.mean - half;
    iv.hi = iv.mean + half;
    return iv;
}

std::string sweep(const ExperimentConfig& config, const std::string& axis,
                  const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("sweep: values must be non-empty");
    std::ostringstream out;
    out << "axis,value,method,metric,mean,ci_low,ci_high,n_seeds\n";
    for (double value : values) {
        ExperimentConfig cfg = config;
        if (axis == "k_cutoff") cfg.k_cutoff = static_cast<int>(value);
        else if (axis == "eta_true") cfg.eta_true = value;
        else if (axis == "noise_eps") cfg.noise_eps = value;
        else if (axis == "n_sessions") cfg.n_sessions = static_cast<long>(value);
        else if (axis == "eta_hat") cfg.eta_hat = value;
        else throw std::invalid_argument("sweep: unknown axis " + axis);
        auto results = run_experiment(cfg);
        for (const auto& method : cfg.methods) {
            std::vector<double> ndcg1, ndcg3, map;
            for (const auto& r : results) {
                if (r.method != method || r.failed) continue;
                ndcg1.push_back(r.metrics.ndcg_at_1);
                ndcg3.push_back(r.metrics.ndcg_at_3);
                map.push_back(r.metrics.map);
            }
            if (ndcg1.empty()) continue;
            const std::pair<const char*, std::vector<double>*> metrics[] = {
                {"ndcg1", &ndcg1}, {"ndcg3", &ndcg3}, {"map", &map}};
            for (const auto& [name, vals] : metrics) {
                Interval iv = t_interval(*vals);
                out << axis << ',' << fmt(value, "%.4g") << ',' << method << ',' << name << ','
                    << fmt(iv.mean) << ',' << fmt(iv.lo) << ',' << fmt(iv.hi) << ','
                    << vals->size() << '\n';
            }
        }
    }
    return out.str();
}

namespace {

// OLS of r on x; returns (slope, intercept)
std::pair<double, double> ols_fit(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) throw std::runtime_error("fig2_study: too few points for a fit");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double n = static_cast<double>(pts.size());
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    double slope = (n * sxy - sx * sy) / denom;
    return {slope, (sy - slope * sx) / n};
}

}  // namespace

std::string fig2_study(const Fig2Config& config) {
    if (config.query_size < 2 || config.k_cutoff < 1)
        throw std::invalid_argument("fig2_study: query_size >= 2 and k_cutoff >= 1 required");
    auto pts = generate_fig2_data(config.n_points, config.slope, config.intercept,
                                  config.noise_sd, config.seed);
    // Rank each block of query_size points by noisy relevance, as a logging
    // policy would. Position bias attenuates the observed outcome by the
    // examination probability; the cutoff truncates to the displayed top-k.
    std::vector<std::pair<double, double>> clean, position, selection, both;
    for (std::size_t start = 0; start + config.query_size <= pts.size();
         start += static_cast<std::size_t>(config.query_size)) {
        std::vector<std::size_t> order(static_cast<std::size_t>(config.query_size));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = start + i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return pts[a].second > pts[b].second; });
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            const auto& p = pts[order[rank]];
            int pos = static_cast<int>(rank) + 1;
            double rho = std::pow(1.0 / pos, config.eta);
            bool selected = pos <= config.k_cutoff;
            clean.push_back(p);
            position.emplace_back(p.first, rho * p.second);
            if (selected) {
                selection.push_back(p);
                both.emplace_back(p.first, rho * p.second);
            }
        }
    }
    std::ostringstream out;
    out << "fit,slope,intercept\n";
    const std::pair<const char*, std::vector<std::pair<double, double>>*> fits[] = {
        {"clean", &clean}, {"position", &position}, {"selection", &selection}, {"both", &both}};
    for (const auto& [name, data] : fits) {
        auto [slope, intercept] = ols_fit(*data);
        out << name << ',' << fmt(slope, "%.8f") << ',' << fmt(intercept, "%.8f") << '\n';
    }
    return out.str();
}

std::vector<std::string> emit_plot_data(const std::string& sweep_csv, const std::string& out_dir) {
    std::istringstream in(sweep_csv);
    std::string line;
    if (!std::getline(in, line) || line.rfind("axis,", 0) != 0)
        throw std::runtime_error("emit_plot_data: malformed sweep CSV header");
    struct Row {
        std::string value, method, metric, mean, lo, hi;
    };
    std::map<std::pair<std::string, std::string>, std::vector<Row>> series;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_list(line);
        if (fields.size() != 8) throw std::runtime_error("emit_plot_data: malformed row: " + line);
        Row row{fields[1], fields[2], fields[3], fields[4], fields[5], fields[6]};
        series[{row.metric, row.method}].push_back(row);
    }
    if (series.empty()) throw std::runtime_error("emit_plot_data: empty result set");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    for (const auto& [key, rows] : series) {
        std::string name = "plot_" + key.first + "_" + key.second + ".csv";
        std::ofstream out(std::filesystem::path(out_dir) / name);
        out << "x,mean,ci_low,ci_high\n";
        for (const auto& r : rows)
            out << r.value << ',' << r.mean << ',' << r.lo << ',' << r.hi << '\n';
        written.push_back(name);
    }
    return written;
}

}  // namespace ultr
