#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ultr/harness.hpp"

using namespace ultr;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.syn_queries = 30;
    cfg.syn_test_queries = 10;
    cfg.syn_docs = 5;
    cfg.syn_dim = 3;
    cfg.sample_fraction = 1.0;
    cfg.k_cutoff = 2;
    cfg.n_sessions = 200;
    cfg.methods = {"cld"};
    cfg.seeds = {1, 2};
    cfg.cld.hidden = {8};
    cfg.cld.epochs = 2;
    cfg.cld.batches_per_epoch = 10;
    cfg.cld.batch_size = 32;
    cfg.cld.dropout = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("config parsing sets every documented key") {
    std::istringstream in(
        "# benchmark setup\n"
        "syn_queries = 12\n"
        "syn_docs=7\n"
        "k_cutoff = 3   # shallow cutoff\n"
        "eta_true = 1.5\n"
        "eta_hat = 0.5\n"
        "noise_eps = 0.2\n"
        "n_sessions = 4000\n"
        "methods = naive,cld\n"
        "seeds = 3,4,5\n"
        "gamma = 0.1\n"
        "learning_rate = 0.01\n"
        "epochs = 4\n"
        "selection_complement = bce\n"
        "graded_eval = 1\n"
        "fig2_slope = 2.5\n");
    ExperimentConfig cfg = parse_config(in);
    CHECK(cfg.syn_queries == 12);
    CHECK(cfg.syn_docs == 7);
    CHECK(cfg.k_cutoff == 3);
    CHECK(cfg.eta_true == doctest::Approx(1.5));
    CHECK(cfg.eta_hat == doctest::Approx(0.5));
    CHECK(cfg.noise_eps == doctest::Approx(0.2));
    CHECK(cfg.n_sessions == 4000);
    CHECK(cfg.methods == std::vector<std::string>{"naive", "cld"});
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5});
    CHECK(cfg.cld.gamma == doctest::Approx(0.1));
    CHECK(cfg.cld.learning_rate == doctest::Approx(0.01));
    CHECK(cfg.cld.epochs == 4);
    CHECK(cfg.cld.selection_complement == CldConfig::Complement::bce);
    CHECK(cfg.graded_eval);
    CHECK(cfg.fig2.slope == doctest::Approx(2.5));
}

TEST_CASE("config parsing rejects bad input") {
    std::istringstream unknown("k_cutoff = 3\nnot_a_key = 1\n");
    CHECK_THROWS_WITH_AS(parse_config(unknown), doctest::Contains("not_a_key"),
                         std::runtime_error);
    std::istringstream no_eq("k_cutoff = 3\njust words\n");
    CHECK_THROWS_WITH_AS(parse_config(no_eq), doctest::Contains("2"), std::runtime_error);
    std::istringstream bad_num("k_cutoff = soon\n");
    CHECK_THROWS(parse_config(bad_num));
    std::istringstream bad_comp("selection_complement = maybe\n");
    CHECK_THROWS(parse_config(bad_comp));
    std::istringstream bad_k("k_cutoff = 0\n");
    CHECK_THROWS(parse_config(bad_k));
}

TEST_CASE("empty config keeps the documented defaults") {
    std::istringstream in("\n# nothing here\n");
    ExperimentConfig cfg = parse_config(in);
    CHECK(cfg.syn_queries == 1000);
    CHECK(cfg.syn_test_queries == 1000);
    CHECK(cfg.syn_docs == 25);
    CHECK(cfg.syn_dim == 20);
    CHECK(cfg.k_cutoff == 5);
    CHECK(cfg.eta_true == doctest::Approx(1.0));
    CHECK(cfg.eta_hat < 0.0);
    CHECK(cfg.noise_eps == doctest::Approx(0.1));
    CHECK(cfg.n_sessions == 100000);
    CHECK(cfg.seeds.size() == 5);
    CHECK(cfg.cld.epochs == 4);
    CHECK_FALSE(cfg.timing);
}

TEST_CASE("t interval matches the reference quantile") {
    Interval iv = t_interval({1.0, 2.0, 3.0, 4.0, 5.0});
    CHECK(iv.mean == doctest::Approx(3.0));
    // half-width = t(0.95, 4) * sd / sqrt(5) with sd = sqrt(2.5)
    double half = 2.1318 * std::sqrt(2.5) / std::sqrt(5.0);
    CHECK(iv.hi - iv.mean == doctest::Approx(half).epsilon(1e-4));
    CHECK(iv.mean - iv.lo == doctest::Approx(half).epsilon(1e-4));

    Interval single = t_interval({0.7});
    CHECK(single.lo == doctest::Approx(0.7));
    CHECK(single.hi == doctest::Approx(0.7));
    CHECK_THROWS(t_interval({}));
}

TEST_CASE("load_datasets is deterministic and standardized") {
    ExperimentConfig cfg = tiny_config();
    auto [train_a, test_a] = load_datasets(cfg);
    auto [train_b, test_b] = load_datasets(cfg);
    CHECK(train_a.groups.size() == 30);
    CHECK(test_a.groups.size() == 10);
    CHECK(train_a.feature_dim == 3);
    bool same = true;
    for (std::size_t g = 0; g < train_a.groups.size(); ++g)
        for (std::size_t i = 0; i < train_a.groups[g].docs.size(); ++i)
            same = same && train_a.groups[g].docs[i].features == train_b.groups[g].docs[i].features;
    for (std::size_t g = 0; g < test_a.groups.size(); ++g)
        for (std::size_t i = 0; i < test_a.groups[g].docs.size(); ++i)
            same = same && test_a.groups[g].docs[i].features == test_b.groups[g].docs[i].features;
    CHECK(same);

    // train features are centered after standardization
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    double n = 0;
    for (const auto& g : train_a.groups)
        for (const auto& doc : g.docs) {
            mean += doc.features;
            n += 1;
        }
    mean /= n;
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(mean(i)) < 1e-9);
}

TEST_CASE("run_experiment yields one result per method and seed") {
    ExperimentConfig cfg = tiny_config();
    cfg.methods = {"oracle"};
    cfg.seeds = {1};
    auto results = run_experiment(cfg);
    REQUIRE(results.size() == 1);
    CHECK(results[0].method == "oracle");
    CHECK_FALSE(results[0].failed);
    CHECK(results[0].metrics.ndcg_at_1 >= 0.0);
    CHECK(results[0].metrics.ndcg_at_1 <= 1.0);
    CHECK(results[0].seconds == 0.0);  // timing off keeps the column reproducible
}

TEST_CASE("identical configs give identical result CSV bytes") {
    ExperimentConfig cfg = tiny_config();
    std::string a = results_csv(run_experiment(cfg), cfg);
    std::string b = results_csv(run_experiment(cfg), cfg);
    CHECK(a == b);
    CHECK(a.rfind("method,seed,k_cutoff,eta_true,eta_hat,noise,sessions,ndcg1,ndcg3,map,seconds\n",
                  0) == 0);
}

TEST_CASE("a failing method cell does not poison the rest") {
    ExperimentConfig cfg = tiny_config();
    cfg.methods = {"cld", "no_such_method"};
    cfg.seeds = {1};
    auto results = run_experiment(cfg);
    REQUIRE(results.size() == 2);
    CHECK_FALSE(results[0].failed);
    CHECK(results[1].failed);
    CHECK(results[1].error.find("no_such_method") != std::string::npos);
    std::string csv = results_csv(results, cfg);
    CHECK(csv.find("no_such_method") == std::string::npos);
    CHECK(csv.find("cld,1,") != std::string::npos);
}

TEST_CASE("train_method dispatches by name") {
    ExperimentConfig cfg = tiny_config();
    auto [train, test] = load_datasets(cfg);
    (void)test;
    LoggingPolicy policy = train_logging_policy(train, 1.0, 3);
    PropensityTable table = make_propensity_table(1.0, 2, cfg.syn_docs);
    ClickLog log = build_click_log(policy, train, table, 300, 0.1, 5);
    CldConfig mc = cfg.cld;
    CHECK(train_method("naive", log, train, mc).kind == TrainedRanker::Kind::mlp);
    CHECK(train_method("cld", log, train, mc).kind == TrainedRanker::Kind::linear);
    CHECK(train_method("cld_mlp", log, train, mc).kind == TrainedRanker::Kind::mlp);
    CHECK(train_method("cld_pair_linear", log, train, mc).kind == TrainedRanker::Kind::linear);
    CHECK(train_method("heckman", log, train, mc).kind == TrainedRanker::Kind::linear);
    CHECK(train_method("rank_agg", log, train, mc).kind == TrainedRanker::Kind::borda);
    CHECK_THROWS(train_method("pijd", log, train, mc));
}

TEST_CASE("single-value sweep wraps run_experiment with interval framing") {
    ExperimentConfig cfg = tiny_config();
    std::string csv = sweep(cfg, "eta_true", {1.0});
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "axis,value,method,metric,mean,ci_low,ci_high,n_seeds");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        std::istringstream fields(line);
        std::string axis, value, method, metric, mean, lo, hi, n;
        std::getline(fields, axis, ',');
        std::getline(fields, value, ',');
        std::getline(fields, method, ',');
        std::getline(fields, metric, ',');
        std::getline(fields, mean, ',');
        std::getline(fields, lo, ',');
        std::getline(fields, hi, ',');
        std::getline(fields, n, ',');
        CHECK(axis == "eta_true");
        CHECK(method == "cld");
        CHECK(std::stod(lo) <= std::stod(mean) + 1e-12);
        CHECK(std::stod(mean) <= std::stod(hi) + 1e-12);
        CHECK(n == "2");
    }
    CHECK(rows == 3);  // ndcg1, ndcg3, map
    CHECK_THROWS(sweep(cfg, "eta_true", {}));
    CHECK_THROWS(sweep(cfg, "bogus_axis", {1.0}));
}

TEST_CASE("fig2 study fits four lines and recovers clean data exactly") {
    Fig2Config cfg;
    cfg.noise_sd = 0.0;
    cfg.slope = 1.25;
    cfg.intercept = -0.25;
    std::string csv = fig2_study(cfg);
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "fit,slope,intercept");
    std::map<std::string, std::pair<double, double>> fits;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string name, slope, intercept;
        std::getline(fields, name, ',');
        std::getline(fields, slope, ',');
        std::getline(fields, intercept, ',');
        fits[name] = {std::stod(slope), std::stod(intercept)};
    }
    REQUIRE(fits.size() == 4);
    CHECK(fits.count("clean") == 1);
    CHECK(fits.count("position") == 1);
    CHECK(fits.count("selection") == 1);
    CHECK(fits.count("both") == 1);
    CHECK(fits["clean"].first == doctest::Approx(1.25).epsilon(1e-6));
    CHECK(fits["clean"].second == doctest::Approx(-0.25).epsilon(1e-6));

    CHECK(fig2_study(cfg) == csv);  // deterministic
    Fig2Config bad;
    bad.query_size = 1;
    CHECK_THROWS(fig2_study(bad));
}

TEST_CASE("plot emission splits a sweep CSV per metric and method") {
    std::string csv =
        "axis,value,method,metric,mean,ci_low,ci_high,n_seeds\n"
        "eta_true,0,cld,ndcg1,0.8,0.75,0.85,5\n"
        "eta_true,1,cld,ndcg1,0.7,0.65,0.75,5\n"
        "eta_true,2,cld,ndcg1,0.6,0.55,0.65,5\n"
        "eta_true,0,cld,map,0.5,0.45,0.55,5\n";
    std::filesystem::path dir = std::filesystem::temp_directory_path() / "ultr_plot_test";
    std::filesystem::remove_all(dir);
    auto files = emit_plot_data(csv, dir.string());
    REQUIRE(files.size() == 2);
    std::ifstream in(dir / "plot_ndcg1_cld.csv");
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,mean,ci_low,ci_high");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
    std::filesystem::remove_all(dir);

    CHECK_THROWS(emit_plot_data("axis,value,method,metric,mean,ci_low,ci_high,n_seeds\n",
                                dir.string()));
    CHECK_THROWS(emit_plot_data("wrong,header\n", dir.string()));
}
