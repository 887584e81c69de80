// Command-line front end: click-log simulation, estimator training,
// evaluation, parameter sweeps, and the 1-D bias study.

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ultr/clicksim.hpp"
#include "ultr/harness.hpp"
#include "ultr/policy.hpp"

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Click-log simulation and unbiased learning-to-rank estimators"};
    app.require_subcommand(1);

    std::string config_path, out_path, log_path, method, checkpoint_path, axis, values_str,
        plot_dir, trace_path;

    auto* sim = app.add_subcommand("simulate", "simulate a click log from the configured dataset");
    sim->add_option("--config", config_path, "config file")->required();
    sim->add_option("--out", out_path, "output click-log CSV")->required();

    auto* train = app.add_subcommand("train", "train one method on a click log");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--log", log_path, "click-log CSV from `simulate`")->required();
    train->add_option("--method", method, "naive|ips|heckman|rank_agg|oracle|cld|cld_mlp|cld_pair|cld_pair_linear")
        ->required();
    train->add_option("--out", checkpoint_path, "output model checkpoint")->required();
    train->add_option("--trace", trace_path, "training-trace CSV (default: <out>.trace.csv)");

    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    eval->add_option("--config", config_path, "config file")->required();
    eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    eval->add_option("--out", out_path, "optional metrics CSV (default: stdout)");

    auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment per axis value");
    sweep_cmd->add_option("--config", config_path, "config file")->required();
    sweep_cmd->add_option("--axis", axis, "k_cutoff|eta_true|noise_eps|n_sessions|eta_hat")
        ->required();
    sweep_cmd->add_option("--values", values_str, "comma-separated axis values")->required();
    sweep_cmd->add_option("--out", out_path, "output CSV")->required();
    sweep_cmd->add_option("--plot-dir", plot_dir, "also emit per-(metric,method) series files");

    auto* fig2 = app.add_subcommand("fig2", "1-D synthetic bias study: four fitted lines");
    fig2->add_option("--config", config_path, "config file")->required();
    fig2->add_option("--out", out_path, "output CSV")->required();

    auto* run = app.add_subcommand("run", "run the configured experiment end to end");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_path, "output results CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            ultr::ExperimentConfig cfg = ultr::parse_config_file(config_path);
            auto [train_data, test_data] = ultr::load_datasets(cfg);
            (void)test_data;
            std::uint64_t seed = cfg.seeds.front();
            ultr::LoggingPolicy policy = ultr::train_logging_policy(
                train_data, cfg.sample_fraction, ultr::mix_seed(seed, 0x706f6cULL));
            std::size_t max_docs = 0;
            for (const auto& g : train_data.groups) max_docs = std::max(max_docs, g.docs.size());
            ultr::PropensityTable table = ultr::make_propensity_table(
                cfg.eta_true, cfg.k_cutoff, static_cast<int>(max_docs));
            ultr::ClickLog log = ultr::build_click_log(policy, train_data, table, cfg.n_sessions,
                                                       cfg.noise_eps,
                                                       ultr::mix_seed(seed, 0x73696dULL));
            if (cfg.eta_hat >= 0.0)
                ultr::apply_table(log, ultr::misspecified_table(table, cfg.eta_hat));
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
            ultr::write_click_log(log, out);
        } else if (train->parsed()) {
            ultr::ExperimentConfig cfg = ultr::parse_config_file(config_path);
            auto [train_data, test_data] = ultr::load_datasets(cfg);
            (void)test_data;
            std::ifstream in(log_path);
            if (!in) throw std::runtime_error("cannot open click log: " + log_path);
            ultr::ClickLog log = ultr::read_click_log(in, train_data);
            ultr::CldConfig mc = cfg.cld;
            mc.seed = cfg.seeds.front();
            ultr::TrainedRanker ranker = ultr::train_method(method, log, train_data, mc);
            std::ofstream out(checkpoint_path, std::ios::binary);
            if (!out) throw std::runtime_error("cannot open for writing: " + checkpoint_path);
            ultr::write_ranker(ranker, out);
            std::string tpath = trace_path.empty() ? checkpoint_path + ".trace.csv" : trace_path;
            std::ostringstream trace;
            trace << "epoch,loss\n";
            char buf[64];
            for (std::size_t e = 0; e < ranker.epoch_loss.size(); ++e) {
                std::snprintf(buf, sizeof(buf), "%.10g", ranker.epoch_loss[e]);
                trace << (e + 1) << ',' << buf << '\n';
            }
            write_file(tpath, trace.str());
        } else if (eval->parsed()) {
            ultr::ExperimentConfig cfg = ultr::parse_config_file(config_path);
            auto [train_data, test_data] = ultr::load_datasets(cfg);
            (void)train_data;
            std::ifstream in(checkpoint_path);
            if (!in) throw std::runtime_error("cannot open checkpoint: " + checkpoint_path);
            ultr::TrainedRanker ranker = ultr::read_ranker(in);
            ultr::MetricsReport report = ultr::evaluate(ranker, test_data, cfg.graded_eval);
            char buf[160];
            std::snprintf(buf, sizeof(buf), "ndcg1,ndcg3,map,n_queries\n%.6f,%.6f,%.6f,%d\n",
                          report.ndcg_at_1, report.ndcg_at_3, report.map, report.n_queries);
            if (out_path.empty())
                std::cout << buf;
            else
                write_file(out_path, buf);
        } else if (sweep_cmd->parsed()) {
            ultr::ExperimentConfig cfg = ultr::parse_config_file(config_path);
            std::vector<double> values;
            std::istringstream vs(values_str);
            std::string tok;
            while (std::getline(vs, tok, ',')) values.push_back(std::stod(tok));
            std::string csv = ultr::sweep(cfg, axis, values);
            write_file(out_path, csv);
            if (!plot_dir.empty()) ultr::emit_plot_data(csv, plot_dir);
        } else if (fig2->parsed()) {
            ultr::ExperimentConfig cfg = ultr::parse_config_file(config_path);
            write_file(out_path, ultr::fig2_study(cfg.fig2));
        } else if (run->parsed()) {
            ultr::ExperimentConfig cfg = ultr::parse_config_file(config_path);
            auto results = ultr::run_experiment(cfg);
            write_file(out_path, ultr::results_csv(results, cfg));
            for (const auto& r : results)
                if (r.failed)
                    std::cerr << "warning: " << r.method << " seed " << r.seed
                              << " failed: " << r.error << '\n';
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
