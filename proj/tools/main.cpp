#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "sentisim/config.hpp"
#include "sentisim/experiments.hpp"
#include "sentisim/hmm.hpp"
#include "sentisim/io.hpp"
#include "sentisim/market.hpp"
#include "sentisim/rnn.hpp"
#include "sentisim/sentiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace sentisim;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_file, "JSON configuration file");
    cmd->add_option("--seed", flags.seed, "master seed (overrides the config file)");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--workers", flags.workers, "worker threads for batch experiments");
}

config::RunConfig effective_config(const CommonFlags& flags) {
    config::RunConfig run =
        flags.config_file.empty() ? config::RunConfig{} : config::load_run_config(flags.config_file);
    if (flags.seed) run.seed = *flags.seed;
    if (flags.out_dir) run.out_dir = *flags.out_dir;
    if (flags.workers) {
        if (*flags.workers < 1) throw config::ConfigError("workers must be at least 1");
        run.workers = *flags.workers;
    }
    return run;
}

void echo_config(const config::RunConfig& run) {
    fs::create_directories(run.out_dir);
    io::write_file(run.out_dir / "config.json", config::to_json(run));
}

void print_path_summary(const market::MarketPath& path) {
    double sum = 0.0, sum_sq = 0.0;
    for (double price : path.price) {
        sum += price;
        sum_sq += price * price;
    }
    const double mean = sum / path.size();
    const double sd = std::sqrt(std::max(0.0, sum_sq / path.size() - mean * mean));
    std::cout << "steps: " << path.size() << "\n";
    std::cout << "mean price: " << mean << "\n";
    std::cout << "price sd: " << sd << "\n";
    std::map<int, long> occupancy;
    for (int state : path.state) ++occupancy[state];
    std::cout << "state occupancy:";
    for (const auto& [state, count] : occupancy) {
        std::cout << " " << state << ":" << count;
    }
    std::cout << "\n";
    std::cout << "trades: " << path.n_trades << "\n";
}

int cmd_simulate(const CommonFlags& flags, std::optional<long> steps,
                 std::optional<int> agents, std::optional<double> psi,
                 std::optional<int> groups) {
    config::RunConfig run = effective_config(flags);
    run.market.seed = run.seed;
    if (steps) run.market.n_steps = *steps;
    if (agents) run.market.n_agents = *agents;
    if (groups && *groups != 1) {
        throw config::ConfigError(
            "--groups only supports 1; define multi-group schedules in a config file");
    }
    if (psi) {
        sentiment::GroupSpec group;
        group.weight = 1.0;
        group.schedule.segments = {{1, *psi}};
        run.market.sentiment = std::vector<sentiment::GroupSpec>{group};
    }
    run.market.validate();
    echo_config(run);

    const market::MarketPath path = market::simulate(run.market);
    io::write_path_csv_file(path, run.out_dir / "path.csv");
    print_path_summary(path);
    std::cout << "wrote " << (run.out_dir / "path.csv").string() << "\n";
    return kExitOk;
}

int cmd_fit_hmm(const CommonFlags& flags, const std::string& input,
                std::optional<int> symbols, std::optional<int> restarts) {
    config::RunConfig run = effective_config(flags);
    if (symbols) run.hmm.n_symbols = *symbols;
    if (restarts) run.hmm.bw.n_restarts = *restarts;
    echo_config(run);

    const market::MarketPath path = io::read_path_csv_file(input);
    const auto [discretizer, observed] = hmm::discretize_prices(path.price, run.hmm.n_symbols);
    if (discretizer.n_symbols() < run.hmm.n_symbols) {
        std::cerr << "warning: only " << discretizer.n_symbols()
                  << " distinct price levels; reduced symbol count from "
                  << run.hmm.n_symbols << "\n";
    }

    Rng rng(run.seed);
    const auto [model, diagnostics] =
        hmm::baum_welch(observed, run.hmm.n_hidden, discretizer.n_symbols(), run.hmm.bw, rng);
    const auto order = hmm::align_states(model, discretizer);
    const hmm::HmmModel aligned = hmm::apply_state_order(model, order);
    const auto tables = hmm::viterbi(aligned, observed);

    {
        std::ofstream out(run.out_dir / "model.txt");
        hmm::save_model(aligned, out);
    }
    io::Table decoded;
    decoded.columns = {"t", "state"};
    for (std::size_t t = 0; t < tables.path.size(); ++t) {
        decoded.rows.push_back({static_cast<double>(t + 1),
                                static_cast<double>(tables.path[t])});
    }
    io::write_csv_file(decoded, run.out_dir / "decoded.csv");

    std::cout << "log-likelihood: " << diagnostics.final_loglik << "\n";
    std::cout << "iterations: " << diagnostics.iterations << " (best of "
              << run.hmm.bw.n_restarts << " restarts)\n";
    if (!path.state.empty()) {
        std::cout << "viterbi score: " << hmm::viterbi_score(tables.path, path.state) << "\n";
    }
    std::cout << "wrote " << (run.out_dir / "model.txt").string() << ", "
              << (run.out_dir / "decoded.csv").string() << "\n";
    return kExitOk;
}

int cmd_fit_rnn(const CommonFlags& flags, const std::string& input,
                std::optional<int> unroll, std::optional<int> epochs,
                std::optional<int> memory) {
    config::RunConfig run = effective_config(flags);
    if (unroll) run.rnn.unroll = *unroll;
    if (epochs) run.rnn.epochs = *epochs;
    if (memory) run.rnn.memory = *memory;
    echo_config(run);

    const market::MarketPath path = io::read_path_csv_file(input);
    if (path.state.empty()) throw io::CsvError("missing column: state");

    rnn::TrainConfig train_config = run.rnn;
    train_config.seed = run.seed;
    const rnn::TrainResult trained = rnn::train(path, train_config);

    const Eigen::MatrixXd features = rnn::make_features(path.price, trained.train_count);
    const std::vector<int> decoded = rnn::predict(trained.params, features);
    long matches = 0;
    const long test_count = path.size() - trained.train_count;
    for (long t = trained.train_count; t < path.size(); ++t) {
        if (decoded[t] == path.state[t]) ++matches;
    }
    const double test_score =
        test_count > 0 ? static_cast<double>(matches) / test_count : 0.0;

    {
        std::ofstream out(run.out_dir / "checkpoint.txt");
        rnn::save_checkpoint(trained.params, trained.cache, out);
    }
    std::cout << "train score: " << trained.train_score << "\n";
    std::cout << "test score: " << test_score << "\n";
    if (!trained.epoch_loss.empty()) {
        std::cout << "final mean loss: " << trained.epoch_loss.back() << "\n";
    }
    if (trained.restarts > 0) {
        std::cout << "divergence guard: restarted " << trained.restarts
                  << " time(s), learning rate " << trained.learning_rate << "\n";
    }
    std::cout << "wrote " << (run.out_dir / "checkpoint.txt").string() << "\n";
    return kExitOk;
}

int cmd_experiment(const CommonFlags& flags, const std::string& name,
                   std::optional<int> sims, std::optional<long> steps) {
    if (name != "regimes" && name != "hmm-batch" && name != "rnn-batch") {
        std::cerr << "unknown experiment '" << name
                  << "'; valid names: regimes, hmm-batch, rnn-batch\n";
        return kExitUsage;
    }
    config::RunConfig run = effective_config(flags);
    echo_config(run);

    if (name == "regimes") {
        experiments::RegimesConfig config;
        config.n_steps = steps.value_or(10000);
        config.burn = run.experiment.burn;
        config.seed = run.seed;
        const auto [report, path] = experiments::run_regimes(config);
        experiments::write_regimes_outputs(report, path, run.out_dir);
        for (const auto& row : report.rows) {
            std::cout << "regime " << row.regime << " [" << row.t_start << "," << row.t_end
                      << "]: mean " << row.mean << ", sd " << row.sd << ", predicted "
                      << row.pe_pred << ", rel err " << row.rel_err << "\n";
        }
    } else if (name == "hmm-batch") {
        experiments::HmmBatchConfig config;
        config.n_sims = sims.value_or(run.experiment.n_sims > 0 ? run.experiment.n_sims : 30);
        if (steps) config.n_steps = *steps;
        if (run.experiment.diag_low >= 0) config.diag_low = run.experiment.diag_low;
        if (run.experiment.diag_high >= 0) config.diag_high = run.experiment.diag_high;
        config.n_symbols = run.hmm.n_symbols;
        config.bw = run.hmm.bw;
        config.seed = run.seed;
        config.workers = run.workers;
        const auto records = experiments::run_hmm_batch(config);
        experiments::write_hmm_batch_outputs(records, run.out_dir);
        double score_sum = 0.0;
        int ok = 0;
        for (const auto& record : records) {
            if (record.failed) continue;
            score_sum += record.viterbi_score;
            ++ok;
        }
        std::cout << "simulations: " << records.size() << " (" << ok << " succeeded)\n";
        if (ok > 0) std::cout << "mean viterbi score: " << score_sum / ok << "\n";
    } else {
        experiments::RnnBatchConfig config;
        config.n_sims = sims.value_or(run.experiment.n_sims > 0 ? run.experiment.n_sims : 10);
        if (steps) config.n_steps = *steps;
        if (run.experiment.diag_low >= 0) config.diag_low = run.experiment.diag_low;
        if (run.experiment.diag_high >= 0) config.diag_high = run.experiment.diag_high;
        config.rnn = run.rnn;
        config.seed = run.seed;
        config.workers = run.workers;
        const auto records = experiments::run_rnn_batch(config);
        experiments::write_rnn_batch_outputs(records, run.out_dir);
        double train_sum = 0.0, test_sum = 0.0;
        int ok = 0;
        for (const auto& record : records) {
            if (record.failed) continue;
            train_sum += record.train_score;
            test_sum += record.test_score;
            ++ok;
        }
        std::cout << "simulations: " << records.size() << " (" << ok << " succeeded)\n";
        if (ok > 0) {
            std::cout << "mean train score: " << train_sum / ok << "\n";
            std::cout << "mean test score: " << test_sum / ok << "\n";
        }
    }
    std::cout << "wrote reports to " << run.out_dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sentiment-driven stock market simulator and sentiment reconstruction"};
    app.require_subcommand(1);

    CommonFlags sim_flags, hmm_flags, rnn_flags, exp_flags;
    std::optional<long> sim_steps, exp_steps;
    std::optional<int> sim_agents, sim_groups;
    std::optional<double> sim_psi;
    std::string hmm_input, rnn_input, experiment_name;
    std::optional<int> hmm_symbols, hmm_restarts, rnn_unroll, rnn_epochs, rnn_memory, exp_sims;

    CLI::App* simulate = app.add_subcommand("simulate", "run one market simulation");
    add_common(simulate, sim_flags);
    simulate->add_option("--steps", sim_steps, "number of simulation steps");
    simulate->add_option("--agents", sim_agents, "number of agents");
    simulate->add_option("--psi", sim_psi, "constant buy/sell sentiment for a single group");
    simulate->add_option("--groups", sim_groups, "number of sentiment groups (only 1)");

    CLI::App* fit_hmm = app.add_subcommand("fit-hmm", "fit a hidden Markov model to a path CSV");
    add_common(fit_hmm, hmm_flags);
    fit_hmm->add_option("input", hmm_input, "path CSV with a price column")->required();
    fit_hmm->add_option("--symbols", hmm_symbols, "observation symbols (quantile bins)");
    fit_hmm->add_option("--restarts", hmm_restarts, "EM restarts");

    CLI::App* fit_rnn = app.add_subcommand("fit-rnn", "train the recurrent network on a path CSV");
    add_common(fit_rnn, rnn_flags);
    fit_rnn->add_option("input", rnn_input, "path CSV with price and state columns")->required();
    fit_rnn->add_option("--unroll", rnn_unroll, "training chunk length");
    fit_rnn->add_option("--epochs", rnn_epochs, "training epochs");
    fit_rnn->add_option("--memory", rnn_memory, "memory layer width");

    CLI::App* experiment = app.add_subcommand("experiment", "run a batch study");
    add_common(experiment, exp_flags);
    experiment->add_option("name", experiment_name, "regimes | hmm-batch | rnn-batch")->required();
    experiment->add_option("--sims", exp_sims, "number of simulations in the batch");
    experiment->add_option("--steps", exp_steps, "steps per simulation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(sim_flags, sim_steps, sim_agents, sim_psi, sim_groups);
        }
        if (fit_hmm->parsed()) {
            return cmd_fit_hmm(hmm_flags, hmm_input, hmm_symbols, hmm_restarts);
        }
        if (fit_rnn->parsed()) {
            return cmd_fit_rnn(rnn_flags, rnn_input, rnn_unroll, rnn_epochs, rnn_memory);
        }
        if (experiment->parsed()) {
            return cmd_experiment(exp_flags, experiment_name, exp_sims, exp_steps);
        }
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const io::CsvError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
