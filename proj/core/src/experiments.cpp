#include "sentisim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "sentisim/sentiment.hpp"
#include "sentisim/svg.hpp"

namespace sentisim::experiments {

namespace {

using ordered_json = nlohmann::ordered_json;

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items must be
/// independent; results keyed by i stay deterministic regardless of schedule.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& thread : pool) thread.join();
}

sentiment::MarkovSentimentSpec markov_spec(const Eigen::MatrixXd& transition) {
    sentiment::MarkovSentimentSpec spec;
    spec.states = {-1.0, 0.0, 1.0};
    spec.transition = transition;
    return spec;
}

void append_matrix(std::vector<double>& row, const Eigen::Matrix3d& m) {
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) row.push_back(m(i, j));
    }
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Eigen::MatrixXd demo_transition_matrix() {
    Eigen::MatrixXd a(3, 3);
    // State order (sell, neutral, buy).
    a << 0.90, 0.05, 0.05,
         0.035, 0.93, 0.035,
         0.025, 0.025, 0.95;
    return a;
}

Eigen::MatrixXd long_dwell_transition_matrix() {
    Eigen::MatrixXd a(3, 3);
    a << 0.9931, 0.0025, 0.0044,
         0.0022, 0.9962, 0.0016,
         0.0050, 0.0002, 0.9948;
    return a;
}

market::MarketConfig markov_market_config(std::uint64_t seed, long n_steps, int n_agents) {
    market::MarketConfig config;
    config.n_agents = n_agents;
    config.n_steps = n_steps;
    config.participation = 0.1;
    config.initial_price = 100.0;
    config.volatility = sentiment::VolatilitySpec{0.02, 0.005};
    config.sentiment = markov_spec(demo_transition_matrix());
    config.seed = seed;
    return config;
}

market::MarketConfig three_regime_market_config(std::uint64_t seed, long n_steps,
                                                int n_agents, double group1_weight,
                                                double sigma) {
    const long second_start = n_steps / 3 + 1;
    const long third_start = 3 * n_steps / 4 + 1;
    const double log2 = std::log(2.0);

    sentiment::GroupSpec group1;
    group1.weight = group1_weight;
    group1.schedule.segments = {{1, 0.0}, {second_start, log2}};
    sentiment::GroupSpec group2;
    group2.weight = 1.0 - group1_weight;
    group2.schedule.segments = {{1, 0.0}, {third_start, -log2}};

    market::MarketConfig config;
    config.n_agents = n_agents;
    config.n_steps = n_steps;
    config.participation = 0.1;
    config.initial_price = 100.0;
    config.volatility = sigma;
    config.sentiment = std::vector<sentiment::GroupSpec>{group1, group2};
    config.seed = seed;
    return config;
}

std::pair<RegimeReport, market::MarketPath> run_regimes(const RegimesConfig& config) {
    const market::MarketConfig market_config = three_regime_market_config(
        config.seed, config.n_steps, config.n_agents, config.group1_weight, config.sigma);
    const market::MarketPath path = market::simulate(market_config);

    const auto& groups =
        std::get<std::vector<sentiment::GroupSpec>>(market_config.sentiment);
    std::vector<long> changes;
    for (const auto& group : groups) {
        for (const auto& segment : group.schedule.segments) {
            if (segment.start > 1) changes.push_back(segment.start);
        }
    }
    std::sort(changes.begin(), changes.end());
    changes.erase(std::unique(changes.begin(), changes.end()), changes.end());

    RegimeReport report;
    long regime_start = 1;
    for (std::size_t r = 0; r <= changes.size(); ++r) {
        const long regime_end = r < changes.size() ? changes[r] - 1 : config.n_steps;
        const long measure_start =
            regime_start == 1 ? regime_start : std::min(regime_start + config.burn, regime_end);
        double sum = 0.0, sum_sq = 0.0;
        long count = 0;
        for (long t = measure_start; t <= regime_end; ++t) {
            const double price = path.price[t - 1];
            sum += price;
            sum_sq += price * price;
            ++count;
        }
        const double mean = count > 0 ? sum / count : 0.0;
        const double variance = count > 0 ? std::max(0.0, sum_sq / count - mean * mean) : 0.0;

        std::vector<std::pair<double, double>> weighted;
        for (const auto& group : groups) {
            weighted.emplace_back(group.weight,
                                  sentiment::sentiment_at(group.schedule, regime_start));
        }
        const auto [p_b, p_s] = sentiment::effective_probabilities(weighted);
        const double pe = sentiment::equilibrium_price(p_b, p_s, path.initial_cash,
                                                       path.initial_shares);

        RegimeRow row;
        row.regime = static_cast<int>(r) + 1;
        row.t_start = measure_start;
        row.t_end = regime_end;
        row.mean = mean;
        row.sd = std::sqrt(variance);
        row.pe_pred = pe;
        row.rel_err = (mean - pe) / pe;
        report.rows.push_back(row);
        regime_start = regime_end + 1;
    }
    return {std::move(report), std::move(path)};
}

std::vector<HmmExperimentRecord> run_hmm_batch(const HmmBatchConfig& config) {
    if (config.n_sims < 1) throw std::invalid_argument("need at least one simulation");
    std::vector<HmmExperimentRecord> records(config.n_sims);
    parallel_for(config.n_sims, config.workers, [&](int sim) {
        HmmExperimentRecord& record = records[sim];
        record.sim = sim;
        record.seed = derive_seed(config.seed, static_cast<std::uint64_t>(sim));
        try {
            Rng matrix_rng(derive_seed(record.seed, 1));
            const Eigen::MatrixXd a_true = sentiment::sample_transition_matrix(
                matrix_rng, config.diag_low, config.diag_high, config.n_hidden);
            record.a_true = a_true;

            market::MarketConfig market_config =
                markov_market_config(derive_seed(record.seed, 2), config.n_steps,
                                     config.n_agents);
            std::get<sentiment::MarkovSentimentSpec>(market_config.sentiment).transition =
                a_true;
            const market::MarketPath path = market::simulate(market_config);

            const auto [discretizer, symbols] =
                hmm::discretize_prices(path.price, config.n_symbols);
            Rng bw_rng(derive_seed(record.seed, 3));
            const auto [model, diagnostics] = hmm::baum_welch(
                symbols, config.n_hidden, discretizer.n_symbols(), config.bw, bw_rng);
            const auto order = hmm::align_states(model, discretizer);
            const hmm::HmmModel aligned = hmm::apply_state_order(model, order);
            const auto tables = hmm::viterbi(aligned, symbols);

            record.a_fit = aligned.A;
            record.viterbi_score = hmm::viterbi_score(tables.path, path.state);
            record.loglik = diagnostics.final_loglik;
            record.iterations = diagnostics.iterations;
            record.min_loglik_delta = diagnostics.min_loglik_delta;
        } catch (const std::exception& e) {
            record.failed = true;
            record.error = e.what();
            record.a_fit.setConstant(std::numeric_limits<double>::quiet_NaN());
            record.viterbi_score = std::numeric_limits<double>::quiet_NaN();
            record.loglik = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return records;
}

std::vector<RnnExperimentRecord> run_rnn_batch(const RnnBatchConfig& config) {
    if (config.n_sims < 1) throw std::invalid_argument("need at least one simulation");
    std::vector<RnnExperimentRecord> records(config.n_sims);
    parallel_for(config.n_sims, config.workers, [&](int sim) {
        RnnExperimentRecord& record = records[sim];
        record.sim = sim;
        record.seed = derive_seed(config.seed, static_cast<std::uint64_t>(sim));
        try {
            Rng matrix_rng(derive_seed(record.seed, 1));
            const Eigen::MatrixXd a_true = sentiment::sample_transition_matrix(
                matrix_rng, config.diag_low, config.diag_high, 3);
            record.a_true = a_true;

            market::MarketConfig market_config = markov_market_config(
                derive_seed(record.seed, 2), config.n_steps, config.n_agents);
            std::get<sentiment::MarkovSentimentSpec>(market_config.sentiment).transition =
                a_true;
            const market::MarketPath path = market::simulate(market_config);

            rnn::TrainConfig train_config = config.rnn;
            train_config.n_classes = 3;
            train_config.seed = derive_seed(record.seed, 3);
            const rnn::TrainResult trained = rnn::train(path, train_config);

            const Eigen::MatrixXd features =
                rnn::make_features(path.price, trained.train_count);
            const std::vector<int> decoded = rnn::predict(trained.params, features);
            long matches = 0;
            const long test_count = path.size() - trained.train_count;
            for (long t = trained.train_count; t < path.size(); ++t) {
                if (decoded[t] == path.state[t]) ++matches;
            }
            record.train_score = trained.train_score;
            record.test_score =
                test_count > 0 ? static_cast<double>(matches) / test_count : 0.0;
            record.final_loss = trained.epoch_loss.empty()
                                    ? std::numeric_limits<double>::quiet_NaN()
                                    : trained.epoch_loss.back();
        } catch (const std::exception& e) {
            record.failed = true;
            record.error = e.what();
            record.train_score = std::numeric_limits<double>::quiet_NaN();
            record.test_score = std::numeric_limits<double>::quiet_NaN();
            record.final_loss = std::numeric_limits<double>::quiet_NaN();
        }
    });
    return records;
}

io::Table to_table(const std::vector<HmmExperimentRecord>& records) {
    io::Table table;
    table.columns = {"sim", "seed"};
    for (const char* which : {"true", "fit"}) {
        for (int i = 1; i <= 3; ++i) {
            for (int j = 1; j <= 3; ++j) {
                table.columns.push_back("a" + std::to_string(i) + std::to_string(j) + "_" +
                                        which);
            }
        }
    }
    table.columns.insert(table.columns.end(), {"viterbi_score", "loglik", "iters"});
    for (const auto& record : records) {
        std::vector<double> row{static_cast<double>(record.sim),
                                static_cast<double>(record.seed)};
        append_matrix(row, record.a_true);
        append_matrix(row, record.a_fit);
        row.push_back(record.viterbi_score);
        row.push_back(record.loglik);
        row.push_back(static_cast<double>(record.iterations));
        table.rows.push_back(std::move(row));
    }
    return table;
}

io::Table to_table(const std::vector<RnnExperimentRecord>& records) {
    io::Table table;
    table.columns = {"sim", "seed"};
    for (int i = 1; i <= 3; ++i) {
        for (int j = 1; j <= 3; ++j) {
            table.columns.push_back("a" + std::to_string(i) + std::to_string(j) + "_true");
        }
    }
    table.columns.insert(table.columns.end(), {"train_score", "test_score", "final_loss"});
    for (const auto& record : records) {
        std::vector<double> row{static_cast<double>(record.sim),
                                static_cast<double>(record.seed)};
        append_matrix(row, record.a_true);
        row.push_back(record.train_score);
        row.push_back(record.test_score);
        row.push_back(record.final_loss);
        table.rows.push_back(std::move(row));
    }
    return table;
}

io::Table to_table(const RegimeReport& report) {
    io::Table table;
    table.columns = {"regime", "t_start", "t_end", "mean", "sd", "pe_pred", "rel_err"};
    for (const auto& row : report.rows) {
        table.rows.push_back({static_cast<double>(row.regime),
                              static_cast<double>(row.t_start),
                              static_cast<double>(row.t_end), row.mean, row.sd, row.pe_pred,
                              row.rel_err});
    }
    return table;
}

std::string summarize(const io::Table& table) {
    ordered_json summary;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        std::vector<double> values;
        values.reserve(table.rows.size());
        for (const auto& row : table.rows) {
            if (std::isfinite(row[c])) values.push_back(row[c]);
        }
        ordered_json stats;
        if (values.empty()) {
            stats["count"] = 0;
        } else {
            std::sort(values.begin(), values.end());
            double sum = 0.0;
            for (double v : values) sum += v;
            const double mean = sum / values.size();
            double sq = 0.0;
            for (double v : values) sq += (v - mean) * (v - mean);
            stats["count"] = values.size();
            stats["mean"] = mean;
            stats["sd"] = std::sqrt(sq / values.size());
            stats["min"] = values.front();
            stats["max"] = values.back();
            stats["median"] = quantile_sorted(values, 0.5);
        }
        summary[table.columns[c]] = stats;
    }
    return summary.dump(2) + "\n";
}

void write_report(const io::Table& table, const std::filesystem::path& csv_file,
                  const std::filesystem::path& json_file) {
    io::write_csv_file(table, csv_file);
    io::write_file(json_file, summarize(table));
}

void write_hmm_batch_outputs(const std::vector<HmmExperimentRecord>& records,
                             const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const io::Table table = to_table(records);
    write_report(table, dir / "hmm_batch.csv", dir / "summary.json");

    std::vector<svg::Series> panes(9);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            auto& pane = panes[3 * i + j];
            pane.label = "a" + std::to_string(i + 1) + std::to_string(j + 1);
            for (const auto& record : records) {
                if (record.failed) continue;
                pane.x.push_back(record.a_true(i, j));
                pane.y.push_back(record.a_fit(i, j));
            }
        }
    }
    svg::write_scatter_grid(dir / "hmm_batch_fit.svg", panes, 3,
                            "transition matrix: fitted vs true");

    std::vector<double> scores;
    for (const auto& record : records) {
        if (!record.failed) scores.push_back(record.viterbi_score);
    }
    svg::write_histogram(dir / "hmm_batch_scores.svg", scores, 12,
                         "decoded-state score across simulations");
}

void write_rnn_batch_outputs(const std::vector<RnnExperimentRecord>& records,
                             const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const io::Table table = to_table(records);
    write_report(table, dir / "rnn_batch.csv", dir / "summary.json");

    std::vector<double> train_scores, test_scores;
    for (const auto& record : records) {
        if (record.failed) continue;
        train_scores.push_back(record.train_score);
        test_scores.push_back(record.test_score);
    }
    svg::write_histogram(dir / "rnn_batch_train_scores.svg", train_scores, 12,
                         "train-set score across simulations");
    svg::write_histogram(dir / "rnn_batch_test_scores.svg", test_scores, 12,
                         "test-set score across simulations");
}

void write_regimes_outputs(const RegimeReport& report, const market::MarketPath& path,
                           const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_report(to_table(report), dir / "regimes.csv", dir / "summary.json");
    io::write_path_csv_file(path, dir / "path.csv");
    svg::write_line_chart(dir / "regimes_price.svg", path.price, "price series");
}

}  // namespace sentisim::experiments
