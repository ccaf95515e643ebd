#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sentisim/hmm.hpp"
#include "sentisim/io.hpp"
#include "sentisim/market.hpp"
#include "sentisim/rnn.hpp"

namespace sentisim::experiments {

// ---- Preset market setups used by the batch studies -----------------------

/// Moderately persistent 3-state sentiment chain (states sell/neutral/buy,
/// diagonals 0.90/0.93/0.95; mean dwell 10-20 steps).
Eigen::MatrixXd demo_transition_matrix();

/// Strongly persistent chain (diagonals ~0.993-0.996; dwell 150-300 steps).
Eigen::MatrixXd long_dwell_transition_matrix();

/// Markov-sentiment market: N agents, stationary Gaussian volatility.
market::MarketConfig markov_market_config(std::uint64_t seed, long n_steps = 1000,
                                          int n_agents = 1000);

/// Two-group piecewise market with sentiment changes at T/3 and 3T/4 and a
/// fixed relative volatility, producing three price regimes.
market::MarketConfig three_regime_market_config(std::uint64_t seed, long n_steps = 10000,
                                                int n_agents = 1000, double group1_weight = 0.25,
                                                double sigma = 0.01);

// ---- Regime study ----------------------------------------------------------

struct RegimesConfig {
    long n_steps = 10000;
    int n_agents = 1000;
    double group1_weight = 0.25;
    double sigma = 0.01;
    long burn = 300;  // steps dropped after a sentiment change
    std::uint64_t seed = 0;
};

struct RegimeRow {
    int regime = 0;
    long t_start = 0;  // first step of the measured window (post burn)
    long t_end = 0;    // last step of the measured window
    double mean = 0.0;
    double sd = 0.0;
    double pe_pred = 0.0;
    double rel_err = 0.0;
};

struct RegimeReport {
    std::vector<RegimeRow> rows;
};

std::pair<RegimeReport, market::MarketPath> run_regimes(const RegimesConfig& config);

// ---- Repeated HMM fits -----------------------------------------------------

struct HmmBatchConfig {
    int n_sims = 30;
    double diag_low = 0.95;
    double diag_high = 0.98;
    long n_steps = 1000;
    int n_agents = 1000;
    int n_hidden = 3;
    int n_symbols = 9;
    hmm::BaumWelchOptions bw{};
    std::uint64_t seed = 1;
    int workers = 1;
};

struct HmmExperimentRecord {
    int sim = 0;
    std::uint64_t seed = 0;
    Eigen::Matrix3d a_true = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d a_fit = Eigen::Matrix3d::Zero();
    double viterbi_score = 0.0;
    double loglik = 0.0;
    int iterations = 0;
    double min_loglik_delta = 0.0;
    bool failed = false;
    std::string error;
};

std::vector<HmmExperimentRecord> run_hmm_batch(const HmmBatchConfig& config);

// ---- Repeated RNN fits -----------------------------------------------------

struct RnnBatchConfig {
    int n_sims = 10;
    double diag_low = 0.97;
    double diag_high = 1.0;  // diagonal draw is half-open: [low, high)
    long n_steps = 5000;
    int n_agents = 1000;
    rnn::TrainConfig rnn{};
    std::uint64_t seed = 1;
    int workers = 1;
};

struct RnnExperimentRecord {
    int sim = 0;
    std::uint64_t seed = 0;
    Eigen::Matrix3d a_true = Eigen::Matrix3d::Zero();
    double train_score = 0.0;
    double test_score = 0.0;
    double final_loss = 0.0;
    bool failed = false;
    std::string error;
};

std::vector<RnnExperimentRecord> run_rnn_batch(const RnnBatchConfig& config);

// ---- Reports ---------------------------------------------------------------

io::Table to_table(const std::vector<HmmExperimentRecord>& records);
io::Table to_table(const std::vector<RnnExperimentRecord>& records);
io::Table to_table(const RegimeReport& report);

/// Per-column mean/sd/min/max/median, serialized as JSON; non-finite cells
/// are skipped.
std::string summarize(const io::Table& table);

/// CSV plus summary JSON next to it.
void write_report(const io::Table& table, const std::filesystem::path& csv_file,
                  const std::filesystem::path& json_file);

/// Full per-experiment output sets (CSV, summary.json, SVG conveniences).
void write_hmm_batch_outputs(const std::vector<HmmExperimentRecord>& records,
                             const std::filesystem::path& dir);
void write_rnn_batch_outputs(const std::vector<RnnExperimentRecord>& records,
                             const std::filesystem::path& dir);
void write_regimes_outputs(const RegimeReport& report, const market::MarketPath& path,
                           const std::filesystem::path& dir);

}  // namespace sentisim::experiments
