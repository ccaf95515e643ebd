#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "sentisim/experiments.hpp"
#include "sentisim/hmm.hpp"
#include "sentisim/market.hpp"
#include "sentisim/rnn.hpp"

namespace sentisim::config {

/// Invalid or unknown configuration content (exit code 2 territory).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct HmmConfig {
    int n_hidden = 3;
    int n_symbols = 9;
    hmm::BaumWelchOptions bw{};
};

struct ExperimentConfig {
    int n_sims = 0;  // 0 => per-experiment default
    double diag_low = -1.0;
    double diag_high = -1.0;
    long burn = 300;
};

/// Full run configuration: defaults, overlaid by an optional JSON document,
/// overlaid by command-line flags. Unknown JSON keys are rejected.
struct RunConfig {
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "out";
    int workers = 1;
    market::MarketConfig market = experiments::markov_market_config(1);
    HmmConfig hmm{};
    rnn::TrainConfig rnn{};
    ExperimentConfig experiment{};
};

/// Parses a JSON document over the defaults; throws ConfigError on unknown
/// keys or malformed values.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& file);

/// The effective configuration echoed into the output directory.
std::string to_json(const RunConfig& config);

}  // namespace sentisim::config
