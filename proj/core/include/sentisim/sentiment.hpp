#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "sentisim/rng.hpp"

namespace sentisim::sentiment {

/// One segment of a piecewise-constant sentiment process: psi holds from
/// step `start` until the next segment begins.
struct Segment {
    long start = 1;
    double psi = 0.0;
};

struct PiecewiseSchedule {
    std::vector<Segment> segments;

    /// Throws std::invalid_argument unless segments are non-empty, start at
    /// t=1 and have strictly increasing start steps.
    void validate() const;
};

struct GroupSpec {
    double weight = 1.0;  // fraction of the agent population
    PiecewiseSchedule schedule;
};

/// Markov-chain sentiment: a hidden state index evolving by a row-stochastic
/// transition matrix, each state carrying a log-odds value psi.
struct MarkovSentimentSpec {
    std::vector<double> states{-1.0, 0.0, 1.0};
    Eigen::MatrixXd transition;
    Eigen::VectorXd initial;  // empty => uniform over states

    int n_states() const { return static_cast<int>(states.size()); }
    void validate() const;
};

/// Stationary Gaussian volatility sentiment (relative price units).
struct VolatilitySpec {
    double mean = 0.02;
    double sd = 0.005;

    void validate() const;
};

/// Smallest admissible volatility draw; Gaussian draws below it are rejected.
inline constexpr double kMinVolatility = 1e-4;

/// P(buy) for log-odds psi: e^psi / (1 + e^psi).
double buy_probability(double psi);

/// Population-level buy/sell probabilities for groups of (weight, psi).
/// Weights must sum to 1 within 1e-9.
std::pair<double, double> effective_probabilities(
    const std::vector<std::pair<double, double>>& groups);

/// Flow-balance equilibrium price (p_b/p_s) * M/S.
double equilibrium_price(double p_b_eff, double p_s_eff, double total_cash,
                         double total_shares);

/// Value of the active segment at step t (1-based).
double sentiment_at(const PiecewiseSchedule& schedule, long t);

/// Draws the next hidden state from row `current` of the transition matrix.
int step_markov(const MarkovSentimentSpec& spec, int current, Rng& rng);

/// Random row-stochastic matrix with each diagonal uniform in
/// [diag_low, diag_high) (the degenerate diag_low == diag_high draw returns
/// that value) and the off-diagonal remainder split proportionally to
/// independent U(0,1) draws.
Eigen::MatrixXd sample_transition_matrix(Rng& rng, double diag_low,
                                         double diag_high, int n_states);

/// Gaussian draw from the spec, re-drawn until it clears kMinVolatility.
double sample_volatility(const VolatilitySpec& spec, Rng& rng);

/// Stationary distribution of a row-stochastic matrix (solves pi A = pi).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition);

}  // namespace sentisim::sentiment
