#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "sentisim/rng.hpp"
#include "sentisim/sentiment.hpp"

namespace sentisim::market {

struct Agent {
    double cash = 0.0;
    double shares = 0.0;
};

enum class Side { buy, sell };

struct Order {
    int agent = -1;
    Side side = Side::buy;
    double limit = 0.0;     // currency per share
    double quantity = 0.0;  // fractional shares
};

struct Trade {
    int buyer = -1;
    int seller = -1;
    double price = 0.0;  // always the resting order's limit
    double quantity = 0.0;
};

struct RestingOrder {
    double limit = 0.0;
    double quantity = 0.0;
    int agent = -1;
    long arrival = 0;
};

/// Per-step limit order book. Bids sorted by (limit desc, arrival asc),
/// asks by (limit asc, arrival asc); cleared at the end of every step.
class Book {
public:
    void rest(const Order& order);
    void clear();

    const std::vector<RestingOrder>& bids() const { return bids_; }
    const std::vector<RestingOrder>& asks() const { return asks_; }

    std::vector<RestingOrder>& bids() { return bids_; }
    std::vector<RestingOrder>& asks() { return asks_; }

private:
    std::vector<RestingOrder> bids_;
    std::vector<RestingOrder> asks_;
    long next_arrival_ = 0;
};

using VolatilityModel = std::variant<double, sentiment::VolatilitySpec>;
using SentimentModel =
    std::variant<std::vector<sentiment::GroupSpec>, sentiment::MarkovSentimentSpec>;

struct MarketConfig {
    int n_agents = 1000;
    long n_steps = 1000;
    double participation = 0.1;
    double initial_price = 100.0;
    double initial_cash_mean = 1e5;
    double initial_cash_sd = 1e3;
    double initial_shares = 1e3;
    VolatilityModel volatility = sentiment::VolatilitySpec{};
    SentimentModel sentiment = sentiment::MarkovSentimentSpec{};
    std::uint64_t seed = 0;

    void validate() const;
};

/// Simulated series plus the retained ground truth and a conservation audit.
struct MarketPath {
    std::vector<double> price;
    std::vector<double> psi;
    std::vector<double> sigma;
    std::vector<int> state;

    double initial_cash = 0.0;
    double initial_shares = 0.0;
    double final_cash = 0.0;
    double final_shares = 0.0;
    double min_cash = 0.0;
    double min_shares = 0.0;
    long n_trades = 0;

    long size() const { return static_cast<long>(price.size()); }
};

/// Orders for one step: each agent participates with probability rho, buys
/// with probability buy_probability(psi), prices at prev_price*(1+N(0,sigma))
/// floored at 1% of prev_price, and sizes a U(0,1) fraction of its deployable
/// cash or share inventory. The result is shuffled into random arrival order.
std::vector<Order> generate_orders(std::span<const Agent> agents, double prev_price,
                                   double psi, double sigma, double rho, Rng& rng);

/// Same, with one sentiment value per agent (group schedules).
std::vector<Order> generate_orders(std::span<const Agent> agents, double prev_price,
                                   std::span<const double> psi_per_agent, double sigma,
                                   double rho, Rng& rng);

/// Crosses `incoming` against the book. Fills execute at the resting order's
/// limit, transfer cash and shares immediately, and any residual rests.
std::vector<Trade> match(Book& book, Order incoming, std::span<Agent> agents);

/// Owns agents, book, RNG and the accumulating path; exposes single steps so
/// conservation can be audited between them.
class Simulator {
public:
    explicit Simulator(MarketConfig config);

    /// Advances one step, t in [2, n_steps]; steps must be taken in order.
    std::vector<Trade> run_step(long t);

    /// Runs every remaining step and returns the finished path.
    MarketPath run();

    const std::vector<Agent>& agents() const { return agents_; }
    const MarketPath& path() const { return path_; }
    double total_cash() const;
    double total_shares() const;

private:
    void record_sentiment(long t);
    void update_balance_minima(int agent);

    MarketConfig config_;
    std::vector<Agent> agents_;
    std::vector<double> agent_psi_;  // per-agent sentiment for group schedules
    Book book_;
    Rng rng_;
    MarketPath path_;
    int markov_state_ = -1;
    long next_step_ = 2;
};

/// One-shot simulation; deterministic given config.seed.
MarketPath simulate(const MarketConfig& config);

}  // namespace sentisim::market
