#include "sentisim/market.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sentisim::market {

namespace {

// Keeps limit*quantity strictly inside the cash balance under fp rounding,
// so a fully filled resting bid can never overdraw its owner.
constexpr double kBuyQuantityMargin = 1.0 - 1e-12;

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void MarketConfig::validate() const {
    check(n_agents >= 1, "need at least one agent");
    check(n_steps >= 1, "need at least one step");
    check(participation > 0.0 && participation <= 1.0,
          "participation probability must lie in (0,1]");
    check(initial_price > 0.0, "initial price must be positive");
    check(initial_cash_mean >= 0.0 && initial_cash_sd >= 0.0,
          "initial cash parameters must be non-negative");
    check(initial_shares >= 0.0, "initial shares must be non-negative");
    if (const auto* fixed = std::get_if<double>(&volatility)) {
        check(*fixed > 0.0, "fixed volatility must be positive");
    } else {
        std::get<sentiment::VolatilitySpec>(volatility).validate();
    }
    if (const auto* groups = std::get_if<std::vector<sentiment::GroupSpec>>(&sentiment)) {
        check(!groups->empty(), "need at least one sentiment group");
        double weight_sum = 0.0;
        for (const auto& g : *groups) {
            check(g.weight > 0.0 && g.weight <= 1.0, "group weight must lie in (0,1]");
            g.schedule.validate();
            weight_sum += g.weight;
        }
        check(std::abs(weight_sum - 1.0) <= 1e-9, "group weights must sum to 1");
    } else {
        std::get<sentiment::MarkovSentimentSpec>(sentiment).validate();
    }
}

void Book::rest(const Order& order) {
    RestingOrder resting{order.limit, order.quantity, order.agent, next_arrival_++};
    if (order.side == Side::buy) {
        auto pos = std::upper_bound(
            bids_.begin(), bids_.end(), resting,
            [](const RestingOrder& a, const RestingOrder& b) { return a.limit > b.limit; });
        bids_.insert(pos, resting);
    } else {
        auto pos = std::upper_bound(
            asks_.begin(), asks_.end(), resting,
            [](const RestingOrder& a, const RestingOrder& b) { return a.limit < b.limit; });
        asks_.insert(pos, resting);
    }
}

void Book::clear() {
    bids_.clear();
    asks_.clear();
    next_arrival_ = 0;
}

std::vector<Order> generate_orders(std::span<const Agent> agents, double prev_price,
                                   double psi, double sigma, double rho, Rng& rng) {
    std::vector<double> per_agent(agents.size(), psi);
    return generate_orders(agents, prev_price, per_agent, sigma, rho, rng);
}

std::vector<Order> generate_orders(std::span<const Agent> agents, double prev_price,
                                   std::span<const double> psi_per_agent, double sigma,
                                   double rho, Rng& rng) {
    check(prev_price > 0.0, "previous price must be positive");
    check(psi_per_agent.size() == agents.size(), "one sentiment value per agent");
    std::vector<Order> orders;
    orders.reserve(static_cast<std::size_t>(rho * agents.size() * 1.5) + 8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double floor_price = 0.01 * prev_price;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (unit(rng) >= rho) continue;
        const bool is_buy = unit(rng) < sentiment::buy_probability(psi_per_agent[i]);
        double limit = prev_price * (1.0 + sigma * gauss(rng));
        limit = std::max(limit, floor_price);
        const double u = unit(rng);
        const double quantity = is_buy
                                    ? u * agents[i].cash / limit * kBuyQuantityMargin
                                    : u * agents[i].shares;
        if (quantity <= 0.0) continue;
        orders.push_back(Order{static_cast<int>(i), is_buy ? Side::buy : Side::sell,
                               limit, quantity});
    }
    std::shuffle(orders.begin(), orders.end(), rng);
    return orders;
}

std::vector<Trade> match(Book& book, Order incoming, std::span<Agent> agents) {
    std::vector<Trade> trades;
    auto& opposite = incoming.side == Side::buy ? book.asks() : book.bids();
    while (incoming.quantity > 0.0 && !opposite.empty()) {
        RestingOrder& best = opposite.front();
        const bool crosses = incoming.side == Side::buy ? incoming.limit >= best.limit
                                                        : incoming.limit <= best.limit;
        if (!crosses) break;
        const double quantity = std::min(incoming.quantity, best.quantity);
        const double price = best.limit;
        const int buyer = incoming.side == Side::buy ? incoming.agent : best.agent;
        const int seller = incoming.side == Side::buy ? best.agent : incoming.agent;
        const double value = price * quantity;
        agents[buyer].cash -= value;
        agents[buyer].shares += quantity;
        agents[seller].cash += value;
        agents[seller].shares -= quantity;
        trades.push_back(Trade{buyer, seller, price, quantity});
        incoming.quantity -= quantity;
        best.quantity -= quantity;
        if (best.quantity <= 0.0) opposite.erase(opposite.begin());
    }
    if (incoming.quantity > 0.0) book.rest(incoming);
    return trades;
}

Simulator::Simulator(MarketConfig config) : config_(std::move(config)) {
    config_.validate();
    rng_.seed(config_.seed);

    agents_.resize(config_.n_agents);
    std::normal_distribution<double> cash(config_.initial_cash_mean,
                                          config_.initial_cash_sd);
    for (auto& agent : agents_) {
        agent.cash = config_.initial_cash_sd > 0.0
                         ? std::max(cash(rng_), 0.0)
                         : config_.initial_cash_mean;
        agent.shares = config_.initial_shares;
    }
    agent_psi_.resize(config_.n_agents, 0.0);

    path_.initial_cash = total_cash();
    path_.initial_shares = total_shares();
    path_.min_cash = path_.initial_cash;
    path_.min_shares = path_.initial_shares;
    for (const auto& agent : agents_) {
        path_.min_cash = std::min(path_.min_cash, agent.cash);
        path_.min_shares = std::min(path_.min_shares, agent.shares);
    }

    const long t0 = 1;
    record_sentiment(t0);
    if (const auto* fixed = std::get_if<double>(&config_.volatility)) {
        path_.sigma.push_back(*fixed);
    } else {
        path_.sigma.push_back(
            sentiment::sample_volatility(std::get<sentiment::VolatilitySpec>(config_.volatility), rng_));
    }
    path_.price.push_back(config_.initial_price);
}

void Simulator::record_sentiment(long t) {
    if (const auto* markov = std::get_if<sentiment::MarkovSentimentSpec>(&config_.sentiment)) {
        if (t == 1) {
            if (markov->initial.size() != 0) {
                std::uniform_real_distribution<double> unit(0.0, 1.0);
                const double u = unit(rng_);
                double cum = 0.0;
                markov_state_ = markov->n_states() - 1;
                for (int i = 0; i < markov->n_states(); ++i) {
                    cum += markov->initial(i);
                    if (u < cum) {
                        markov_state_ = i;
                        break;
                    }
                }
            } else {
                std::uniform_int_distribution<int> uniform_state(0, markov->n_states() - 1);
                markov_state_ = uniform_state(rng_);
            }
        } else {
            markov_state_ = sentiment::step_markov(*markov, markov_state_, rng_);
        }
        path_.state.push_back(markov_state_);
        path_.psi.push_back(markov->states[markov_state_]);
        std::fill(agent_psi_.begin(), agent_psi_.end(), markov->states[markov_state_]);
        return;
    }

    const auto& groups = std::get<std::vector<sentiment::GroupSpec>>(config_.sentiment);
    std::vector<std::pair<double, double>> weighted;
    weighted.reserve(groups.size());
    std::vector<long> changes;  // distinct sentiment change points over all groups
    for (const auto& group : groups) {
        for (const auto& segment : group.schedule.segments) {
            if (segment.start > 1) changes.push_back(segment.start);
        }
    }
    std::sort(changes.begin(), changes.end());
    changes.erase(std::unique(changes.begin(), changes.end()), changes.end());
    const int regime = static_cast<int>(
        std::upper_bound(changes.begin(), changes.end(), t) - changes.begin());
    std::size_t begin = 0;
    double cum_weight = 0.0;
    for (const auto& group : groups) {
        const double psi = sentiment::sentiment_at(group.schedule, t);
        weighted.emplace_back(group.weight, psi);
        cum_weight += group.weight;
        const auto end = &group == &groups.back()
                             ? agent_psi_.size()
                             : static_cast<std::size_t>(
                                   std::lround(cum_weight * config_.n_agents));
        for (std::size_t i = begin; i < end && i < agent_psi_.size(); ++i) {
            agent_psi_[i] = psi;
        }
        begin = end;
    }
    const auto [p_b, p_s] = sentiment::effective_probabilities(weighted);
    path_.state.push_back(regime);
    path_.psi.push_back(std::log(p_b / p_s));
}

void Simulator::update_balance_minima(int agent) {
    path_.min_cash = std::min(path_.min_cash, agents_[agent].cash);
    path_.min_shares = std::min(path_.min_shares, agents_[agent].shares);
}

std::vector<Trade> Simulator::run_step(long t) {
    if (t != next_step_ || t < 2 || t > config_.n_steps) {
        throw std::invalid_argument("steps must be run in order, t in [2, n_steps]");
    }

    double sigma;
    if (const auto* fixed = std::get_if<double>(&config_.volatility)) {
        sigma = *fixed;
    } else {
        sigma = sentiment::sample_volatility(
            std::get<sentiment::VolatilitySpec>(config_.volatility), rng_);
    }
    record_sentiment(t);
    path_.sigma.push_back(sigma);

    const double prev_price = path_.price.back();
    auto orders = generate_orders(agents_, prev_price, agent_psi_, sigma,
                                  config_.participation, rng_);

    std::vector<Trade> step_trades;
    for (const auto& order : orders) {
        auto trades = match(book_, order, agents_);
        for (const auto& trade : trades) {
            update_balance_minima(trade.buyer);
            update_balance_minima(trade.seller);
        }
        path_.n_trades += static_cast<long>(trades.size());
        step_trades.insert(step_trades.end(), trades.begin(), trades.end());
    }
    // Step price: median executed price. The last trade of the shuffled
    // sequence tracks the intra-step extreme under one-sided flow, which
    // biases regime means several percent away from the flow-balance level;
    // the median centers them.
    double step_price = prev_price;
    if (!step_trades.empty()) {
        std::vector<double> executed;
        executed.reserve(step_trades.size());
        for (const auto& trade : step_trades) executed.push_back(trade.price);
        auto mid = executed.begin() + executed.size() / 2;
        std::nth_element(executed.begin(), mid, executed.end());
        step_price = *mid;
    }
    path_.price.push_back(step_price);
    book_.clear();
    ++next_step_;
    return step_trades;
}

MarketPath Simulator::run() {
    for (long t = next_step_; t <= config_.n_steps; ++t) run_step(t);
    path_.final_cash = total_cash();
    path_.final_shares = total_shares();
    if (std::abs(path_.final_cash - path_.initial_cash) > 1e-6 * path_.initial_cash ||
        std::abs(path_.final_shares - path_.initial_shares) > 1e-6 * path_.initial_shares ||
        path_.min_cash < 0.0 || path_.min_shares < 0.0) {
        throw std::logic_error("market accounting violated: balances not conserved");
    }
    return path_;
}

double Simulator::total_cash() const {
    double sum = 0.0;
    for (const auto& agent : agents_) sum += agent.cash;
    return sum;
}

double Simulator::total_shares() const {
    double sum = 0.0;
    for (const auto& agent : agents_) sum += agent.shares;
    return sum;
}

MarketPath simulate(const MarketConfig& config) {
    Simulator sim(config);
    return sim.run();
}

}  // namespace sentisim::market
