#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "sentisim/experiments.hpp"
#include "sentisim/market.hpp"

using namespace sentisim;
using namespace sentisim::market;

namespace {

std::vector<Agent> uniform_agents(int n, double cash = 1e5, double shares = 1e3) {
    return std::vector<Agent>(n, Agent{cash, shares});
}

MarketConfig constant_psi_config(double psi, long steps, std::uint64_t seed) {
    sentiment::GroupSpec group;
    group.weight = 1.0;
    group.schedule.segments = {{1, psi}};
    MarketConfig config;
    config.n_steps = steps;
    config.sentiment = std::vector<sentiment::GroupSpec>{group};
    config.seed = seed;
    return config;
}

}  // namespace

TEST_SUITE("market") {

TEST_CASE("order generation respects participation and sentiment") {
    Rng rng(42);
    const auto agents = uniform_agents(1000);

    SUBCASE("zero participation yields no orders") {
        CHECK(generate_orders(agents, 100.0, 0.0, 0.02, 0.0, rng).empty());
    }
    SUBCASE("neutral sentiment buys half the time") {
        long buys = 0, total = 0;
        while (total < 100000) {
            for (const auto& order : generate_orders(agents, 100.0, 0.0, 0.02, 1.0, rng)) {
                buys += order.side == Side::buy;
                ++total;
            }
        }
        CHECK(std::abs(static_cast<double>(buys) / total - 0.5) < 0.005);
    }
    SUBCASE("psi=1 buys with logistic probability") {
        long buys = 0, total = 0;
        while (total < 100000) {
            for (const auto& order : generate_orders(agents, 100.0, 1.0, 0.02, 1.0, rng)) {
                buys += order.side == Side::buy;
                ++total;
            }
        }
        CHECK(std::abs(static_cast<double>(buys) / total - 0.7310585786300049) < 0.005);
    }
    SUBCASE("limits are floored and commitments stay inside holdings") {
        for (int round = 0; round < 50; ++round) {
            for (const auto& order : generate_orders(agents, 100.0, 0.0, 0.5, 1.0, rng)) {
                CHECK(order.limit >= 1.0);  // 1% of the previous price
                CHECK(order.quantity > 0.0);
                const auto& agent = agents[order.agent];
                if (order.side == Side::buy) {
                    CHECK(order.limit * order.quantity <= agent.cash);
                } else {
                    CHECK(order.quantity <= agent.shares);
                }
            }
        }
    }
}

TEST_CASE("matching fills at the resting limit") {
    auto agents = uniform_agents(4);
    Book book;

    SUBCASE("an order against an empty book rests") {
        auto trades = match(book, Order{0, Side::buy, 100.0, 3.0}, agents);
        CHECK(trades.empty());
        REQUIRE(book.bids().size() == 1);
        CHECK(book.asks().empty());
        CHECK(book.bids()[0].limit == 100.0);
    }

    SUBCASE("full fill at the resting ask") {
        match(book, Order{1, Side::sell, 99.0, 5.0}, agents);
        auto trades = match(book, Order{0, Side::buy, 100.0, 3.0}, agents);
        REQUIRE(trades.size() == 1);
        CHECK(trades[0].price == 99.0);
        CHECK(trades[0].quantity == 3.0);
        CHECK(trades[0].buyer == 0);
        CHECK(trades[0].seller == 1);
        CHECK(agents[0].cash == 1e5 - 3.0 * 99.0);
        CHECK(agents[0].shares == 1e3 + 3.0);
        CHECK(agents[1].cash == 1e5 + 3.0 * 99.0);
        CHECK(agents[1].shares == 1e3 - 3.0);
        REQUIRE(book.asks().size() == 1);
        CHECK(book.asks()[0].quantity == 2.0);
    }

    SUBCASE("partial fill walks the book and the residual rests") {
        match(book, Order{1, Side::sell, 99.0, 2.0}, agents);
        match(book, Order{2, Side::sell, 101.0, 2.0}, agents);
        auto trades = match(book, Order{0, Side::buy, 100.0, 3.0}, agents);
        REQUIRE(trades.size() == 1);
        CHECK(trades[0].price == 99.0);
        CHECK(trades[0].quantity == 2.0);
        REQUIRE(book.bids().size() == 1);
        CHECK(book.bids()[0].limit == 100.0);
        CHECK(book.bids()[0].quantity == 1.0);
        REQUIRE(book.asks().size() == 1);
        CHECK(book.asks()[0].limit == 101.0);
    }

    SUBCASE("price-time priority at equal limits") {
        match(book, Order{1, Side::sell, 99.0, 1.0}, agents);
        match(book, Order{2, Side::sell, 99.0, 1.0}, agents);
        auto trades = match(book, Order{0, Side::buy, 99.0, 1.0}, agents);
        REQUIRE(trades.size() == 1);
        CHECK(trades[0].seller == 1);  // first arrival fills first
    }

    SUBCASE("book never rests crossed") {
        Rng rng(3);
        std::uniform_real_distribution<double> limit(90.0, 110.0);
        std::uniform_real_distribution<double> qty(0.1, 5.0);
        std::uniform_int_distribution<int> agent(0, 3);
        std::uniform_int_distribution<int> side(0, 1);
        for (int i = 0; i < 2000; ++i) {
            match(book,
                  Order{agent(rng), side(rng) ? Side::buy : Side::sell, limit(rng), qty(rng)},
                  agents);
            if (!book.bids().empty() && !book.asks().empty()) {
                CHECK(book.bids().front().limit < book.asks().front().limit);
            }
        }
        const double cash_total =
            std::accumulate(agents.begin(), agents.end(), 0.0,
                            [](double s, const Agent& a) { return s + a.cash; });
        CHECK(cash_total == doctest::Approx(4e5).epsilon(1e-12));
    }
}

TEST_CASE("single steps conserve and stall without participants") {
    auto config = experiments::markov_market_config(10, 50);

    SUBCASE("conservation per step") {
        Simulator sim(config);
        const double cash0 = sim.total_cash();
        const double shares0 = sim.total_shares();
        for (long t = 2; t <= 50; ++t) {
            sim.run_step(t);
            CHECK(std::abs(sim.total_cash() - cash0) <= 1e-6 * cash0);
            CHECK(std::abs(sim.total_shares() - shares0) <= 1e-6 * shares0);
        }
    }
    SUBCASE("no participants leaves the price unchanged") {
        config.participation = 1e-12;
        Simulator sim(config);
        auto trades = sim.run_step(2);
        CHECK(trades.empty());
        CHECK(sim.path().price[1] == sim.path().price[0]);
    }
    SUBCASE("steps must be taken in order") {
        Simulator sim(config);
        CHECK_THROWS_AS(sim.run_step(5), std::invalid_argument);
        CHECK_THROWS_AS(sim.run_step(1), std::invalid_argument);
    }
}

TEST_CASE("trade audit trail") {
    auto config = experiments::markov_market_config(77, 100);
    Simulator sim(config);
    long trades_seen = 0;
    for (long t = 2; t <= 100; ++t) {
        for (const auto& trade : sim.run_step(t)) {
            CHECK(trade.price > 0.0);
            CHECK(trade.quantity > 0.0);
            CHECK(trade.buyer != trade.seller);
            ++trades_seen;
        }
    }
    CHECK(trades_seen == sim.path().n_trades);
    CHECK(sim.path().min_cash >= 0.0);
    CHECK(sim.path().min_shares >= 0.0);
}

TEST_CASE("simulate basics") {
    SUBCASE("single step path") {
        auto config = experiments::markov_market_config(1, 1);
        const MarketPath path = simulate(config);
        REQUIRE(path.size() == 1);
        CHECK(path.price[0] == 100.0);
        CHECK(path.state.size() == 1);
    }
    SUBCASE("same seed reproduces the path bit for bit") {
        auto config = experiments::markov_market_config(123, 400);
        const MarketPath a = simulate(config);
        const MarketPath b = simulate(config);
        REQUIRE(a.size() == b.size());
        CHECK(std::memcmp(a.price.data(), b.price.data(), a.price.size() * sizeof(double)) == 0);
        CHECK(a.state == b.state);
        config.seed = 124;
        const MarketPath c = simulate(config);
        CHECK(a.price != c.price);
    }
    SUBCASE("config validation") {
        auto config = experiments::markov_market_config(1, 0);
        CHECK_THROWS_AS(simulate(config), std::invalid_argument);
        config = experiments::markov_market_config(1, 10);
        config.participation = 0.0;
        CHECK_THROWS_AS(simulate(config), std::invalid_argument);
    }
}

TEST_CASE("neutral sentiment reverts to cash per share" * doctest::timeout(120)) {
    const MarketPath path = simulate(constant_psi_config(0.0, 10000, 31));
    const double target = path.initial_cash / path.initial_shares;
    double mean = 0.0;
    for (double price : path.price) mean += price;
    mean /= path.size();
    CHECK(std::abs(mean - target) / target < 0.05);
    CHECK(std::abs(path.final_cash - path.initial_cash) <= 1e-6 * path.initial_cash);
    CHECK(std::abs(path.final_shares - path.initial_shares) <= 1e-6 * path.initial_shares);
}

TEST_CASE("constant sentiment reaches the flow-balance price") {
    // Time-averages of settled constant-sentiment runs against (p_b/p_s) M/S.
    for (double psi : {-1.0, 0.0, 1.0}) {
        const MarketPath path = simulate(constant_psi_config(psi, 2000, 9));
        const double target =
            std::exp(psi) * path.initial_cash / path.initial_shares;
        double mean = 0.0;
        for (long t = 1000; t < path.size(); ++t) mean += path.price[t];
        mean /= (path.size() - 1000);
        CHECK(std::abs(mean - target) / target < 0.15);
    }
}

TEST_CASE("per-state prices are ordered sell < neutral < buy") {
    auto config = experiments::markov_market_config(6, 2000);
    const MarketPath path = simulate(config);
    double sums[3] = {0, 0, 0};
    long counts[3] = {0, 0, 0};
    for (long t = 0; t < path.size(); ++t) {
        sums[path.state[t]] += path.price[t];
        ++counts[path.state[t]];
    }
    for (long count : counts) REQUIRE(count >= 50);
    const double sell = sums[0] / counts[0];
    const double neutral = sums[1] / counts[1];
    const double buy = sums[2] / counts[2];
    CHECK(sell < neutral);
    CHECK(neutral < buy);
    CHECK(buy - sell > 10.0);
}

TEST_CASE("three-regime config partitions sentiment changes") {
    auto config = experiments::three_regime_market_config(4, 1200);
    const MarketPath path = simulate(config);
    CHECK(path.state.front() == 0);
    CHECK(path.state[600] == 1);  // after T/3
    CHECK(path.state.back() == 2);
    // psi column holds the effective log odds of the group mixture
    CHECK(path.psi.front() == doctest::Approx(0.0));
    CHECK(path.psi.back() ==
          doctest::Approx(std::log((5.0 / 12.0) / (7.0 / 12.0))).epsilon(1e-12));
}

}  // TEST_SUITE
