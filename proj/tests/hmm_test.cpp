#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sentisim/experiments.hpp"
#include "sentisim/hmm.hpp"
#include "sentisim/market.hpp"
#include "sentisim/sentiment.hpp"
#include "test_support.hpp"

using namespace sentisim;
using namespace sentisim::hmm;

namespace {

HmmModel hand_model() {
    // 2 states, 2 symbols, T=3 oracle workhorse.
    HmmModel model;
    model.n_hidden = 2;
    model.n_obs = 2;
    model.A.resize(2, 2);
    model.A << 0.9, 0.1,
               0.1, 0.9;
    model.B.resize(2, 2);
    model.B << 0.8, 0.2,
               0.2, 0.8;
    model.pi.resize(2);
    model.pi << 0.5, 0.5;
    return model;
}

/// 3 states over 9 symbols with well-separated emission blocks.
HmmModel separated_model(const Eigen::MatrixXd& transition) {
    HmmModel model;
    model.n_hidden = 3;
    model.n_obs = 9;
    model.A = transition;
    model.B.setZero(3, 9);
    for (int i = 0; i < 3; ++i) {
        model.B(i, 3 * i) = 0.2;
        model.B(i, 3 * i + 1) = 0.6;
        model.B(i, 3 * i + 2) = 0.2;
    }
    model.pi = Eigen::Vector3d::Constant(1.0 / 3.0);
    return model;
}

}  // namespace

TEST_SUITE("hmm") {

TEST_CASE("forward-backward agrees with exhaustive enumeration") {
    const HmmModel model = hand_model();
    const std::vector<int> obs{0, 0, 1};
    const ScaledFBResult fb = forward_backward(model, obs);
    const double brute = test_support::brute_force_likelihood(model, obs);
    CHECK(std::exp(fb.log_likelihood) == doctest::Approx(brute).epsilon(1e-12));
    // unscaled likelihood equals the product of the scaling constants
    double product = 1.0;
    for (Eigen::Index t = 0; t < fb.c.size(); ++t) product *= fb.c(t);
    CHECK(product == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("forward-backward on random models matches enumeration") {
    Rng rng(2024);
    std::uniform_int_distribution<int> n_states(1, 3);
    std::uniform_int_distribution<int> n_symbols(2, 4);
    std::uniform_int_distribution<long> length(2, 12);
    for (int trial = 0; trial < 15; ++trial) {
        const HmmModel model = test_support::random_model(n_states(rng), n_symbols(rng), rng);
        std::uniform_int_distribution<int> symbol(0, model.n_obs - 1);
        std::vector<int> obs(length(rng));
        for (auto& o : obs) o = symbol(rng);
        const ScaledFBResult fb = forward_backward(model, obs);
        const double brute = test_support::brute_force_likelihood(model, obs);
        CHECK(std::abs(std::exp(fb.log_likelihood) - brute) <= 1e-10 * brute);
    }
}

TEST_CASE("single hidden state trivializes the posterior") {
    HmmModel model;
    model.n_hidden = 1;
    model.n_obs = 3;
    model.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
    model.B.resize(1, 3);
    model.B << 0.5, 0.3, 0.2;
    model.pi = Eigen::VectorXd::Constant(1, 1.0);
    const std::vector<int> obs{0, 2, 1, 1, 0};
    const ScaledFBResult fb = forward_backward(model, obs);
    double expected = 0.0;
    for (int o : obs) expected += std::log(model.B(0, o));
    CHECK(fb.log_likelihood == doctest::Approx(expected).epsilon(1e-12));
    CHECK((fb.gamma.array() == 1.0).all());
}

TEST_CASE("scaled quantities are normalized at every step") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const HmmModel model = test_support::random_model(3, 4, rng);
        std::uniform_int_distribution<int> symbol(0, 3);
        std::vector<int> obs(50);
        for (auto& o : obs) o = symbol(rng);
        const ScaledFBResult fb = forward_backward(model, obs);
        for (long t = 0; t < 50; ++t) {
            CHECK(fb.alpha_hat.col(t).sum() == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(fb.gamma.col(t).sum() == doctest::Approx(1.0).epsilon(1e-10));
            for (int i = 0; i < 3; ++i) {
                CHECK(fb.gamma(i, t) >= -1e-15);
                CHECK(fb.gamma(i, t) <= 1.0 + 1e-12);
            }
            if (t + 1 < 50) CHECK(fb.xi[t].sum() == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("zero-probability sequences raise an explicit signal") {
    HmmModel model = hand_model();
    model.B.col(1).setZero();
    model.B.col(0).setOnes();
    const std::vector<int> obs{0, 1, 0};
    CHECK_THROWS_AS(forward_backward(model, obs), ZeroProbabilityError);
    CHECK_THROWS_AS(forward_backward(hand_model(), std::vector<int>{0, 2, 0}),
                    std::invalid_argument);
}

TEST_CASE("a deterministic chain is an EM fixed point") {
    HmmModel model;
    model.n_hidden = 2;
    model.n_obs = 2;
    model.A.resize(2, 2);
    model.A << 0.0, 1.0,
               1.0, 0.0;
    model.B = Eigen::MatrixXd::Identity(2, 2);
    model.pi.resize(2);
    model.pi << 1.0, 0.0;
    const std::vector<int> obs{0, 1, 0, 1, 0, 1, 0, 1};
    const auto [updated, ll] = baum_welch_step(model, obs);
    CHECK((updated.A - model.A).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((updated.B - model.B).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((updated.pi - model.pi).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(ll == doctest::Approx(0.0).epsilon(1e-12));  // probability-1 sequence
}

TEST_CASE("one EM step matches the independent straight-line oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const HmmModel model = test_support::random_model(2, 2, rng);
        std::uniform_int_distribution<int> symbol(0, 1);
        std::vector<int> obs(8);
        for (auto& o : obs) o = symbol(rng);
        const auto [updated, ll] = baum_welch_step(model, obs);
        const HmmModel reference = test_support::reference_em_step(model, obs);
        CHECK((updated.A - reference.A).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((updated.B - reference.B).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((updated.pi - reference.pi).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("EM never decreases the log-likelihood and keeps rows stochastic") {
    Rng rng(7);
    const HmmModel truth = separated_model(experiments::demo_transition_matrix());
    const auto [hidden, obs] = hmm_sample(truth, 400, rng);
    HmmModel model = test_support::random_model(3, 9, rng);
    double previous = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 60; ++iter) {
        auto [updated, ll] = baum_welch_step(model, obs);
        CHECK(ll >= previous - 1e-10);
        previous = ll;
        model = std::move(updated);
        CHECK_NOTHROW(model.validate());
    }
}

TEST_CASE("degenerate rows are reset to uniform and flagged") {
    HmmModel model;
    model.n_hidden = 2;
    model.n_obs = 2;
    model.A = Eigen::MatrixXd::Identity(2, 2);
    model.B.resize(2, 2);
    model.B << 0.9, 0.1,
               0.1, 0.9;
    model.pi.resize(2);
    model.pi << 1.0, 0.0;  // state 1 unreachable
    const std::vector<int> obs{0, 0, 1, 0};
    long degenerate = 0;
    const auto [updated, ll] = baum_welch_step(model, obs, &degenerate);
    CHECK(degenerate > 0);
    CHECK(updated.A(1, 0) == doctest::Approx(0.5));
    CHECK(updated.A(1, 1) == doctest::Approx(0.5));
    CHECK_NOTHROW(updated.validate());
}

TEST_CASE("baum_welch with one state counts symbol frequencies") {
    Rng rng(3);
    std::vector<int> obs(60);
    std::uniform_int_distribution<int> symbol(0, 2);
    long counts[3] = {0, 0, 0};
    for (auto& o : obs) {
        o = symbol(rng);
        ++counts[o];
    }
    const auto [model, diagnostics] = baum_welch(obs, 1, 3, BaumWelchOptions{}, rng);
    CHECK(model.A(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 0; k < 3; ++k) {
        CHECK(model.B(0, k) == doctest::Approx(counts[k] / 60.0).epsilon(1e-9));
    }
}

TEST_CASE("baum_welch recovers a sampled model's diagonals") {
    Rng rng(17);
    for (std::uint64_t seed : {11ULL, 29ULL}) {
        Rng sample_rng(seed);
        const Eigen::MatrixXd a_true =
            sentiment::sample_transition_matrix(sample_rng, 0.95, 0.98, 3);
        const HmmModel truth = separated_model(a_true);
        const auto [hidden, obs] = hmm_sample(truth, 1000, sample_rng);
        const auto [fitted, diagnostics] = baum_welch(obs, 3, 9, BaumWelchOptions{}, rng);
        const std::vector<double> symbol_values{0, 1, 2, 3, 4, 5, 6, 7, 8};
        const HmmModel aligned =
            apply_state_order(fitted, align_states(fitted, symbol_values));
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(aligned.A(i, i) - a_true(i, i)) <= 0.05);
        }
        CHECK(diagnostics.min_loglik_delta >= -1e-10);
    }
}

TEST_CASE("baum_welch rejects short sequences") {
    Rng rng(1);
    const std::vector<int> obs{0, 1, 0, 1};
    CHECK_THROWS_AS(baum_welch(obs, 3, 2, BaumWelchOptions{}, rng), std::invalid_argument);
}

TEST_CASE("viterbi") {
    SUBCASE("deterministic emissions invert the symbol map") {
        HmmModel model;
        model.n_hidden = 3;
        model.n_obs = 3;
        model.A = Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
        model.B = Eigen::MatrixXd::Identity(3, 3);
        model.pi = Eigen::Vector3d::Constant(1.0 / 3.0);
        const std::vector<int> obs{2, 0, 1, 1, 2};
        CHECK(viterbi(model, obs).path == obs);
    }
    SUBCASE("hand model matches the enumeration argmax") {
        const HmmModel model = hand_model();
        const std::vector<int> obs{0, 0, 1};
        CHECK(viterbi(model, obs).path == test_support::brute_force_best_path(model, obs));
    }
    SUBCASE("single state gives a constant path") {
        HmmModel model;
        model.n_hidden = 1;
        model.n_obs = 2;
        model.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
        model.B.resize(1, 2);
        model.B << 0.5, 0.5;
        model.pi = Eigen::VectorXd::Constant(1, 1.0);
        const std::vector<int> obs{0, 1, 0};
        CHECK(viterbi(model, obs).path == std::vector<int>{0, 0, 0});
    }
    SUBCASE("path is consistent with the backpointers") {
        Rng rng(12);
        const HmmModel model = test_support::random_model(3, 4, rng);
        std::uniform_int_distribution<int> symbol(0, 3);
        std::vector<int> obs(30);
        for (auto& o : obs) o = symbol(rng);
        const ViterbiTables tables = viterbi(model, obs);
        for (long t = 29; t > 0; --t) {
            CHECK(tables.path[t - 1] == tables.backptr(tables.path[t], t));
        }
    }
    SUBCASE("viterbi path beats the true path and random paths") {
        Rng rng(14);
        const HmmModel model = separated_model(experiments::demo_transition_matrix());
        const auto [hidden, obs] = hmm_sample(model, 60, rng);
        const ViterbiTables tables = viterbi(model, obs);
        const double best =
            test_support::path_joint_log_probability(model, tables.path, obs);
        CHECK(best >= test_support::path_joint_log_probability(model, hidden, obs) - 1e-9);
        std::uniform_int_distribution<int> state(0, 2);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<int> random_path(obs.size());
            for (auto& s : random_path) s = state(rng);
            CHECK(best >=
                  test_support::path_joint_log_probability(model, random_path, obs) - 1e-9);
        }
    }
}

TEST_CASE("price discretization") {
    SUBCASE("constant series collapses to one symbol") {
        const std::vector<double> prices(40, 100.0);
        const auto [discretizer, symbols] = discretize_prices(prices, 9);
        CHECK(discretizer.n_symbols() == 1);
        for (int s : symbols) CHECK(s == 0);
    }
    SUBCASE("median split") {
        const std::vector<double> prices{1.0, 2.0, 3.0, 4.0};
        const auto [discretizer, symbols] = discretize_prices(prices, 2);
        CHECK(symbols == std::vector<int>{0, 0, 1, 1});
    }
    SUBCASE("quantile bins are balanced on a simulated path") {
        const market::MarketPath path =
            market::simulate(experiments::markov_market_config(8, 1000));
        const auto [discretizer, symbols] = discretize_prices(path.price, 9);
        REQUIRE(discretizer.n_symbols() == 9);
        std::vector<long> counts(9, 0);
        for (int s : symbols) ++counts[s];
        for (long count : counts) {
            CHECK(std::abs(count - 1000.0 / 9.0) <= 1.0);
        }
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(discretize_prices(std::vector<double>{1.0, 2.0}, 1),
                        std::invalid_argument);
        CHECK_THROWS_AS(discretize_prices(std::vector<double>{1.0, -2.0}, 2),
                        std::invalid_argument);
    }
}

TEST_CASE("state alignment") {
    const std::vector<double> centers{0.0, 1.0, 2.0};
    SUBCASE("ordered model keeps the identity permutation") {
        HmmModel model = separated_model(experiments::demo_transition_matrix());
        model.n_obs = 3;
        model.B = Eigen::MatrixXd::Identity(3, 3);
        CHECK(align_states(model, centers) == std::vector<int>{0, 1, 2});
    }
    SUBCASE("swapped emissions produce the transposition") {
        HmmModel model;
        model.n_hidden = 2;
        model.n_obs = 2;
        model.A = Eigen::MatrixXd::Identity(2, 2);
        model.B.resize(2, 2);
        model.B << 0.1, 0.9,
                   0.9, 0.1;
        model.pi.resize(2);
        model.pi << 0.5, 0.5;
        const auto order = align_states(model, std::vector<double>{0.0, 1.0});
        CHECK(order == std::vector<int>{1, 0});
        const HmmModel aligned = apply_state_order(model, order);
        CHECK(aligned.B(0, 0) == 0.9);
        CHECK(aligned.B(1, 1) == 0.9);
    }
    SUBCASE("aligned emission means are non-decreasing for random fits") {
        Rng rng(21);
        for (int trial = 0; trial < 25; ++trial) {
            const HmmModel model = test_support::random_model(3, 3, rng);
            const auto order = align_states(model, centers);
            const HmmModel aligned = apply_state_order(model, order);
            double previous = -1e300;
            for (int i = 0; i < 3; ++i) {
                double mean = 0.0;
                for (int k = 0; k < 3; ++k) mean += aligned.B(i, k) * centers[k];
                CHECK(mean >= previous - 1e-12);
                previous = mean;
            }
        }
    }
    SUBCASE("permutation is applied consistently to A") {
        Rng rng(22);
        const HmmModel model = test_support::random_model(3, 3, rng);
        const auto order = align_states(model, centers);
        const HmmModel aligned = apply_state_order(model, order);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                CHECK(aligned.A(i, j) == model.A(order[i], order[j]));
            }
        }
        const std::vector<int> path{0, 1, 2, 2, 1, 0};
        const auto relabeled = relabel_path(path, order);
        for (std::size_t t = 0; t < path.size(); ++t) {
            CHECK(order[relabeled[t]] == path[t]);
        }
    }
}

TEST_CASE("viterbi scores") {
    const std::vector<int> truth{0, 1, 2, 1, 0, 2};
    CHECK(viterbi_score(truth, truth) == 1.0);
    CHECK_THROWS_AS(viterbi_score(std::vector<int>{0, 1}, truth), std::invalid_argument);

    Rng rng(33);
    std::uniform_int_distribution<int> state(0, 2);
    std::vector<int> random_truth(9000);
    long zeros = 0;
    for (auto& s : random_truth) {
        s = state(rng);
        zeros += s == 0;
    }
    const std::vector<int> constant(9000, 0);
    CHECK(viterbi_score(constant, random_truth) ==
          doctest::Approx(static_cast<double>(zeros) / 9000.0).epsilon(1e-12));
}

TEST_CASE("model serialization round trip") {
    Rng rng(41);
    const HmmModel model = test_support::random_model(3, 5, rng);
    std::stringstream stream;
    save_model(model, stream);
    const HmmModel loaded = load_model(stream);
    CHECK(loaded.n_hidden == 3);
    CHECK(loaded.n_obs == 5);
    CHECK((loaded.A - model.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.B - model.B).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.pi - model.pi).cwiseAbs().maxCoeff() == 0.0);

    std::stringstream bad("2 2\n0.5 0.5\n");
    CHECK_THROWS_AS(load_model(bad), std::runtime_error);
}

TEST_CASE("hmm sampling matches its transition matrix empirically") {
    Rng rng(55);
    const HmmModel model = separated_model(experiments::demo_transition_matrix());
    const auto [hidden, obs] = hmm_sample(model, 100000, rng);
    Eigen::Matrix3d counts = Eigen::Matrix3d::Zero();
    for (std::size_t t = 1; t < hidden.size(); ++t) {
        counts(hidden[t - 1], hidden[t]) += 1.0;
    }
    for (int i = 0; i < 3; ++i) {
        const double row_total = counts.row(i).sum();
        for (int j = 0; j < 3; ++j) {
            CHECK(std::abs(counts(i, j) / row_total - model.A(i, j)) <= 0.01);
        }
    }
    SUBCASE("deterministic emissions reproduce the hidden path") {
        HmmModel identity = model;
        identity.n_obs = 3;
        identity.B = Eigen::MatrixXd::Identity(3, 3);
        const auto [h, o] = hmm_sample(identity, 500, rng);
        CHECK(h == o);
    }
    SUBCASE("single state samples zeros") {
        HmmModel single;
        single.n_hidden = 1;
        single.n_obs = 2;
        single.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
        single.B.resize(1, 2);
        single.B << 0.5, 0.5;
        single.pi = Eigen::VectorXd::Constant(1, 1.0);
        const auto [h, o] = hmm_sample(single, 100, rng);
        for (int s : h) CHECK(s == 0);
    }
}

}  // TEST_SUITE
