#include "sentisim/sentiment.hpp"

#include <cmath>
#include <stdexcept>

namespace sentisim::sentiment {

namespace {

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void PiecewiseSchedule::validate() const {
    check(!segments.empty(), "schedule needs at least one segment");
    check(segments.front().start == 1, "first segment must start at t=1");
    for (std::size_t i = 1; i < segments.size(); ++i) {
        check(segments[i].start > segments[i - 1].start,
              "segment start steps must be strictly increasing");
    }
    for (const auto& s : segments) {
        check(std::isfinite(s.psi), "sentiment value must be finite");
    }
}

void MarkovSentimentSpec::validate() const {
    const int n = n_states();
    check(n >= 1, "need at least one sentiment state");
    for (double psi : states) check(std::isfinite(psi), "state psi must be finite");
    check(transition.rows() == n && transition.cols() == n,
          "transition matrix shape must match the state count");
    for (int i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const double a = transition(i, j);
            check(a >= 0.0 && a <= 1.0, "transition entries must lie in [0,1]");
            row_sum += a;
        }
        check(std::abs(row_sum - 1.0) <= 1e-12, "transition rows must sum to 1");
    }
    if (initial.size() != 0) {
        check(initial.size() == n, "initial distribution length must match states");
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            check(initial(i) >= 0.0, "initial probabilities must be non-negative");
            sum += initial(i);
        }
        check(std::abs(sum - 1.0) <= 1e-9, "initial distribution must sum to 1");
    }
}

void VolatilitySpec::validate() const {
    check(mean > 0.0, "volatility mean must be positive");
    check(sd >= 0.0, "volatility sd must be non-negative");
}

double buy_probability(double psi) {
    if (!std::isfinite(psi)) throw std::invalid_argument("psi must be finite");
    return 1.0 / (1.0 + std::exp(-psi));
}

std::pair<double, double> effective_probabilities(
    const std::vector<std::pair<double, double>>& groups) {
    check(!groups.empty(), "need at least one group");
    double weight_sum = 0.0;
    double p_b = 0.0;
    for (const auto& [weight, psi] : groups) {
        check(weight > 0.0 && weight <= 1.0, "group weight must lie in (0,1]");
        weight_sum += weight;
        p_b += weight * buy_probability(psi);
    }
    check(std::abs(weight_sum - 1.0) <= 1e-9, "group weights must sum to 1");
    return {p_b, 1.0 - p_b};
}

double equilibrium_price(double p_b_eff, double p_s_eff, double total_cash,
                         double total_shares) {
    if (p_s_eff <= 0.0 || total_shares <= 0.0) {
        throw std::domain_error(
            "equilibrium price undefined for zero sell probability or zero shares");
    }
    return (p_b_eff / p_s_eff) * total_cash / total_shares;
}

double sentiment_at(const PiecewiseSchedule& schedule, long t) {
    if (schedule.segments.empty() || t < schedule.segments.front().start) {
        throw std::out_of_range("step precedes the first schedule segment");
    }
    double psi = schedule.segments.front().psi;
    for (const auto& s : schedule.segments) {
        if (s.start > t) break;
        psi = s.psi;
    }
    return psi;
}

int step_markov(const MarkovSentimentSpec& spec, int current, Rng& rng) {
    const int n = spec.n_states();
    if (current < 0 || current >= n) throw std::invalid_argument("state index out of range");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double cum = 0.0;
    for (int j = 0; j < n; ++j) {
        cum += spec.transition(current, j);
        if (u < cum) return j;
    }
    return n - 1;  // guards against row sums a hair below 1
}

Eigen::MatrixXd sample_transition_matrix(Rng& rng, double diag_low,
                                         double diag_high, int n_states) {
    check(n_states >= 1, "need at least one state");
    check(diag_low >= 0.0 && diag_low <= diag_high && diag_high <= 1.0,
          "diagonal range must satisfy 0 <= low <= high <= 1");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_states, n_states);
    std::uniform_real_distribution<double> diag(diag_low, diag_high);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < n_states; ++i) {
        const double a_ii = (diag_low == diag_high) ? diag_low : diag(rng);
        a(i, i) = a_ii;
        if (n_states == 1) {
            a(i, i) = 1.0;
            continue;
        }
        std::vector<double> u(n_states - 1);
        double u_sum = 0.0;
        for (auto& v : u) {
            v = unit(rng);
            u_sum += v;
        }
        const double rest = 1.0 - a_ii;
        int k = 0;
        for (int j = 0; j < n_states; ++j) {
            if (j == i) continue;
            a(i, j) = u_sum > 0.0 ? rest * u[k] / u_sum : rest / (n_states - 1);
            ++k;
        }
    }
    return a;
}

double sample_volatility(const VolatilitySpec& spec, Rng& rng) {
    if (spec.sd == 0.0) return std::max(spec.mean, kMinVolatility);
    std::normal_distribution<double> gauss(spec.mean, spec.sd);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double sigma = gauss(rng);
        if (sigma >= kMinVolatility) return sigma;
    }
    return kMinVolatility;  // spec mean far below the floor; give up re-drawing
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
    const int n = static_cast<int>(transition.rows());
    // (A^T - I) pi = 0 with sum(pi) = 1, solved as an augmented least-squares system.
    Eigen::MatrixXd m = transition.transpose() - Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd augmented(n + 1, n);
    augmented.topRows(n) = m;
    augmented.bottomRows(1) = Eigen::RowVectorXd::Ones(n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs(n) = 1.0;
    Eigen::VectorXd pi = augmented.colPivHouseholderQr().solve(rhs);
    return pi.cwiseMax(0.0) / pi.cwiseMax(0.0).sum();
}

}  // namespace sentisim::sentiment
