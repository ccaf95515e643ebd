#include "sentisim/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace sentisim::hmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void check_row_stochastic(const Eigen::MatrixXd& m, const char* name) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!(m(i, j) >= 0.0)) throw std::invalid_argument(std::string(name) + " has negative entries");
            sum += m(i, j);
        }
        if (std::abs(sum - 1.0) > 1e-10) {
            throw std::invalid_argument(std::string(name) + " rows must sum to 1");
        }
    }
}

void check_obs(const HmmModel& model, std::span<const int> obs) {
    check(!obs.empty(), "observation sequence must be non-empty");
    for (int symbol : obs) {
        check(symbol >= 0 && symbol < model.n_obs, "observed symbol out of range");
    }
}

int draw_categorical(const Eigen::VectorXd& weights, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double cum = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        cum += weights(i);
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

Eigen::VectorXd random_stochastic_vector(int n, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd v(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        v(i) = unit(rng);
        sum += v(i);
    }
    if (sum <= 0.0) return Eigen::VectorXd::Constant(n, 1.0 / n);
    return v / sum;
}

HmmModel random_initial_model(int n_hidden, int n_obs, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    HmmModel model;
    model.n_hidden = n_hidden;
    model.n_obs = n_obs;
    model.A.resize(n_hidden, n_hidden);
    model.B.resize(n_hidden, n_obs);
    model.pi = random_stochastic_vector(n_hidden, rng);
    for (int i = 0; i < n_hidden; ++i) {
        // Diagonal close to 0.8 before normalization: persistent-state basin.
        double sum = 0.0;
        for (int j = 0; j < n_hidden; ++j) {
            model.A(i, j) = (i == j) ? 0.8
                            : n_hidden > 1 ? 0.4 / (n_hidden - 1) * unit(rng)
                                           : 0.0;
            sum += model.A(i, j);
        }
        model.A.row(i) /= sum;
        model.B.row(i) = random_stochastic_vector(n_obs, rng).transpose();
    }
    return model;
}

}  // namespace

void HmmModel::validate() const {
    check(n_hidden >= 1 && n_obs >= 1, "model dimensions must be positive");
    check(A.rows() == n_hidden && A.cols() == n_hidden, "A must be N x N");
    check(B.rows() == n_hidden && B.cols() == n_obs, "B must be N x M");
    check(pi.size() == n_hidden, "pi must have N entries");
    check_row_stochastic(A, "A");
    check_row_stochastic(B, "B");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < pi.size(); ++i) {
        check(pi(i) >= 0.0, "pi has negative entries");
        sum += pi(i);
    }
    check(std::abs(sum - 1.0) <= 1e-10, "pi must sum to 1");
}

std::pair<std::vector<int>, std::vector<int>> hmm_sample(const HmmModel& model,
                                                         long length, Rng& rng) {
    model.validate();
    check(length >= 1, "length must be positive");
    std::vector<int> hidden(length);
    std::vector<int> observed(length);
    hidden[0] = draw_categorical(model.pi, rng);
    observed[0] = draw_categorical(model.B.row(hidden[0]).transpose(), rng);
    for (long t = 1; t < length; ++t) {
        hidden[t] = draw_categorical(model.A.row(hidden[t - 1]).transpose(), rng);
        observed[t] = draw_categorical(model.B.row(hidden[t]).transpose(), rng);
    }
    return {std::move(hidden), std::move(observed)};
}

ScaledFBResult forward_backward(const HmmModel& model, std::span<const int> obs) {
    model.validate();
    check_obs(model, obs);
    const int n = model.n_hidden;
    const long T = static_cast<long>(obs.size());

    ScaledFBResult result;
    result.alpha_hat.resize(n, T);
    result.beta_hat.resize(n, T);
    result.gamma.resize(n, T);
    result.c.resize(T);

    Eigen::VectorXd column = model.pi.cwiseProduct(model.B.col(obs[0]));
    result.c(0) = column.sum();
    if (result.c(0) <= 0.0) {
        throw ZeroProbabilityError("observation sequence has zero probability at t=1");
    }
    result.alpha_hat.col(0) = column / result.c(0);

    for (long t = 1; t < T; ++t) {
        column = (model.A.transpose() * result.alpha_hat.col(t - 1))
                     .cwiseProduct(model.B.col(obs[t]));
        result.c(t) = column.sum();
        if (result.c(t) <= 0.0) {
            throw ZeroProbabilityError("observation sequence has zero probability at t=" +
                                       std::to_string(t + 1));
        }
        result.alpha_hat.col(t) = column / result.c(t);
    }

    result.beta_hat.col(T - 1).setOnes();
    for (long t = T - 2; t >= 0; --t) {
        const Eigen::VectorXd weighted =
            model.B.col(obs[t + 1]).cwiseProduct(result.beta_hat.col(t + 1));
        result.beta_hat.col(t) = (model.A * weighted) / result.c(t + 1);
    }

    result.gamma = result.alpha_hat.cwiseProduct(result.beta_hat);

    result.xi.reserve(T > 0 ? T - 1 : 0);
    for (long t = 0; t + 1 < T; ++t) {
        const Eigen::VectorXd weighted =
            model.B.col(obs[t + 1]).cwiseProduct(result.beta_hat.col(t + 1));
        Eigen::MatrixXd slice =
            (result.alpha_hat.col(t) * weighted.transpose()).cwiseProduct(model.A) /
            result.c(t + 1);
        result.xi.push_back(std::move(slice));
    }

    result.log_likelihood = result.c.array().log().sum();
    return result;
}

std::pair<HmmModel, double> baum_welch_step(const HmmModel& model,
                                            std::span<const int> obs,
                                            long* degenerate_rows) {
    const ScaledFBResult fb = forward_backward(model, obs);
    const int n = model.n_hidden;
    const int m = model.n_obs;
    const long T = static_cast<long>(obs.size());
    constexpr double kDegenerate = 1e-12;

    HmmModel updated;
    updated.n_hidden = n;
    updated.n_obs = m;
    updated.pi = fb.gamma.col(0);
    updated.A.resize(n, n);
    updated.B.setZero(n, m);

    Eigen::MatrixXd xi_sum = Eigen::MatrixXd::Zero(n, n);
    for (const auto& slice : fb.xi) xi_sum += slice;
    Eigen::VectorXd gamma_sum_t1 = Eigen::VectorXd::Zero(n);
    if (T > 1) gamma_sum_t1 = fb.gamma.leftCols(T - 1).rowwise().sum();
    const Eigen::VectorXd gamma_sum = fb.gamma.rowwise().sum();

    for (long t = 0; t < T; ++t) updated.B.col(obs[t]) += fb.gamma.col(t);

    for (int i = 0; i < n; ++i) {
        if (T > 1 && gamma_sum_t1(i) > kDegenerate) {
            updated.A.row(i) = xi_sum.row(i) / gamma_sum_t1(i);
            updated.A.row(i) /= updated.A.row(i).sum();
        } else {
            updated.A.row(i).setConstant(1.0 / n);
            if (degenerate_rows) ++*degenerate_rows;
        }
        if (gamma_sum(i) > kDegenerate) {
            updated.B.row(i) /= gamma_sum(i);
            updated.B.row(i) /= updated.B.row(i).sum();
        } else {
            updated.B.row(i).setConstant(1.0 / m);
            if (degenerate_rows) ++*degenerate_rows;
        }
    }
    return {std::move(updated), fb.log_likelihood};
}

std::pair<HmmModel, BaumWelchDiagnostics> baum_welch(std::span<const int> obs,
                                                     int n_hidden, int n_obs,
                                                     const BaumWelchOptions& options,
                                                     Rng& rng) {
    check(n_hidden >= 1 && n_obs >= 1, "model dimensions must be positive");
    check(static_cast<long>(obs.size()) >= 10L * n_hidden,
          "observation sequence too short for the requested state count");
    check(options.n_restarts >= 1 && options.max_iter >= 1, "need restarts and iterations");
    for (int symbol : obs) check(symbol >= 0 && symbol < n_obs, "observed symbol out of range");

    HmmModel best_model;
    BaumWelchDiagnostics diagnostics;
    double best_ll = -kInf;
    diagnostics.min_loglik_delta = kInf;

    for (int restart = 0; restart < options.n_restarts; ++restart) {
        HmmModel model = random_initial_model(n_hidden, n_obs, rng);
        std::vector<double> trace;
        double previous_ll = -kInf;
        int iterations = 0;
        for (int iter = 0; iter < options.max_iter; ++iter) {
            auto [updated, ll] = baum_welch_step(model, obs, &diagnostics.degenerate_rows);
            trace.push_back(ll);
            model = std::move(updated);
            ++iterations;
            if (iter > 0) {
                diagnostics.min_loglik_delta =
                    std::min(diagnostics.min_loglik_delta, ll - previous_ll);
                const double rel =
                    (ll - previous_ll) / std::max(std::abs(previous_ll), 1e-12);
                if (rel < options.tol) {
                    previous_ll = ll;
                    break;
                }
            }
            previous_ll = ll;
        }
        const double final_ll = forward_backward(model, obs).log_likelihood;
        diagnostics.min_loglik_delta =
            std::min(diagnostics.min_loglik_delta, final_ll - previous_ll);
        if (final_ll > best_ll) {
            best_ll = final_ll;
            best_model = model;
            diagnostics.best_restart = restart;
            diagnostics.iterations = iterations;
            diagnostics.final_loglik = final_ll;
            diagnostics.loglik_trace = std::move(trace);
        }
    }
    if (diagnostics.min_loglik_delta == kInf) diagnostics.min_loglik_delta = 0.0;
    return {std::move(best_model), std::move(diagnostics)};
}

ViterbiTables viterbi(const HmmModel& model, std::span<const int> obs) {
    model.validate();
    check_obs(model, obs);
    const int n = model.n_hidden;
    const long T = static_cast<long>(obs.size());

    const Eigen::MatrixXd log_a = model.A.array().log();
    const Eigen::MatrixXd log_b = model.B.array().log();
    const Eigen::VectorXd log_pi = model.pi.array().log();

    ViterbiTables tables;
    tables.log_r.resize(n, T);
    tables.backptr.resize(n, T);
    tables.backptr.col(0).setConstant(-1);
    tables.log_r.col(0) = log_pi + log_b.col(obs[0]);

    for (long t = 1; t < T; ++t) {
        for (int i = 0; i < n; ++i) {
            double best = -kInf;
            int best_j = 0;
            for (int j = 0; j < n; ++j) {
                const double candidate = tables.log_r(j, t - 1) + log_a(j, i);
                if (candidate > best) {
                    best = candidate;
                    best_j = j;
                }
            }
            tables.log_r(i, t) = best + log_b(i, obs[t]);
            tables.backptr(i, t) = best_j;
        }
    }

    tables.path.resize(T);
    int state = 0;
    double best = -kInf;
    for (int i = 0; i < n; ++i) {
        if (tables.log_r(i, T - 1) > best) {
            best = tables.log_r(i, T - 1);
            state = i;
        }
    }
    tables.path[T - 1] = state;
    for (long t = T - 1; t > 0; --t) {
        state = tables.backptr(state, t);
        tables.path[t - 1] = state;
    }
    return tables;
}

int Discretizer::symbol(double price) const {
    const double log_price = std::log(price);
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), log_price) -
                            edges.begin());
}

std::pair<Discretizer, std::vector<int>> discretize_prices(std::span<const double> prices,
                                                           int n_symbols) {
    check(n_symbols >= 2, "need at least two symbols");
    check(!prices.empty(), "price series must be non-empty");
    const long T = static_cast<long>(prices.size());
    std::vector<double> log_prices(T);
    for (long t = 0; t < T; ++t) {
        check(prices[t] > 0.0, "prices must be positive");
        log_prices[t] = std::log(prices[t]);
    }
    std::vector<double> sorted = log_prices;
    std::sort(sorted.begin(), sorted.end());

    long distinct = 1;
    for (long t = 1; t < T; ++t) {
        if (sorted[t] != sorted[t - 1]) ++distinct;
    }
    const int k = static_cast<int>(std::min<long>(n_symbols, distinct));

    Discretizer discretizer;
    for (int i = 1; i < k; ++i) {
        long pos = i * T / k;
        while (pos < T && sorted[pos] == sorted[pos - 1]) ++pos;  // land between distinct values
        if (pos >= T) break;
        const double edge = 0.5 * (sorted[pos - 1] + sorted[pos]);
        if (discretizer.edges.empty() || edge > discretizer.edges.back()) {
            discretizer.edges.push_back(edge);
        }
    }

    const int bins = static_cast<int>(discretizer.edges.size()) + 1;
    std::vector<int> symbols(T);
    std::vector<double> sums(bins, 0.0);
    std::vector<long> counts(bins, 0);
    for (long t = 0; t < T; ++t) {
        const int s = discretizer.symbol(prices[t]);
        symbols[t] = s;
        sums[s] += log_prices[t];
        ++counts[s];
    }
    discretizer.centers.resize(bins);
    for (int b = 0; b < bins; ++b) {
        discretizer.centers[b] = counts[b] > 0 ? sums[b] / counts[b] : 0.0;
    }
    return {std::move(discretizer), std::move(symbols)};
}

std::vector<int> align_states(const HmmModel& model,
                              std::span<const double> symbol_values) {
    check(static_cast<int>(symbol_values.size()) == model.n_obs,
          "one value per observation symbol required");
    std::vector<double> score(model.n_hidden, 0.0);
    for (int i = 0; i < model.n_hidden; ++i) {
        for (int k = 0; k < model.n_obs; ++k) score[i] += model.B(i, k) * symbol_values[k];
    }
    std::vector<int> order(model.n_hidden);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return score[a] < score[b]; });
    return order;
}

std::vector<int> align_states(const HmmModel& model, const Discretizer& discretizer) {
    return align_states(model, discretizer.centers);
}

HmmModel apply_state_order(const HmmModel& model, std::span<const int> order) {
    check(static_cast<int>(order.size()) == model.n_hidden, "order must cover all states");
    HmmModel out;
    out.n_hidden = model.n_hidden;
    out.n_obs = model.n_obs;
    out.A.resize(model.n_hidden, model.n_hidden);
    out.B.resize(model.n_hidden, model.n_obs);
    out.pi.resize(model.n_hidden);
    for (int i = 0; i < model.n_hidden; ++i) {
        out.pi(i) = model.pi(order[i]);
        out.B.row(i) = model.B.row(order[i]);
        for (int j = 0; j < model.n_hidden; ++j) out.A(i, j) = model.A(order[i], order[j]);
    }
    return out;
}

std::vector<int> relabel_path(std::span<const int> path, std::span<const int> order) {
    std::vector<int> inverse(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) inverse[order[k]] = static_cast<int>(k);
    std::vector<int> out(path.size());
    for (std::size_t t = 0; t < path.size(); ++t) out[t] = inverse[path[t]];
    return out;
}

double viterbi_score(std::span<const int> decoded, std::span<const int> truth) {
    check(decoded.size() == truth.size() && !decoded.empty(),
          "state sequences must be non-empty and of equal length");
    long matches = 0;
    for (std::size_t t = 0; t < decoded.size(); ++t) {
        if (decoded[t] == truth[t]) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(decoded.size());
}

void save_model(const HmmModel& model, std::ostream& out) {
    model.validate();
    char buffer[64];
    out << model.n_hidden << " " << model.n_obs << "\n";
    auto write_row = [&](const auto& row) {
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            std::snprintf(buffer, sizeof buffer, "%.17g", row(j));
            out << (j ? " " : "") << buffer;
        }
        out << "\n";
    };
    for (int i = 0; i < model.n_hidden; ++i) write_row(model.A.row(i));
    for (int i = 0; i < model.n_hidden; ++i) write_row(model.B.row(i));
    write_row(model.pi);
}

HmmModel load_model(std::istream& in) {
    HmmModel model;
    if (!(in >> model.n_hidden >> model.n_obs)) {
        throw std::runtime_error("malformed model file: missing dimensions");
    }
    check(model.n_hidden >= 1 && model.n_obs >= 1, "model dimensions must be positive");
    model.A.resize(model.n_hidden, model.n_hidden);
    model.B.resize(model.n_hidden, model.n_obs);
    model.pi.resize(model.n_hidden);
    auto read_into = [&](auto&& setter, Eigen::Index count) {
        for (Eigen::Index k = 0; k < count; ++k) {
            double value;
            if (!(in >> value)) throw std::runtime_error("malformed model file: missing values");
            setter(k, value);
        }
    };
    for (int i = 0; i < model.n_hidden; ++i) {
        read_into([&](Eigen::Index j, double v) { model.A(i, j) = v; }, model.n_hidden);
    }
    for (int i = 0; i < model.n_hidden; ++i) {
        read_into([&](Eigen::Index j, double v) { model.B(i, j) = v; }, model.n_obs);
    }
    read_into([&](Eigen::Index i, double v) { model.pi(i) = v; }, model.n_hidden);
    model.validate();
    return model;
}

}  // namespace sentisim::hmm
