#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sentisim/rng.hpp"

namespace sentisim::hmm {

/// Observation sequence has probability zero under the model.
struct ZeroProbabilityError : std::runtime_error {
    explicit ZeroProbabilityError(const std::string& what) : std::runtime_error(what) {}
};

/// Discrete HMM: transition matrix A (N x N), emission matrix B (N x M),
/// initial distribution pi.
struct HmmModel {
    int n_hidden = 0;
    int n_obs = 0;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::VectorXd pi;

    void validate() const;
};

/// Scaled forward-backward quantities. alpha_hat, beta_hat and gamma are
/// N x T; xi has T-1 slices of N x N; c holds the per-step scaling constants
/// and log_likelihood their summed logs.
struct ScaledFBResult {
    Eigen::MatrixXd alpha_hat;
    Eigen::MatrixXd beta_hat;
    Eigen::MatrixXd gamma;
    std::vector<Eigen::MatrixXd> xi;
    Eigen::VectorXd c;
    double log_likelihood = 0.0;
};

/// Viterbi dynamic-programming tables; log_r holds log max-path
/// probabilities, backptr(i, 0) is unused and set to -1.
struct ViterbiTables {
    Eigen::MatrixXd log_r;
    Eigen::MatrixXi backptr;
    std::vector<int> path;
};

/// Maps positive prices to symbols through quantile bins in log-price space.
/// centers holds the mean log price of each bin over the fitted data.
struct Discretizer {
    std::vector<double> edges;
    std::vector<double> centers;

    int n_symbols() const { return static_cast<int>(centers.size()); }
    int symbol(double price) const;
};

struct BaumWelchOptions {
    int n_restarts = 5;
    double tol = 1e-6;
    int max_iter = 500;
};

struct BaumWelchDiagnostics {
    int best_restart = -1;
    int iterations = 0;                   // iterations of the winning restart
    double final_loglik = 0.0;            // log-likelihood of the returned model
    std::vector<double> loglik_trace;     // winning restart
    double min_loglik_delta = 0.0;        // most negative EM step over all restarts
    long degenerate_rows = 0;             // rows reset to uniform
};

std::pair<std::vector<int>, std::vector<int>> hmm_sample(const HmmModel& model,
                                                         long length, Rng& rng);

ScaledFBResult forward_backward(const HmmModel& model, std::span<const int> obs);

/// One EM re-estimation pass. Returns the updated model and the
/// log-likelihood of the *input* model; degenerate (never occupied) rows are
/// reset to uniform and counted into *degenerate_rows when provided.
std::pair<HmmModel, double> baum_welch_step(const HmmModel& model,
                                            std::span<const int> obs,
                                            long* degenerate_rows = nullptr);

/// Multi-restart EM fit to an observed symbol sequence. Restarts are
/// initialized randomly (transition diagonals biased towards persistence) and
/// the highest-likelihood restart wins, ties to the lower restart index.
std::pair<HmmModel, BaumWelchDiagnostics> baum_welch(std::span<const int> obs,
                                                     int n_hidden, int n_obs,
                                                     const BaumWelchOptions& options,
                                                     Rng& rng);

/// Most likely hidden path, computed in log space; ties break toward the
/// lowest state index.
ViterbiTables viterbi(const HmmModel& model, std::span<const int> obs);

/// Equal-frequency bins over log prices, at most K of them; fewer when the
/// series has fewer distinct values.
std::pair<Discretizer, std::vector<int>> discretize_prices(std::span<const double> prices,
                                                           int n_symbols);

/// Hidden-state order by ascending emission-weighted mean symbol value.
/// order[k] is the old index of the state ranked k-th; stable under ties.
std::vector<int> align_states(const HmmModel& model, std::span<const double> symbol_values);
std::vector<int> align_states(const HmmModel& model, const Discretizer& discretizer);

/// Model with hidden states relabeled so that new state k is old state
/// order[k]; A, B and pi are permuted consistently.
HmmModel apply_state_order(const HmmModel& model, std::span<const int> order);

/// Maps a decoded path through the same relabeling.
std::vector<int> relabel_path(std::span<const int> path, std::span<const int> order);

/// Fraction of positions where the two state sequences agree.
double viterbi_score(std::span<const int> decoded, std::span<const int> truth);

/// Plain-text serialization: "N M", N rows of A, N rows of B, one row of pi.
void save_model(const HmmModel& model, std::ostream& out);
HmmModel load_model(std::istream& in);

}  // namespace sentisim::hmm
