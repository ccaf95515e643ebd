#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sentisim/rng.hpp"

namespace sentisim::market {
struct MarketPath;
}

namespace sentisim::rnn {

/// Network parameters: W maps input to memory, V memory to memory, U memory
/// to output, with memory bias b and output bias e.
struct RnnParams {
    Eigen::MatrixXd W;  // M x S
    Eigen::MatrixXd V;  // M x M
    Eigen::MatrixXd U;  // N x M
    Eigen::VectorXd b;  // M
    Eigen::VectorXd e;  // N

    int input_dim() const { return static_cast<int>(W.cols()); }
    int memory_dim() const { return static_cast<int>(W.rows()); }
    int output_dim() const { return static_cast<int>(U.rows()); }

    /// Weights uniform in [-scale, scale], biases zero.
    static RnnParams init(int input_dim, int memory_dim, int output_dim, Rng& rng,
                          double scale = 0.01);
};

/// One training window: inputs row t is the feature vector of step t.
struct Chunk {
    Eigen::MatrixXd inputs;    // T x S
    std::vector<int> targets;  // T class indices
    Eigen::VectorXd m0;        // memory entering the chunk
};

struct ForwardPass {
    Eigen::MatrixXd memories;  // M x T
    Eigen::MatrixXd outputs;   // N x T
    Eigen::MatrixXd probs;     // N x T, softmax of outputs
};

struct Gradients {
    Eigen::MatrixXd W, V, U;
    Eigen::VectorXd b, e;
    long clipped = 0;  // entries clamped by the elementwise clip
};

/// Per-parameter accumulated squared gradients for the adaptive step
/// r * g / sqrt(acc + epsilon).
struct AdagradCache {
    Eigen::MatrixXd W, V, U;
    Eigen::VectorXd b, e;
    double learning_rate = 0.1;
    double epsilon = 1e-8;

    static AdagradCache zeros_like(const RnnParams& params, double learning_rate = 0.1);
};

/// m_t = tanh(W x_t + V m_{t-1} + b), y_t = U m_t + e, P = softmax(y)
/// (computed with max subtraction).
ForwardPass forward(const RnnParams& params, const Chunk& chunk);

/// Summed negative log probability of the target class per step. A zero
/// target probability is clamped at 1e-300 and flagged through *clamped.
double loss(const Eigen::MatrixXd& probs, std::span<const int> targets,
            bool* clamped = nullptr);

/// Backpropagation through time over the chunk. Gradients are clipped
/// elementwise to [-clip, clip] after computation; clip <= 0 disables.
Gradients backward(const RnnParams& params, const Chunk& chunk,
                   const ForwardPass& fwd, double clip = 5.0);

void adagrad_update(RnnParams& params, AdagradCache& cache, const Gradients& grads);

/// Two features per step: log price standardized by the mean/sd of the first
/// train_count steps, and the one-step log return (zero at t=1).
Eigen::MatrixXd make_features(std::span<const double> prices, long train_count);

struct TrainConfig {
    int unroll = 50;
    int epochs = 50;
    int memory = 200;
    int n_classes = 0;  // 0 => max target + 1
    double learning_rate = 0.1;
    double train_fraction = 0.9;
    double clip = 5.0;
    double init_scale = 0.01;
    std::uint64_t seed = 0;
};

struct TrainResult {
    RnnParams params;
    AdagradCache cache;
    std::vector<double> epoch_loss;  // mean per-step loss per epoch
    double train_score = 0.0;
    long train_count = 0;
    int restarts = 0;              // divergence-guard restarts used
    double learning_rate = 0.0;    // rate actually used
};

/// Trains on the first train_fraction of the path (consecutive chunks, memory
/// carried across chunks within an epoch, no shuffling) with Adagrad updates.
TrainResult train(const market::MarketPath& path, const TrainConfig& config);

/// Single forward pass over the whole feature matrix starting from zero
/// memory; prediction is the argmax output class, ties to the lowest index.
std::vector<int> predict(const RnnParams& params, const Eigen::MatrixXd& features);

/// Plain-text checkpoint: "S M N", then W, V, U row-major, b, e, then the
/// Adagrad accumulators in the same order.
void save_checkpoint(const RnnParams& params, const AdagradCache& cache, std::ostream& out);
std::pair<RnnParams, AdagradCache> load_checkpoint(std::istream& in);

}  // namespace sentisim::rnn
