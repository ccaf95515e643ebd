#include "sentisim/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "sentisim/market.hpp"

namespace sentisim::rnn {

namespace {

// tanh can round to +-1.0 in double for |z| > ~19; keep memory entries
// strictly inside (-1, 1) so the (1 - m^2) backward factor stays positive.
constexpr double kMemoryBound = 1.0 - 1e-12;

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void check_chunk(const RnnParams& params, const Chunk& chunk) {
    check(chunk.inputs.cols() == params.input_dim(), "input feature width mismatch");
    check(static_cast<long>(chunk.targets.size()) == chunk.inputs.rows(),
          "one target per input row required");
    check(chunk.m0.size() == params.memory_dim(), "initial memory width mismatch");
    for (int target : chunk.targets) {
        check(target >= 0 && target < params.output_dim(), "target class out of range");
    }
}

long clip_matrix(Eigen::MatrixXd& m, double clip) {
    const long over = (m.array().abs() > clip).count();
    m = m.cwiseMax(-clip).cwiseMin(clip);
    return over;
}

long clip_vector(Eigen::VectorXd& v, double clip) {
    const long over = (v.array().abs() > clip).count();
    v = v.cwiseMax(-clip).cwiseMin(clip);
    return over;
}

void write_values(std::ostream& out, const double* data, long count) {
    char buffer[64];
    for (long i = 0; i < count; ++i) {
        std::snprintf(buffer, sizeof buffer, "%.17g", data[i]);
        out << (i ? " " : "") << buffer;
    }
    out << "\n";
}

void read_values(std::istream& in, double* data, long count) {
    for (long i = 0; i < count; ++i) {
        if (!(in >> data[i])) throw std::runtime_error("malformed checkpoint: missing values");
    }
}

// Row-major streaming for Eigen's column-major storage.
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    write_values(out, rm.data(), rm.size());
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(m.rows(), m.cols());
    read_values(in, rm.data(), rm.size());
    m = rm;
}

}  // namespace

RnnParams RnnParams::init(int input_dim, int memory_dim, int output_dim, Rng& rng,
                          double scale) {
    check(input_dim >= 1 && memory_dim >= 1 && output_dim >= 1,
          "network dimensions must be positive");
    std::uniform_real_distribution<double> uniform(-scale, scale);
    RnnParams params;
    auto fill = [&](Eigen::MatrixXd& m, int rows, int cols) {
        m.resize(rows, cols);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) m(i, j) = uniform(rng);
        }
    };
    fill(params.W, memory_dim, input_dim);
    fill(params.V, memory_dim, memory_dim);
    fill(params.U, output_dim, memory_dim);
    params.b = Eigen::VectorXd::Zero(memory_dim);
    params.e = Eigen::VectorXd::Zero(output_dim);
    return params;
}

AdagradCache AdagradCache::zeros_like(const RnnParams& params, double learning_rate) {
    AdagradCache cache;
    cache.W = Eigen::MatrixXd::Zero(params.W.rows(), params.W.cols());
    cache.V = Eigen::MatrixXd::Zero(params.V.rows(), params.V.cols());
    cache.U = Eigen::MatrixXd::Zero(params.U.rows(), params.U.cols());
    cache.b = Eigen::VectorXd::Zero(params.b.size());
    cache.e = Eigen::VectorXd::Zero(params.e.size());
    cache.learning_rate = learning_rate;
    return cache;
}

ForwardPass forward(const RnnParams& params, const Chunk& chunk) {
    check_chunk(params, chunk);
    const long steps = chunk.inputs.rows();
    const int memory_dim = params.memory_dim();
    const int output_dim = params.output_dim();

    ForwardPass fwd;
    fwd.memories.resize(memory_dim, steps);
    const Eigen::MatrixXd input_drive = params.W * chunk.inputs.transpose();  // M x T

    Eigen::VectorXd memory = chunk.m0;
    for (long t = 0; t < steps; ++t) {
        memory = (input_drive.col(t) + params.V * memory + params.b)
                     .array()
                     .tanh()
                     .max(-kMemoryBound)
                     .min(kMemoryBound);
        fwd.memories.col(t) = memory;
    }

    fwd.outputs = (params.U * fwd.memories).colwise() + params.e;  // N x T
    fwd.probs.resize(output_dim, steps);
    for (long t = 0; t < steps; ++t) {
        const Eigen::ArrayXd shifted =
            fwd.outputs.col(t).array() - fwd.outputs.col(t).maxCoeff();
        const Eigen::ArrayXd exps = shifted.exp();
        fwd.probs.col(t) = exps / exps.sum();
    }
    return fwd;
}

double loss(const Eigen::MatrixXd& probs, std::span<const int> targets, bool* clamped) {
    check(static_cast<long>(targets.size()) == probs.cols(), "one target per step required");
    if (clamped) *clamped = false;
    double total = 0.0;
    for (long t = 0; t < probs.cols(); ++t) {
        const int target = targets[t];
        check(target >= 0 && target < probs.rows(), "target class out of range");
        double p = probs(target, t);
        if (p < 1e-300) {
            p = 1e-300;
            if (clamped) *clamped = true;
        }
        total -= std::log(p);
    }
    return total;
}

Gradients backward(const RnnParams& params, const Chunk& chunk, const ForwardPass& fwd,
                   double clip) {
    check_chunk(params, chunk);
    const long steps = chunk.inputs.rows();
    check(fwd.memories.cols() == steps && fwd.probs.cols() == steps,
          "forward pass does not match the chunk");

    // dL/dy = P - onehot(target)
    Eigen::MatrixXd output_grad = fwd.probs;  // N x T
    for (long t = 0; t < steps; ++t) output_grad(chunk.targets[t], t) -= 1.0;

    Gradients grads;
    grads.U = output_grad * fwd.memories.transpose();
    grads.e = output_grad.rowwise().sum();

    // Memory columns shifted one step back: col t holds m_{t-1}.
    Eigen::MatrixXd previous_memories(params.memory_dim(), steps);
    previous_memories.col(0) = chunk.m0;
    if (steps > 1) {
        previous_memories.rightCols(steps - 1) = fwd.memories.leftCols(steps - 1);
    }

    const Eigen::MatrixXd u_transposed = params.U.transpose();
    const Eigen::MatrixXd v_transposed = params.V.transpose();
    Eigen::MatrixXd preactivation_grad(params.memory_dim(), steps);  // dL/d m_hat
    Eigen::VectorXd recurrent = Eigen::VectorXd::Zero(params.memory_dim());
    for (long t = steps - 1; t >= 0; --t) {
        const Eigen::VectorXd memory_grad = u_transposed * output_grad.col(t) + recurrent;
        preactivation_grad.col(t) =
            memory_grad.array() * (1.0 - fwd.memories.col(t).array().square());
        recurrent = v_transposed * preactivation_grad.col(t);
    }

    grads.W = preactivation_grad * chunk.inputs;  // (M x T) (T x S)
    grads.V = preactivation_grad * previous_memories.transpose();
    grads.b = preactivation_grad.rowwise().sum();

    if (clip > 0.0) {
        grads.clipped += clip_matrix(grads.W, clip);
        grads.clipped += clip_matrix(grads.V, clip);
        grads.clipped += clip_matrix(grads.U, clip);
        grads.clipped += clip_vector(grads.b, clip);
        grads.clipped += clip_vector(grads.e, clip);
    }
    return grads;
}

void adagrad_update(RnnParams& params, AdagradCache& cache, const Gradients& grads) {
    const double rate = cache.learning_rate;
    const double eps = cache.epsilon;
    auto apply = [&](auto& param, auto& acc, const auto& grad) {
        acc.array() += grad.array().square();
        param.array() -= rate * grad.array() / (acc.array() + eps).sqrt();
    };
    apply(params.W, cache.W, grads.W);
    apply(params.V, cache.V, grads.V);
    apply(params.U, cache.U, grads.U);
    apply(params.b, cache.b, grads.b);
    apply(params.e, cache.e, grads.e);
}

Eigen::MatrixXd make_features(std::span<const double> prices, long train_count) {
    const long steps = static_cast<long>(prices.size());
    check(steps >= 1, "price series must be non-empty");
    check(train_count >= 1 && train_count <= steps, "train count out of range");
    Eigen::MatrixXd features(steps, 2);
    for (long t = 0; t < steps; ++t) {
        check(prices[t] > 0.0, "prices must be positive");
        features(t, 0) = std::log(prices[t]);
        features(t, 1) = t > 0 ? std::log(prices[t]) - std::log(prices[t - 1]) : 0.0;
    }
    const double mean = features.col(0).head(train_count).mean();
    const double variance =
        (features.col(0).head(train_count).array() - mean).square().sum() / train_count;
    double sd = std::sqrt(variance);
    // a flat series leaves rounding residue in the variance; treat it as zero
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;
    features.col(0) = (features.col(0).array() - mean) / sd;
    return features;
}

TrainResult train(const market::MarketPath& path, const TrainConfig& config) {
    check(config.unroll >= 1 && config.epochs >= 0 && config.memory >= 1,
          "invalid training configuration");
    check(config.train_fraction > 0.0 && config.train_fraction <= 1.0,
          "train fraction must lie in (0,1]");
    const long steps = path.size();
    check(steps >= 10L * config.unroll, "path too short for the requested unroll");
    check(static_cast<long>(path.state.size()) == steps, "path lacks sentiment states");

    const long train_count = std::max<long>(1, static_cast<long>(config.train_fraction * steps));
    const Eigen::MatrixXd features = make_features(path.price, train_count);

    int n_classes = config.n_classes;
    if (n_classes <= 0) {
        n_classes = 1 + *std::max_element(path.state.begin(), path.state.end());
    }
    for (long t = 0; t < steps; ++t) {
        check(path.state[t] >= 0 && path.state[t] < n_classes, "state index out of range");
    }

    const long n_chunks = train_count / config.unroll;
    check(n_chunks >= 1, "train split shorter than one chunk");

    TrainResult result;
    double rate = config.learning_rate;
    for (int attempt = 0;; ++attempt) {
        Rng rng(config.seed);
        RnnParams params = RnnParams::init(2, config.memory, n_classes, rng, config.init_scale);
        AdagradCache cache = AdagradCache::zeros_like(params, rate);
        std::vector<double> epoch_loss;
        bool diverged = false;

        for (int epoch = 0; epoch < config.epochs && !diverged; ++epoch) {
            Eigen::VectorXd memory = Eigen::VectorXd::Zero(config.memory);
            double summed = 0.0;
            for (long chunk_index = 0; chunk_index < n_chunks; ++chunk_index) {
                const long start = chunk_index * config.unroll;
                Chunk chunk;
                chunk.inputs = features.middleRows(start, config.unroll);
                chunk.targets.assign(path.state.begin() + start,
                                     path.state.begin() + start + config.unroll);
                chunk.m0 = memory;
                const ForwardPass fwd = forward(params, chunk);
                const double chunk_loss = loss(fwd.probs, chunk.targets);
                if (!std::isfinite(chunk_loss)) {
                    diverged = true;
                    break;
                }
                const Gradients grads = backward(params, chunk, fwd, config.clip);
                adagrad_update(params, cache, grads);
                memory = fwd.memories.col(config.unroll - 1);
                summed += chunk_loss;
            }
            if (!diverged) epoch_loss.push_back(summed / (n_chunks * config.unroll));
        }

        if (!diverged) {
            result.params = std::move(params);
            result.cache = std::move(cache);
            result.epoch_loss = std::move(epoch_loss);
            result.restarts = attempt;
            result.learning_rate = rate;
            break;
        }
        if (attempt >= 3) throw std::runtime_error("training diverged after 3 rate halvings");
        rate *= 0.5;
    }

    result.train_count = train_count;
    const std::vector<int> decoded = predict(result.params, features.topRows(train_count));
    long matches = 0;
    for (long t = 0; t < train_count; ++t) {
        if (decoded[t] == path.state[t]) ++matches;
    }
    result.train_score = static_cast<double>(matches) / train_count;
    return result;
}

std::vector<int> predict(const RnnParams& params, const Eigen::MatrixXd& features) {
    check(features.cols() == params.input_dim(), "input feature width mismatch");
    const long steps = features.rows();
    std::vector<int> states(steps);
    Eigen::VectorXd memory = Eigen::VectorXd::Zero(params.memory_dim());
    for (long t = 0; t < steps; ++t) {
        memory = (params.W * features.row(t).transpose() + params.V * memory + params.b)
                     .array()
                     .tanh()
                     .max(-kMemoryBound)
                     .min(kMemoryBound);
        const Eigen::VectorXd output = params.U * memory + params.e;
        int best = 0;
        for (int i = 1; i < output.size(); ++i) {
            if (output(i) > output(best)) best = i;
        }
        states[t] = best;
    }
    return states;
}

void save_checkpoint(const RnnParams& params, const AdagradCache& cache, std::ostream& out) {
    out << params.input_dim() << " " << params.memory_dim() << " " << params.output_dim()
        << "\n";
    write_matrix(out, params.W);
    write_matrix(out, params.V);
    write_matrix(out, params.U);
    write_values(out, params.b.data(), params.b.size());
    write_values(out, params.e.data(), params.e.size());
    write_matrix(out, cache.W);
    write_matrix(out, cache.V);
    write_matrix(out, cache.U);
    write_values(out, cache.b.data(), cache.b.size());
    write_values(out, cache.e.data(), cache.e.size());
}

std::pair<RnnParams, AdagradCache> load_checkpoint(std::istream& in) {
    int input_dim = 0, memory_dim = 0, output_dim = 0;
    if (!(in >> input_dim >> memory_dim >> output_dim)) {
        throw std::runtime_error("malformed checkpoint: missing dimensions");
    }
    check(input_dim >= 1 && memory_dim >= 1 && output_dim >= 1,
          "checkpoint dimensions must be positive");
    RnnParams params;
    params.W.resize(memory_dim, input_dim);
    params.V.resize(memory_dim, memory_dim);
    params.U.resize(output_dim, memory_dim);
    params.b.resize(memory_dim);
    params.e.resize(output_dim);
    AdagradCache cache = AdagradCache::zeros_like(params);
    read_matrix(in, params.W);
    read_matrix(in, params.V);
    read_matrix(in, params.U);
    read_values(in, params.b.data(), params.b.size());
    read_values(in, params.e.data(), params.e.size());
    read_matrix(in, cache.W);
    read_matrix(in, cache.V);
    read_matrix(in, cache.U);
    read_values(in, cache.b.data(), cache.b.size());
    read_values(in, cache.e.data(), cache.e.size());
    return {std::move(params), std::move(cache)};
}

}  // namespace sentisim::rnn
