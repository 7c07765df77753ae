#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "capguard/dataset.hpp"
#include "capguard/rng.hpp"

namespace capguard::quantnet {

inline constexpr const char* kModelSchema = "capguard-qnet-v1";

// Pinball (quantile) loss: with u = y - y_hat, costs tau*u above the
// prediction and (tau-1)*u below it; its expectation is minimized by the
// tau-quantile of y.
double pinball_loss(double tau, double y, double y_hat);

// Bare feed-forward network: batch-normalized ReLU hidden layers, then a
// two-unit ReLU output (lower- and upper-quantile heads). Exposes batch-mode
// forward/backward so gradients can be verified directly; QuantileModel
// wraps it with input standardization, non-crossing inference, and
// persistence.
struct Mlp {
    struct Layer {
        Eigen::MatrixXd W;  // out x in
        Eigen::VectorXd b;
        bool bn = false;    // hidden layers normalize, the output does not
        Eigen::VectorXd gamma, beta;        // normalization scale / shift
        Eigen::VectorXd run_mean, run_var;  // inference statistics
    };
    std::vector<Layer> layers;
    double tau_lo = 0.05;
    double tau_hi = 0.95;

    // He-initialized network: the given hidden widths, then the 2-unit
    // output layer. Weight draws come from `stream` layer by layer.
    static Mlp make(int in_dim, const std::vector<int>& hidden, double tau_lo,
                    double tau_hi, rng::Stream& stream);

    int in_dim() const;

    // Per-hidden-layer statistics captured during one training-mode pass.
    struct BatchStats {
        std::vector<Eigen::VectorXd> mean, var;
    };

    // Training-mode pass over a batch (X columns are samples): hidden layers
    // normalize with the batch's own statistics, the mean over the batch of
    // the two heads' pinball losses is returned, and the full gradient is
    // written into `grad` (same shape as *this). Const and pure: running
    // statistics move only through update_running, fed from *stats.
    double loss_and_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         Mlp& grad, BatchStats* stats = nullptr) const;

    // Fold one batch's statistics into the running inference statistics.
    void update_running(const BatchStats& stats, double momentum);

    // Inference-mode pass (running statistics): 2 x n raw head outputs,
    // already rectified but not yet sorted into a (lo, hi) pair.
    Eigen::MatrixXd infer(const Eigen::MatrixXd& X) const;

    // Contiguous trainable-parameter blocks in a fixed order shared by any
    // same-shape network, so gradient and optimizer state line up block by
    // block. Normalized layers contribute weights and scale/shift (their bias
    // cancels against the batch mean and stays zero); unnormalized layers
    // contribute weights and bias. Running statistics are excluded.
    std::vector<std::pair<double*, std::size_t>> param_blocks();

    // Same-shape network with every parameter and statistic zeroed.
    Mlp zeros_like() const;
};

struct TrainConfig {
    int batch_size = 128;
    double learning_rate = 5e-4;
    int max_epochs = 1200;
    int patience = 50;          // epochs without validation improvement
    double val_fraction = 0.1;  // carved out of the training set, seeded
    std::uint64_t seed = 1;
    double tau_lo = 0.05;  // alpha/2 and 1 - alpha/2 for alpha = 0.1
    double tau_hi = 0.95;
    std::vector<int> hidden = {380, 380};

    void validate() const;
};

class TrainingDiverged : public std::runtime_error {
  public:
    explicit TrainingDiverged(int epoch);
    int epoch() const { return epoch_; }

  private:
    int epoch_;
};

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

// Trained quantile regressor: the network plus the input standardization
// frozen from its training data and the training metadata.
struct QuantileModel {
    Mlp net;
    Eigen::VectorXd x_mean, x_std;  // per-feature; std floors at 1 when ~0
    std::uint64_t seed = 0;
    int epochs_run = 0;
    double final_val_loss = 0.0;

    // Standardize, run the net on running statistics, rectify, and sort the
    // two heads into a non-crossing (q_lo, q_hi) pair. Throws on non-finite
    // or wrong-width input.
    std::pair<double, double> predict(const std::vector<double>& x) const;
    std::vector<std::pair<double, double>> predict(
        const std::vector<std::vector<double>>& xs) const;
};

// Adam-optimized pinball training with shuffled mini-batches, batch
// normalization, and early stopping on a seeded validation split; returns
// the snapshot with the best validation loss. Deterministic for a fixed
// seed. Appends one entry per epoch to *log when given.
QuantileModel train(const std::vector<std::vector<double>>& X,
                    const std::vector<double>& y, const TrainConfig& cfg = {},
                    std::vector<EpochLog>* log = nullptr);

// Convenience wrapper over the sample feature vectors of a dataset.
QuantileModel train(const dataset::Dataset& ds, const TrainConfig& cfg = {},
                    std::vector<EpochLog>* log = nullptr);

// Versioned JSON persistence; load(save(m)) reproduces predictions bitwise.
void save(const QuantileModel& m, const std::string& path);
QuantileModel load(const std::string& path);

std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace capguard::quantnet
