#pragma once

#include <Eigen/Dense>
#include <vector>

#include "keepout/rng.hpp"

namespace keepout {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Fully-connected net: affine layers with ReLU on hidden layers and a linear
// output layer. Columns are samples throughout, so a single input is a
// one-column matrix.
struct DenseNet {
    std::vector<int> dims;    // {in, hidden..., out}
    std::vector<Mat> weights; // W[l]: dims[l+1] x dims[l]
    std::vector<Vec> biases;  // b[l]: dims[l+1]

    int layer_count() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
    std::size_t parameter_count() const;

    // U[-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
    static DenseNet init(const std::vector<int>& dims, Rng& rng);
    static DenseNet zeros(const std::vector<int>& dims);

    Vec to_flat() const;
    void from_flat(const Vec& flat);
};

// Pre-activations and activations retained for the backward pass.
struct ForwardCache {
    Mat input;
    std::vector<Mat> pre; // z_l
    std::vector<Mat> act; // relu(z_l) for hidden layers
};

// Returns the output (out_dim x batch). Pass a cache to enable backward().
Mat forward(const DenseNet& net, const Mat& x, ForwardCache* cache = nullptr);

struct Gradients {
    std::vector<Mat> dW;
    std::vector<Vec> db;

    static Gradients zeros_like(const DenseNet& net);
    Vec to_flat() const;
};

// Reverse-mode gradients for grad_out = dL/dy. Returns dL/dx. When grads is
// null only the input gradient is produced (used for critic-to-action
// gradients in the actor update). ReLU'(0) = 0.
Mat backward(const DenseNet& net, const ForwardCache& cache, const Mat& grad_out,
             Gradients* grads);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<Mat> mW, vW;
    std::vector<Vec> mb, vb;
    long t = 0;

    static AdamState zeros_like(const DenseNet& net, const AdamConfig& cfg);
};

// Bias-corrected Adam update in place.
void adam_step(DenseNet& net, const Gradients& grads, AdamState& state);

// Scalar parameter (log-alpha) optimizer.
struct ScalarAdam {
    AdamConfig cfg;
    double m = 0.0;
    double v = 0.0;
    long t = 0;

    double step(double param, double grad);
};

// target <- tau * online + (1 - tau) * target.
void soft_update(DenseNet& target, const DenseNet& online, double tau);

} // namespace keepout
