#pragma once

#include "nilm/nn/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace nilm::nn {

enum class Mode { Train, Infer };

/// Probability floor applied inside the log of the loss.
inline constexpr double kProbabilityFloor = 1e-12;

struct DenseLayerParams {
    Matrix weights;               // out_dim x in_dim
    std::vector<double> biases;   // out_dim

    DenseLayerParams() = default;
    DenseLayerParams(std::size_t in_dim, std::size_t out_dim)
        : weights(out_dim, in_dim), biases(out_dim, 0.0) {}

    std::size_t in_dim() const noexcept { return weights.cols(); }
    std::size_t out_dim() const noexcept { return weights.rows(); }
    std::size_t parameter_count() const noexcept { return weights.size() + biases.size(); }
};

struct BatchNormParams {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
    double decay = 0.9;

    BatchNormParams() = default;
    explicit BatchNormParams(std::size_t width)
        : gamma(width, 1.0), beta(width, 0.0), running_mean(width, 0.0), running_var(width, 1.0) {}

    std::size_t width() const noexcept { return gamma.size(); }
    /// Only gamma and beta are trainable.
    std::size_t parameter_count() const noexcept { return gamma.size() + beta.size(); }
};

/// Per-unit batch statistics; `var` is the biased (1/N) variance used for
/// normalization.
struct BatchNormStats {
    std::vector<double> mean;
    std::vector<double> var;
    std::size_t batch_size = 0;
};

struct BatchNormResult {
    Matrix output;
    Matrix normalized;  // x-hat, before the gamma/beta affine
    BatchNormStats stats;
};

// ---- forward ---------------------------------------------------------------

/// y = W x + b for every row of `x`. `layer_index` only decorates errors.
Matrix dense_forward(const DenseLayerParams& layer, const Matrix& x, int layer_index = -1);

Matrix tanh_forward(const Matrix& x);

/// Train mode normalizes with batch statistics (batch >= 2) and leaves the
/// running statistics alone; fold them in with batchnorm_update_running.
/// Infer mode normalizes with the running statistics.
BatchNormResult batchnorm_forward(const BatchNormParams& params, const Matrix& x, Mode mode);

/// Exponential-decay update of the running statistics from one train batch.
/// The running variance tracks the unbiased batch variance.
void batchnorm_update_running(BatchNormParams& params, const BatchNormStats& stats);

/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);
Matrix softmax_rows(const Matrix& logits);

/// Sum over the batch of -log p[label], with p clamped below at kProbabilityFloor.
double nll_loss(const Matrix& probs, std::span<const int> labels);

// ---- backward --------------------------------------------------------------
// Every backward kernel accumulates parameter gradients into `grad` (which
// must already have the parameter's shape) and returns the gradient with
// respect to the layer input.

Matrix dense_backward(const DenseLayerParams& layer, const Matrix& input, const Matrix& grad_output,
                      DenseLayerParams& grad);

/// `output` is the tanh output.
Matrix tanh_backward(const Matrix& output, const Matrix& grad_output);

Matrix batchnorm_backward(const BatchNormParams& params, const BatchNormResult& forward,
                          const Matrix& grad_output, BatchNormParams& grad);

/// Gradient of the summed loss with respect to the logits: p - onehot(label).
Matrix softmax_nll_backward(const Matrix& probs, std::span<const int> labels);

/// Zero-filled gradient holders with the parameter's shape.
DenseLayerParams zeros_like(const DenseLayerParams& layer);
BatchNormParams zeros_like(const BatchNormParams& params);

namespace serial {
/// Single-threaded reference for dense_forward; same summation order, so the
/// results are bit-identical.
Matrix dense_forward(const DenseLayerParams& layer, const Matrix& x);
}  // namespace serial

}  // namespace nilm::nn
