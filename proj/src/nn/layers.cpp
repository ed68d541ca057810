#include "nilm/nn/layers.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace nilm::nn {

namespace {

// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("{}: shape {}x{} does not match {}x{}", what, a.rows(), a.cols(),
                                b.rows(), b.cols()));
    }
}

}  // namespace

Matrix dense_forward(const DenseLayerParams& layer, const Matrix& x, int layer_index) {
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();
    if (x.cols() != in || layer.biases.size() != out) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("dense layer {}: weights {}x{}, biases {}, input batch {}x{}", layer_index,
                                out, in, layer.biases.size(), x.rows(), x.cols()));
    }
    Matrix y(x.rows(), out);
    const auto rows = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static) if (x.rows() * out * in >= kParallelWork)
    for (std::int64_t r = 0; r < rows; ++r) {
        const auto xr = x.row(static_cast<std::size_t>(r));
        auto yr = y.row(static_cast<std::size_t>(r));
        for (std::size_t o = 0; o < out; ++o) {
            const auto w = layer.weights.row(o);
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * xr[i];
            yr[o] = acc + layer.biases[o];
        }
    }
    return y;
}

Matrix tanh_forward(const Matrix& x) {
    Matrix y(x.rows(), x.cols());
    auto src = x.values();
    auto dst = y.values();
    std::transform(src.begin(), src.end(), dst.begin(), [](double v) { return std::tanh(v); });
    return y;
}

BatchNormResult batchnorm_forward(const BatchNormParams& params, const Matrix& x, Mode mode) {
    const std::size_t width = params.width();
    if (x.cols() != width || params.beta.size() != width || params.running_mean.size() != width ||
        params.running_var.size() != width) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("batch norm of width {} given input {}x{}", width, x.rows(), x.cols()));
    }
    const std::size_t n = x.rows();
    BatchNormResult res{Matrix(n, width), Matrix(n, width), {}};
    res.stats.batch_size = n;

    if (mode == Mode::Train) {
        if (n < 2) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("train-mode batch norm needs a batch of at least 2, got {}", n));
        }
        res.stats.mean.assign(width, 0.0);
        res.stats.var.assign(width, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < width; ++c) res.stats.mean[c] += x(r, c);
        for (auto& m : res.stats.mean) m /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < width; ++c) {
                const double d = x(r, c) - res.stats.mean[c];
                res.stats.var[c] += d * d;
            }
        for (auto& v : res.stats.var) v /= static_cast<double>(n);
    } else {
        res.stats.mean = params.running_mean;
        res.stats.var = params.running_var;
    }

    for (std::size_t c = 0; c < width; ++c) {
        const double inv_std = 1.0 / std::sqrt(res.stats.var[c] + params.epsilon);
        for (std::size_t r = 0; r < n; ++r) {
            const double xhat = (x(r, c) - res.stats.mean[c]) * inv_std;
            res.normalized(r, c) = xhat;
            res.output(r, c) = params.gamma[c] * xhat + params.beta[c];
        }
    }
    return res;
}

void batchnorm_update_running(BatchNormParams& params, const BatchNormStats& stats) {
    if (stats.mean.size() != params.width() || stats.var.size() != params.width() || stats.batch_size < 2) {
        throw Error(ErrorKind::DimensionMismatch, "running-statistics update given mismatched batch stats");
    }
    const double n = static_cast<double>(stats.batch_size);
    const double unbias = n / (n - 1.0);
    for (std::size_t c = 0; c < params.width(); ++c) {
        params.running_mean[c] = params.decay * params.running_mean[c] + (1.0 - params.decay) * stats.mean[c];
        params.running_var[c] =
            params.decay * params.running_var[c] + (1.0 - params.decay) * stats.var[c] * unbias;
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double shift = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - shift);
        total += p[k];
    }
    for (auto& v : p) v /= total;
    return p;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = softmax(logits.row(r));
        std::copy(row.begin(), row.end(), p.row(r).begin());
    }
    return p;
}

double nll_loss(const Matrix& probs, std::span<const int> labels) {
    if (labels.size() != probs.rows()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("loss given {} probability rows and {} labels", probs.rows(), labels.size()));
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= probs.cols()) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("label {} out of range for {} classes (sample {})", label, probs.cols(), r));
        }
        loss -= std::log(std::max(probs(r, static_cast<std::size_t>(label)), kProbabilityFloor));
    }
    return loss;
}

Matrix dense_backward(const DenseLayerParams& layer, const Matrix& input, const Matrix& grad_output,
                      DenseLayerParams& grad) {
    const std::size_t in = layer.in_dim();
    const std::size_t out = layer.out_dim();
    const std::size_t n = input.rows();
    if (input.cols() != in || grad_output.cols() != out || grad_output.rows() != n ||
        grad.weights.rows() != out || grad.weights.cols() != in || grad.biases.size() != out) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("dense backward: weights {}x{}, input {}x{}, upstream {}x{}", out, in, n,
                                input.cols(), grad_output.rows(), grad_output.cols()));
    }

    // Each output unit owns its row of dW, so the batch sum runs in a fixed order.
    const auto outs = static_cast<std::int64_t>(out);
#pragma omp parallel for schedule(static) if (n * out * in >= kParallelWork)
    for (std::int64_t oi = 0; oi < outs; ++oi) {
        const auto o = static_cast<std::size_t>(oi);
        auto gw = grad.weights.row(o);
        double gb = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double g = grad_output(r, o);
            gb += g;
            const auto xr = input.row(r);
            for (std::size_t i = 0; i < in; ++i) gw[i] += g * xr[i];
        }
        grad.biases[o] += gb;
    }

    Matrix grad_input(n, in);
    const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (n * out * in >= kParallelWork)
    for (std::int64_t ri = 0; ri < rows; ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        auto gi = grad_input.row(r);
        for (std::size_t o = 0; o < out; ++o) {
            const double g = grad_output(r, o);
            const auto w = layer.weights.row(o);
            for (std::size_t i = 0; i < in; ++i) gi[i] += g * w[i];
        }
    }
    return grad_input;
}

Matrix tanh_backward(const Matrix& output, const Matrix& grad_output) {
    require_same_shape(output, grad_output, "tanh backward");
    Matrix g(output.rows(), output.cols());
    auto y = output.values();
    auto up = grad_output.values();
    auto dst = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = up[i] * (1.0 - y[i] * y[i]);
    return g;
}

Matrix batchnorm_backward(const BatchNormParams& params, const BatchNormResult& forward,
                          const Matrix& grad_output, BatchNormParams& grad) {
    require_same_shape(forward.normalized, grad_output, "batch norm backward");
    const std::size_t width = params.width();
    const std::size_t n = grad_output.rows();
    if (grad_output.cols() != width || grad.gamma.size() != width || grad.beta.size() != width ||
        forward.stats.var.size() != width) {
        throw Error(ErrorKind::DimensionMismatch, "batch norm backward: width mismatch");
    }
    Matrix grad_input(n, width);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < width; ++c) {
        double sum_g = 0.0;
        double sum_g_xhat = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double g = grad_output(r, c);
            sum_g += g;
            sum_g_xhat += g * forward.normalized(r, c);
        }
        grad.gamma[c] += sum_g_xhat;
        grad.beta[c] += sum_g;
        const double scale = params.gamma[c] / std::sqrt(forward.stats.var[c] + params.epsilon);
        for (std::size_t r = 0; r < n; ++r) {
            grad_input(r, c) = scale * (grad_output(r, c) - inv_n * sum_g -
                                        forward.normalized(r, c) * inv_n * sum_g_xhat);
        }
    }
    return grad_input;
}

Matrix softmax_nll_backward(const Matrix& probs, std::span<const int> labels) {
    if (labels.size() != probs.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "softmax backward: label count differs from batch size");
    }
    Matrix g = probs;
    for (std::size_t r = 0; r < probs.rows(); ++r) g(r, static_cast<std::size_t>(labels[r])) -= 1.0;
    return g;
}

DenseLayerParams zeros_like(const DenseLayerParams& layer) {
    return DenseLayerParams(layer.in_dim(), layer.out_dim());
}

BatchNormParams zeros_like(const BatchNormParams& params) {
    BatchNormParams g(params.width());
    std::fill(g.gamma.begin(), g.gamma.end(), 0.0);
    std::fill(g.running_var.begin(), g.running_var.end(), 0.0);
    g.epsilon = params.epsilon;
    g.decay = params.decay;
    return g;
}

Matrix serial::dense_forward(const DenseLayerParams& layer, const Matrix& x) {
    if (x.cols() != layer.in_dim() || layer.biases.size() != layer.out_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "serial dense forward: shape mismatch");
    }
    Matrix y(x.rows(), layer.out_dim());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t o = 0; o < layer.out_dim(); ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < layer.in_dim(); ++i) acc += layer.weights(o, i) * x(r, i);
            y(r, o) = acc + layer.biases[o];
        }
    }
    return y;
}

}  // namespace nilm::nn
