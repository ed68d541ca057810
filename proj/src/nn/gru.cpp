#include "nilm/nn/gru.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace nilm::nn {

namespace {

double sigmoid(double a) {
    // Split by sign so exp never overflows.
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

// out += M v
void add_matvec(const Matrix& m, std::span<const double> v, std::span<double> out) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * v[c];
        out[r] += acc;
    }
}

// out += M^T v
void add_matvec_transposed(const Matrix& m, std::span<const double> v, std::span<double> out) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * v[r];
    }
}

// M += a b^T
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) row[c] += a[r] * b[c];
    }
}

void check_dims(const GruCellParams& cell, std::size_t input, std::size_t hidden) {
    const std::size_t in = cell.input_dim();
    const std::size_t h = cell.hidden_dim();
    const bool consistent =
        cell.reset_input.rows() == h && cell.reset_input.cols() == in && cell.candidate_input.rows() == h &&
        cell.candidate_input.cols() == in && cell.update_hidden.rows() == h && cell.update_hidden.cols() == h &&
        cell.reset_hidden.rows() == h && cell.reset_hidden.cols() == h && cell.candidate_hidden.rows() == h &&
        cell.candidate_hidden.cols() == h && cell.update_bias.size() == h && cell.reset_bias.size() == h &&
        cell.candidate_bias.size() == h;
    if (!consistent) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("GRU cell (input {}, hidden {}) has inconsistent weight shapes", in, h));
    }
    if (input != in || hidden != h) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("GRU cell expects input {} / hidden {}, got input {} / hidden {}", in, h, input,
                                hidden));
    }
}

}  // namespace

GruCellParams::GruCellParams(std::size_t input_dim, std::size_t hidden_dim)
    : update_input(hidden_dim, input_dim), update_hidden(hidden_dim, hidden_dim),
      reset_input(hidden_dim, input_dim), reset_hidden(hidden_dim, hidden_dim),
      candidate_input(hidden_dim, input_dim), candidate_hidden(hidden_dim, hidden_dim),
      update_bias(hidden_dim, 0.0), reset_bias(hidden_dim, 0.0), candidate_bias(hidden_dim, 0.0) {}

std::size_t GruCellParams::parameter_count() const noexcept {
    return 3 * (update_input.size() + update_hidden.size() + update_bias.size());
}

GruStepCache gru_cell_forward_cached(const GruCellParams& cell, std::span<const double> input,
                                     std::span<const double> hidden_prev) {
    check_dims(cell, input.size(), hidden_prev.size());
    const std::size_t h = cell.hidden_dim();
    GruStepCache cache;
    cache.input.assign(input.begin(), input.end());
    cache.hidden_prev.assign(hidden_prev.begin(), hidden_prev.end());

    cache.update = cell.update_bias;
    add_matvec(cell.update_input, input, cache.update);
    add_matvec(cell.update_hidden, hidden_prev, cache.update);
    for (auto& v : cache.update) v = sigmoid(v);

    cache.reset = cell.reset_bias;
    add_matvec(cell.reset_input, input, cache.reset);
    add_matvec(cell.reset_hidden, hidden_prev, cache.reset);
    for (auto& v : cache.reset) v = sigmoid(v);

    std::vector<double> gated(h);
    for (std::size_t i = 0; i < h; ++i) gated[i] = cache.reset[i] * hidden_prev[i];
    cache.candidate = cell.candidate_bias;
    add_matvec(cell.candidate_input, input, cache.candidate);
    add_matvec(cell.candidate_hidden, gated, cache.candidate);
    for (auto& v : cache.candidate) v = std::tanh(v);

    cache.hidden.resize(h);
    for (std::size_t i = 0; i < h; ++i) {
        cache.hidden[i] = (1.0 - cache.update[i]) * hidden_prev[i] + cache.update[i] * cache.candidate[i];
    }
    return cache;
}

std::vector<double> gru_cell_forward(const GruCellParams& cell, std::span<const double> input,
                                     std::span<const double> hidden_prev) {
    return gru_cell_forward_cached(cell, input, hidden_prev).hidden;
}

void gru_cell_backward(const GruCellParams& cell, const GruStepCache& cache,
                       std::span<const double> grad_hidden, GruCellParams& grad,
                       std::span<double> grad_input, std::span<double> grad_hidden_prev) {
    const std::size_t h = cell.hidden_dim();
    if (grad_hidden.size() != h || grad_hidden_prev.size() != h || grad_input.size() != cell.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "GRU backward: gradient buffer sizes do not match the cell");
    }

    std::vector<double> d_update(h), d_reset(h), d_candidate(h), gated(h), d_gated(h, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        const double g = grad_hidden[i];
        const double z = cache.update[i];
        const double c = cache.candidate[i];
        grad_hidden_prev[i] += g * (1.0 - z);
        d_update[i] = g * (c - cache.hidden_prev[i]) * z * (1.0 - z);
        d_candidate[i] = g * z * (1.0 - c * c);
        gated[i] = cache.reset[i] * cache.hidden_prev[i];
    }

    add_outer(grad.candidate_input, d_candidate, cache.input);
    add_outer(grad.candidate_hidden, d_candidate, gated);
    for (std::size_t i = 0; i < h; ++i) grad.candidate_bias[i] += d_candidate[i];
    add_matvec_transposed(cell.candidate_hidden, d_candidate, d_gated);
    add_matvec_transposed(cell.candidate_input, d_candidate, grad_input);

    for (std::size_t i = 0; i < h; ++i) {
        const double r = cache.reset[i];
        grad_hidden_prev[i] += d_gated[i] * r;
        d_reset[i] = d_gated[i] * cache.hidden_prev[i] * r * (1.0 - r);
    }

    add_outer(grad.update_input, d_update, cache.input);
    add_outer(grad.update_hidden, d_update, cache.hidden_prev);
    for (std::size_t i = 0; i < h; ++i) grad.update_bias[i] += d_update[i];
    add_matvec_transposed(cell.update_input, d_update, grad_input);
    add_matvec_transposed(cell.update_hidden, d_update, grad_hidden_prev);

    add_outer(grad.reset_input, d_reset, cache.input);
    add_outer(grad.reset_hidden, d_reset, cache.hidden_prev);
    for (std::size_t i = 0; i < h; ++i) grad.reset_bias[i] += d_reset[i];
    add_matvec_transposed(cell.reset_input, d_reset, grad_input);
    add_matvec_transposed(cell.reset_hidden, d_reset, grad_hidden_prev);
}

GruCellParams zeros_like(const GruCellParams& cell) {
    return GruCellParams(cell.input_dim(), cell.hidden_dim());
}

}  // namespace nilm::nn
