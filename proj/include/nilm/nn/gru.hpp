#pragma once

#include "nilm/nn/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace nilm::nn {

/// Gated recurrent unit with the update-gate convention
///   z  = sigmoid(Wz x + Uz h + bz)
///   r  = sigmoid(Wr x + Ur h + br)
///   c  = tanh(Wc x + Uc (r * h) + bc)
///   h' = (1 - z) * h + z * c
struct GruCellParams {
    Matrix update_input, update_hidden;        // hidden x input, hidden x hidden
    Matrix reset_input, reset_hidden;
    Matrix candidate_input, candidate_hidden;
    std::vector<double> update_bias, reset_bias, candidate_bias;

    GruCellParams() = default;
    GruCellParams(std::size_t input_dim, std::size_t hidden_dim);

    std::size_t input_dim() const noexcept { return update_input.cols(); }
    std::size_t hidden_dim() const noexcept { return update_input.rows(); }
    std::size_t parameter_count() const noexcept;
};

/// Everything one step needs for backpropagation.
struct GruStepCache {
    std::vector<double> input;
    std::vector<double> hidden_prev;
    std::vector<double> update;     // z
    std::vector<double> reset;      // r
    std::vector<double> candidate;  // c
    std::vector<double> hidden;     // h'
};

std::vector<double> gru_cell_forward(const GruCellParams& cell, std::span<const double> input,
                                     std::span<const double> hidden_prev);

GruStepCache gru_cell_forward_cached(const GruCellParams& cell, std::span<const double> input,
                                     std::span<const double> hidden_prev);

/// Accumulates parameter gradients into `grad` and adds the gradients with
/// respect to the step input and previous hidden state into `grad_input` and
/// `grad_hidden_prev` (both pre-sized by the caller).
void gru_cell_backward(const GruCellParams& cell, const GruStepCache& cache,
                       std::span<const double> grad_hidden, GruCellParams& grad,
                       std::span<double> grad_input, std::span<double> grad_hidden_prev);

GruCellParams zeros_like(const GruCellParams& cell);

}  // namespace nilm::nn
