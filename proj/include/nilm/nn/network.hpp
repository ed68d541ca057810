#pragma once

#include "nilm/nn/gru.hpp"
#include "nilm/nn/layers.hpp"
#include "nilm/nn/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nilm::nn {

/// Order of the elementary operations inside each hidden block.
enum class BlockOrder { DenseTanhNorm, DenseNormTanh };

std::string_view to_string(BlockOrder order);
BlockOrder block_order_from_string(std::string_view text);

/// Feed-forward classifier: D-1 hidden blocks (dense, tanh and batch norm in
/// `order`) followed by a dense output layer whose logits go to softmax.
struct DnnParams {
    std::vector<DenseLayerParams> dense;  // D layers, the last one is the output head
    std::vector<BatchNormParams> norms;   // D-1, one per hidden block
    BlockOrder order = BlockOrder::DenseTanhNorm;

    std::size_t depth() const noexcept { return dense.size(); }
    std::size_t parameter_count() const noexcept;
};

/// Stacked GRU over a window of scalars; the top layer's final hidden state
/// feeds a dense head and softmax.
struct RnnParams {
    std::vector<GruCellParams> cells;
    DenseLayerParams head;

    std::size_t parameter_count() const noexcept;
};

struct DnnShape {
    std::size_t depth = 5;
    std::size_t hidden = 18;
    std::size_t input_dim = 1;
    std::size_t classes = 2;
    BlockOrder order = BlockOrder::DenseTanhNorm;
};

struct RnnShape {
    std::size_t layers = 4;
    std::size_t hidden = 18;
    std::size_t input_dim = 1;
    std::size_t classes = 2;
};

/// Dense weights uniform in +-sqrt(6 / (fan_in + fan_out)); biases and beta 0,
/// gamma 1, running mean 0 and running variance 1.
DnnParams make_dnn(const DnnShape& shape, std::uint64_t seed);
RnnParams make_rnn(const RnnShape& shape, std::uint64_t seed);

/// Closed form of DnnParams::parameter_count for width H and depth D:
/// (D-2) H^2 + 3 D H + 2 when the input is scalar and K = 2.
std::size_t dnn_parameter_count(std::size_t hidden, std::size_t depth);

/// Named views of the trainable parameters in a fixed order. Batch-norm
/// running statistics are state, not parameters, and are not listed.
struct ParamBlock {
    std::string name;
    std::span<double> values;
};
struct ConstParamBlock {
    std::string name;
    std::span<const double> values;
};

std::vector<ParamBlock> parameter_blocks(DnnParams& params);
std::vector<ConstParamBlock> parameter_blocks(const DnnParams& params);
std::vector<ParamBlock> parameter_blocks(RnnParams& params);
std::vector<ConstParamBlock> parameter_blocks(const RnnParams& params);

DnnParams zeros_like(const DnnParams& params);
RnnParams zeros_like(const RnnParams& params);

bool all_finite(const DnnParams& params);
bool all_finite(const RnnParams& params);

// ---- DNN forward / backward -------------------------------------------------

struct HiddenBlockTrace {
    Matrix input;
    Matrix dense_out;
    Matrix tanh_out;
    BatchNormResult norm;
    Matrix output;
};

struct DnnTrace {
    Mode mode = Mode::Infer;
    std::vector<HiddenBlockTrace> blocks;
    Matrix head_input;
    Matrix logits;
    Matrix probs;

    /// Hidden blocks plus the output layer.
    std::size_t depth() const noexcept { return blocks.size() + 1; }
};

/// `features` holds one sample per row (input_dim columns).
DnnTrace dnn_forward(const DnnParams& params, const Matrix& features, Mode mode);

/// Gradient of the summed negative log-likelihood with respect to every
/// trainable parameter. The trace must come from a train-mode forward on
/// `params`.
DnnParams dnn_backward(const DnnParams& params, const DnnTrace& trace, std::span<const int> labels);

/// Folds the batch statistics of a train-mode trace into the running stats.
void dnn_update_running(DnnParams& params, const DnnTrace& trace);

double dnn_loss(const DnnParams& params, const Matrix& features, std::span<const int> labels, Mode mode);

// ---- RNN forward / backward -------------------------------------------------

struct RnnTrace {
    std::size_t steps = 0;
    // caches[sample][step][layer]
    std::vector<std::vector<std::vector<GruStepCache>>> caches;
    Matrix head_input;
    Matrix logits;
    Matrix probs;
};

/// `windows` holds one window per row, oldest value first.
RnnTrace rnn_forward(const RnnParams& params, const Matrix& windows);

RnnParams rnn_backward(const RnnParams& params, const RnnTrace& trace, std::span<const int> labels);

double rnn_loss(const RnnParams& params, const Matrix& windows, std::span<const int> labels);

}  // namespace nilm::nn
