#include "nilm/nn/network.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace nilm::nn {

namespace {

void glorot_fill(Matrix& m, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : m.values()) w = dist(rng);
}

template <class Span>
bool finite_span(Span values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

template <class Block, class Params>
std::vector<Block> dnn_blocks(Params& p) {
    std::vector<Block> blocks;
    for (std::size_t d = 0; d < p.dense.size(); ++d) {
        blocks.push_back({fmt::format("dense.{}.weight", d), p.dense[d].weights.values()});
        blocks.push_back({fmt::format("dense.{}.bias", d), std::span(p.dense[d].biases)});
        if (d < p.norms.size()) {
            blocks.push_back({fmt::format("norm.{}.gamma", d), std::span(p.norms[d].gamma)});
            blocks.push_back({fmt::format("norm.{}.beta", d), std::span(p.norms[d].beta)});
        }
    }
    return blocks;
}

template <class Block, class Params>
std::vector<Block> rnn_blocks(Params& p) {
    std::vector<Block> blocks;
    for (std::size_t l = 0; l < p.cells.size(); ++l) {
        auto& c = p.cells[l];
        blocks.push_back({fmt::format("gru.{}.update_input", l), c.update_input.values()});
        blocks.push_back({fmt::format("gru.{}.update_hidden", l), c.update_hidden.values()});
        blocks.push_back({fmt::format("gru.{}.update_bias", l), std::span(c.update_bias)});
        blocks.push_back({fmt::format("gru.{}.reset_input", l), c.reset_input.values()});
        blocks.push_back({fmt::format("gru.{}.reset_hidden", l), c.reset_hidden.values()});
        blocks.push_back({fmt::format("gru.{}.reset_bias", l), std::span(c.reset_bias)});
        blocks.push_back({fmt::format("gru.{}.candidate_input", l), c.candidate_input.values()});
        blocks.push_back({fmt::format("gru.{}.candidate_hidden", l), c.candidate_hidden.values()});
        blocks.push_back({fmt::format("gru.{}.candidate_bias", l), std::span(c.candidate_bias)});
    }
    blocks.push_back({"head.weight", p.head.weights.values()});
    blocks.push_back({"head.bias", std::span(p.head.biases)});
    return blocks;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
    if (labels.size() != rows) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("{} labels for a batch of {} samples", labels.size(), rows));
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes) {
            throw Error(ErrorKind::InvalidArgument, fmt::format("label {} outside [0, {})", l, classes));
        }
    }
}

}  // namespace

std::string_view to_string(BlockOrder order) {
    return order == BlockOrder::DenseTanhNorm ? "dense-tanh-norm" : "dense-norm-tanh";
}

BlockOrder block_order_from_string(std::string_view text) {
    if (text == "dense-tanh-norm") return BlockOrder::DenseTanhNorm;
    if (text == "dense-norm-tanh") return BlockOrder::DenseNormTanh;
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown block order '{}'", text));
}

std::size_t DnnParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& d : dense) n += d.parameter_count();
    for (const auto& b : norms) n += b.parameter_count();
    return n;
}

std::size_t RnnParams::parameter_count() const noexcept {
    std::size_t n = head.parameter_count();
    for (const auto& c : cells) n += c.parameter_count();
    return n;
}

std::size_t dnn_parameter_count(std::size_t hidden, std::size_t depth) {
    return (depth - 2) * hidden * hidden + 3 * depth * hidden + 2;
}

DnnParams make_dnn(const DnnShape& shape, std::uint64_t seed) {
    if (shape.depth < 2 || shape.hidden < 1 || shape.input_dim < 1 || shape.classes < 2) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("invalid DNN shape: depth {}, hidden {}, input {}, classes {}", shape.depth,
                                shape.hidden, shape.input_dim, shape.classes));
    }
    std::mt19937_64 rng(seed);
    DnnParams p;
    p.order = shape.order;
    std::size_t in = shape.input_dim;
    for (std::size_t d = 0; d + 1 < shape.depth; ++d) {
        p.dense.emplace_back(in, shape.hidden);
        glorot_fill(p.dense.back().weights, rng);
        p.norms.emplace_back(shape.hidden);
        in = shape.hidden;
    }
    p.dense.emplace_back(in, shape.classes);
    glorot_fill(p.dense.back().weights, rng);
    return p;
}

RnnParams make_rnn(const RnnShape& shape, std::uint64_t seed) {
    if (shape.layers < 1 || shape.hidden < 1 || shape.input_dim < 1 || shape.classes < 2) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("invalid RNN shape: layers {}, hidden {}", shape.layers, shape.hidden));
    }
    std::mt19937_64 rng(seed);
    RnnParams p;
    std::size_t in = shape.input_dim;
    for (std::size_t l = 0; l < shape.layers; ++l) {
        GruCellParams c(in, shape.hidden);
        for (Matrix* m : {&c.update_input, &c.update_hidden, &c.reset_input, &c.reset_hidden, &c.candidate_input,
                          &c.candidate_hidden}) {
            glorot_fill(*m, rng);
        }
        p.cells.push_back(std::move(c));
        in = shape.hidden;
    }
    p.head = DenseLayerParams(shape.hidden, shape.classes);
    glorot_fill(p.head.weights, rng);
    return p;
}

std::vector<ParamBlock> parameter_blocks(DnnParams& params) { return dnn_blocks<ParamBlock>(params); }
std::vector<ConstParamBlock> parameter_blocks(const DnnParams& params) {
    return dnn_blocks<ConstParamBlock>(params);
}
std::vector<ParamBlock> parameter_blocks(RnnParams& params) { return rnn_blocks<ParamBlock>(params); }
std::vector<ConstParamBlock> parameter_blocks(const RnnParams& params) {
    return rnn_blocks<ConstParamBlock>(params);
}

DnnParams zeros_like(const DnnParams& params) {
    DnnParams g;
    g.order = params.order;
    for (const auto& d : params.dense) g.dense.push_back(zeros_like(d));
    for (const auto& b : params.norms) g.norms.push_back(zeros_like(b));
    return g;
}

RnnParams zeros_like(const RnnParams& params) {
    RnnParams g;
    for (const auto& c : params.cells) g.cells.push_back(zeros_like(c));
    g.head = zeros_like(params.head);
    return g;
}

bool all_finite(const DnnParams& params) {
    for (const auto& b : parameter_blocks(params))
        if (!finite_span(b.values)) return false;
    for (const auto& n : params.norms)
        if (!finite_span(std::span(n.running_mean)) || !finite_span(std::span(n.running_var))) return false;
    return true;
}

bool all_finite(const RnnParams& params) {
    for (const auto& b : parameter_blocks(params))
        if (!finite_span(b.values)) return false;
    return true;
}

DnnTrace dnn_forward(const DnnParams& params, const Matrix& features, Mode mode) {
    if (params.dense.size() < 2 || params.norms.size() + 1 != params.dense.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("DNN with {} dense layers and {} norms", params.dense.size(), params.norms.size()));
    }
    DnnTrace trace;
    trace.mode = mode;
    Matrix x = features;
    for (std::size_t d = 0; d < params.norms.size(); ++d) {
        HiddenBlockTrace block;
        block.input = std::move(x);
        block.dense_out = dense_forward(params.dense[d], block.input, static_cast<int>(d));
        if (params.order == BlockOrder::DenseTanhNorm) {
            block.tanh_out = tanh_forward(block.dense_out);
            block.norm = batchnorm_forward(params.norms[d], block.tanh_out, mode);
            block.output = block.norm.output;
        } else {
            block.norm = batchnorm_forward(params.norms[d], block.dense_out, mode);
            block.tanh_out = tanh_forward(block.norm.output);
            block.output = block.tanh_out;
        }
        x = block.output;
        trace.blocks.push_back(std::move(block));
    }
    trace.head_input = std::move(x);
    trace.logits = dense_forward(params.dense.back(), trace.head_input, static_cast<int>(params.norms.size()));
    trace.probs = softmax_rows(trace.logits);
    return trace;
}

DnnParams dnn_backward(const DnnParams& params, const DnnTrace& trace, std::span<const int> labels) {
    if (trace.mode != Mode::Train) {
        throw Error(ErrorKind::InvalidArgument, "backward needs a train-mode forward trace");
    }
    if (trace.depth() != params.depth() || trace.probs.cols() != params.dense.back().out_dim()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("trace depth {} does not match network depth {}", trace.depth(), params.depth()));
    }
    check_labels(labels, trace.probs.rows(), trace.probs.cols());

    DnnParams grad = zeros_like(params);
    Matrix g = softmax_nll_backward(trace.probs, labels);
    g = dense_backward(params.dense.back(), trace.head_input, g, grad.dense.back());
    for (std::size_t k = trace.blocks.size(); k-- > 0;) {
        const auto& block = trace.blocks[k];
        if (params.order == BlockOrder::DenseTanhNorm) {
            g = batchnorm_backward(params.norms[k], block.norm, g, grad.norms[k]);
            g = tanh_backward(block.tanh_out, g);
        } else {
            g = tanh_backward(block.tanh_out, g);
            g = batchnorm_backward(params.norms[k], block.norm, g, grad.norms[k]);
        }
        g = dense_backward(params.dense[k], block.input, g, grad.dense[k]);
    }
    return grad;
}

void dnn_update_running(DnnParams& params, const DnnTrace& trace) {
    if (trace.mode != Mode::Train) return;
    for (std::size_t k = 0; k < trace.blocks.size(); ++k) batchnorm_update_running(params.norms[k], trace.blocks[k].norm.stats);
}

double dnn_loss(const DnnParams& params, const Matrix& features, std::span<const int> labels, Mode mode) {
    return nll_loss(dnn_forward(params, features, mode).probs, labels);
}

RnnTrace rnn_forward(const RnnParams& params, const Matrix& windows) {
    if (params.cells.empty()) throw Error(ErrorKind::DimensionMismatch, "RNN without GRU layers");
    if (params.cells.front().input_dim() != 1) {
        throw Error(ErrorKind::DimensionMismatch, "RNN input layer must take one scalar per step");
    }
    const std::size_t hidden = params.cells.back().hidden_dim();
    const std::size_t n = windows.rows();
    RnnTrace trace;
    trace.steps = windows.cols();
    trace.caches.resize(n);
    trace.head_input = Matrix(n, hidden);
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<std::vector<double>> state;
        for (const auto& c : params.cells) state.emplace_back(c.hidden_dim(), 0.0);
        auto& sample = trace.caches[s];
        sample.resize(trace.steps);
        for (std::size_t t = 0; t < trace.steps; ++t) {
            std::vector<double> input{windows(s, t)};
            for (std::size_t l = 0; l < params.cells.size(); ++l) {
                sample[t].push_back(gru_cell_forward_cached(params.cells[l], input, state[l]));
                state[l] = sample[t].back().hidden;
                input = state[l];
            }
        }
        std::copy(state.back().begin(), state.back().end(), trace.head_input.row(s).begin());
    }
    trace.logits = dense_forward(params.head, trace.head_input);
    trace.probs = softmax_rows(trace.logits);
    return trace;
}

RnnParams rnn_backward(const RnnParams& params, const RnnTrace& trace, std::span<const int> labels) {
    if (trace.caches.size() != trace.probs.rows() ||
        (!trace.caches.empty() && !trace.caches.front().empty() &&
         trace.caches.front().front().size() != params.cells.size())) {
        throw Error(ErrorKind::DimensionMismatch, "RNN trace does not match the parameter set");
    }
    check_labels(labels, trace.probs.rows(), trace.probs.cols());
    RnnParams grad = zeros_like(params);
    const Matrix g_head_in =
        dense_backward(params.head, trace.head_input, softmax_nll_backward(trace.probs, labels), grad.head);

    const std::size_t layers = params.cells.size();
    for (std::size_t s = 0; s < trace.caches.size(); ++s) {
        // Upstream gradient into each layer's hidden state at the current step.
        std::vector<std::vector<double>> d_state;
        for (const auto& c : params.cells) d_state.emplace_back(c.hidden_dim(), 0.0);
        const auto head_row = g_head_in.row(s);
        std::copy(head_row.begin(), head_row.end(), d_state.back().begin());

        for (std::size_t t = trace.steps; t-- > 0;) {
            std::vector<double> d_from_above;  // gradient flowing down into layer l's output at step t
            for (std::size_t l = layers; l-- > 0;) {
                const auto& cell = params.cells[l];
                std::vector<double> d_h = d_state[l];
                if (!d_from_above.empty())
                    for (std::size_t i = 0; i < d_h.size(); ++i) d_h[i] += d_from_above[i];
                std::vector<double> d_input(cell.input_dim(), 0.0);
                std::vector<double> d_prev(cell.hidden_dim(), 0.0);
                gru_cell_backward(cell, trace.caches[s][t][l], d_h, grad.cells[l], d_input, d_prev);
                d_state[l] = std::move(d_prev);
                d_from_above = std::move(d_input);
            }
        }
    }
    return grad;
}

double rnn_loss(const RnnParams& params, const Matrix& windows, std::span<const int> labels) {
    return nll_loss(rnn_forward(params, windows).probs, labels);
}

}  // namespace nilm::nn
