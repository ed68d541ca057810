#include "nilm/model/model.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nilm::model {

namespace {

void validate_training(const TrainingConfig& t) {
    if (t.batch_size < 2) throw Error(ErrorKind::InvalidArgument, "batch size must be >= 2");
    if (!(t.input_scale > 0.0) || !std::isfinite(t.input_scale)) {
        throw Error(ErrorKind::InvalidArgument, "input scale must be positive and finite");
    }
    if (!(t.adam.learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");
}

Prediction to_prediction(std::span<const double> probs) {
    Prediction p;
    p.probs = {probs[0], probs[1]};
    p.label = probs[1] > probs[0] ? 1 : 0;
    return p;
}

void check_input(double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("input must be a finite |delta P| >= 0, got {}", x));
    }
}

nn::Matrix scaled_column(std::span<const double> xs, double scale) {
    nn::Matrix m(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        check_input(xs[i]);
        m(i, 0) = xs[i] * scale;
    }
    return m;
}

nn::Matrix scaled_windows(const nn::Matrix& windows, std::size_t expected, double scale) {
    if (windows.cols() != expected) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("window of length {} given to a model expecting {}", windows.cols(), expected));
    }
    nn::Matrix m = windows;
    for (double& v : m.values()) {
        check_input(v);
        v *= scale;
    }
    return m;
}

std::vector<int> argmax_rows(const nn::Matrix& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) out[i] = probs(i, 1) > probs(i, 0) ? 1 : 0;
    return out;
}

nn::Matrix rows_of(const nn::Matrix& m, std::span<const std::size_t> idx) {
    nn::Matrix out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) std::ranges::copy(m.row(idx[i]), out.row(i).begin());
    return out;
}

std::vector<int> labels_of(std::span<const int> labels, std::span<const std::size_t> idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
}

/// [begin, end) ranges over a shuffled order; a lone trailing sample joins
/// the batch before it.
std::vector<std::pair<std::size_t, std::size_t>> batches(std::size_t n, std::size_t batch_size) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t b = 0; b < n; b += batch_size) out.emplace_back(b, std::min(n, b + batch_size));
    if (out.size() > 1 && out.back().second - out.back().first == 1) {
        out[out.size() - 2].second = n;
        out.pop_back();
    }
    return out;
}

void check_both_classes(std::span<const int> labels) {
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw Error(ErrorKind::InvalidArgument, fmt::format("label {} is not 0 or 1", l));
        pos += static_cast<std::size_t>(l);
    }
    if (pos == 0 || pos == labels.size()) {
        throw Error(ErrorKind::SingleClass,
                    fmt::format("training set has only {} samples; both classes are needed",
                                pos == 0 ? "negative" : "positive"));
    }
}

/// Drives one training run; `Step` performs forward, backward and update on
/// a batch and `Loss` evaluates the whole set.
template <class Params, class Step, class Loss>
TrainingHistory run_epochs(Params& params, const TrainingConfig& cfg, std::size_t n, std::uint64_t seed,
                           Step&& step, Loss&& loss) {
    TrainingHistory history;
    history.initial_loss = loss(params);
    auto adam = nn::make_adam_state(cfg.adam, params);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (const auto& [b, e] : batches(n, cfg.batch_size)) {
            const std::span<const std::size_t> idx(order.data() + b, e - b);
            const Params grads = step(params, idx);
            nn::adam_step(adam, params, grads);
        }
        const double l = loss(params);
        if (!std::isfinite(l)) {
            throw Error(ErrorKind::InvalidArgument, fmt::format("training diverged at epoch {}", epoch + 1));
        }
        history.epoch_loss.push_back(l);
    }
    return history;
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Dnn ? "dnn" : "rnn"; }

ModelKind model_kind_from_string(std::string_view text) {
    if (text == "dnn") return ModelKind::Dnn;
    if (text == "rnn") return ModelKind::Rnn;
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown model '{}' (expected dnn or rnn)", text));
}

void DnnConfig::validate() const {
    if (depth < 2) throw Error(ErrorKind::InvalidArgument, "DNN depth must be >= 2");
    if (hidden < 1) throw Error(ErrorKind::InvalidArgument, "hidden width must be >= 1");
    validate_training(training);
}

std::size_t DnnConfig::parameter_count() const { return nn::dnn_parameter_count(hidden, depth); }

void RnnConfig::validate() const {
    if (window < 2) throw Error(ErrorKind::InvalidArgument, "RNN window must be >= 2");
    if (layers < 1) throw Error(ErrorKind::InvalidArgument, "RNN needs at least one GRU layer");
    if (hidden < 1) throw Error(ErrorKind::InvalidArgument, "hidden width must be >= 1");
    validate_training(training);
}

std::size_t RnnConfig::parameter_count() const {
    // first layer sees a scalar, the rest see the previous hidden state
    const std::size_t h = hidden;
    const std::size_t first = 3 * (h * 1 + h * h + h);
    const std::size_t rest = 3 * (h * h + h * h + h);
    return first + (layers - 1) * rest + 2 * h + 2;
}

DnnModel build_dnn(const DnnConfig& config, std::uint64_t seed) {
    config.validate();
    nn::DnnShape shape;
    shape.depth = config.depth;
    shape.hidden = config.hidden;
    shape.order = config.order;
    return {config, nn::make_dnn(shape, seed)};
}

RnnModel build_rnn(const RnnConfig& config, std::uint64_t seed) {
    config.validate();
    nn::RnnShape shape;
    shape.layers = config.layers;
    shape.hidden = config.hidden;
    return {config, nn::make_rnn(shape, seed)};
}

Prediction dnn_predict(const DnnModel& model, double x) {
    const double xs[1] = {x};
    const auto trace = nn::dnn_forward(model.params, scaled_column(xs, model.config.training.input_scale),
                                       nn::Mode::Infer);
    return to_prediction(trace.probs.row(0));
}

Prediction rnn_predict(const RnnModel& model, std::span<const double> window) {
    nn::Matrix w(1, window.size());
    std::ranges::copy(window, w.row(0).begin());
    const auto trace = nn::rnn_forward(
        model.params, scaled_windows(w, model.config.window, model.config.training.input_scale));
    return to_prediction(trace.probs.row(0));
}

namespace {

constexpr std::size_t kPredictChunk = 512;

template <class Forward>
std::vector<int> chunked_labels(std::size_t n, Forward&& forward) {
    std::vector<int> out(n);
    const auto chunks = static_cast<std::int64_t>((n + kPredictChunk - 1) / kPredictChunk);
    // Rows are independent in inference mode, so chunking changes nothing
    // numerically.
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < chunks; ++c) {
        const std::size_t b = static_cast<std::size_t>(c) * kPredictChunk;
        const std::size_t e = std::min(n, b + kPredictChunk);
        const auto labels = forward(b, e);
        std::copy(labels.begin(), labels.end(), out.begin() + static_cast<std::ptrdiff_t>(b));
    }
    return out;
}

}  // namespace

std::vector<int> dnn_predict_labels(const DnnModel& model, std::span<const double> xs) {
    for (double x : xs) check_input(x);
    return chunked_labels(xs.size(), [&](std::size_t b, std::size_t e) {
        const auto trace = nn::dnn_forward(
            model.params, scaled_column(xs.subspan(b, e - b), model.config.training.input_scale), nn::Mode::Infer);
        return argmax_rows(trace.probs);
    });
}

std::vector<int> rnn_predict_labels(const RnnModel& model, const nn::Matrix& windows) {
    const nn::Matrix scaled = scaled_windows(windows, model.config.window, model.config.training.input_scale);
    return chunked_labels(windows.rows(), [&](std::size_t b, std::size_t e) {
        nn::Matrix part(e - b, scaled.cols());
        for (std::size_t i = b; i < e; ++i) std::ranges::copy(scaled.row(i), part.row(i - b).begin());
        return argmax_rows(nn::rnn_forward(model.params, part).probs);
    });
}

namespace serial {

std::vector<int> dnn_predict_labels(const DnnModel& model, std::span<const double> xs) {
    std::vector<int> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(dnn_predict(model, x).label);
    return out;
}

std::vector<int> rnn_predict_labels(const RnnModel& model, const nn::Matrix& windows) {
    std::vector<int> out;
    out.reserve(windows.rows());
    for (std::size_t i = 0; i < windows.rows(); ++i) out.push_back(rnn_predict(model, windows.row(i)).label);
    return out;
}

}  // namespace serial

nn::Matrix make_windows(const data::LabeledDataset& full, const data::LabeledDataset& subset, std::size_t length) {
    if (length == 0) throw Error(ErrorKind::InvalidArgument, "window length must be >= 1");
    nn::Matrix out(subset.size(), length, 0.0);
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const std::size_t src = subset.samples[i].source_index;
        if (src >= full.size()) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("sample {} refers to index {} outside the source data", i, src));
        }
        // fill from newest (last column) backwards until data or contiguity runs out
        std::size_t j = src;
        out(i, length - 1) = full.samples[j].x;
        for (std::size_t k = 1; k < length; ++k) {
            if (j == 0 || full.samples[j].time - full.samples[j - 1].time != data::kMinute) break;
            --j;
            out(i, length - 1 - k) = full.samples[j].x;
        }
    }
    return out;
}

DnnTrainResult train_dnn(const data::LabeledDataset& train, const DnnConfig& config, std::uint64_t seed) {
    DnnTrainResult result{build_dnn(config, seed), {}};
    if (train.size() < 2) throw Error(ErrorKind::InvalidArgument, "training needs at least two samples");
    const auto labels = train.labels();
    check_both_classes(labels);
    const auto xs = train.features();
    const nn::Matrix features = scaled_column(xs, config.training.input_scale);

    auto loss = [&](const nn::DnnParams& p) {
        return nn::dnn_loss(p, features, labels, nn::Mode::Train) / static_cast<double>(labels.size());
    };
    auto step = [&](nn::DnnParams& p, std::span<const std::size_t> idx) {
        const nn::Matrix xb = rows_of(features, idx);
        const auto yb = labels_of(labels, idx);
        const auto trace = nn::dnn_forward(p, xb, nn::Mode::Train);
        auto grads = nn::dnn_backward(p, trace, yb);
        nn::dnn_update_running(p, trace);
        return grads;
    };
    // shuffle stream is decoupled from the initialization stream
    result.history = run_epochs(result.model.params, config.training, labels.size(), seed ^ 0x9e3779b97f4a7c15ULL,
                                step, loss);
    return result;
}

RnnTrainResult train_rnn(const nn::Matrix& windows, std::span<const int> labels, const RnnConfig& config,
                         std::uint64_t seed) {
    RnnTrainResult result{build_rnn(config, seed), {}};
    if (windows.rows() != labels.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("{} windows vs {} labels", windows.rows(), labels.size()));
    }
    if (labels.size() < 2) throw Error(ErrorKind::InvalidArgument, "training needs at least two samples");
    check_both_classes(labels);
    const nn::Matrix inputs = scaled_windows(windows, config.window, config.training.input_scale);

    auto loss = [&](const nn::RnnParams& p) {
        return nn::rnn_loss(p, inputs, labels) / static_cast<double>(labels.size());
    };
    auto step = [&](nn::RnnParams& p, std::span<const std::size_t> idx) {
        const nn::Matrix xb = rows_of(inputs, idx);
        const auto yb = labels_of(labels, idx);
        return nn::rnn_backward(p, nn::rnn_forward(p, xb), yb);
    };
    result.history = run_epochs(result.model.params, config.training, labels.size(), seed ^ 0x9e3779b97f4a7c15ULL,
                                step, loss);
    return result;
}

}  // namespace nilm::model
