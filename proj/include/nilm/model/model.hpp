#pragma once

#include "nilm/data/dataset.hpp"
#include "nilm/nn/adam.hpp"
#include "nilm/nn/network.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nilm::model {

enum class ModelKind { Dnn, Rnn };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view text);

/// Settings shared by both model families.
struct TrainingConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    nn::AdamConfig adam;
    /// Features are multiplied by this before entering the network.
    double input_scale = 1e-2;
};

struct DnnConfig {
    std::size_t depth = 5;
    std::size_t hidden = 18;
    nn::BlockOrder order = nn::BlockOrder::DenseTanhNorm;
    TrainingConfig training;

    void validate() const;
    std::size_t parameter_count() const;
};

struct RnnConfig {
    std::size_t window = 2;
    std::size_t layers = 4;
    std::size_t hidden = 18;
    TrainingConfig training;

    void validate() const;
    std::size_t parameter_count() const;
};

struct DnnModel {
    DnnConfig config;
    nn::DnnParams params;
};

struct RnnModel {
    RnnConfig config;
    nn::RnnParams params;
};

DnnModel build_dnn(const DnnConfig& config, std::uint64_t seed);
RnnModel build_rnn(const RnnConfig& config, std::uint64_t seed);

struct Prediction {
    std::array<double, 2> probs{};
    int label = 0;  // argmax, ties go to 0
};

/// Inference-mode forward on one |delta P| value. Negative input is an error.
Prediction dnn_predict(const DnnModel& model, double x);

/// `window` holds config.window values, oldest first; the label is for the
/// last one.
Prediction rnn_predict(const RnnModel& model, std::span<const double> window);

/// Labels for many inputs at once, split across threads. Agrees bit for bit
/// with calling the single-sample functions in a loop.
std::vector<int> dnn_predict_labels(const DnnModel& model, std::span<const double> xs);
std::vector<int> rnn_predict_labels(const RnnModel& model, const nn::Matrix& windows);

namespace serial {
std::vector<int> dnn_predict_labels(const DnnModel& model, std::span<const double> xs);
std::vector<int> rnn_predict_labels(const RnnModel& model, const nn::Matrix& windows);
}  // namespace serial

/// Window of `length` consecutive aggregate deltas ending at each sample of
/// `subset`, looked up in `full` through source_index. Minutes before the
/// start of the data or across a gap are zero.
nn::Matrix make_windows(const data::LabeledDataset& full, const data::LabeledDataset& subset, std::size_t length);

/// Mean per-sample loss over the whole training set, before training and
/// after each epoch.
struct TrainingHistory {
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;
};

struct DnnTrainResult {
    DnnModel model;
    TrainingHistory history;
};

struct RnnTrainResult {
    RnnModel model;
    TrainingHistory history;
};

/// Mini-batch Adam over seeded shuffles. A trailing batch of one sample is
/// folded into the previous batch so batch norm always sees at least two.
DnnTrainResult train_dnn(const data::LabeledDataset& train, const DnnConfig& config, std::uint64_t seed);

/// `windows` rows pair with `labels`; see make_windows.
RnnTrainResult train_rnn(const nn::Matrix& windows, std::span<const int> labels, const RnnConfig& config,
                         std::uint64_t seed);

}  // namespace nilm::model
