#pragma once

#include "nilm/data/dataset.hpp"
#include "nilm/data/experiment.hpp"
#include "nilm/eval/metrics.hpp"
#include "nilm/model/checkpoint.hpp"
#include "nilm/model/model.hpp"

#include <cstdint>
#include <string>

namespace nilm::cli {

struct ModelChoice {
    model::ModelKind kind = model::ModelKind::Dnn;
    model::DnnConfig dnn;
    model::RnnConfig rnn;
};

/// Report label: NN for the dense network, RNN_<window> for the GRU.
std::string model_label(const model::Checkpoint& checkpoint);

struct ExperimentData {
    data::LabeledDataset full;
    data::LabeledDataset train;      // prefix, before augmentation
    data::LabeledDataset augmented;  // what the model is fitted on
    data::LabeledDataset test;
};

/// Split at training_samples and augment the training prefix to the
/// experiment's alpha.
ExperimentData prepare(data::LabeledDataset full, const data::ApplianceExperiment& experiment, std::uint64_t seed);

/// Split only; `augmented` stays empty. Enough for evaluation.
ExperimentData prepare_test(data::LabeledDataset full, const data::ApplianceExperiment& experiment);

model::ExperimentInfo experiment_info(const data::ApplianceExperiment& experiment);

model::Checkpoint train_experiment(const ExperimentData& data, const data::ApplianceExperiment& experiment,
                                   const ModelChoice& choice, std::uint64_t seed);

/// Predictions of the checkpoint on the held-out test split.
std::vector<int> predict_test(const model::Checkpoint& checkpoint, const ExperimentData& data);

eval::ReportEntry evaluate(const model::Checkpoint& checkpoint, const ExperimentData& data);

/// Throws when the checkpoint was trained on a different split or labelling.
void check_matches(const model::Checkpoint& checkpoint, const data::ApplianceExperiment& experiment);

}  // namespace nilm::cli
