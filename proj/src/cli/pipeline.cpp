#include "nilm/cli/pipeline.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

namespace nilm::cli {

std::string model_label(const model::Checkpoint& c) {
    if (c.kind == model::ModelKind::Dnn) return "NN";
    return fmt::format("RNN_{}", c.rnn->config.window);
}

ExperimentData prepare_test(data::LabeledDataset full, const data::ApplianceExperiment& experiment) {
    if (experiment.training_samples >= full.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("{}: training_samples {} leaves no test data ({} samples in total)",
                                experiment.appliance, experiment.training_samples, full.size()));
    }
    ExperimentData d;
    auto [train, test] = data::split(full, experiment.training_samples);
    d.full = std::move(full);
    d.train = std::move(train);
    d.test = std::move(test);
    return d;
}

ExperimentData prepare(data::LabeledDataset full, const data::ApplianceExperiment& experiment, std::uint64_t seed) {
    ExperimentData d = prepare_test(std::move(full), experiment);
    d.augmented = data::augment_positives(d.train, experiment.alpha, seed);
    return d;
}

model::ExperimentInfo experiment_info(const data::ApplianceExperiment& e) {
    return {e.house, e.appliance, e.threshold_watts, e.training_samples, e.alpha};
}

model::Checkpoint train_experiment(const ExperimentData& data, const data::ApplianceExperiment& experiment,
                                   const ModelChoice& choice, std::uint64_t seed) {
    model::Checkpoint c;
    c.kind = choice.kind;
    c.seed = seed;
    c.experiment = experiment_info(experiment);
    if (choice.kind == model::ModelKind::Dnn) {
        auto r = model::train_dnn(data.augmented, choice.dnn, seed);
        c.dnn = std::move(r.model);
        c.history = std::move(r.history);
    } else {
        const auto windows = model::make_windows(data.full, data.augmented, choice.rnn.window);
        auto r = model::train_rnn(windows, data.augmented.labels(), choice.rnn, seed);
        c.rnn = std::move(r.model);
        c.history = std::move(r.history);
    }
    return c;
}

std::vector<int> predict_test(const model::Checkpoint& c, const ExperimentData& data) {
    if (c.kind == model::ModelKind::Dnn) return model::dnn_predict_labels(*c.dnn, data.test.features());
    return model::rnn_predict_labels(*c.rnn, model::make_windows(data.full, data.test, c.rnn->config.window));
}

eval::ReportEntry evaluate(const model::Checkpoint& c, const ExperimentData& data) {
    eval::ReportEntry e;
    e.house = c.experiment.house;
    e.appliance = c.experiment.appliance;
    e.model = model_label(c);
    e.counts = eval::confusion(predict_test(c, data), data.test.labels());
    e.scores = eval::metrics(e.counts);
    return e;
}

void check_matches(const model::Checkpoint& c, const data::ApplianceExperiment& experiment) {
    // alpha only shapes the training set, so a checkpoint trained with a
    // different alpha is still evaluated on the same test split
    const auto& got = c.experiment;
    if (got.house == experiment.house && got.appliance == experiment.appliance &&
        got.threshold_watts == experiment.threshold_watts && got.training_samples == experiment.training_samples) {
        return;
    }
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("checkpoint was trained for house {} {} (threshold {} W, {} training samples) but the "
                            "config gives house {} {} (threshold {} W, {} training samples)",
                            got.house, got.appliance, got.threshold_watts, got.training_samples, experiment.house,
                            experiment.appliance, experiment.threshold_watts, experiment.training_samples));
}

}  // namespace nilm::cli
