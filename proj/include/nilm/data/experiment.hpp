#pragma once

#include "nilm/data/dataset.hpp"
#include "nilm/data/series.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nilm::data {

/// Which channels of a house make up one signal. Channels are named either
/// by index or by their labels.dat name; all matches are summed.
struct ChannelSelector {
    std::vector<int> channels;
    std::vector<std::string> labels;

    std::vector<int> resolve(const std::map<int, std::string>& house_labels) const;
};

struct ApplianceExperiment {
    std::string house;
    std::string appliance;  // short name: REFR, MW, DW, KO, WD, ST, AC, EL, ...
    ChannelSelector source;
    double threshold_watts = 0.0;
    std::size_t training_samples = 0;
    double alpha = 0.125;
};

struct ExperimentConfig {
    std::string house;
    ChannelSelector mains{{}, {"mains"}};
    double alpha = 0.125;
    std::uint64_t seed = 42;
    int max_gap_minutes = kDefaultMaxGapMinutes;
    std::vector<ApplianceExperiment> appliances;

    /// Throws with the list of configured names when `name` is unknown.
    const ApplianceExperiment& appliance(const std::string& name) const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& config);

/// Accepts either a house directory (holding labels.dat) or a dataset root
/// holding house_<n>/.
std::filesystem::path resolve_house_dir(const std::filesystem::path& dataset, const std::string& house);

/// All labels.dat channels read and resampled to one minute.
struct HouseRecording {
    std::filesystem::path dir;
    std::map<int, std::string> labels;
    std::map<int, PowerSeries> channels;  // resampled
};

/// Reads labels.dat and the listed channel files (all channels when `wanted`
/// is empty). Missing files are reported together in one error.
HouseRecording load_house(const std::filesystem::path& house_dir, const std::vector<int>& wanted = {},
                          int max_gap_minutes = kDefaultMaxGapMinutes);

PowerSeries aggregate_signal(const HouseRecording& house, const ChannelSelector& mains);
PowerSeries appliance_signal(const HouseRecording& house, const ApplianceExperiment& experiment);

/// Labels the appliance's own deltas and pairs them with the aggregate deltas
/// over the minutes both signals cover.
LabeledDataset build_dataset(const PowerSeries& aggregate, const PowerSeries& appliance, double threshold);

/// Loads exactly the channels one experiment needs and builds its dataset.
LabeledDataset load_experiment_dataset(const std::filesystem::path& dataset, const ExperimentConfig& config,
                                       const ApplianceExperiment& experiment);

}  // namespace nilm::data
