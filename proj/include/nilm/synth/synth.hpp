#pragma once

#include "nilm/data/experiment.hpp"
#include "nilm/data/series.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nilm::synth {

/// One simulated appliance: a Markov chain over power levels with geometric
/// dwell times. `dwell_minutes[k]` is the mean stay in level k.
struct ApplianceSpec {
    std::string name;        // short name used in configs and reports
    std::string redd_label;  // labels.dat name when written to disk
    std::vector<double> levels;
    std::vector<double> dwell_minutes;
    double jitter_std = 0.0;  // watts, applied to non-zero levels, truncated at 3 sigma
};

struct SyntheticHouse {
    std::vector<ApplianceSpec> appliances;
    double noise_std = 0.0;  // zero-mean Gaussian baseline noise, watts
    std::size_t duration_minutes = 0;
    std::uint64_t seed = 0;
    data::Timestamp start = 1303132920;  // minute-aligned
};

struct SyntheticRecording {
    data::PowerSeries aggregate;
    std::vector<data::PowerSeries> appliances;
    /// labels[a][i] = 1 iff appliance a changed level between minute i and i+1.
    std::vector<std::vector<int>> labels;
    /// Realized noise after clipping; aggregate - sum(appliances) == noise exactly.
    std::vector<double> noise;
};

/// Power values are quantized to 1/64 W so every sum is exact in double.
inline constexpr double kPowerQuantum = 1.0 / 64.0;

void validate(const SyntheticHouse& spec);

SyntheticRecording generate_house(const SyntheticHouse& spec);

/// Half the smallest gap between an appliance's levels.
double level_threshold(const ApplianceSpec& appliance);

/// Three appliances over 20000 minutes with a fixed seed: a 150 W frequent
/// cycler, a rare 900 W short-pulse appliance and a very rare 1400 W
/// long-cycle appliance.
SyntheticHouse reference_scenario();

/// Experiment config matching a synthetic house: thresholds from the level
/// gaps, mains labelled "mains".
data::ExperimentConfig experiment_config(const SyntheticHouse& spec, std::size_t training_samples,
                                         double alpha = 0.125, std::uint64_t seed = 42);

/// Writes labels.dat plus one channel file per signal: two mains channels
/// carrying half the aggregate each, then one channel per appliance.
void write_redd_house(const std::filesystem::path& dir, const SyntheticHouse& spec,
                      const SyntheticRecording& recording);

}  // namespace nilm::synth
