#pragma once

#include "nilm/model/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace nilm::model {

inline constexpr int kCheckpointVersion = 1;

/// The experiment a checkpoint was trained for; eval refuses a config that
/// disagrees.
struct ExperimentInfo {
    std::string house;
    std::string appliance;
    double threshold_watts = 0.0;
    std::size_t training_samples = 0;
    double alpha = 0.0;

    bool operator==(const ExperimentInfo&) const = default;
};

struct Checkpoint {
    int version = kCheckpointVersion;
    ModelKind kind = ModelKind::Dnn;
    std::uint64_t seed = 0;
    std::optional<DnnModel> dnn;  // set when kind == Dnn
    std::optional<RnnModel> rnn;  // set when kind == Rnn
    ExperimentInfo experiment;
    TrainingHistory history;
};

/// Line-oriented text. Every double is written as a hexadecimal float so the
/// round trip is exact.
std::string to_string(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nilm::model
