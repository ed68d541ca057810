#pragma once

#include "nilm/data/series.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace nilm::data {

struct LabeledSample {
    double x = 0.0;              // |delta P| of the aggregate, watts
    int label = 0;               // 1 when the target appliance changed state
    Timestamp time = 0;
    std::size_t source_index = 0;  // position in the dataset it was assembled as

    bool operator==(const LabeledSample&) const = default;
};

struct LabeledDataset {
    std::vector<LabeledSample> samples;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    bool augmented = false;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    void recount();

    std::vector<double> features() const;
    std::vector<int> labels() const;
};

/// label 1 iff |delta| >= threshold.
std::vector<int> make_labels(const DeltaSeries& appliance_deltas, double threshold);

/// Pairs (|aggregate delta|, label). Timestamps of the two inputs must match.
LabeledDataset assemble_dataset(const DeltaSeries& aggregate_deltas, std::span<const int> labels);

/// Contiguous prefix of `training_samples` for training, the rest for test.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, std::size_t training_samples);

/// How augment_positives will rebalance a training set.
struct AugmentationPlan {
    double eta = 0.0;            // N_neg / N_pos
    double sigma = 0.0;          // eta * alpha, the mean multiplicity of a positive
    std::size_t target_positives = 0;  // round-half-up(alpha * N_neg), never below N_pos
    std::size_t extra_copies = 0;
};

AugmentationPlan plan_augmentation(std::size_t n_pos, std::size_t n_neg, double alpha);

/// Duplicates positives until positive:negative is alpha (to the nearest
/// sample). Every positive appears floor(sigma) or ceil(sigma) times in total;
/// the copies land at uniformly random positions. Negatives and the relative
/// order of the original samples are untouched. A training set already at or
/// above alpha is returned unchanged apart from the provenance flags.
LabeledDataset augment_positives(const LabeledDataset& train, double alpha, std::uint64_t seed);

inline constexpr int kThresholdRestarts = 50;

/// Half the smallest gap between adjacent sorted cluster means of a seeded
/// one-dimensional k-means over the readings.
double estimate_threshold(const PowerSeries& appliance_series, int num_states = 2, std::uint64_t seed = 0);

}  // namespace nilm::data
