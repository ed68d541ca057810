#include "nilm/data/dataset.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace nilm::data {

void LabeledDataset::recount() {
    n_pos = static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const LabeledSample& s) { return s.label == 1; }));
    n_neg = samples.size() - n_pos;
}

std::vector<double> LabeledDataset::features() const {
    std::vector<double> xs;
    xs.reserve(samples.size());
    for (const auto& s : samples) xs.push_back(s.x);
    return xs;
}

std::vector<int> LabeledDataset::labels() const {
    std::vector<int> ys;
    ys.reserve(samples.size());
    for (const auto& s : samples) ys.push_back(s.label);
    return ys;
}

std::vector<int> make_labels(const DeltaSeries& appliance_deltas, double threshold) {
    if (!(threshold > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("threshold must be positive, got {}", threshold));
    }
    std::vector<int> labels;
    labels.reserve(appliance_deltas.size());
    for (const auto& d : appliance_deltas.deltas) labels.push_back(std::abs(d.watts) >= threshold ? 1 : 0);
    return labels;
}

LabeledDataset assemble_dataset(const DeltaSeries& aggregate_deltas, std::span<const int> labels) {
    if (aggregate_deltas.size() != labels.size()) {
        throw Error(ErrorKind::DimensionMismatch, fmt::format("{} aggregate deltas but {} labels",
                                                              aggregate_deltas.size(), labels.size()));
    }
    LabeledDataset ds;
    ds.samples.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw Error(ErrorKind::InvalidArgument, fmt::format("label {} at {} is not 0 or 1", labels[i], i));
        }
        const auto& d = aggregate_deltas.deltas[i];
        ds.samples.push_back({std::abs(d.watts), labels[i], d.time, i});
    }
    ds.recount();
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, std::size_t training_samples) {
    if (training_samples == 0 || training_samples >= dataset.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("training sample count {} must lie in (0, {})", training_samples, dataset.size()));
    }
    LabeledDataset train, test;
    const auto cut = dataset.samples.begin() + static_cast<std::ptrdiff_t>(training_samples);
    train.samples.assign(dataset.samples.begin(), cut);
    test.samples.assign(cut, dataset.samples.end());
    train.recount();
    test.recount();
    return {std::move(train), std::move(test)};
}

AugmentationPlan plan_augmentation(std::size_t n_pos, std::size_t n_neg, double alpha) {
    if (n_pos == 0) {
        throw Error(ErrorKind::NoPositiveSamples, "no positive samples; cannot train this appliance");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("alpha must be positive, got {}", alpha));
    }
    AugmentationPlan plan;
    plan.eta = static_cast<double>(n_neg) / static_cast<double>(n_pos);
    plan.sigma = plan.eta * alpha;
    const auto target = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n_neg) + 0.5));
    plan.target_positives = std::max(target, n_pos);
    plan.extra_copies = plan.target_positives - n_pos;
    return plan;
}

LabeledDataset augment_positives(const LabeledDataset& train, double alpha, std::uint64_t seed) {
    LabeledDataset counted = train;
    counted.recount();
    const auto plan = plan_augmentation(counted.n_pos, counted.n_neg, alpha);

    LabeledDataset out;
    out.augmented = true;
    out.seed = seed;
    if (plan.extra_copies == 0) {
        out.samples = counted.samples;
        out.recount();
        return out;
    }

    std::mt19937_64 rng(seed);

    std::vector<std::size_t> positives;
    for (std::size_t i = 0; i < counted.samples.size(); ++i)
        if (counted.samples[i].label == 1) positives.push_back(i);

    // Multiplicities floor(T / N_pos) for everyone plus one for T mod N_pos
    // randomly chosen positives; copies = multiplicity - 1.
    const std::size_t base = plan.target_positives / positives.size();
    const std::size_t bumped = plan.target_positives % positives.size();
    std::vector<std::size_t> order(positives.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> copies(positives.size(), base - 1);
    for (std::size_t k = 0; k < bumped; ++k) ++copies[order[k]];

    std::vector<LabeledSample> extras;
    extras.reserve(plan.extra_copies);
    for (std::size_t p = 0; p < positives.size(); ++p)
        for (std::size_t c = 0; c < copies[p]; ++c) extras.push_back(counted.samples[positives[p]]);
    std::shuffle(extras.begin(), extras.end(), rng);

    // Choose which output slots hold the inserted copies.
    const std::size_t total = counted.samples.size() + extras.size();
    std::vector<char> is_extra(total, 0);
    std::fill(is_extra.begin(), is_extra.begin() + static_cast<std::ptrdiff_t>(extras.size()), 1);
    std::shuffle(is_extra.begin(), is_extra.end(), rng);

    out.samples.reserve(total);
    std::size_t next_original = 0;
    std::size_t next_extra = 0;
    for (std::size_t slot = 0; slot < total; ++slot) {
        if (is_extra[slot]) {
            out.samples.push_back(extras[next_extra++]);
        } else {
            out.samples.push_back(counted.samples[next_original++]);
        }
    }
    out.recount();
    return out;
}

double estimate_threshold(const PowerSeries& appliance_series, int num_states, std::uint64_t seed) {
    if (num_states < 2) throw Error(ErrorKind::InvalidArgument, "need at least two states");
    const auto k = static_cast<std::size_t>(num_states);
    if (appliance_series.size() < k) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("series of {} readings cannot form {} states", appliance_series.size(), k));
    }
    std::vector<double> values;
    values.reserve(appliance_series.size());
    for (const auto& s : appliance_series.samples) values.push_back(s.watts);

    std::vector<double> distinct = values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < k) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("channel {} has {} distinct power level(s); set the threshold manually",
                                appliance_series.channel_id, distinct.size()));
    }

    std::mt19937_64 rng(seed);
    std::vector<double> best_means;
    double best_inertia = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> assignment(values.size());

    for (int restart = 0; restart < kThresholdRestarts; ++restart) {
        std::vector<double> means;
        std::sample(distinct.begin(), distinct.end(), std::back_inserter(means), static_cast<std::ptrdiff_t>(k), rng);
        for (int iter = 0; iter < 100; ++iter) {
            std::sort(means.begin(), means.end());
            std::vector<double> sums(k, 0.0);
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < values.size(); ++i) {
                std::size_t best = 0;
                for (std::size_t c = 1; c < k; ++c)
                    if (std::abs(values[i] - means[c]) < std::abs(values[i] - means[best])) best = c;
                assignment[i] = best;
                sums[best] += values[i];
                ++counts[best];
            }
            bool moved = false;
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) continue;  // keep an empty cluster's centre
                const double m = sums[c] / static_cast<double>(counts[c]);
                if (m != means[c]) moved = true;
                means[c] = m;
            }
            if (!moved) break;
        }
        double inertia = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (double m : means) d = std::min(d, std::abs(values[i] - m));
            inertia += d * d;
        }
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_means = means;
        }
    }

    std::sort(best_means.begin(), best_means.end());
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c < best_means.size(); ++c) min_gap = std::min(min_gap, best_means[c] - best_means[c - 1]);
    if (!(min_gap > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "cluster means coincide; set the threshold manually");
    }
    return min_gap / 2.0;
}

}  // namespace nilm::data
