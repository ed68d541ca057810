#include "nilm/synth/synth.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace nilm::synth {

namespace fs = std::filesystem;

namespace {

double quantize(double watts) { return std::round(watts / kPowerQuantum) * kPowerQuantum; }

std::size_t initial_state(const ApplianceSpec& a) {
    const auto it = std::find(a.levels.begin(), a.levels.end(), 0.0);
    return it == a.levels.end() ? 0 : static_cast<std::size_t>(it - a.levels.begin());
}

}  // namespace

void validate(const SyntheticHouse& spec) {
    if (spec.duration_minutes < 2) throw Error(ErrorKind::InvalidArgument, "synthetic house needs >= 2 minutes");
    if (spec.noise_std < 0.0) throw Error(ErrorKind::InvalidArgument, "noise std must be >= 0");
    if (spec.start % data::kMinute != 0) throw Error(ErrorKind::InvalidArgument, "start must be minute-aligned");
    for (const auto& a : spec.appliances) {
        if (a.levels.size() < 2) {
            throw Error(ErrorKind::InvalidArgument, fmt::format("appliance {}: needs >= 2 levels", a.name));
        }
        if (std::set<double>(a.levels.begin(), a.levels.end()).size() != a.levels.size()) {
            throw Error(ErrorKind::InvalidArgument, fmt::format("appliance {}: levels must be distinct", a.name));
        }
        for (double l : a.levels)
            if (!(l >= 0.0)) throw Error(ErrorKind::InvalidArgument, fmt::format("appliance {}: negative level", a.name));
        if (a.dwell_minutes.size() != a.levels.size()) {
            throw Error(ErrorKind::InvalidArgument, fmt::format("appliance {}: one dwell time per level", a.name));
        }
        for (double d : a.dwell_minutes)
            if (!(d > 0.0)) throw Error(ErrorKind::InvalidArgument, fmt::format("appliance {}: dwell must be > 0", a.name));
        if (!(a.jitter_std >= 0.0)) {
            throw Error(ErrorKind::InvalidArgument, fmt::format("appliance {}: jitter must be >= 0", a.name));
        }
    }
}

double level_threshold(const ApplianceSpec& appliance) {
    std::vector<double> levels = appliance.levels;
    std::sort(levels.begin(), levels.end());
    double gap = levels.back() - levels.front();
    for (std::size_t i = 1; i < levels.size(); ++i) gap = std::min(gap, levels[i] - levels[i - 1]);
    return gap / 2.0;
}

SyntheticRecording generate_house(const SyntheticHouse& spec) {
    validate(spec);
    const std::size_t n = spec.duration_minutes;
    std::mt19937_64 master(spec.seed);

    SyntheticRecording rec;
    std::vector<double> appliance_total(n, 0.0);
    for (const auto& a : spec.appliances) {
        std::mt19937_64 rng(master());
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> jitter(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> other(1, a.levels.size() - 1);

        data::PowerSeries series;
        series.channel_id = a.name;
        series.appliance_name = a.name;
        series.samples.reserve(n);
        std::vector<int> labels(n - 1, 0);
        std::size_t state = initial_state(a);
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0 && unit(rng) < 1.0 / a.dwell_minutes[state]) {
                state = (state + other(rng)) % a.levels.size();
                labels[i - 1] = 1;
            }
            double watts = a.levels[state];
            if (watts > 0.0 && a.jitter_std > 0.0) {
                watts += a.jitter_std * std::clamp(jitter(rng), -3.0, 3.0);
            }
            watts = std::max(0.0, quantize(watts));
            series.samples.push_back({spec.start + static_cast<data::Timestamp>(i) * data::kMinute, watts});
            appliance_total[i] += watts;
        }
        rec.appliances.push_back(std::move(series));
        rec.labels.push_back(std::move(labels));
    }

    std::mt19937_64 noise_rng(master());
    std::normal_distribution<double> noise(0.0, 1.0);
    rec.aggregate.channel_id = "aggregate";
    rec.aggregate.appliance_name = "aggregate";
    rec.aggregate.samples.reserve(n);
    rec.noise.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double nz = spec.noise_std > 0.0 ? quantize(spec.noise_std * noise(noise_rng)) : 0.0;
        nz = std::max(nz, -appliance_total[i]);
        rec.noise.push_back(nz);
        rec.aggregate.samples.push_back(
            {spec.start + static_cast<data::Timestamp>(i) * data::kMinute, appliance_total[i] + nz});
    }
    return rec;
}

SyntheticHouse reference_scenario() {
    SyntheticHouse h;
    h.duration_minutes = 20000;
    h.seed = 20190401;
    h.noise_std = 2.0;
    h.appliances = {
        {"REFR", "refrigerator", {0.0, 150.0}, {18.0, 12.0}, 2.0},
        {"MW", "microwave", {0.0, 900.0}, {600.0, 3.0}, 8.0},
        {"WD", "washer_dryer", {0.0, 1400.0}, {1500.0, 40.0}, 10.0},
    };
    return h;
}

data::ExperimentConfig experiment_config(const SyntheticHouse& spec, std::size_t training_samples, double alpha,
                                         std::uint64_t seed) {
    data::ExperimentConfig cfg;
    cfg.house = "synth";
    cfg.alpha = alpha;
    cfg.seed = seed;
    for (const auto& a : spec.appliances) {
        data::ApplianceExperiment e;
        e.house = cfg.house;
        e.appliance = a.name;
        e.source.labels = {a.redd_label.empty() ? a.name : a.redd_label};
        e.threshold_watts = level_threshold(a);
        e.training_samples = training_samples;
        e.alpha = alpha;
        cfg.appliances.push_back(std::move(e));
    }
    return cfg;
}

void write_redd_house(const fs::path& dir, const SyntheticHouse& spec, const SyntheticRecording& recording) {
    fs::create_directories(dir);
    std::map<int, std::string> labels{{1, "mains"}, {2, "mains"}};
    data::PowerSeries half = recording.aggregate;
    for (auto& s : half.samples) s.watts /= 2.0;
    data::write_redd_channel(dir / "channel_1.dat", half);
    data::write_redd_channel(dir / "channel_2.dat", half);
    for (std::size_t a = 0; a < spec.appliances.size(); ++a) {
        const int idx = static_cast<int>(a) + 3;
        const auto& app = spec.appliances[a];
        labels[idx] = app.redd_label.empty() ? app.name : app.redd_label;
        data::write_redd_channel(dir / fmt::format("channel_{}.dat", idx), recording.appliances[a]);
    }
    data::write_labels(dir / "labels.dat", labels);
}

}  // namespace nilm::synth
