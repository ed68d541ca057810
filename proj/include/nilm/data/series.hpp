#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace nilm::data {

using Timestamp = std::int64_t;  // seconds since the Unix epoch

inline constexpr Timestamp kMinute = 60;

struct PowerSample {
    Timestamp time = 0;
    double watts = 0.0;

    bool operator==(const PowerSample&) const = default;
};

/// Readings of one channel (or a sum of channels). Timestamps strictly
/// increase; power is finite and non-negative.
struct PowerSeries {
    std::string channel_id;
    std::string appliance_name;
    std::vector<PowerSample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

struct DeltaSample {
    Timestamp time = 0;  // time of the earlier reading t_i
    double watts = 0.0;  // P_{i+1} - P_i

    bool operator==(const DeltaSample&) const = default;
};

struct DeltaSeries {
    std::vector<DeltaSample> deltas;

    std::size_t size() const noexcept { return deltas.size(); }
};

/// Throws if timestamps are not strictly increasing or power is negative or
/// non-finite.
void validate(const PowerSeries& series);

/// Reads "unix_timestamp watts" lines. Repeated timestamps keep the last
/// value; timestamps that go backwards are an error.
PowerSeries parse_redd_channel(const std::filesystem::path& path);
PowerSeries parse_redd_channel_text(std::string_view text, std::string channel_id = {});

/// Reads labels.dat ("channel_index appliance_name" per line).
std::map<int, std::string> parse_labels(const std::filesystem::path& path);
std::map<int, std::string> parse_labels_text(std::string_view text);

/// Writes the same two-column layout parse_redd_channel reads. Values are
/// written with enough digits to round-trip.
void write_redd_channel(const std::filesystem::path& path, const PowerSeries& series);
void write_labels(const std::filesystem::path& path, const std::map<int, std::string>& labels);

inline constexpr int kDefaultMaxGapMinutes = 3;

/// Epoch-aligned one-minute buckets holding the mean of the raw samples in
/// each bucket. An empty run of at most `max_gap_minutes` buckets is filled by
/// carrying the previous value forward; longer runs stay missing and split the
/// series into segments.
PowerSeries resample_1min(const PowerSeries& series, int max_gap_minutes = kDefaultMaxGapMinutes);

/// Maximal runs of samples spaced exactly `step` seconds apart, as
/// [begin, end) index pairs.
std::vector<std::pair<std::size_t, std::size_t>> segments(const PowerSeries& series, Timestamp step = kMinute);

/// P_{i+1} - P_i for each consecutive pair spaced exactly `step` apart; pairs
/// across a segment boundary are skipped.
DeltaSeries delta(const PowerSeries& series, Timestamp step = kMinute);

/// Pointwise sum over the timestamps present in every input.
PowerSeries sum_aligned(std::span<const PowerSeries> parts, std::string channel_id = {},
                        std::string appliance_name = {});

/// Restricts both series to their common timestamps.
void intersect_timestamps(PowerSeries& a, PowerSeries& b);

}  // namespace nilm::data
