#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace nilm::eval {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Precision, recall and their harmonic mean. A zero denominator yields 0 and
/// sets the matching `undefined` flag.
struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f_measure_undefined = false;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> truth);

Metrics metrics(const ConfusionCounts& counts);

struct ReportEntry {
    std::string house;
    std::string appliance;
    std::string model;  // "NN", "RNN_2", "GSP", ...
    ConfusionCounts counts;
    Metrics scores;
    bool reference = false;  // transcribed published value, not computed here
};

using MetricsReport = std::vector<ReportEntry>;

/// Delimited table: one line per entry with counts and scores.
std::string to_csv(const MetricsReport& report);
MetricsReport parse_csv(const std::string& text);

/// Comparison tables in the published layout: one table per house, rows are
/// models and columns are appliances, cells hold F-measure.
std::string comparison_table(const MetricsReport& report);

/// Delimited comparison table (house,model,<appliances...>).
std::string comparison_csv(const MetricsReport& report);

/// Published F-measures shipped with the project (house,appliance,method,f_measure).
MetricsReport load_reference(const std::filesystem::path& path);
MetricsReport parse_reference(const std::string& text);

/// Reference rows for the houses present in `report`, restricted to `methods`
/// (all methods when empty).
MetricsReport reference_rows_for(const MetricsReport& report, const MetricsReport& reference,
                                 const std::vector<std::string>& methods = {});

}  // namespace nilm::eval
