#include "nilm/eval/metrics.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace nilm::eval {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <class T>
T parse_field(const std::string& text, std::size_t line_no) {
    T value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw Error(ErrorKind::Parse, fmt::format("line {}: bad numeric field '{}'", line_no, text));
    }
    return value;
}

template <class Fn>
void for_each_data_line(const std::string& text, Fn&& fn) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        fn(line_no, split_fields(line));
    }
}

std::string undefined_flags(const Metrics& m) {
    std::string s;
    if (m.precision_undefined) s += "P";
    if (m.recall_undefined) s += "R";
    if (m.f_measure_undefined) s += "F";
    return s;
}

std::string row_label(const ReportEntry& e) {
    return e.reference ? fmt::format("F_M({})*", e.model) : fmt::format("F_M({})", e.model);
}

// Houses, then appliances/models in first-appearance order.
template <class Key>
std::vector<std::string> ordered_unique(const MetricsReport& report, const std::string& house, Key key) {
    std::vector<std::string> out;
    for (const auto& e : report) {
        if (e.house != house) continue;
        const std::string k = key(e);
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    return out;
}

std::vector<std::string> houses_of(const MetricsReport& report) {
    std::vector<std::string> out;
    for (const auto& e : report)
        if (std::find(out.begin(), out.end(), e.house) == out.end()) out.push_back(e.house);
    return out;
}

const ReportEntry* find_cell(const MetricsReport& report, const std::string& house, const std::string& row,
                             const std::string& appliance) {
    for (const auto& e : report)
        if (e.house == house && row_label(e) == row && e.appliance == appliance) return &e;
    return nullptr;
}

}  // namespace

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> truth) {
    if (predictions.size() != truth.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("{} predictions vs {} truth labels", predictions.size(), truth.size()));
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predictions[i] != 0;
        const bool t = truth[i] != 0;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

Metrics metrics(const ConfusionCounts& c) {
    Metrics m;
    const double tp = static_cast<double>(c.tp);
    if (c.tp + c.fp == 0) m.precision_undefined = true;
    else m.precision = tp / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn == 0) m.recall_undefined = true;
    else m.recall = tp / static_cast<double>(c.tp + c.fn);
    if (m.precision + m.recall == 0.0) m.f_measure_undefined = true;
    else m.f_measure = 2.0 * (m.precision * m.recall) / (m.precision + m.recall);
    return m;
}

std::string to_csv(const MetricsReport& report) {
    std::string out = "house,appliance,model,tp,fp,fn,tn,precision,recall,f_measure,undefined,source\n";
    for (const auto& e : report) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", e.house, e.appliance, e.model, e.counts.tp,
                           e.counts.fp, e.counts.fn, e.counts.tn, e.scores.precision, e.scores.recall,
                           e.scores.f_measure, undefined_flags(e.scores), e.reference ? "published" : "computed");
    }
    return out;
}

MetricsReport parse_csv(const std::string& text) {
    MetricsReport report;
    for_each_data_line(text, [&](std::size_t line_no, const std::vector<std::string>& f) {
        if (f.size() != 12) throw Error(ErrorKind::Parse, fmt::format("line {}: expected 12 fields", line_no));
        ReportEntry e;
        e.house = f[0];
        e.appliance = f[1];
        e.model = f[2];
        e.counts = {parse_field<std::size_t>(f[3], line_no), parse_field<std::size_t>(f[4], line_no),
                    parse_field<std::size_t>(f[5], line_no), parse_field<std::size_t>(f[6], line_no)};
        e.scores.precision = parse_field<double>(f[7], line_no);
        e.scores.recall = parse_field<double>(f[8], line_no);
        e.scores.f_measure = parse_field<double>(f[9], line_no);
        e.scores.precision_undefined = f[10].find('P') != std::string::npos;
        e.scores.recall_undefined = f[10].find('R') != std::string::npos;
        e.scores.f_measure_undefined = f[10].find('F') != std::string::npos;
        e.reference = f[11] == "published";
        report.push_back(std::move(e));
    });
    return report;
}

std::string comparison_table(const MetricsReport& report) {
    std::string out;
    bool any_reference = false;
    for (const auto& house : houses_of(report)) {
        const auto appliances = ordered_unique(report, house, [](const ReportEntry& e) { return e.appliance; });
        const auto rows = ordered_unique(report, house, [](const ReportEntry& e) { return row_label(e); });
        std::size_t label_width = 9;  // "Appliance"
        for (const auto& r : rows) label_width = std::max(label_width, r.size());
        std::size_t cell_width = 4;
        for (const auto& a : appliances) cell_width = std::max(cell_width, a.size());

        out += fmt::format("House {}\n", house);
        out += fmt::format("{:<{}}", "Appliance", label_width);
        for (const auto& a : appliances) out += fmt::format("  {:>{}}", a, cell_width);
        out += "\n";
        for (const auto& r : rows) {
            out += fmt::format("{:<{}}", r, label_width);
            for (const auto& a : appliances) {
                const auto* cell = find_cell(report, house, r, a);
                if (cell && cell->reference) any_reference = true;
                const std::string text = cell ? fmt::format("{:.2f}", cell->scores.f_measure) : "-";
                out += fmt::format("  {:>{}}", text, cell_width);
            }
            out += "\n";
        }
        out += "\n";
    }
    if (any_reference) out += "* published value transcribed from the literature, not computed by this run\n";
    return out;
}

std::string comparison_csv(const MetricsReport& report) {
    std::string out;
    for (const auto& house : houses_of(report)) {
        const auto appliances = ordered_unique(report, house, [](const ReportEntry& e) { return e.appliance; });
        const auto rows = ordered_unique(report, house, [](const ReportEntry& e) { return row_label(e); });
        out += "house,model";
        for (const auto& a : appliances) out += "," + a;
        out += "\n";
        for (const auto& r : rows) {
            out += house + "," + r;
            for (const auto& a : appliances) {
                const auto* cell = find_cell(report, house, r, a);
                out += cell ? fmt::format(",{:.4f}", cell->scores.f_measure) : ",";
            }
            out += "\n";
        }
    }
    return out;
}

MetricsReport parse_reference(const std::string& text) {
    MetricsReport report;
    for_each_data_line(text, [&](std::size_t line_no, const std::vector<std::string>& f) {
        if (f.size() != 4) throw Error(ErrorKind::Parse, fmt::format("reference line {}: expected 4 fields", line_no));
        ReportEntry e;
        e.house = f[0];
        e.appliance = f[1];
        e.model = f[2];
        e.scores.f_measure = parse_field<double>(f[3], line_no);
        e.reference = true;
        report.push_back(std::move(e));
    });
    return report;
}

MetricsReport load_reference(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open reference table {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_reference(ss.str());
}

MetricsReport reference_rows_for(const MetricsReport& report, const MetricsReport& reference,
                                 const std::vector<std::string>& methods) {
    const auto houses = houses_of(report);
    MetricsReport out;
    for (const auto& r : reference) {
        if (std::find(houses.begin(), houses.end(), r.house) == houses.end()) continue;
        if (!methods.empty() && std::find(methods.begin(), methods.end(), r.model) == methods.end()) continue;
        out.push_back(r);
    }
    return out;
}

}  // namespace nilm::eval
