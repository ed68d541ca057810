#include "nilm/data/series.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nilm::data {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Splits "a b" on the first run of whitespace; both halves trimmed.
bool split_two(std::string_view line, std::string_view& first, std::string_view& second) {
    const auto sep = line.find_first_of(" \t");
    if (sep == std::string_view::npos) return false;
    first = trim(line.substr(0, sep));
    second = trim(line.substr(sep));
    return !first.empty() && !second.empty();
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        const auto line = trim(text.substr(0, nl));
        if (!line.empty()) fn(line_no, line);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
}

Timestamp bucket_of(Timestamp t) {
    // floor division so pre-epoch times still land on minute boundaries
    Timestamp q = t / kMinute;
    if (t % kMinute != 0 && t < 0) --q;
    return q * kMinute;
}

}  // namespace

void validate(const PowerSeries& series) {
    for (std::size_t i = 0; i < series.samples.size(); ++i) {
        const auto& s = series.samples[i];
        if (!std::isfinite(s.watts) || s.watts < 0.0) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("channel {}: sample {} has invalid power {}", series.channel_id, i, s.watts));
        }
        if (i > 0 && s.time <= series.samples[i - 1].time) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("channel {}: timestamps not strictly increasing at sample {}",
                                    series.channel_id, i));
        }
    }
}

PowerSeries parse_redd_channel_text(std::string_view text, std::string channel_id) {
    PowerSeries series;
    series.channel_id = std::move(channel_id);
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        std::string_view ts_text, watts_text;
        double ts = 0.0;
        double watts = 0.0;
        if (!split_two(line, ts_text, watts_text) || !parse_number(ts_text, ts) ||
            !parse_number(watts_text, watts) || !std::isfinite(ts)) {
            throw Error(ErrorKind::Parse, fmt::format("channel {}: malformed line {}: '{}'", series.channel_id,
                                                      line_no, line));
        }
        if (!std::isfinite(watts) || watts < 0.0) {
            throw Error(ErrorKind::Parse, fmt::format("channel {}: line {}: power must be finite and >= 0",
                                                      series.channel_id, line_no));
        }
        const auto t = static_cast<Timestamp>(std::floor(ts));
        if (!series.samples.empty()) {
            auto& last = series.samples.back();
            if (t == last.time) {
                last.watts = watts;
                return;
            }
            if (t < last.time) {
                throw Error(ErrorKind::Parse,
                            fmt::format("channel {}: line {}: timestamp {} goes backwards (previous {})",
                                        series.channel_id, line_no, t, last.time));
            }
        }
        series.samples.push_back({t, watts});
    });
    return series;
}

PowerSeries parse_redd_channel(const std::filesystem::path& path) {
    return parse_redd_channel_text(read_file(path), path.stem().string());
}

std::map<int, std::string> parse_labels_text(std::string_view text) {
    std::map<int, std::string> labels;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        std::string_view idx_text, name;
        int idx = 0;
        if (!split_two(line, idx_text, name) || !parse_number(idx_text, idx)) {
            throw Error(ErrorKind::Parse, fmt::format("labels: malformed line {}: '{}'", line_no, line));
        }
        if (!labels.emplace(idx, std::string(name)).second) {
            throw Error(ErrorKind::Parse, fmt::format("labels: channel {} listed twice (line {})", idx, line_no));
        }
    });
    return labels;
}

std::map<int, std::string> parse_labels(const std::filesystem::path& path) {
    return parse_labels_text(read_file(path));
}

void write_redd_channel(const std::filesystem::path& path, const PowerSeries& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
    std::string buf;
    for (const auto& s : series.samples) fmt::format_to(std::back_inserter(buf), "{} {}\n", s.time, s.watts);
    out << buf;
    if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for {}", path.string()));
}

void write_labels(const std::filesystem::path& path, const std::map<int, std::string>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
    for (const auto& [idx, name] : labels) out << idx << ' ' << name << '\n';
}

PowerSeries resample_1min(const PowerSeries& series, int max_gap_minutes) {
    if (series.empty()) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("channel {}: cannot resample an empty series",
                                                            series.channel_id));
    }
    if (max_gap_minutes < 0) throw Error(ErrorKind::InvalidArgument, "max gap must be >= 0 minutes");
    validate(series);

    PowerSeries out;
    out.channel_id = series.channel_id;
    out.appliance_name = series.appliance_name;

    std::size_t i = 0;
    while (i < series.samples.size()) {
        const Timestamp bucket = bucket_of(series.samples[i].time);
        double total = 0.0;
        std::size_t count = 0;
        while (i < series.samples.size() && bucket_of(series.samples[i].time) == bucket) {
            total += series.samples[i].watts;
            ++count;
            ++i;
        }
        const double mean = total / static_cast<double>(count);
        if (!out.samples.empty()) {
            const auto prev = out.samples.back();
            const Timestamp missing = (bucket - prev.time) / kMinute - 1;
            if (missing > 0 && missing <= max_gap_minutes) {
                for (Timestamp m = 1; m <= missing; ++m) out.samples.push_back({prev.time + m * kMinute, prev.watts});
            }
        }
        out.samples.push_back({bucket, mean});
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> segments(const PowerSeries& series, Timestamp step) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= series.samples.size(); ++i) {
        if (i == series.samples.size() || series.samples[i].time - series.samples[i - 1].time != step) {
            out.emplace_back(begin, i);
            begin = i;
        }
    }
    return out;
}

DeltaSeries delta(const PowerSeries& series, Timestamp step) {
    DeltaSeries out;
    if (series.samples.size() < 2) return out;
    out.deltas.reserve(series.samples.size() - 1);
    for (std::size_t i = 0; i + 1 < series.samples.size(); ++i) {
        const auto& a = series.samples[i];
        const auto& b = series.samples[i + 1];
        if (b.time - a.time == step) out.deltas.push_back({a.time, b.watts - a.watts});
    }
    return out;
}

PowerSeries sum_aligned(std::span<const PowerSeries> parts, std::string channel_id, std::string appliance_name) {
    PowerSeries out;
    out.channel_id = std::move(channel_id);
    out.appliance_name = std::move(appliance_name);
    if (parts.empty()) return out;
    std::vector<std::size_t> cursor(parts.size(), 0);
    for (const auto& lead : parts.front().samples) {
        double total = 0.0;
        bool present = true;
        for (std::size_t p = 0; p < parts.size() && present; ++p) {
            const auto& s = parts[p].samples;
            auto& c = cursor[p];
            while (c < s.size() && s[c].time < lead.time) ++c;
            if (c < s.size() && s[c].time == lead.time) {
                total += s[c].watts;
            } else {
                present = false;
            }
        }
        if (present) out.samples.push_back({lead.time, total});
    }
    return out;
}

void intersect_timestamps(PowerSeries& a, PowerSeries& b) {
    std::vector<PowerSample> ka, kb;
    std::size_t j = 0;
    for (const auto& s : a.samples) {
        while (j < b.samples.size() && b.samples[j].time < s.time) ++j;
        if (j < b.samples.size() && b.samples[j].time == s.time) {
            ka.push_back(s);
            kb.push_back(b.samples[j]);
        }
    }
    a.samples = std::move(ka);
    b.samples = std::move(kb);
}

}  // namespace nilm::data
