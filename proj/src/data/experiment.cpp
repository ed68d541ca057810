#include "nilm/data/experiment.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace nilm::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ChannelSelector selector_from_json(const json& j) {
    ChannelSelector sel;
    if (j.contains("channels")) sel.channels = j.at("channels").get<std::vector<int>>();
    if (j.contains("labels")) sel.labels = j.at("labels").get<std::vector<std::string>>();
    if (sel.channels.empty() && sel.labels.empty()) {
        throw Error(ErrorKind::Parse, "channel selector needs 'channels' or 'labels'");
    }
    return sel;
}

json selector_to_json(const ChannelSelector& sel) {
    json j = json::object();
    if (!sel.channels.empty()) j["channels"] = sel.channels;
    if (!sel.labels.empty()) j["labels"] = sel.labels;
    return j;
}

std::string house_string(const json& j) {
    return j.is_string() ? j.get<std::string>() : std::to_string(j.get<long long>());
}

}  // namespace

std::vector<int> ChannelSelector::resolve(const std::map<int, std::string>& house_labels) const {
    std::set<int> out(channels.begin(), channels.end());
    for (const auto& wanted : labels) {
        bool found = false;
        for (const auto& [idx, name] : house_labels) {
            if (name == wanted) {
                out.insert(idx);
                found = true;
            }
        }
        if (!found) throw Error(ErrorKind::InvalidArgument, fmt::format("no channel labelled '{}'", wanted));
    }
    return {out.begin(), out.end()};
}

const ApplianceExperiment& ExperimentConfig::appliance(const std::string& name) const {
    for (const auto& a : appliances)
        if (a.appliance == name) return a;
    std::vector<std::string> names;
    for (const auto& a : appliances) names.push_back(a.appliance);
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown appliance '{}' for house {}; configured: {}", name,
                                                        house, fmt::join(names, ", ")));
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        ExperimentConfig cfg;
        cfg.house = house_string(j.at("house"));
        if (j.contains("mains")) cfg.mains = selector_from_json(j.at("mains"));
        cfg.alpha = j.value("alpha", cfg.alpha);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.max_gap_minutes = j.value("max_gap_minutes", cfg.max_gap_minutes);
        for (const auto& a : j.at("appliances")) {
            ApplianceExperiment e;
            e.house = cfg.house;
            e.appliance = a.at("name").get<std::string>();
            e.source = selector_from_json(a);
            e.threshold_watts = a.at("threshold_watts").get<double>();
            e.training_samples = a.at("training_samples").get<std::size_t>();
            e.alpha = a.value("alpha", cfg.alpha);
            if (!(e.threshold_watts > 0.0)) {
                throw Error(ErrorKind::InvalidArgument,
                            fmt::format("appliance {}: threshold must be positive", e.appliance));
            }
            cfg.appliances.push_back(std::move(e));
        }
        return cfg;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, fmt::format("experiment config: {}", e.what()));
    }
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open config {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

std::string to_json(const ExperimentConfig& config) {
    json j;
    j["house"] = config.house;
    j["mains"] = selector_to_json(config.mains);
    j["alpha"] = config.alpha;
    j["seed"] = config.seed;
    j["max_gap_minutes"] = config.max_gap_minutes;
    j["appliances"] = json::array();
    for (const auto& a : config.appliances) {
        json e = selector_to_json(a.source);
        e["name"] = a.appliance;
        e["threshold_watts"] = a.threshold_watts;
        e["training_samples"] = a.training_samples;
        if (a.alpha != config.alpha) e["alpha"] = a.alpha;
        j["appliances"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

fs::path resolve_house_dir(const fs::path& dataset, const std::string& house) {
    if (fs::exists(dataset / "labels.dat")) return dataset;
    const fs::path nested = dataset / fmt::format("house_{}", house);
    if (fs::exists(nested / "labels.dat")) return nested;
    throw Error(ErrorKind::Io, fmt::format("no labels.dat in {} or {}", dataset.string(), nested.string()));
}

HouseRecording load_house(const fs::path& house_dir, const std::vector<int>& wanted, int max_gap_minutes) {
    HouseRecording rec;
    rec.dir = house_dir;
    const fs::path labels_path = house_dir / "labels.dat";
    if (!fs::exists(labels_path)) {
        throw Error(ErrorKind::Io, fmt::format("{} has no labels.dat", house_dir.string()));
    }
    rec.labels = parse_labels(labels_path);
    if (rec.labels.empty()) throw Error(ErrorKind::Io, fmt::format("{}: labels.dat is empty", house_dir.string()));

    std::vector<int> channels = wanted;
    if (channels.empty())
        for (const auto& [idx, _] : rec.labels) channels.push_back(idx);

    std::vector<std::string> missing;
    for (int idx : channels) {
        const fs::path p = house_dir / fmt::format("channel_{}.dat", idx);
        if (!fs::exists(p)) missing.push_back(p.filename().string());
    }
    if (!missing.empty()) {
        throw Error(ErrorKind::Io, fmt::format("{}: missing channel files: {}", house_dir.string(),
                                               fmt::join(missing, ", ")));
    }
    for (int idx : channels) {
        PowerSeries raw = parse_redd_channel(house_dir / fmt::format("channel_{}.dat", idx));
        raw.channel_id = std::to_string(idx);
        const auto it = rec.labels.find(idx);
        raw.appliance_name = it == rec.labels.end() ? "" : it->second;
        if (raw.empty()) {
            throw Error(ErrorKind::Io, fmt::format("{}: channel_{}.dat has no readings", house_dir.string(), idx));
        }
        rec.channels.emplace(idx, resample_1min(raw, max_gap_minutes));
    }
    return rec;
}

namespace {

PowerSeries combine(const HouseRecording& house, const std::vector<int>& ids, std::string id, std::string name) {
    std::vector<PowerSeries> parts;
    for (int idx : ids) {
        const auto it = house.channels.find(idx);
        if (it == house.channels.end()) {
            throw Error(ErrorKind::InvalidArgument, fmt::format("channel {} was not loaded", idx));
        }
        parts.push_back(it->second);
    }
    return sum_aligned(parts, std::move(id), std::move(name));
}

}  // namespace

PowerSeries aggregate_signal(const HouseRecording& house, const ChannelSelector& mains) {
    return combine(house, mains.resolve(house.labels), "aggregate", "aggregate");
}

PowerSeries appliance_signal(const HouseRecording& house, const ApplianceExperiment& experiment) {
    return combine(house, experiment.source.resolve(house.labels), experiment.appliance, experiment.appliance);
}

LabeledDataset build_dataset(const PowerSeries& aggregate, const PowerSeries& appliance, double threshold) {
    PowerSeries agg = aggregate;
    PowerSeries app = appliance;
    intersect_timestamps(agg, app);
    const auto agg_d = delta(agg);
    const auto app_d = delta(app);
    return assemble_dataset(agg_d, make_labels(app_d, threshold));
}

LabeledDataset load_experiment_dataset(const fs::path& dataset, const ExperimentConfig& config,
                                       const ApplianceExperiment& experiment) {
    const fs::path dir = resolve_house_dir(dataset, config.house);
    const auto labels = parse_labels(dir / "labels.dat");
    std::vector<int> wanted = config.mains.resolve(labels);
    for (int idx : experiment.source.resolve(labels)) wanted.push_back(idx);
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
    const auto house = load_house(dir, wanted, config.max_gap_minutes);
    return build_dataset(aggregate_signal(house, config.mains), appliance_signal(house, experiment),
                         experiment.threshold_watts);
}

}  // namespace nilm::data
