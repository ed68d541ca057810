#include "nilm/cli/commands.hpp"

#include "nilm/cli/pipeline.hpp"
#include "nilm/data/experiment.hpp"
#include "nilm/error.hpp"
#include "nilm/eval/metrics.hpp"
#include "nilm/model/checkpoint.hpp"
#include "nilm/synth/synth.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>

#ifndef NILM_DEFAULT_REFERENCE
#define NILM_DEFAULT_REFERENCE "data/paper_reference.csv"
#endif

namespace nilm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Sample counts of the one-minute aggregate reported for the REDD houses.
const std::map<std::string, std::size_t> kPublishedTotals{{"1", 25946}, {"2", 19856}, {"6", 17605}};
constexpr double kIngestTolerance = 0.02;

struct Options {
    std::string config;
    std::string data;
    std::string out;
    std::string house;
    std::optional<std::uint64_t> seed;

    // train
    std::string appliance;
    std::string model = "dnn";
    std::size_t window = 2;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> hidden;
    std::optional<std::size_t> depth;
    std::optional<std::size_t> layers;
    std::optional<double> alpha;
    std::optional<double> input_scale;
    std::optional<double> learning_rate;

    // eval / report
    std::string checkpoint;
    bool with_reference = false;
    std::string reference;
    std::vector<std::string> inputs;

    // ingest / synth
    int max_gap = data::kDefaultMaxGapMinutes;
    std::size_t minutes = 0;
    std::optional<double> noise;
    std::size_t training_samples = 8000;
};

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
    f << text;
    if (!f) throw Error(ErrorKind::Io, fmt::format("failed writing {}", path.string()));
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct Run {
    std::string command;
    std::map<std::string, std::string> flags;
    std::vector<std::string> argv;
    fs::path dir;

    void write_manifest(const Options& o) const {
        json j;
        j["run_id"] = dir.filename().string();
        j["command"] = command;
        j["config"] = o.config;
        j["dataset"] = o.data;
        j["output_dir"] = o.out;
        j["seed"] = o.seed ? json(*o.seed) : json(nullptr);
        j["flags"] = flags;
        j["argv"] = argv;
        j["started_at"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", std::chrono::floor<std::chrono::seconds>(
                                                                   std::chrono::system_clock::now()));
        write_file(dir / "manifest.json", j.dump(2) + "\n");
    }
};

Run start_run(const std::string& command, const Options& o, const std::map<std::string, std::string>& flags,
              const std::vector<std::string>& argv) {
    if (o.out.empty()) throw Error(ErrorKind::InvalidArgument, "--out is required");
    Run r{command, flags, argv, fs::path(o.out) / run_id(command, flags)};
    fs::create_directories(r.dir);
    return r;
}

template <class T>
void put(std::map<std::string, std::string>& m, const std::string& key, const std::optional<T>& v) {
    if (v) m[key] = fmt::format("{}", *v);
}

std::string format_history(const model::TrainingHistory& h) {
    std::string s = "epoch,loss\n";
    s += fmt::format("0,{}\n", h.initial_loss);
    for (std::size_t i = 0; i < h.epoch_loss.size(); ++i) s += fmt::format("{},{}\n", i + 1, h.epoch_loss[i]);
    return s;
}

void write_report(const fs::path& dir, const std::string& csv_name, const eval::MetricsReport& computed,
                  const eval::MetricsReport& table_rows) {
    write_file(dir / csv_name, eval::to_csv(computed));
    write_file(dir / "table.txt", eval::comparison_table(table_rows));
    write_file(dir / "comparison.csv", eval::comparison_csv(table_rows));
}

eval::MetricsReport with_reference(const eval::MetricsReport& report, const Options& o) {
    if (!o.with_reference) return report;
    const fs::path path = o.reference.empty() ? default_reference_path() : fs::path(o.reference);
    const auto reference = eval::load_reference(path);
    auto rows = report;
    for (auto& r : eval::reference_rows_for(report, reference)) {
        // skip published rows for appliances this report does not cover
        const bool covered = std::any_of(report.begin(), report.end(), [&](const eval::ReportEntry& e) {
            return e.house == r.house && e.appliance == r.appliance;
        });
        if (covered) rows.push_back(std::move(r));
    }
    return rows;
}

// ---- commands ---------------------------------------------------------------

int cmd_ingest(const Options& o0, const std::vector<std::string>& argv, std::ostream& out) {
    Options o = o0;
    data::ChannelSelector mains{{}, {"mains"}};
    if (!o.config.empty()) {
        const auto cfg = data::load_experiment_config(o.config);
        if (o.house.empty()) o.house = cfg.house;
        o.max_gap = cfg.max_gap_minutes;
        mains = cfg.mains;
    }
    if (o.house.empty()) throw Error(ErrorKind::InvalidArgument, "--house (or --config) is required");
    if (!fs::is_directory(o.data)) throw Error(ErrorKind::Io, fmt::format("{} is not a directory", o.data));
    const fs::path dir = data::resolve_house_dir(o.data, o.house);
    const auto house = data::load_house(dir, {}, o.max_gap);

    std::map<std::string, std::string> flags{{"data", fs::absolute(o.data).lexically_normal().string()},
                                             {"house", o.house},
                                             {"max_gap", std::to_string(o.max_gap)}};
    const Run run = start_run("ingest", o, flags, argv);
    const fs::path house_out = run.dir / fmt::format("house_{}", o.house);
    fs::create_directories(house_out);
    data::write_labels(house_out / "labels.dat", house.labels);
    json summary;
    summary["house"] = o.house;
    summary["channels"] = json::object();
    for (const auto& [idx, series] : house.channels) {
        data::write_redd_channel(house_out / fmt::format("channel_{}.dat", idx), series);
        summary["channels"][std::to_string(idx)] = {{"label", house.labels.at(idx)},
                                                   {"minutes", series.size()},
                                                   {"segments", data::segments(series).size()}};
        out << fmt::format("channel {:>2} {:<18} {:>7} minutes\n", idx, house.labels.at(idx), series.size());
    }
    const auto agg = data::aggregate_signal(house, mains);
    summary["aggregate_minutes"] = agg.size();
    summary["aggregate_segments"] = data::segments(agg).size();
    out << fmt::format("house {}: {} aggregate minutes in {} segments\n", o.house, agg.size(),
                       data::segments(agg).size());
    if (const auto it = kPublishedTotals.find(o.house); it != kPublishedTotals.end()) {
        const double diff = (static_cast<double>(agg.size()) - static_cast<double>(it->second)) /
                            static_cast<double>(it->second);
        const bool within = std::abs(diff) <= kIngestTolerance;
        summary["published_total"] = it->second;
        summary["relative_difference"] = diff;
        summary["within_tolerance"] = within;
        out << fmt::format("published total {}: difference {:+.2f}% ({} the {:.0f}% tolerance)\n", it->second,
                           100.0 * diff, within ? "within" : "outside", 100.0 * kIngestTolerance);
    }
    write_file(run.dir / "summary.json", summary.dump(2) + "\n");
    run.write_manifest(o);
    out << "wrote " << run.dir.string() << "\n";
    return 0;
}

int cmd_synth(const Options& o0, const std::vector<std::string>& argv, std::ostream& out) {
    Options o = o0;
    auto spec = synth::reference_scenario();
    if (o.seed) spec.seed = *o.seed;
    if (o.minutes) spec.duration_minutes = o.minutes;
    if (o.noise) spec.noise_std = *o.noise;
    const auto rec = synth::generate_house(spec);

    std::map<std::string, std::string> flags{{"seed", std::to_string(spec.seed)},
                                             {"minutes", std::to_string(spec.duration_minutes)},
                                             {"noise", fmt::format("{}", spec.noise_std)},
                                             {"training_samples", std::to_string(o.training_samples)}};
    if (!o.seed) o.seed = spec.seed;
    const Run run = start_run("synth", o, flags, argv);
    const auto cfg = synth::experiment_config(spec, o.training_samples);
    synth::write_redd_house(run.dir / fmt::format("house_{}", cfg.house), spec, rec);
    write_file(run.dir / "config.json", data::to_json(cfg));
    std::string truth = "appliance,positives,minutes\n";
    for (std::size_t a = 0; a < spec.appliances.size(); ++a) {
        std::size_t pos = 0;
        for (int l : rec.labels[a]) pos += static_cast<std::size_t>(l);
        truth += fmt::format("{},{},{}\n", spec.appliances[a].name, pos, rec.labels[a].size());
        out << fmt::format("{:<5} {:>5} state changes over {} minutes\n", spec.appliances[a].name, pos,
                           spec.duration_minutes);
    }
    write_file(run.dir / "ground_truth.csv", truth);
    run.write_manifest(o);
    out << "wrote " << run.dir.string() << "\n";
    return 0;
}

int cmd_train(const Options& o0, const std::vector<std::string>& argv, std::ostream& out) {
    Options o = o0;
    const auto cfg = data::load_experiment_config(o.config);
    if (!o.house.empty() && o.house != cfg.house) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("--house {} does not match the config's house {}", o.house, cfg.house));
    }
    auto experiment = cfg.appliance(o.appliance);
    if (o.alpha) experiment.alpha = *o.alpha;
    const std::uint64_t seed = o.seed.value_or(cfg.seed);
    o.seed = seed;

    ModelChoice choice;
    choice.kind = model::model_kind_from_string(o.model);
    auto apply = [&](model::TrainingConfig& t) {
        if (o.epochs) t.epochs = *o.epochs;
        if (o.batch_size) t.batch_size = *o.batch_size;
        if (o.input_scale) t.input_scale = *o.input_scale;
        if (o.learning_rate) t.adam.learning_rate = *o.learning_rate;
    };
    apply(choice.dnn.training);
    apply(choice.rnn.training);
    if (o.hidden) choice.dnn.hidden = choice.rnn.hidden = *o.hidden;
    if (o.depth) choice.dnn.depth = *o.depth;
    if (o.layers) choice.rnn.layers = *o.layers;
    choice.rnn.window = o.window;
    if (choice.kind == model::ModelKind::Dnn) choice.dnn.validate();
    else choice.rnn.validate();

    std::map<std::string, std::string> flags{{"config", fs::absolute(o.config).lexically_normal().string()},
                                             {"data", fs::absolute(o.data).lexically_normal().string()},
                                             {"appliance", o.appliance},
                                             {"model", o.model},
                                             {"seed", std::to_string(seed)}};
    if (choice.kind == model::ModelKind::Rnn) flags["window"] = std::to_string(o.window);
    put(flags, "epochs", o.epochs);
    put(flags, "batch_size", o.batch_size);
    put(flags, "hidden", o.hidden);
    put(flags, "depth", o.depth);
    put(flags, "layers", o.layers);
    put(flags, "alpha", o.alpha);
    put(flags, "input_scale", o.input_scale);
    put(flags, "learning_rate", o.learning_rate);

    auto full = data::load_experiment_dataset(o.data, cfg, experiment);
    const auto prepared = prepare(std::move(full), experiment, seed);
    const std::size_t params = choice.kind == model::ModelKind::Dnn ? choice.dnn.parameter_count()
                                                                    : choice.rnn.parameter_count();
    out << fmt::format("house {} {}: {} samples, train {} ({} positive), augmented to {} ({} positive), test {}\n",
                       cfg.house, experiment.appliance, prepared.full.size(), prepared.train.size(),
                       prepared.train.n_pos, prepared.augmented.size(), prepared.augmented.n_pos,
                       prepared.test.size());
    out << fmt::format("model {}: {} trainable parameters\n", o.model, params);

    const auto checkpoint = train_experiment(prepared, experiment, choice, seed);
    const Run run = start_run("train", o, flags, argv);
    model::save_checkpoint(checkpoint, run.dir / "checkpoint.txt");
    write_file(run.dir / "history.csv", format_history(checkpoint.history));
    run.write_manifest(o);
    out << fmt::format("loss {:.6f} -> {:.6f} over {} epochs\n", checkpoint.history.initial_loss,
                       checkpoint.history.epoch_loss.empty() ? checkpoint.history.initial_loss
                                                             : checkpoint.history.epoch_loss.back(),
                       checkpoint.history.epoch_loss.size());
    out << "wrote " << (run.dir / "checkpoint.txt").string() << "\n";
    return 0;
}

int cmd_eval(const Options& o0, const std::vector<std::string>& argv, std::ostream& out) {
    Options o = o0;
    const auto checkpoint = model::load_checkpoint(o.checkpoint);
    const auto cfg = data::load_experiment_config(o.config);
    const auto& experiment = cfg.appliance(checkpoint.experiment.appliance);
    check_matches(checkpoint, experiment);
    o.seed = checkpoint.seed;

    auto full = data::load_experiment_dataset(o.data, cfg, experiment);
    const auto prepared = prepare_test(std::move(full), experiment);
    const eval::MetricsReport report{evaluate(checkpoint, prepared)};
    const auto rows = with_reference(report, o);

    std::map<std::string, std::string> flags{
        {"checkpoint", fs::absolute(o.checkpoint).lexically_normal().string()},
        {"config", fs::absolute(o.config).lexically_normal().string()},
        {"data", fs::absolute(o.data).lexically_normal().string()},
        {"with_paper_reference", o.with_reference ? "1" : "0"}};
    const Run run = start_run("eval", o, flags, argv);
    write_report(run.dir, "metrics.csv", report, rows);
    run.write_manifest(o);
    const auto& e = report.front();
    out << fmt::format("{} {} {}: TP {} FP {} FN {} TN {}  PR {:.4f} RE {:.4f} F_M {:.4f}\n", e.house, e.appliance,
                       e.model, e.counts.tp, e.counts.fp, e.counts.fn, e.counts.tn, e.scores.precision,
                       e.scores.recall, e.scores.f_measure);
    out << eval::comparison_table(rows);
    out << "wrote " << run.dir.string() << "\n";
    return 0;
}

int cmd_report(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
    eval::MetricsReport report;
    std::map<std::string, std::string> flags{{"with_paper_reference", o.with_reference ? "1" : "0"}};
    for (std::size_t i = 0; i < o.inputs.size(); ++i) {
        const auto part = eval::parse_csv(read_file(o.inputs[i]));
        report.insert(report.end(), part.begin(), part.end());
        flags[fmt::format("input{}", i)] = fs::absolute(o.inputs[i]).lexically_normal().string();
    }
    if (report.empty()) throw Error(ErrorKind::InvalidArgument, "no metrics rows in the given files");
    const auto rows = with_reference(report, o);
    const Run run = start_run("report", o, flags, argv);
    write_report(run.dir, "report.csv", report, rows);
    run.write_manifest(o);
    out << eval::comparison_table(rows);
    out << "wrote " << run.dir.string() << "\n";
    return 0;
}

void emit_error(std::ostream& err, std::string_view kind, std::string_view message) {
    err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

std::string run_id(std::string_view command, const std::map<std::string, std::string>& flags) {
    std::string canonical(command);
    for (const auto& [k, v] : flags) canonical += fmt::format("\n{}={}", k, v);
    return fmt::format("{}-{:016x}", command, fnv1a(canonical));
}

fs::path default_reference_path() { return NILM_DEFAULT_REFERENCE; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Appliance state-change detection from an aggregate power meter", "nilm"};
    app.require_subcommand(1);

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config (JSON)");
        sub->add_option("--seed", o.seed, "seed for every random choice");
        sub->add_option("--out", o.out, "output directory")->required();
    };

    auto* ingest = app.add_subcommand("ingest", "resample a REDD house to one minute and report sample counts");
    common(ingest);
    ingest->add_option("--data", o.data, "REDD root or house directory")->required();
    ingest->add_option("--house", o.house, "house number");
    ingest->add_option("--max-gap", o.max_gap, "longest gap (minutes) filled by carrying forward");

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic house in REDD layout");
    common(synth_cmd);
    synth_cmd->add_option("--minutes", o.minutes, "duration in minutes");
    synth_cmd->add_option("--noise", o.noise, "baseline noise std-dev in watts");
    synth_cmd->add_option("--training-samples", o.training_samples, "training prefix written to config.json");

    auto* train = app.add_subcommand("train", "label, split, augment and train one appliance");
    common(train);
    train->get_option("--config")->required();
    train->add_option("--data", o.data, "REDD root or house directory")->required();
    train->add_option("--house", o.house, "house number (must match the config)");
    train->add_option("--appliance", o.appliance, "appliance name from the config")->required();
    train->add_option("--model", o.model, "dnn or rnn")->check(CLI::IsMember({"dnn", "rnn"}));
    train->add_option("--window", o.window, "RNN window length")->check(CLI::IsMember({2, 3}));
    train->add_option("--epochs", o.epochs);
    train->add_option("--batch-size", o.batch_size);
    train->add_option("--hidden", o.hidden, "hidden width H");
    train->add_option("--depth", o.depth, "DNN depth D");
    train->add_option("--layers", o.layers, "stacked GRU layers");
    train->add_option("--alpha", o.alpha, "positive:negative target ratio");
    train->add_option("--input-scale", o.input_scale, "multiplier applied to |delta P| before the network");
    train->add_option("--learning-rate", o.learning_rate);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on its held-out test split");
    common(eval_cmd);
    eval_cmd->get_option("--config")->required();
    eval_cmd->add_option("--data", o.data, "REDD root or house directory")->required();
    eval_cmd->add_option("--checkpoint", o.checkpoint)->required();
    eval_cmd->add_flag("--with-paper-reference", o.with_reference, "append published F-measures");
    eval_cmd->add_option("--reference", o.reference, "published F-measure table");

    auto* report = app.add_subcommand("report", "merge metrics files into comparison tables");
    report->add_option("--out", o.out, "output directory")->required();
    report->add_option("metrics", o.inputs, "metrics.csv files written by eval")->required();
    report->add_flag("--with-paper-reference", o.with_reference, "append published F-measures");
    report->add_option("--reference", o.reference, "published F-measure table");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "usage", e.what());
        return 2;
    }

    try {
        if (*ingest) return cmd_ingest(o, args, out);
        if (*synth_cmd) return cmd_synth(o, args, out);
        if (*train) return cmd_train(o, args, out);
        if (*eval_cmd) return cmd_eval(o, args, out);
        return cmd_report(o, args, out);
    } catch (const Error& e) {
        emit_error(err, to_string(e.kind()), e.what());
    } catch (const nlohmann::json::exception& e) {
        emit_error(err, "parse", e.what());
    } catch (const fs::filesystem_error& e) {
        emit_error(err, "io", e.what());
    }
    return 1;
}

}  // namespace nilm::cli
