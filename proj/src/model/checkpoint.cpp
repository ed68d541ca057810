#include "nilm/model/checkpoint.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace nilm::model {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMagic = "nilm-checkpoint";

struct Tensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<double> values;
};

void add(std::vector<Tensor>& out, std::string name, nn::Matrix& m) {
    out.push_back({std::move(name), m.rows(), m.cols(), m.values()});
}

void add(std::vector<Tensor>& out, std::string name, std::vector<double>& v) {
    out.push_back({std::move(name), v.size(), 1, std::span<double>(v)});
}

std::vector<Tensor> tensors(nn::DnnParams& p) {
    std::vector<Tensor> out;
    for (std::size_t d = 0; d < p.dense.size(); ++d) {
        add(out, fmt::format("dense.{}.weight", d), p.dense[d].weights);
        add(out, fmt::format("dense.{}.bias", d), p.dense[d].biases);
    }
    for (std::size_t d = 0; d < p.norms.size(); ++d) {
        add(out, fmt::format("norm.{}.gamma", d), p.norms[d].gamma);
        add(out, fmt::format("norm.{}.beta", d), p.norms[d].beta);
        add(out, fmt::format("norm.{}.running_mean", d), p.norms[d].running_mean);
        add(out, fmt::format("norm.{}.running_var", d), p.norms[d].running_var);
    }
    return out;
}

std::vector<Tensor> tensors(nn::RnnParams& p) {
    std::vector<Tensor> out;
    for (std::size_t l = 0; l < p.cells.size(); ++l) {
        auto& c = p.cells[l];
        add(out, fmt::format("gru.{}.update_input", l), c.update_input);
        add(out, fmt::format("gru.{}.update_hidden", l), c.update_hidden);
        add(out, fmt::format("gru.{}.update_bias", l), c.update_bias);
        add(out, fmt::format("gru.{}.reset_input", l), c.reset_input);
        add(out, fmt::format("gru.{}.reset_hidden", l), c.reset_hidden);
        add(out, fmt::format("gru.{}.reset_bias", l), c.reset_bias);
        add(out, fmt::format("gru.{}.candidate_input", l), c.candidate_input);
        add(out, fmt::format("gru.{}.candidate_hidden", l), c.candidate_hidden);
        add(out, fmt::format("gru.{}.candidate_bias", l), c.candidate_bias);
    }
    add(out, "head.weight", p.head.weights);
    add(out, "head.bias", p.head.biases);
    return out;
}

std::string hex(double v) { return fmt::format("{:a}", v); }

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorKind::CorruptFile, "checkpoint: " + what); }

double parse_double(const std::string& token) {
    if (token.empty()) corrupt("empty number");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || errno == ERANGE) corrupt(fmt::format("bad number '{}'", token));
    return v;
}

std::uint64_t parse_uint(const std::string& token) {
    if (token.empty() || token.front() == '-') corrupt(fmt::format("bad count '{}'", token));
    errno = 0;
    char* end = nullptr;
    const auto v = std::strtoull(token.c_str(), &end, 10);
    if (end != token.c_str() + token.size() || errno == ERANGE) corrupt(fmt::format("bad count '{}'", token));
    return v;
}

std::vector<std::string> tokens(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string t;
    while (ss >> t) out.push_back(t);
    return out;
}

void write_training(std::string& out, const TrainingConfig& t) {
    out += fmt::format("batch_size {}\n", t.batch_size);
    out += fmt::format("epochs {}\n", t.epochs);
    out += fmt::format("learning_rate {}\n", hex(t.adam.learning_rate));
    out += fmt::format("beta1 {}\n", hex(t.adam.beta1));
    out += fmt::format("beta2 {}\n", hex(t.adam.beta2));
    out += fmt::format("adam_epsilon {}\n", hex(t.adam.epsilon));
    out += fmt::format("input_scale {}\n", hex(t.input_scale));
}

}  // namespace

std::string to_string(const Checkpoint& c) {
    std::string out = fmt::format("{} {}\n", kMagic, c.version);
    out += fmt::format("model {}\n", to_string(c.kind));
    out += fmt::format("seed {}\n", c.seed);
    std::vector<Tensor> ts;
    if (c.kind == ModelKind::Dnn) {
        if (!c.dnn) throw Error(ErrorKind::InvalidArgument, "checkpoint kind dnn without a DNN model");
        const auto& cfg = c.dnn->config;
        out += fmt::format("depth {}\nhidden {}\norder {}\n", cfg.depth, cfg.hidden, nn::to_string(cfg.order));
        write_training(out, cfg.training);
        if (!c.dnn->params.norms.empty()) {
            out += fmt::format("norm_epsilon {}\n", hex(c.dnn->params.norms.front().epsilon));
            out += fmt::format("norm_decay {}\n", hex(c.dnn->params.norms.front().decay));
        }
        ts = tensors(const_cast<nn::DnnParams&>(c.dnn->params));
    } else {
        if (!c.rnn) throw Error(ErrorKind::InvalidArgument, "checkpoint kind rnn without an RNN model");
        const auto& cfg = c.rnn->config;
        out += fmt::format("window {}\nlayers {}\nhidden {}\n", cfg.window, cfg.layers, cfg.hidden);
        write_training(out, cfg.training);
        ts = tensors(const_cast<nn::RnnParams&>(c.rnn->params));
    }
    out += fmt::format("house {}\n", c.experiment.house);
    out += fmt::format("appliance {}\n", c.experiment.appliance);
    out += fmt::format("threshold_watts {}\n", hex(c.experiment.threshold_watts));
    out += fmt::format("training_samples {}\n", c.experiment.training_samples);
    out += fmt::format("alpha {}\n", hex(c.experiment.alpha));
    out += fmt::format("initial_loss {}\n", hex(c.history.initial_loss));
    out += fmt::format("epoch_loss {}", c.history.epoch_loss.size());
    for (double v : c.history.epoch_loss) out += " " + hex(v);
    out += "\n";
    for (const auto& t : ts) {
        out += fmt::format("block {} {} {}", t.name, t.rows, t.cols);
        for (double v : t.values) out += " " + hex(v);
        out += "\n";
    }
    out += "end\n";
    return out;
}

Checkpoint parse_checkpoint(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) corrupt("empty file");
    const auto head = tokens(line);
    if (head.size() != 2 || head[0] != kMagic) corrupt("missing header line");
    const auto version = static_cast<int>(parse_uint(head[1]));
    if (version != kCheckpointVersion) {
        throw Error(ErrorKind::VersionMismatch,
                    fmt::format("checkpoint format version {} (this build reads version {})", version,
                                kCheckpointVersion));
    }

    std::map<std::string, std::vector<std::string>> fields;
    std::vector<std::vector<std::string>> blocks;
    bool ended = false;
    while (std::getline(in, line)) {
        auto t = tokens(line);
        if (t.empty()) continue;
        if (ended) corrupt("content after end marker");
        if (t[0] == "end") {
            ended = true;
        } else if (t[0] == "block") {
            blocks.push_back(std::move(t));
        } else {
            std::string key = t[0];
            t.erase(t.begin());
            fields[key] = std::move(t);
        }
    }
    if (!ended) corrupt("truncated (no end marker)");

    auto field = [&](const std::string& key) -> const std::vector<std::string>& {
        const auto it = fields.find(key);
        if (it == fields.end() || it->second.empty()) corrupt(fmt::format("missing field '{}'", key));
        return it->second;
    };
    auto one = [&](const std::string& key) -> const std::string& { return field(key).front(); };

    Checkpoint c;
    c.version = version;
    try {
        c.kind = model_kind_from_string(one("model"));
        if (c.kind == ModelKind::Dnn) c.dnn.emplace();
        else c.rnn.emplace();
    } catch (const Error&) {
        corrupt(fmt::format("unknown model '{}'", one("model")));
    }
    c.seed = parse_uint(one("seed"));

    TrainingConfig training;
    training.batch_size = parse_uint(one("batch_size"));
    training.epochs = parse_uint(one("epochs"));
    training.adam.learning_rate = parse_double(one("learning_rate"));
    training.adam.beta1 = parse_double(one("beta1"));
    training.adam.beta2 = parse_double(one("beta2"));
    training.adam.epsilon = parse_double(one("adam_epsilon"));
    training.input_scale = parse_double(one("input_scale"));

    std::vector<Tensor> ts;
    try {
        if (c.kind == ModelKind::Dnn) {
            DnnConfig cfg;
            cfg.depth = parse_uint(one("depth"));
            cfg.hidden = parse_uint(one("hidden"));
            cfg.order = nn::block_order_from_string(one("order"));
            cfg.training = training;
            c.dnn = build_dnn(cfg, 0);
            if (fields.contains("norm_epsilon")) {
                for (auto& n : c.dnn->params.norms) {
                    n.epsilon = parse_double(one("norm_epsilon"));
                    n.decay = parse_double(one("norm_decay"));
                }
            }
            ts = tensors(c.dnn->params);
        } else {
            RnnConfig cfg;
            cfg.window = parse_uint(one("window"));
            cfg.layers = parse_uint(one("layers"));
            cfg.hidden = parse_uint(one("hidden"));
            cfg.training = training;
            c.rnn = build_rnn(cfg, 0);
            ts = tensors(c.rnn->params);
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::CorruptFile) throw;
        corrupt(fmt::format("invalid model config: {}", e.what()));
    }

    c.experiment.house = one("house");
    c.experiment.appliance = one("appliance");
    c.experiment.threshold_watts = parse_double(one("threshold_watts"));
    c.experiment.training_samples = parse_uint(one("training_samples"));
    c.experiment.alpha = parse_double(one("alpha"));
    c.history.initial_loss = parse_double(one("initial_loss"));
    const auto& losses = field("epoch_loss");
    const auto n_losses = parse_uint(losses[0]);
    if (losses.size() != n_losses + 1) corrupt("epoch_loss count does not match its values");
    for (std::size_t i = 1; i < losses.size(); ++i) c.history.epoch_loss.push_back(parse_double(losses[i]));

    if (blocks.size() != ts.size()) {
        corrupt(fmt::format("{} parameter blocks, the configuration needs {}", blocks.size(), ts.size()));
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto& b = blocks[i];
        auto& t = ts[i];
        if (b.size() < 4 || b[1] != t.name) {
            corrupt(fmt::format("block {} should be '{}'", i, t.name));
        }
        const auto rows = parse_uint(b[2]);
        const auto cols = parse_uint(b[3]);
        if (rows != t.rows || cols != t.cols) {
            corrupt(fmt::format("block {} has shape {}x{}, expected {}x{}", t.name, rows, cols, t.rows, t.cols));
        }
        if (b.size() - 4 != t.values.size()) {
            corrupt(fmt::format("block {} has {} values, expected {}", t.name, b.size() - 4, t.values.size()));
        }
        for (std::size_t k = 0; k < t.values.size(); ++k) t.values[k] = parse_double(b[4 + k]);
    }
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
    const std::string text = to_string(checkpoint);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write checkpoint {}", path.string()));
    out << text;
    if (!out) throw Error(ErrorKind::Io, fmt::format("failed writing checkpoint {}", path.string()));
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open checkpoint {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str());
}

}  // namespace nilm::model
