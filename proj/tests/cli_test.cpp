#include "nilm/cli/commands.hpp"
#include "nilm/eval/metrics.hpp"
#include "nilm/model/checkpoint.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nilm::cli::run;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result call(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Result r;
    r.code = run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Last "wrote <path>" line of a command's output.
fs::path written(const std::string& out) {
    const auto pos = out.rfind("wrote ");
    REQUIRE(pos != std::string::npos);
    auto line = out.substr(pos + 6);
    line.erase(line.find('\n'));
    return line;
}

struct Workspace {
    fs::path root;
    fs::path house;   // synthetic house directory
    fs::path config;

    Workspace() {
        root = fs::temp_directory_path() / ("nilm_cli_" + std::to_string(std::random_device{}()));
        const auto r = call({"synth", "--out", root.string(), "--minutes", "3000", "--training-samples", "1500"});
        REQUIRE(r.code == 0);
        const auto dir = written(r.out);
        house = dir / "house_synth";
        config = dir / "config.json";
    }
    ~Workspace() { fs::remove_all(root); }

    std::vector<std::string> train_args(const std::string& appliance, const std::string& epochs) const {
        return {"train", "--config", config.string(), "--data", house.string(), "--appliance", appliance,
                "--out", root.string(), "--epochs", epochs};
    }
    std::vector<std::string> eval_args(const fs::path& checkpoint) const {
        return {"eval", "--checkpoint", checkpoint.string(), "--config", config.string(),
                "--data", house.string(), "--out", root.string()};
    }
};

nlohmann::json parse_error(const Result& r) {
    const auto j = nlohmann::json::parse(r.err);
    CHECK(j.contains("error"));
    CHECK(j.contains("message"));
    return j;
}

}  // namespace

TEST_CASE("usage errors exit 2 with a json message") {
    auto r = call({});
    CHECK(r.code == 2);
    CHECK(parse_error(r)["error"] == "usage");
    r = call({"train", "--out", "x"});
    CHECK(r.code == 2);
    r = call({"train", "--config", "a", "--data", "b", "--appliance", "c", "--out", "d", "--model", "svm"});
    CHECK(r.code == 2);
    r = call({"train", "--config", "a", "--data", "b", "--appliance", "c", "--out", "d", "--window", "4"});
    CHECK(r.code == 2);
}

TEST_CASE("help exits 0") {
    const auto r = call({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("train") != std::string::npos);
}

TEST_CASE("run id depends only on command and flags") {
    using nilm::cli::run_id;
    const std::map<std::string, std::string> a{{"seed", "1"}, {"x", "y"}};
    CHECK(run_id("train", a) == run_id("train", a));
    CHECK(run_id("train", a) != run_id("eval", a));
    CHECK(run_id("train", a) != run_id("train", {{"seed", "2"}, {"x", "y"}}));
    CHECK(run_id("train", a).rfind("train-", 0) == 0);
}

TEST_CASE("train and eval a synthetic house") {
    Workspace ws;

    SUBCASE("unknown appliance lists the configured ones") {
        const auto r = call(ws.train_args("TV", "1"));
        CHECK(r.code == 1);
        const auto j = parse_error(r);
        CHECK(j["error"] == "invalid-argument");
        const std::string msg = j["message"];
        CHECK(msg.find("REFR, MW, WD") != std::string::npos);
    }

    SUBCASE("dnn round trip") {
        const auto t = call(ws.train_args("REFR", "10"));
        REQUIRE(t.code == 0);
        CHECK(t.out.find("1244 trainable parameters") != std::string::npos);
        const auto ckpt = written(t.out);
        const auto run_dir = ckpt.parent_path();
        CHECK(fs::exists(run_dir / "history.csv"));
        const auto manifest = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
        CHECK(manifest["command"] == "train");
        CHECK(manifest["seed"] == 42);
        CHECK(manifest["run_id"] == run_dir.filename().string());
        const auto c = nilm::model::load_checkpoint(ckpt);
        CHECK(c.history.epoch_loss.size() == 10);
        CHECK(c.experiment.appliance == "REFR");

        const auto e1 = call(ws.eval_args(ckpt));
        REQUIRE(e1.code == 0);
        const auto eval_dir = written(e1.out);
        const auto metrics = slurp(eval_dir / "metrics.csv");
        const auto report = nilm::eval::parse_csv(metrics);
        REQUIRE(report.size() == 1);
        CHECK(report[0].model == "NN");
        CHECK(report[0].counts.total() == 3000 - 1 - 1500);
        CHECK(fs::exists(eval_dir / "table.txt"));
        CHECK(fs::exists(eval_dir / "comparison.csv"));

        // same inputs, same directory, same bytes
        const auto e2 = call(ws.eval_args(ckpt));
        REQUIRE(e2.code == 0);
        CHECK(written(e2.out) == eval_dir);
        CHECK(slurp(eval_dir / "metrics.csv") == metrics);

        auto args = ws.eval_args(ckpt);
        args.push_back("--with-paper-reference");
        const auto e3 = call(args);
        REQUIRE(e3.code == 0);
        CHECK(written(e3.out) != eval_dir);

        const auto rep = call({"report", "--out", ws.root.string(), (eval_dir / "metrics.csv").string()});
        REQUIRE(rep.code == 0);
        CHECK(slurp(written(rep.out) / "report.csv") == metrics);
    }

    SUBCASE("untrained model still reports") {
        const auto t = call(ws.train_args("MW", "0"));
        REQUIRE(t.code == 0);
        const auto e = call(ws.eval_args(written(t.out)));
        REQUIRE(e.code == 0);
        CHECK(fs::exists(written(e.out) / "metrics.csv"));
    }

    SUBCASE("rnn window 3 is labelled RNN_3") {
        auto args = ws.train_args("REFR", "1");
        args.insert(args.end(), {"--model", "rnn", "--window", "3", "--layers", "2", "--hidden", "4"});
        const auto t = call(args);
        REQUIRE(t.code == 0);
        const auto e = call(ws.eval_args(written(t.out)));
        REQUIRE(e.code == 0);
        const auto report = nilm::eval::parse_csv(slurp(written(e.out) / "metrics.csv"));
        REQUIRE(report.size() == 1);
        CHECK(report[0].model == "RNN_3");
    }

    SUBCASE("checkpoint from a different experiment is rejected") {
        const auto t = call(ws.train_args("REFR", "0"));
        REQUIRE(t.code == 0);
        auto cfg = nlohmann::json::parse(slurp(ws.config));
        for (auto& a : cfg["appliances"]) a["threshold_watts"] = 1.0;
        const auto other = ws.root / "other.json";
        std::ofstream(other) << cfg.dump();
        auto args = ws.eval_args(written(t.out));
        args[4] = other.string();
        const auto e = call(args);
        CHECK(e.code == 1);
        CHECK(parse_error(e)["error"] == "invalid-argument");
    }

    SUBCASE("missing checkpoint") {
        const auto e = call(ws.eval_args(ws.root / "nope.txt"));
        CHECK(e.code == 1);
        CHECK(parse_error(e)["error"] == "io");
    }

    SUBCASE("ingest is idempotent") {
        const std::vector<std::string> args{"ingest", "--data", ws.house.string(), "--house", "synth",
                                            "--out", ws.root.string()};
        const auto a = call(args);
        REQUIRE(a.code == 0);
        CHECK(a.out.find("3000 aggregate minutes") != std::string::npos);
        const auto dir = written(a.out);
        const auto labels = slurp(dir / "house_synth" / "labels.dat");
        const auto summary = slurp(dir / "summary.json");
        const auto b = call(args);
        REQUIRE(b.code == 0);
        CHECK(written(b.out) == dir);
        CHECK(slurp(dir / "house_synth" / "labels.dat") == labels);
        CHECK(slurp(dir / "summary.json") == summary);
    }

    SUBCASE("ingest of an empty directory") {
        const auto empty = ws.root / "empty";
        fs::create_directories(empty);
        const auto r = call({"ingest", "--data", empty.string(), "--house", "1", "--out", ws.root.string()});
        CHECK(r.code == 1);
        CHECK(parse_error(r)["error"] == "io");
    }
}
