#include "nilm/error.hpp"
#include "nilm/model/checkpoint.hpp"
#include "nilm/model/model.hpp"
#include "nilm/nn/gradcheck.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace nilm;
using namespace nilm::model;
namespace fs = std::filesystem;

namespace {

// Positives at 500 W, negatives at 5 W, with a little spread.
data::LabeledDataset separable(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 2.0);
    data::LabeledDataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i % 5 == 0 ? 1 : 0;
        const double x = std::abs((label ? 500.0 : 5.0) + jitter(rng));
        ds.samples.push_back({x, label, static_cast<data::Timestamp>(60 * i), i});
    }
    ds.recount();
    return ds;
}

DnnConfig quick_dnn(std::size_t epochs) {
    DnnConfig c;
    c.training.epochs = epochs;
    c.training.batch_size = 32;
    c.training.adam.learning_rate = 1e-2;
    return c;
}

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / (name + "_" + std::to_string(std::random_device{}()));
}

}  // namespace

TEST_CASE("build dnn") {
    DnnConfig c;
    const auto m = build_dnn(c, 1);
    CHECK(c.parameter_count() == 1244);
    CHECK(m.params.parameter_count() == 1244);
    CHECK(nn::flatten(build_dnn(c, 8).params) == nn::flatten(build_dnn(c, 8).params));

    DnnConfig tiny;
    tiny.hidden = 1;
    tiny.depth = 2;
    const auto p = dnn_predict(build_dnn(tiny, 2), 3.0);
    CHECK(p.probs[0] + p.probs[1] == doctest::Approx(1.0).epsilon(1e-12));

    DnnConfig bad;
    bad.depth = 1;
    CHECK_THROWS_AS(build_dnn(bad, 0), Error);
    bad = DnnConfig{};
    bad.hidden = 0;
    CHECK_THROWS_AS(build_dnn(bad, 0), Error);
}

TEST_CASE("dnn predict") {
    const auto m = build_dnn(DnnConfig{}, 3);
    const auto a = dnn_predict(m, 120.0);
    const auto b = dnn_predict(m, 120.0);
    CHECK(a.probs == b.probs);
    CHECK(a.probs[0] + a.probs[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(a.label == (a.probs[1] > a.probs[0] ? 1 : 0));
    CHECK_THROWS_AS(dnn_predict(m, -1.0), Error);
}

TEST_CASE("batch prediction matches the single-sample path") {
    const auto m = build_dnn(DnnConfig{}, 4);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 2000.0);
    std::vector<double> xs(3000);
    for (double& x : xs) x = u(rng);
    CHECK(dnn_predict_labels(m, xs) == serial::dnn_predict_labels(m, xs));

    RnnConfig rc;
    rc.window = 3;
    rc.hidden = 6;
    rc.layers = 2;
    const auto r = build_rnn(rc, 5);
    nn::Matrix w(1500, 3);
    for (double& v : w.values()) v = u(rng);
    CHECK(rnn_predict_labels(r, w) == serial::rnn_predict_labels(r, w));
}

TEST_CASE("training separates a clean two-level set") {
    const auto ds = separable(400, 7);
    const auto r = train_dnn(ds, quick_dnn(20), 11);
    REQUIRE(r.history.epoch_loss.size() == 20);
    CHECK(r.history.epoch_loss.front() < r.history.initial_loss);
    CHECK(dnn_predict(r.model, 500.0).label == 1);
    CHECK(dnn_predict(r.model, 5.0).label == 0);
}

TEST_CASE("training edge cases") {
    const auto ds = separable(100, 2);
    const auto zero = train_dnn(ds, quick_dnn(0), 5);
    CHECK(nn::flatten(zero.model.params) == nn::flatten(build_dnn(quick_dnn(0), 5).params));
    CHECK(zero.history.epoch_loss.empty());

    const auto a = train_dnn(ds, quick_dnn(3), 9);
    const auto b = train_dnn(ds, quick_dnn(3), 9);
    CHECK(nn::flatten(a.model.params) == nn::flatten(b.model.params));
    CHECK(a.model.params.norms[0].running_mean == b.model.params.norms[0].running_mean);

    data::LabeledDataset one_class = ds;
    for (auto& s : one_class.samples) s.label = 0;
    one_class.recount();
    try {
        train_dnn(one_class, quick_dnn(1), 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SingleClass);
    }

    // 65 samples with batch 32: the trailing single sample must not reach batch norm alone
    CHECK_NOTHROW(train_dnn(separable(65, 3), quick_dnn(2), 1));
}

TEST_CASE("rnn build, predict and window checks") {
    RnnConfig c;
    const auto m = build_rnn(c, 1);
    CHECK(m.params.parameter_count() == c.parameter_count());
    const std::vector<double> w{10.0, 20.0};
    const auto p = rnn_predict(m, w);
    CHECK(p.probs[0] + p.probs[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rnn_predict(m, w).probs == p.probs);
    CHECK_THROWS_AS(rnn_predict(m, std::vector<double>{1.0, 2.0, 3.0}), Error);
    CHECK_THROWS_AS(rnn_predict(m, std::vector<double>{1.0, -2.0}), Error);

    RnnConfig c3 = c;
    c3.window = 3;
    const auto m3 = build_rnn(c3, 1);
    const auto before = nn::flatten(m.params);
    rnn_predict(m3, std::vector<double>{5.0, 10.0, 20.0});
    CHECK(nn::flatten(m.params) == before);
    CHECK(rnn_predict(m, w).probs == p.probs);

    RnnConfig bad;
    bad.window = 1;
    CHECK_THROWS_AS(build_rnn(bad, 0), Error);
}

TEST_CASE("rnn training on windows") {
    auto ds = separable(300, 4);
    RnnConfig c;
    c.hidden = 6;
    c.layers = 2;
    c.training.epochs = 15;
    c.training.batch_size = 32;
    c.training.adam.learning_rate = 1e-2;
    const auto w = make_windows(ds, ds, 2);
    const auto r = train_rnn(w, ds.labels(), c, 3);
    CHECK(r.history.epoch_loss.front() < r.history.initial_loss);
    CHECK(rnn_predict(r.model, std::vector<double>{5.0, 500.0}).label == 1);
    CHECK(rnn_predict(r.model, std::vector<double>{500.0, 5.0}).label == 0);
}

TEST_CASE("windows look back through contiguous minutes only") {
    data::LabeledDataset full;
    const std::vector<data::Timestamp> t{0, 60, 120, 600, 660};
    for (std::size_t i = 0; i < t.size(); ++i) full.samples.push_back({10.0 * (i + 1), 0, t[i], i});
    full.recount();
    const auto w = make_windows(full, full, 3);
    CHECK(w(0, 0) == 0.0);
    CHECK(w(0, 1) == 0.0);
    CHECK(w(0, 2) == 10.0);
    CHECK(w(2, 0) == 10.0);
    CHECK(w(2, 1) == 20.0);
    CHECK(w(2, 2) == 30.0);
    // minute 600 follows a gap
    CHECK(w(3, 0) == 0.0);
    CHECK(w(3, 1) == 0.0);
    CHECK(w(3, 2) == 40.0);
    CHECK(w(4, 1) == 40.0);
}

TEST_CASE("checkpoint round trip is exact") {
    const auto ds = separable(120, 5);
    const auto r = train_dnn(ds, quick_dnn(3), 2);
    Checkpoint c;
    c.kind = ModelKind::Dnn;
    c.seed = 2;
    c.dnn = r.model;
    c.history = r.history;
    c.experiment = {"2", "MW", 920.0, 2000, 0.125};
    const auto path = temp_file("ckpt");
    save_checkpoint(c, path);
    const auto back = load_checkpoint(path);
    REQUIRE(back.dnn.has_value());
    CHECK(back.experiment == c.experiment);
    CHECK(back.history.epoch_loss == c.history.epoch_loss);
    CHECK(nn::flatten(back.dnn->params) == nn::flatten(c.dnn->params));
    for (double x : {0.0, 3.3, 5.0, 77.7, 500.0, 1234.5}) {
        CHECK(dnn_predict(*back.dnn, x).probs == dnn_predict(*c.dnn, x).probs);
    }
    CHECK(to_string(back) == to_string(c));
    fs::remove(path);

    RnnConfig rc;
    rc.window = 3;
    rc.hidden = 4;
    rc.layers = 2;
    Checkpoint rk;
    rk.kind = ModelKind::Rnn;
    rk.rnn = build_rnn(rc, 7);
    rk.experiment = {"6", "AC", 862.0, 2000, 0.125};
    const auto rback = parse_checkpoint(to_string(rk));
    REQUIRE(rback.rnn.has_value());
    CHECK(rback.rnn->config.window == 3);
    const std::vector<double> w{1.0, 200.0, 3.0};
    CHECK(rnn_predict(*rback.rnn, w).probs == rnn_predict(*rk.rnn, w).probs);
}

TEST_CASE("checkpoint corruption") {
    Checkpoint c;
    c.dnn = build_dnn(DnnConfig{}, 1);
    const std::string text = to_string(c);

    try {
        parse_checkpoint(text.substr(0, text.size() / 2));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CorruptFile);
    }

    std::string bumped = text;
    bumped.replace(0, bumped.find('\n'), "nilm-checkpoint 2");
    try {
        parse_checkpoint(bumped);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::VersionMismatch);
    }

    std::string reshaped = text;
    const auto pos = reshaped.find("block dense.0.weight 18 1");
    REQUIRE(pos != std::string::npos);
    reshaped.replace(pos, 25, "block dense.0.weight 17 1");
    CHECK_THROWS_AS(parse_checkpoint(reshaped), Error);

    CHECK_THROWS_AS(parse_checkpoint(""), Error);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/ckpt"), Error);
}
