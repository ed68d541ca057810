#include "nilm/error.hpp"
#include "nilm/nn/adam.hpp"
#include "nilm/nn/gradcheck.hpp"
#include "nilm/nn/gru.hpp"
#include "nilm/nn/network.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nilm;
using namespace nilm::nn;

namespace {

Matrix uniform_column(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(n, 1);
    for (double& v : m.values()) v = u(rng);
    return m;
}

std::vector<int> alternating(std::size_t n) {
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
    return y;
}

}  // namespace

TEST_CASE("parameter count closed form") {
    DnnShape s;
    const auto p = make_dnn(s, 1);
    CHECK(p.parameter_count() == 1244);
    CHECK(dnn_parameter_count(18, 5) == 3 * 324 + 15 * 18 + 2);
    for (std::size_t h = 1; h <= 24; h += 5) {
        for (std::size_t d = 2; d <= 6; ++d) {
            DnnShape t;
            t.hidden = h;
            t.depth = d;
            std::size_t counted = 0;
            for (const auto& b : parameter_blocks(make_dnn(t, 0))) counted += b.values.size();
            CHECK(counted == dnn_parameter_count(h, d));
        }
    }
}

TEST_CASE("initialization") {
    DnnShape s;
    const auto a = make_dnn(s, 77);
    const auto b = make_dnn(s, 77);
    const auto c = make_dnn(s, 78);
    CHECK(a.dense[0].weights == b.dense[0].weights);
    CHECK_FALSE(a.dense[0].weights == c.dense[0].weights);
    const double bound = std::sqrt(6.0 / (18 + 18));
    for (double w : a.dense[1].weights.values()) CHECK(std::abs(w) <= bound);
    for (double v : a.dense[1].biases) CHECK(v == 0.0);
    for (double g : a.norms[0].gamma) CHECK(g == 1.0);
    for (double v : a.norms[0].running_var) CHECK(v == 1.0);
}

TEST_CASE("minimal network gives a probability pair") {
    DnnShape s;
    s.hidden = 1;
    s.depth = 2;
    const auto p = make_dnn(s, 3);
    const auto t = dnn_forward(p, Matrix(1, 1, {0.4}), Mode::Infer);
    CHECK(t.depth() == 2);
    CHECK(t.probs(0, 0) + t.probs(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("trace depth equals network depth") {
    DnnShape s;
    std::mt19937_64 rng(2);
    const auto t = dnn_forward(make_dnn(s, 1), uniform_column(4, rng, 0, 2), Mode::Train);
    CHECK(t.depth() == 5);
    CHECK(t.mode == Mode::Train);
}

TEST_CASE("backward needs a train trace") {
    DnnShape s;
    const auto p = make_dnn(s, 1);
    const auto t = dnn_forward(p, Matrix(2, 1, {0.1, 0.2}), Mode::Infer);
    CHECK_THROWS_AS(dnn_backward(p, t, std::vector<int>{0, 1}), Error);
}

TEST_CASE("duplicating every sample doubles the gradient") {
    DnnShape s;
    s.hidden = 5;
    s.depth = 3;
    const auto p = make_dnn(s, 4);
    std::mt19937_64 rng(8);
    const Matrix x = uniform_column(6, rng, 0, 2);
    const auto y = alternating(6);
    Matrix x2(12, 1);
    std::vector<int> y2(12);
    for (std::size_t i = 0; i < 12; ++i) {
        x2(i, 0) = x(i % 6, 0);
        y2[i] = y[i % 6];
    }
    const auto g1 = dnn_backward(p, dnn_forward(p, x, Mode::Train), y);
    const auto g2 = dnn_backward(p, dnn_forward(p, x2, Mode::Train), y2);
    const auto b1 = parameter_blocks(g1);
    const auto b2 = parameter_blocks(g2);
    REQUIRE(b1.size() == b2.size());
    for (std::size_t k = 0; k < b1.size(); ++k)
        for (std::size_t i = 0; i < b1[k].values.size(); ++i)
            CHECK(b2[k].values[i] == doctest::Approx(2.0 * b1[k].values[i]).epsilon(1e-10).scale(1e-12));
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    DnnShape s;
    auto p = make_dnn(s, 5);
    const auto before = flatten(p);
    auto state = make_adam_state(AdamConfig{}, p);
    const auto zero = zeros_like(p);
    for (int i = 0; i < 25; ++i) adam_step(state, p, zero);
    CHECK(flatten(p) == before);
    CHECK(state.step == 25);
}

TEST_CASE("adam first step by hand") {
    // t = 1: m = (1-b1) g, v = (1-b2) g^2, m_hat = g, v_hat = g^2,
    // so the step is lr * g / (|g| + eps).
    std::vector<double> w{1.0, -2.0, 0.5};
    const std::vector<double> g{0.3, -4.0, 1e-3};
    ParamBlock pb{"w", w};
    ConstParamBlock gb{"w", g};
    ConstParamBlock wb{"w", w};
    AdamConfig cfg;
    auto state = make_adam_state(cfg, std::span<const ConstParamBlock>(&wb, 1));
    adam_step(state, std::span<const ParamBlock>(&pb, 1), std::span<const ConstParamBlock>(&gb, 1));
    const std::vector<double> start{1.0, -2.0, 0.5};
    for (std::size_t i = 0; i < 3; ++i) {
        const double expected = start[i] - cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.epsilon);
        CHECK(w[i] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(start[i] - w[i]) == doctest::Approx(cfg.learning_rate).epsilon(1e-4));
        CHECK((w[i] - start[i]) * g[i] < 0.0);
    }
    CHECK(state.step == 1);
    for (double v : state.second_moment[0]) CHECK(v >= 0.0);
}

TEST_CASE("adam is deterministic and checks shapes") {
    DnnShape s;
    std::mt19937_64 rng(1);
    const Matrix x = uniform_column(8, rng, 0, 3);
    const auto y = alternating(8);
    auto run = [&] {
        auto p = make_dnn(s, 9);
        auto st = make_adam_state(AdamConfig{}, p);
        for (int i = 0; i < 5; ++i) adam_step(st, p, dnn_backward(p, dnn_forward(p, x, Mode::Train), y));
        return flatten(p);
    };
    CHECK(run() == run());

    auto p = make_dnn(s, 9);
    auto st = make_adam_state(AdamConfig{}, p);
    DnnShape other;
    other.hidden = 4;
    CHECK_THROWS_AS(adam_step(st, p, zeros_like(make_dnn(other, 0))), Error);
}

TEST_CASE("gru at zero parameters") {
    GruCellParams cell(1, 3);
    const std::vector<double> h{0.8, -0.4, 0.1};
    const auto c = gru_cell_forward_cached(cell, std::vector<double>{2.5}, h);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(c.update[j] == 0.5);
        CHECK(c.candidate[j] == 0.0);
        CHECK(c.hidden[j] == 0.5 * h[j]);
    }
}

TEST_CASE("gru from zero state with zeroed candidate path stays at zero") {
    std::mt19937_64 rng(4);
    RnnShape s;
    s.layers = 1;
    s.hidden = 4;
    auto cell = make_rnn(s, 12).cells[0];
    cell.candidate_input = Matrix(4, 1, 0.0);
    cell.candidate_hidden = Matrix(4, 4, 0.0);
    const auto h = gru_cell_forward(cell, std::vector<double>{0.7}, std::vector<double>(4, 0.0));
    for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("gru output stays in (-1, 1) and checks dimensions") {
    RnnShape s;
    s.layers = 1;
    s.hidden = 5;
    const auto cell = make_rnn(s, 2).cells[0];
    std::vector<double> h(5, 0.0);
    for (int t = 0; t < 50; ++t) {
        h = gru_cell_forward(cell, std::vector<double>{t % 2 ? 3.0 : -3.0}, h);
        for (double v : h) {
            CHECK(v > -1.0);
            CHECK(v < 1.0);
        }
    }
    // saturating inputs round to the boundary in double precision
    for (int t = 0; t < 50; ++t) {
        h = gru_cell_forward(cell, std::vector<double>{t % 2 ? 300.0 : -300.0}, h);
        for (double v : h) CHECK(std::abs(v) <= 1.0);
    }
    CHECK_THROWS_AS(gru_cell_forward(cell, std::vector<double>{1.0, 2.0}, h), Error);
    CHECK_THROWS_AS(gru_cell_forward(cell, std::vector<double>{1.0}, std::vector<double>(4)), Error);
}

TEST_CASE("gradient check: default network at random init") {
    DnnShape s;
    const auto p = make_dnn(s, 2024);
    std::mt19937_64 rng(17);
    const Matrix x = uniform_column(8, rng, 0.0, 3.0);
    const auto y = alternating(8);
    const auto report = gradient_check(p, x, y, 1e-5);
    CHECK_MESSAGE(report.passed(), report.to_string());
    CHECK(report.blocks.size() == parameter_blocks(p).size());
}

TEST_CASE("gradient check: fault injection names the block") {
    DnnShape s;
    s.hidden = 4;
    s.depth = 3;
    const auto p = make_dnn(s, 6);
    std::mt19937_64 rng(3);
    const Matrix x = uniform_column(6, rng, 0.0, 3.0);
    const auto y = alternating(6);
    auto analytic = dnn_backward(p, dnn_forward(p, x, Mode::Train), y);
    const auto numeric = finite_difference_gradient(
        p, [&](const DnnParams& q) { return dnn_loss(q, x, y, Mode::Train); });
    analytic.dense[1].weights(2, 1) += 0.1;
    const auto blocks = parameter_blocks(std::as_const(analytic));
    const auto report = compare_gradients(blocks, numeric, 1e-5);
    CHECK_FALSE(report.passed());
    REQUIRE(report.first_failure().has_value());
    CHECK(*report.first_failure() == "dense.1.weight");
}

TEST_CASE("gradient check: tolerance zero always fails") {
    DnnShape s;
    s.hidden = 3;
    s.depth = 2;
    std::mt19937_64 rng(5);
    const auto report = gradient_check(make_dnn(s, 1), uniform_column(4, rng, 0, 3), alternating(4), 0.0);
    CHECK_FALSE(report.passed());
}

TEST_CASE("gradient check: alternate block order") {
    // With batch norm straight after a scalar-input dense layer, the first
    // layer's gradients are nearly zero and finite differences at step 1e-6
    // are dominated by rounding, so this order is held to 1e-3 only.
    DnnShape s;
    s.order = BlockOrder::DenseNormTanh;
    s.hidden = 6;
    s.depth = 4;
    std::mt19937_64 rng(21);
    const auto report = gradient_check(make_dnn(s, 8), uniform_column(8, rng, 0, 3), alternating(8), 1e-3);
    CHECK_MESSAGE(report.passed(), report.to_string());
}

TEST_CASE("gradient check: unrolled three-step GRU") {
    RnnShape s;
    s.layers = 2;
    s.hidden = 5;
    const auto p = make_rnn(s, 31);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    Matrix w(6, 3);
    for (double& v : w.values()) v = u(rng);
    const auto report = gradient_check(p, w, alternating(6), 1e-5);
    CHECK_MESSAGE(report.passed(), report.to_string());
}

TEST_CASE("finite differences: parallel and serial kernels agree bit for bit") {
    DnnShape s;
    s.hidden = 6;
    s.depth = 3;
    const auto p = make_dnn(s, 44);
    std::mt19937_64 rng(45);
    const Matrix x = uniform_column(8, rng, 0, 3);
    const auto y = alternating(8);
    const DnnLossFn loss = [&](const DnnParams& q) { return dnn_loss(q, x, y, Mode::Train); };
    CHECK(finite_difference_gradient(p, loss) == serial::finite_difference_gradient(p, loss));

    RnnShape r;
    r.layers = 2;
    r.hidden = 3;
    const auto q = make_rnn(r, 46);
    Matrix w(4, 2, 0.5);
    const RnnLossFn rl = [&](const RnnParams& z) { return rnn_loss(z, w, alternating(4)); };
    CHECK(finite_difference_gradient(q, rl) == serial::finite_difference_gradient(q, rl));
}

TEST_CASE("relative error definition") {
    CHECK(gradient_relative_error(1.0, 1.0) == 0.0);
    CHECK(gradient_relative_error(2.0, 1.0) == doctest::Approx(0.5));
    // tiny entries are compared on the absolute floor
    CHECK(gradient_relative_error(1e-9, -1e-9) == doctest::Approx(2e-9 / kGradientScaleFloor));
}
