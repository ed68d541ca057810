// Times the OpenMP kernels against their serial references and checks that
// both produce identical results.

#include "nilm/model/model.hpp"
#include "nilm/nn/gradcheck.hpp"
#include "nilm/nn/layers.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace nilm;

namespace {

template <class Fn>
double best_seconds(int repeats, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        best = std::min(best, dt.count());
    }
    return best;
}

void report(const std::string& name, double serial_s, double parallel_s, bool identical) {
    fmt::print("{:<28} {:>10.3f} ms {:>10.3f} ms {:>7.2f}x  {}\n", name, 1e3 * serial_s, 1e3 * parallel_s,
               serial_s / parallel_s, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel timings"};
    std::size_t rows = 200000;
    std::size_t width = 18;
    int repeats = 5;
    app.add_option("--rows", rows, "batch rows for dense forward and prediction");
    app.add_option("--width", width, "layer width");
    app.add_option("--repeats", repeats, "timed repetitions (best is reported)");
    CLI11_PARSE(app, argc, argv);

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    fmt::print("threads: {}\n", threads);
    fmt::print("{:<28} {:>13} {:>13} {:>8}\n", "kernel", "serial", "openmp", "speedup");

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    {
        nn::DenseLayerParams layer(width, width);
        for (double& w : layer.weights.values()) w = unit(rng);
        nn::Matrix x(rows, width);
        for (double& v : x.values()) v = unit(rng);
        nn::Matrix a, b;
        const double s = best_seconds(repeats, [&] { a = nn::serial::dense_forward(layer, x); });
        const double p = best_seconds(repeats, [&] { b = nn::dense_forward(layer, x); });
        report(fmt::format("dense forward {}x{}", rows, width), s, p, a == b);
    }

    {
        model::DnnConfig config;
        const auto m = model::build_dnn(config, 3);
        std::vector<double> xs(rows);
        std::uniform_real_distribution<double> watts(0.0, 2000.0);
        for (double& v : xs) v = watts(rng);
        std::vector<int> a, b;
        const double s = best_seconds(repeats, [&] { a = model::serial::dnn_predict_labels(m, xs); });
        const double p = best_seconds(repeats, [&] { b = model::dnn_predict_labels(m, xs); });
        report(fmt::format("dnn predict {} samples", rows), s, p, a == b);
    }

    {
        nn::DnnShape shape;
        const auto params = nn::make_dnn(shape, 5);
        nn::Matrix x(256, 1);
        std::uniform_real_distribution<double> pos(0.0, 3.0);
        for (double& v : x.values()) v = pos(rng);
        std::vector<int> labels(256);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3 == 0;
        const nn::DnnLossFn loss = [&](const nn::DnnParams& p) {
            return nn::dnn_loss(p, x, labels, nn::Mode::Train);
        };
        nn::Gradient a, b;
        const int r = std::max(1, repeats / 2);
        const double s = best_seconds(r, [&] { a = nn::serial::finite_difference_gradient(params, loss); });
        const double p = best_seconds(r, [&] { b = nn::finite_difference_gradient(params, loss); });
        report("finite-difference gradient", s, p, a == b);
    }
    return 0;
}
