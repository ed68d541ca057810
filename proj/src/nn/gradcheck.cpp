#include "nilm/nn/gradcheck.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

namespace nilm::nn {

namespace {

struct EntryRef {
    std::size_t block;
    std::size_t index;
};

template <class Params>
std::vector<EntryRef> enumerate_entries(const Params& params) {
    std::vector<EntryRef> entries;
    const auto blocks = parameter_blocks(params);
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (std::size_t i = 0; i < blocks[b].values.size(); ++i) entries.push_back({b, i});
    return entries;
}

template <class Params>
Gradient empty_gradient(const Params& params) {
    Gradient g;
    for (const auto& b : parameter_blocks(params)) g.emplace_back(b.values.size(), 0.0);
    return g;
}

template <class Params, class Loss>
double central_difference(Params& scratch, const Loss& loss, const EntryRef& e, double step) {
    double& slot = parameter_blocks(scratch)[e.block].values[e.index];
    const double saved = slot;
    slot = saved + step;
    const double up = loss(std::as_const(scratch));
    slot = saved - step;
    const double down = loss(std::as_const(scratch));
    slot = saved;
    return (up - down) / (2.0 * step);
}

template <class Params, class Loss>
Gradient fd_parallel(const Params& params, const Loss& loss, double step) {
    const auto entries = enumerate_entries(params);
    Gradient out = empty_gradient(params);
    const auto count = static_cast<std::int64_t>(entries.size());
#pragma omp parallel
    {
        Params scratch = params;
#pragma omp for schedule(dynamic, 16)
        for (std::int64_t k = 0; k < count; ++k) {
            const auto& e = entries[static_cast<std::size_t>(k)];
            out[e.block][e.index] = central_difference(scratch, loss, e, step);
        }
    }
    return out;
}

template <class Params, class Loss>
Gradient fd_serial(const Params& params, const Loss& loss, double step) {
    Gradient out = empty_gradient(params);
    Params scratch = params;
    for (const auto& e : enumerate_entries(params)) out[e.block][e.index] = central_difference(scratch, loss, e, step);
    return out;
}

}  // namespace

bool GradientCheckReport::passed() const {
    return std::all_of(blocks.begin(), blocks.end(), [](const BlockCheck& b) { return b.passed; });
}

double GradientCheckReport::worst_relative_error() const {
    double worst = 0.0;
    for (const auto& b : blocks) worst = std::max(worst, b.worst_relative_error);
    return worst;
}

std::optional<std::string> GradientCheckReport::first_failure() const {
    for (const auto& b : blocks)
        if (!b.passed) return b.name;
    return std::nullopt;
}

std::string GradientCheckReport::to_string() const {
    std::string out;
    for (const auto& b : blocks) {
        out += fmt::format("{:<28} {:>6} entries  worst rel err {:.3e} at [{}] (analytic {:.6e}, numeric {:.6e})  {}\n",
                           b.name, b.size, b.worst_relative_error, b.worst_index, b.analytic, b.numeric,
                           b.passed ? "ok" : "FAIL");
    }
    return out;
}

double gradient_relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradientScaleFloor});
    return std::abs(analytic - numeric) / scale;
}

Gradient finite_difference_gradient(const DnnParams& params, const DnnLossFn& loss, double step) {
    return fd_parallel(params, loss, step);
}

Gradient finite_difference_gradient(const RnnParams& params, const RnnLossFn& loss, double step) {
    return fd_parallel(params, loss, step);
}

Gradient serial::finite_difference_gradient(const DnnParams& params, const DnnLossFn& loss, double step) {
    return fd_serial(params, loss, step);
}

Gradient serial::finite_difference_gradient(const RnnParams& params, const RnnLossFn& loss, double step) {
    return fd_serial(params, loss, step);
}

GradientCheckReport compare_gradients(std::span<const ConstParamBlock> analytic, const Gradient& numeric,
                                      double tolerance) {
    if (analytic.size() != numeric.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("gradient check: {} analytic blocks vs {} numeric", analytic.size(), numeric.size()));
    }
    GradientCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t b = 0; b < analytic.size(); ++b) {
        const auto a = analytic[b].values;
        const auto& n = numeric[b];
        if (a.size() != n.size()) {
            throw Error(ErrorKind::DimensionMismatch,
                        fmt::format("gradient check block '{}': {} vs {} entries", analytic[b].name, a.size(), n.size()));
        }
        BlockCheck check;
        check.name = analytic[b].name;
        check.size = a.size();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double err = gradient_relative_error(a[i], n[i]);
            if (i == 0 || err > check.worst_relative_error || !std::isfinite(err)) {
                check.worst_relative_error = err;
                check.worst_index = i;
                check.analytic = a[i];
                check.numeric = n[i];
            }
            if (!(err < tolerance)) check.passed = false;
        }
        report.blocks.push_back(std::move(check));
    }
    return report;
}

GradientCheckReport gradient_check(const DnnParams& params, const Matrix& features, std::span<const int> labels,
                                   double tolerance, double step) {
    const DnnParams grads = dnn_backward(params, dnn_forward(params, features, Mode::Train), labels);
    const std::vector<int> owned(labels.begin(), labels.end());
    const auto numeric = finite_difference_gradient(
        params, [&](const DnnParams& p) { return dnn_loss(p, features, owned, Mode::Train); }, step);
    const auto blocks = parameter_blocks(grads);
    return compare_gradients(blocks, numeric, tolerance);
}

GradientCheckReport gradient_check(const RnnParams& params, const Matrix& windows, std::span<const int> labels,
                                   double tolerance, double step) {
    const RnnParams grads = rnn_backward(params, rnn_forward(params, windows), labels);
    const std::vector<int> owned(labels.begin(), labels.end());
    const auto numeric =
        finite_difference_gradient(params, [&](const RnnParams& p) { return rnn_loss(p, windows, owned); }, step);
    const auto blocks = parameter_blocks(grads);
    return compare_gradients(blocks, numeric, tolerance);
}

}  // namespace nilm::nn
