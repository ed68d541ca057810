#pragma once

#include "nilm/nn/network.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nilm::nn {

/// Gradient magnitudes below this are compared on an absolute scale: the
/// relative error denominator is max(|analytic|, |numeric|, floor).
inline constexpr double kGradientScaleFloor = 1e-3;
inline constexpr double kDefaultFiniteDifferenceStep = 1e-6;

struct BlockCheck {
    std::string name;
    std::size_t size = 0;
    double worst_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;  // values at worst_index
    double numeric = 0.0;
    bool passed = true;
};

struct GradientCheckReport {
    std::vector<BlockCheck> blocks;
    double tolerance = 0.0;

    bool passed() const;
    double worst_relative_error() const;
    /// Name of the first block over tolerance.
    std::optional<std::string> first_failure() const;
    std::string to_string() const;
};

double gradient_relative_error(double analytic, double numeric);

using Gradient = std::vector<std::vector<double>>;  // one vector per parameter block

template <class Params>
Gradient flatten(const Params& params) {
    Gradient out;
    for (const auto& b : parameter_blocks(params)) out.emplace_back(b.values.begin(), b.values.end());
    return out;
}

using DnnLossFn = std::function<double(const DnnParams&)>;
using RnnLossFn = std::function<double(const RnnParams&)>;

/// Central differences (f(p + h) - f(p - h)) / 2h for every trainable entry.
/// Entries are independent and evaluated in parallel; each thread perturbs its
/// own copy of the parameters.
Gradient finite_difference_gradient(const DnnParams& params, const DnnLossFn& loss,
                                    double step = kDefaultFiniteDifferenceStep);
Gradient finite_difference_gradient(const RnnParams& params, const RnnLossFn& loss,
                                    double step = kDefaultFiniteDifferenceStep);

namespace serial {
/// Single-threaded reference for the parallel finite-difference kernels.
Gradient finite_difference_gradient(const DnnParams& params, const DnnLossFn& loss,
                                    double step = kDefaultFiniteDifferenceStep);
Gradient finite_difference_gradient(const RnnParams& params, const RnnLossFn& loss,
                                    double step = kDefaultFiniteDifferenceStep);
}  // namespace serial

/// Block-by-block comparison. A block passes when every entry's relative error
/// is strictly below `tolerance`.
GradientCheckReport compare_gradients(std::span<const ConstParamBlock> analytic, const Gradient& numeric,
                                      double tolerance);

/// Analytic backprop of the summed train-mode loss on the given slice versus
/// finite differences of the same loss. Intended for small networks (a few
/// thousand parameters).
GradientCheckReport gradient_check(const DnnParams& params, const Matrix& features, std::span<const int> labels,
                                   double tolerance, double step = kDefaultFiniteDifferenceStep);
GradientCheckReport gradient_check(const RnnParams& params, const Matrix& windows, std::span<const int> labels,
                                   double tolerance, double step = kDefaultFiniteDifferenceStep);

}  // namespace nilm::nn
