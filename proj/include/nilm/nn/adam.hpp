#pragma once

#include "nilm/nn/network.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nilm::nn {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment estimates mirror the parameter blocks one-to-one.
struct AdamState {
    AdamConfig config;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::int64_t step = 0;
};

AdamState make_adam_state(const AdamConfig& config, std::span<const ConstParamBlock> params);

template <class Params>
AdamState make_adam_state(const AdamConfig& config, const Params& params) {
    const auto blocks = parameter_blocks(params);
    return make_adam_state(config, std::span<const ConstParamBlock>(blocks));
}

/// One bias-corrected Adam update. The step counter is incremented before the
/// bias correction, so the first call uses t = 1.
void adam_step(AdamState& state, std::span<const ParamBlock> params, std::span<const ConstParamBlock> grads);

template <class Params>
void adam_step(AdamState& state, Params& params, const Params& grads) {
    const auto p = parameter_blocks(params);
    const auto g = parameter_blocks(grads);
    adam_step(state, std::span<const ParamBlock>(p), std::span<const ConstParamBlock>(g));
}

}  // namespace nilm::nn
