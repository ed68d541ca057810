#include "nilm/nn/adam.hpp"

#include "nilm/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace nilm::nn {

AdamState make_adam_state(const AdamConfig& config, std::span<const ConstParamBlock> params) {
    if (!(config.learning_rate > 0.0) || !(config.beta1 > 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 > 0.0 && config.beta2 < 1.0) || !(config.epsilon > 0.0)) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("invalid Adam settings: lr {}, beta1 {}, beta2 {}, eps {}", config.learning_rate,
                                config.beta1, config.beta2, config.epsilon));
    }
    AdamState state;
    state.config = config;
    for (const auto& b : params) {
        state.first_moment.emplace_back(b.values.size(), 0.0);
        state.second_moment.emplace_back(b.values.size(), 0.0);
    }
    return state;
}

void adam_step(AdamState& state, std::span<const ParamBlock> params, std::span<const ConstParamBlock> grads) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("Adam given {} parameter blocks, {} gradient blocks, state for {}", params.size(),
                                grads.size(), state.first_moment.size()));
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].values.size() != grads[b].values.size() ||
            params[b].values.size() != state.first_moment[b].size()) {
            throw Error(ErrorKind::DimensionMismatch,
                        fmt::format("Adam block '{}': {} parameters, {} gradients, {} moments", params[b].name,
                                    params[b].values.size(), grads[b].values.size(),
                                    state.first_moment[b].size()));
        }
    }

    const auto& cfg = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b].values;
        auto g = grads[b].values;
        auto& m = state.first_moment[b];
        auto& v = state.second_moment[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

}  // namespace nilm::nn
