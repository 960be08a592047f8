#include "pcd/adam.hpp"

#include <cmath>
#include <string>

namespace pcd::ad {

void AdamConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("adam: learning rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
        throw ConfigError("adam: betas must lie in [0,1)");
    }
    if (!(epsilon > 0)) throw ConfigError("adam: epsilon must be positive");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw ShapeError("adam_step: parameter/gradient/state sizes disagree (" +
                         std::to_string(params.size()) + ", " + std::to_string(grads.size()) +
                         ", " + std::to_string(state.m.size()) + ")");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

}  // namespace pcd::ad
