#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcd/common.hpp"

namespace pcd::ad {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    void validate() const;
};

// First/second moment accumulators over one flat parameter vector,
// zero-initialized at step 0.
struct AdamState {
    int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(size_t size) : m(size, 0.0), v(size, 0.0) {}
};

// Standard Adam update with bias correction; increments the step counter.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace pcd::ad
