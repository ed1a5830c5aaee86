#pragma once

#include "ccp/tensor.hpp"

namespace ccp {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-parameter optimizer state; moments are shaped like their parameter.
struct AdamState {
    Tensor m;
    Tensor v;
    std::size_t step = 0;

    explicit AdamState(const std::vector<std::size_t>& shape)
        : m(Tensor::zeros(shape)), v(Tensor::zeros(shape)) {}
    AdamState() = default;
};

/// Standard Adam update with bias correction. Throws NumericError on a
/// non-finite gradient so a diverging step never corrupts the parameters.
void adam_step(AdamState& state, Tensor& param, const Tensor& grad, double lr,
               const AdamConfig& cfg = {});

}  // namespace ccp
