#include "ccp/adam.hpp"

#include <cmath>

#include "ccp/errors.hpp"

namespace ccp {

void adam_step(AdamState& state, Tensor& param, const Tensor& grad, double lr,
               const AdamConfig& cfg) {
    if (!param.same_shape(grad) || !param.same_shape(state.m)) {
        throw ShapeError("adam: parameter " + param.shape_str() + ", gradient " +
                         grad.shape_str() + ", moments " + state.m.shape_str());
    }
    if (!grad.all_finite()) {
        throw NumericError("adam: non-finite gradient, step aborted");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

}  // namespace ccp
