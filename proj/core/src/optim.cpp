#include "nqs/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace nqs {

namespace {

void check_sizes(std::size_t p, std::size_t g, std::size_t s) {
  if (p != g || p != s) throw std::invalid_argument("optimizer size mismatch");
}

}  // namespace

void sgd_update(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("optimizer size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads) {
  check_sizes(params.size(), grads.size(), state.m.size());
  ++state.step;
  const double b1t = 1.0 - std::pow(state.beta1, state.step);
  const double b2t = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / b1t;
    const double vhat = state.v[i] / b2t;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void adadelta_update(AdaDeltaState& state, std::span<double> params,
                     std::span<const double> grads) {
  check_sizes(params.size(), grads.size(), state.acc_grad2.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.acc_grad2[i] = state.rho * state.acc_grad2[i] + (1.0 - state.rho) * g * g;
    const double dx = -std::sqrt((state.acc_dx2[i] + state.eps) /
                                 (state.acc_grad2[i] + state.eps)) *
                      g;
    state.acc_dx2[i] = state.rho * state.acc_dx2[i] + (1.0 - state.rho) * dx * dx;
    params[i] += dx;
  }
}

}  // namespace nqs
