#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nqs {

// First-order updates over flat parameter vectors. Complex parameter sets
// are viewed as interleaved (re, im) doubles by their owners.

void sgd_update(std::span<double> params, std::span<const double> grads, double lr);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m, v;

  AdamState() = default;
  explicit AdamState(std::size_t n_params, double lr = 1e-3)
      : lr(lr), m(n_params, 0.0), v(n_params, 0.0) {}
};

void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads);

struct AdaDeltaState {
  double rho = 0.95;
  double eps = 1e-7;
  std::vector<double> acc_grad2, acc_dx2;

  AdaDeltaState() = default;
  AdaDeltaState(std::size_t n_params, double rho = 0.95, double eps = 1e-7)
      : rho(rho), eps(eps), acc_grad2(n_params, 0.0), acc_dx2(n_params, 0.0) {}
};

void adadelta_update(AdaDeltaState& state, std::span<double> params,
                     std::span<const double> grads);

}  // namespace nqs
