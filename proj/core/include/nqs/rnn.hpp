#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nqs/exact.hpp"
#include "nqs/lattice.hpp"

namespace nqs {

// Site-shared gated recurrent cell on the concatenation [h; x] with a
// two-way softmax head. x is the one-hot of the previous site's occupation,
// widened by a third slot for the start token fed before the first site.
struct GruParams {
  static constexpr int kInputDim = 3;  // {empty, excited, start}

  int n_hidden = 0;
  Eigen::MatrixXd w_update;     // [n_hidden, n_hidden + kInputDim]
  Eigen::MatrixXd w_reset;
  Eigen::MatrixXd w_candidate;
  Eigen::VectorXd b_update;
  Eigen::VectorXd b_reset;
  Eigen::VectorXd b_candidate;
  Eigen::MatrixXd u_out;        // [2, n_hidden]
  Eigen::Vector2d c_out;

  std::size_t n_params() const;
  std::vector<double> flatten_params() const;
  void unflatten_params(std::span<const double> theta);
};

// h' = (1 - z) . h + z . g with
//   z = sig(W_z [h; x] + b_z), r = sig(W_r [h; x] + b_r),
//   g = tanh(W_c [r . h; x] + b_c).
Eigen::VectorXd gru_step(const GruParams& params, const Eigen::VectorXd& h,
                         const Eigen::VectorXd& x);

// [p(n=0), p(n=1)] = softmax(U h + c).
Eigen::Vector2d conditional(const GruParams& params, const Eigen::VectorXd& h);

// Boustrophedon sweep of an lx-by-ly grid: even rows left to right, odd rows
// reversed, so consecutive steps are always lattice neighbours.
std::vector<int> snake_order(int lx, int ly);

// Autoregressive square-root-of-probability amplitudes: the cell walks
// `order`, emits a normalized two-way conditional at every site, and
// psi(sigma) is the square root of the product. Sum of |psi|^2 over all 2^N
// configurations is exactly 1 for any parameter values.
struct RnnWavefunction {
  GruParams params;
  std::vector<int> order;

  int n_sites() const { return static_cast<int>(order.size()); }
};

// Glorot-uniform kernels, zero biases, snake visit order.
RnnWavefunction make_rnn(int lx, int ly, int n_hidden, std::uint64_t seed);

double log_psi(const RnnWavefunction& psi, const Configuration& sigma);
std::vector<double> log_psi_batch(const RnnWavefunction& psi,
                                  std::span<const Configuration> sigmas);

// d(log psi)/d(theta) in the flat GruParams layout, by backprop through the
// recurrence.
std::vector<double> log_psi_gradient(const RnnWavefunction& psi, const Configuration& sigma);

struct RnnSampleBatch {
  std::vector<Configuration> configurations;
  std::vector<double> log_probs;  // log p(sigma) = 2 log psi(sigma)
};

// Independent autoregressive draws; no chain, no burn-in, no rejection.
RnnSampleBatch sample_rnn(const RnnWavefunction& psi, int n_samples, std::uint64_t seed);

// E_loc(sigma) = E_diag(sigma) - (Omega/2) sum_j psi(flip_j sigma)/psi(sigma),
// one value per input configuration. Off-diagonal ratios come from suffix
// re-walks that reuse the shared prefix states.
std::vector<double> local_energy(const RnnWavefunction& psi, const RydbergModel& model,
                                 std::span<const Configuration> sigmas);

// Same estimator with amplitudes supplied by a callback returning log psi;
// lets exact eigenvectors stand in for the network.
std::vector<double> local_energy(const std::function<double(const Configuration&)>& log_amp,
                                 const RydbergModel& model,
                                 std::span<const Configuration> sigmas);

enum class GradientEstimator {
  kPlain,            // 2/B sum_i dlogpsi_i E_i
  kVarianceReduced,  // 2/B sum_i dlogpsi_i (E_i - mean E)
};

struct EnergyGradient {
  double energy = 0.0;                 // batch mean of E_loc
  double energy_stderr = 0.0;
  double local_energy_variance = 0.0;  // unbiased batch variance
  std::vector<double> gradient;        // flat GruParams layout
};

// Monte Carlo gradient of <E> over a fixed batch. The two estimators agree
// in expectation (<dlogpsi> = 0 for a normalized psi); subtracting the batch
// mean cancels the part of the sampling noise aligned with dlogpsi.
EnergyGradient energy_and_gradient(
    const RnnWavefunction& psi, const RydbergModel& model,
    std::span<const Configuration> sigmas,
    GradientEstimator estimator = GradientEstimator::kVarianceReduced);

// Same, over a freshly drawn batch.
EnergyGradient energy_and_gradient(
    const RnnWavefunction& psi, const RydbergModel& model, int n_samples, std::uint64_t seed,
    GradientEstimator estimator = GradientEstimator::kVarianceReduced);

struct VmcOptions {
  int n_samples = 500;
  int epochs = 1000;
  double learning_rate = 1e-3;  // Adam
  std::uint64_t seed = 1234;
  GradientEstimator estimator = GradientEstimator::kVarianceReduced;
};

struct VmcEpochStats {
  int epoch = 0;
  double energy = 0.0;
  double energy_stderr = 0.0;
  double local_energy_variance = 0.0;
};

// Fresh samples each epoch, Adam on the chosen estimator. The sampling seed
// of epoch k derives only from (options.seed, k), so runs of different
// widths see the same seed schedule.
std::vector<VmcEpochStats> train_vmc(RnnWavefunction& psi, const RydbergModel& model,
                                     const VmcOptions& options);

// Full amplitude vector over the 2^N occupation basis (N <= 16).
StateVector rnn_statevector(const RnnWavefunction& psi);

void save_rnn(const std::string& path, const RnnWavefunction& psi);
RnnWavefunction load_rnn(const std::string& path);

}  // namespace nqs
