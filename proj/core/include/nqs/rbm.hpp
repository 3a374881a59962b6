#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nqs/data.hpp"
#include "nqs/exact.hpp"
#include "nqs/lattice.hpp"
#include "nqs/rng.hpp"

namespace nqs {

enum class RbmField { kReal, kComplex };

// Restricted Boltzmann machine over 0/1 visible units. The hidden layer is
// traced out analytically, giving the effective energy
//   E(sigma) = sum_j b_j sigma_j + sum_i log(1 + exp(W_i.sigma + c_i))
// and p(sigma) proportional to exp(Re E). The wavefunction it encodes is
// psi = exp(E/2): square root of p in the real case, complex amplitude when
// the parameters are promoted to complex values.
struct RbmParams {
  int n_visible = 0;
  int n_hidden = 0;
  RbmField field = RbmField::kReal;
  std::vector<std::complex<double>> weights;       // [n_hidden][n_visible] row-major
  std::vector<std::complex<double>> visible_bias;  // [n_visible]
  std::vector<std::complex<double>> hidden_bias;   // [n_hidden]

  double alpha() const { return (double)n_hidden / (double)n_visible; }
  // Flat optimizer view: [W, b, c] reals, interleaved (re, im) when complex.
  std::size_t n_params() const;
  std::vector<double> flatten_params() const;
  void unflatten_params(std::span<const double> theta);
};

// Zero biases, Gaussian weights of width 1/sqrt(n_visible), both components
// when complex. Wide enough to break the mean-field saddle at W = 0.
RbmParams make_rbm(int n_visible, int n_hidden, RbmField field, std::uint64_t seed);
// Log-odds start for the visible biases from per-site shot occupations, so
// training only has to build correlations on top of matched marginals.
// Cuts thousands of iterations on dilute states whose biases sit far from 0.
void init_visible_bias_from_data(RbmParams& params, std::span<const Configuration> shots);

std::complex<double> effective_energy(const RbmParams& params, const Configuration& sigma);
// Re E(sigma): log of the unnormalized probability in both field cases.
double log_prob_unnormalized(const RbmParams& params, const Configuration& sigma);
// Z = sum_sigma exp(Re E) by full enumeration; n_visible <= 20.
double partition_function(const RbmParams& params);
// -mean E(data) + log Z, exact; the tracked tomography cost.
double exact_nll(const RbmParams& params, const std::vector<Configuration>& data);
// KL(q || p_theta) for an explicit target distribution over all 2^N states.
double kl_divergence(const RbmParams& params, std::span<const double> target_probs);

// Single-site-flip Metropolis chain. Hidden-layer activations are updated
// incrementally, so a proposal costs O(n_hidden).
struct MarkovChainState {
  Configuration current;
  Rng rng;
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;

  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : (double)accepted / (double)proposed;
  }

  // Cached W.sigma + c and its softplus, maintained by the sampler.
  std::vector<std::complex<double>> theta;
  std::vector<double> softplus_re;
};

MarkovChainState init_chain(const RbmParams& params, std::uint64_t seed);
// n_flips single-site Metropolis proposals, accepted with min(1, p'/p).
void metropolis_sweep(const RbmParams& params, MarkovChainState& chain, int n_flips);
// burn_in full sweeps (N proposals each), then n_samples configurations kept
// every `thin` proposals (thin < 0 means one sweep).
std::vector<Configuration> metropolis_chain(const RbmParams& params, int n_samples, int burn_in,
                                            int thin, std::uint64_t seed,
                                            double* acceptance_rate = nullptr);
// Independent draws from p(sigma) by inverse CDF over the enumerated
// distribution; n_visible <= 20. Sidesteps the ergodicity loss of
// single-site flips once blockade weights carve the space into basins.
std::vector<Configuration> exact_sample_configurations(const RbmParams& params, int n_samples,
                                                       std::uint64_t seed);

// d E/d theta per configuration, packed [W, b, c]: dE/db_j = sigma_j,
// dE/dc_i = sig(theta_i), dE/dW_ij = sig(theta_i) sigma_j.
std::vector<std::complex<double>> effective_energy_gradient(const RbmParams& params,
                                                            const Configuration& sigma);

// Gradient of the negative log-likelihood of Z-basis data:
// <dE>_model - <dE>_data, flattened to the optimizer view.
std::vector<double> nll_gradient(const RbmParams& params,
                                 const std::vector<Configuration>& data_batch,
                                 const std::vector<Configuration>& model_samples);

// log <sigma|U(basis)|psi>, expanding the 2^k reference configurations on
// the k non-Z sites (log-sum-exp stabilized). Throws above max_rotated_sites.
std::complex<double> rotated_log_amplitude(const RbmParams& params, const std::string& basis,
                                           const Configuration& outcome,
                                           int max_rotated_sites = 16);

// Gradient of -mean_k log p(basis_k, outcome_k) for multi-basis data,
// p(x) = |<sigma|U|psi>|^2 / Z; the Z term is estimated from model_samples.
std::vector<double> multi_basis_nll_gradient(const RbmParams& params,
                                             std::span<const MeasurementRecord> batch,
                                             const std::vector<Configuration>& model_samples,
                                             int max_rotated_sites = 16);

// O_loc(sigma) = sum_sigma' <sigma|O|sigma'> psi(sigma')/psi(sigma).
std::complex<double> local_observable(const RbmParams& params, const Configuration& sigma,
                                      const PauliSumHamiltonian& op);

// Monte Carlo estimate of <O>: mean and standard error of Re O_loc over a
// Metropolis sample (burn-in 1000 sweeps, thinning N).
std::pair<double, double> estimate_expectation(const RbmParams& params,
                                               const PauliSumHamiltonian& op, int n_samples,
                                               std::uint64_t seed);

// Enumerated psi(sigma) = exp(E/2), normalized; n_visible <= 20.
StateVector rbm_statevector(const RbmParams& params);

struct TomographyOptions {
  int iterations = 1000;
  int n_samples_data = 1000;  // data minibatch per update
  int n_samples = 2000;       // model samples per update
  int n_chains = 16;          // independent chains the model samples split over
  int burn_in_sweeps = 1000;
  int thin = -1;  // single-site updates between kept samples; -1 means N
  double rho = 0.95;  // AdaDelta
  double eps = 1e-7;
  std::uint64_t seed = 1;
  int max_rotated_sites = 16;
  // Multi-basis curriculum: this many leading iterations draw minibatches
  // from the all-Z records only, fitting the moduli before the rotated
  // bases switch on to fix the phases. Joint training from a random start
  // tends to jam in phase-coupled local minima. Keep it short: the longer
  // the Z-only phase runs, the further the hidden phases drift toward the
  // softplus-cancellation attractor and the rougher the exit. Optimizer
  // accumulators reset at the switch.
  int pretrain_z_iterations = 0;
  // Draw model samples by enumeration instead of Metropolis (N <= 20).
  // Needed when the learned weights freeze the chains inside blockade
  // basins and the frozen-chain noise stalls the late fit.
  bool exact_model_samples = false;
  // Optional exact diagnostics, enumerated each iteration when N <= 12.
  const StateVector* reference = nullptr;   // fidelity target
  const RydbergModel* model = nullptr;      // energy / <Sx> / <Sz> tracking
};

struct TomographyIterationStats {
  int iteration = 0;
  double nll = 0.0;  // exact when N <= 12, else NaN
  double acceptance = 0.0;
  double fidelity = 0.0;         // NaN without a reference
  double energy_per_site = 0.0;  // NaN without a model
  double sx = 0.0;
  double sz = 0.0;
};

// Per-iteration: data minibatch (with replacement), fresh Metropolis model
// samples split over n_chains independent chains, NLL gradient, AdaDelta
// update. Independent chains keep the model estimate unbiased once strong
// blockade weights stop single-site flips from crossing between modes.
// Returns the per-iteration log.
std::vector<TomographyIterationStats> train_tomography(RbmParams& params,
                                                       const std::vector<Configuration>& shots,
                                                       const TomographyOptions& options);
// Multi-basis variant for complex parameters.
std::vector<TomographyIterationStats> train_tomography(RbmParams& params,
                                                       const MeasurementDataset& shots,
                                                       const TomographyOptions& options);

void save_rbm(const std::string& path, const RbmParams& params);
RbmParams load_rbm(const std::string& path);

}  // namespace nqs
