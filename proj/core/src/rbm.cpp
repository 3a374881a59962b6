#include "nqs/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "nqs/io.hpp"
#include "nqs/optim.hpp"

namespace nqs {

namespace {

using cplx = std::complex<double>;

double softplus_real(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log(1 + exp(z)), branch chosen so exp never overflows.
cplx softplus_c(cplx z) {
  if (z.real() > 0.0) return z + std::log(1.0 + std::exp(-z));
  return std::log(1.0 + std::exp(z));
}

cplx sigmoid_c(cplx z) {
  if (z.real() >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const cplx e = std::exp(z);
  return e / (1.0 + e);
}

void check_sigma(const RbmParams& p, const Configuration& sigma) {
  if ((int)sigma.bits.size() != p.n_visible)
    throw std::invalid_argument("rbm: configuration size does not match n_visible");
}

// theta_i = sum_j W_ij sigma_j + c_i
void compute_theta(const RbmParams& p, const Configuration& sigma, std::vector<cplx>& theta) {
  theta.assign(p.hidden_bias.begin(), p.hidden_bias.end());
  for (int j = 0; j < p.n_visible; ++j) {
    if (!sigma.bits[j]) continue;
    const cplx* col = p.weights.data() + j;
    for (int i = 0; i < p.n_hidden; ++i) theta[i] += col[(std::size_t)i * p.n_visible];
  }
}

cplx energy_from_theta(const RbmParams& p, const Configuration& sigma,
                       const std::vector<cplx>& theta) {
  cplx e = 0.0;
  for (int j = 0; j < p.n_visible; ++j)
    if (sigma.bits[j]) e += p.visible_bias[j];
  for (const cplx& t : theta) e += softplus_c(t);
  return e;
}

// log Z with max-subtraction; also reused by the statevector builder.
double log_partition(const RbmParams& p) {
  if (p.n_visible > 20) throw std::invalid_argument("rbm: partition function limited to 20 sites");
  const std::uint64_t dim = std::uint64_t{1} << p.n_visible;
  std::vector<double> log_p(dim);
  double top = -std::numeric_limits<double>::infinity();
  std::vector<cplx> theta;
  for (std::uint64_t u = 0; u < dim; ++u) {
    const Configuration sigma = Configuration::from_index(u, p.n_visible);
    compute_theta(p, sigma, theta);
    log_p[u] = energy_from_theta(p, sigma, theta).real();
    top = std::max(top, log_p[u]);
  }
  long double acc = 0.0L;
  for (double lp : log_p) acc += std::exp((long double)(lp - top));
  return top + (double)std::log(acc);
}

// acc += w * dE/dtheta(sigma), packed [W, b, c].
void accumulate_energy_gradient(const RbmParams& p, const Configuration& sigma, cplx w,
                                std::vector<cplx>& acc) {
  std::vector<cplx> theta;
  compute_theta(p, sigma, theta);
  const std::size_t nw = p.weights.size();
  for (int i = 0; i < p.n_hidden; ++i) {
    const cplx ws = w * sigmoid_c(theta[i]);
    acc[nw + p.n_visible + i] += ws;
    cplx* row = acc.data() + (std::size_t)i * p.n_visible;
    for (int j = 0; j < p.n_visible; ++j)
      if (sigma.bits[j]) row[j] += ws;
  }
  for (int j = 0; j < p.n_visible; ++j)
    if (sigma.bits[j]) acc[nw + j] += w;
}

// Packed complex gradient -> flat optimizer view. The loss is real, so the
// update direction for (re, im) components is (Re g, Im g) of the conjugated
// holomorphic gradient; callers pass g already conjugated.
std::vector<double> flatten_gradient(const RbmParams& p, const std::vector<cplx>& g) {
  std::vector<double> flat;
  if (p.field == RbmField::kReal) {
    flat.reserve(g.size());
    for (const cplx& v : g) flat.push_back(v.real());
  } else {
    flat.reserve(2 * g.size());
    for (const cplx& v : g) {
      flat.push_back(v.real());
      flat.push_back(v.imag());
    }
  }
  return flat;
}

struct RotatedExpansion {
  std::vector<Configuration> configs;
  std::vector<cplx> weights;  // product of single-qubit U elements
};

// All reference configurations reachable from `outcome` on the non-Z sites,
// weighted by <outcome_r|U(tau_r)|sigma'_r> products.
RotatedExpansion expand_rotated(const std::string& basis, const Configuration& outcome,
                                int max_rotated_sites) {
  if (basis.size() != outcome.bits.size())
    throw std::invalid_argument("rbm: basis string does not match configuration size");
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  std::vector<int> rotated;
  for (std::size_t r = 0; r < basis.size(); ++r) {
    if (basis[r] == 'Z') continue;
    if (basis[r] != 'X' && basis[r] != 'Y')
      throw std::invalid_argument("rbm: unknown measurement basis letter");
    rotated.push_back((int)r);
  }
  if ((int)rotated.size() > max_rotated_sites)
    throw std::invalid_argument("rbm: too many non-Z rotations in one basis");

  RotatedExpansion ex;
  const std::uint64_t terms = std::uint64_t{1} << rotated.size();
  ex.configs.reserve(terms);
  ex.weights.reserve(terms);
  for (std::uint64_t m = 0; m < terms; ++m) {
    Configuration ref = outcome;
    cplx w = 1.0;
    for (std::size_t t = 0; t < rotated.size(); ++t) {
      const int site = rotated[t];
      const int sp = (int)((m >> t) & 1);
      const int s = outcome.bits[site];
      ref.bits[site] = (std::uint8_t)sp;
      if (basis[site] == 'X') {
        w *= (s == 1 && sp == 1) ? -inv_sqrt2 : inv_sqrt2;
      } else {
        if (s == 0)
          w *= sp == 0 ? cplx(inv_sqrt2, 0.0) : cplx(0.0, -inv_sqrt2);
        else
          w *= sp == 0 ? cplx(inv_sqrt2, 0.0) : cplx(0.0, inv_sqrt2);
      }
    }
    ex.configs.push_back(std::move(ref));
    ex.weights.push_back(w);
  }
  return ex;
}

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::size_t RbmParams::n_params() const {
  const std::size_t k = weights.size() + visible_bias.size() + hidden_bias.size();
  return field == RbmField::kReal ? k : 2 * k;
}

std::vector<double> RbmParams::flatten_params() const {
  std::vector<double> flat;
  flat.reserve(n_params());
  for (const auto* block : {&weights, &visible_bias, &hidden_bias})
    for (const cplx& v : *block) {
      flat.push_back(v.real());
      if (field == RbmField::kComplex) flat.push_back(v.imag());
    }
  return flat;
}

void RbmParams::unflatten_params(std::span<const double> theta) {
  if (theta.size() != n_params())
    throw std::invalid_argument("rbm: parameter vector length mismatch");
  const double* p = theta.data();
  for (auto* block : {&weights, &visible_bias, &hidden_bias})
    for (cplx& v : *block) {
      if (field == RbmField::kComplex) {
        v = cplx(p[0], p[1]);
        p += 2;
      } else {
        v = cplx(*p++, 0.0);
      }
    }
}

RbmParams make_rbm(int n_visible, int n_hidden, RbmField field, std::uint64_t seed) {
  if (n_visible <= 0 || n_hidden <= 0)
    throw std::invalid_argument("rbm: layer sizes must be positive");
  RbmParams p;
  p.n_visible = n_visible;
  p.n_hidden = n_hidden;
  p.field = field;
  p.visible_bias.assign(n_visible, 0.0);
  p.hidden_bias.assign(n_hidden, 0.0);
  p.weights.resize((std::size_t)n_hidden * n_visible);
  // N(0, 1/sqrt(nv)) weights: near-zero inits sit on the mean-field saddle
  // where hidden units decouple, and noise-normalized optimizers dither
  // there instead of escaping toward correlated solutions.
  const double scale = 1.0 / std::sqrt((double)n_visible);
  Rng rng(derive_seed(seed, 0));
  for (cplx& w : p.weights) {
    const double re = scale * rng.normal();
    const double im = field == RbmField::kComplex ? scale * rng.normal() : 0.0;
    w = cplx(re, im);
  }
  return p;
}

void init_visible_bias_from_data(RbmParams& params, std::span<const Configuration> shots) {
  if (shots.empty()) throw std::invalid_argument("rbm: empty training set");
  std::vector<double> occupation(params.n_visible, 0.0);
  for (const Configuration& sigma : shots) {
    check_sigma(params, sigma);
    for (int j = 0; j < params.n_visible; ++j) occupation[(std::size_t)j] += sigma.bits[j];
  }
  for (int j = 0; j < params.n_visible; ++j) {
    const double q =
        std::clamp(occupation[(std::size_t)j] / (double)shots.size(), 1e-6, 1.0 - 1e-6);
    params.visible_bias[(std::size_t)j] = std::log(q / (1.0 - q));
  }
}

std::complex<double> effective_energy(const RbmParams& params, const Configuration& sigma) {
  check_sigma(params, sigma);
  std::vector<cplx> theta;
  compute_theta(params, sigma, theta);
  return energy_from_theta(params, sigma, theta);
}

double log_prob_unnormalized(const RbmParams& params, const Configuration& sigma) {
  return effective_energy(params, sigma).real();
}

double partition_function(const RbmParams& params) { return std::exp(log_partition(params)); }

double exact_nll(const RbmParams& params, const std::vector<Configuration>& data) {
  if (data.empty()) throw std::invalid_argument("rbm: empty data set");
  long double acc = 0.0L;
  for (const Configuration& sigma : data) acc += log_prob_unnormalized(params, sigma);
  return log_partition(params) - (double)(acc / (long double)data.size());
}

double kl_divergence(const RbmParams& params, std::span<const double> target_probs) {
  const std::uint64_t dim = std::uint64_t{1} << params.n_visible;
  if (target_probs.size() != dim)
    throw std::invalid_argument("rbm: target distribution size mismatch");
  const double log_z = log_partition(params);
  long double kl = 0.0L;
  for (std::uint64_t u = 0; u < dim; ++u) {
    const double q = target_probs[u];
    if (q <= 0.0) continue;
    const double log_p =
        log_prob_unnormalized(params, Configuration::from_index(u, params.n_visible)) - log_z;
    kl += (long double)q * (std::log(q) - log_p);
  }
  return (double)kl;
}

MarkovChainState init_chain(const RbmParams& params, std::uint64_t seed) {
  MarkovChainState chain{Configuration(params.n_visible), Rng(derive_seed(seed, 1))};
  for (auto& bit : chain.current.bits) bit = (std::uint8_t)(chain.rng.uniform() < 0.5);
  compute_theta(params, chain.current, chain.theta);
  chain.softplus_re.resize(params.n_hidden);
  for (int i = 0; i < params.n_hidden; ++i)
    chain.softplus_re[i] = params.field == RbmField::kReal
                               ? softplus_real(chain.theta[i].real())
                               : softplus_c(chain.theta[i]).real();
  return chain;
}

void metropolis_sweep(const RbmParams& params, MarkovChainState& chain, int n_flips) {
  const int n = params.n_visible;
  std::vector<cplx> theta_new(params.n_hidden);
  std::vector<double> sp_new(params.n_hidden);
  for (int step = 0; step < n_flips; ++step) {
    const int j = (int)chain.rng.uniform_int((std::uint64_t)n);
    const double sign = chain.current.bits[j] ? -1.0 : 1.0;
    double delta = sign * params.visible_bias[j].real();
    const cplx* col = params.weights.data() + j;
    for (int i = 0; i < params.n_hidden; ++i) {
      theta_new[i] = chain.theta[i] + sign * col[(std::size_t)i * n];
      sp_new[i] = params.field == RbmField::kReal ? softplus_real(theta_new[i].real())
                                                  : softplus_c(theta_new[i]).real();
      delta += sp_new[i] - chain.softplus_re[i];
    }
    ++chain.proposed;
    if (delta >= 0.0 || chain.rng.uniform() < std::exp(delta)) {
      chain.current.bits[j] ^= 1;
      std::swap(chain.theta, theta_new);
      std::swap(chain.softplus_re, sp_new);
      ++chain.accepted;
    }
  }
}

std::vector<Configuration> metropolis_chain(const RbmParams& params, int n_samples, int burn_in,
                                            int thin, std::uint64_t seed,
                                            double* acceptance_rate) {
  if (n_samples < 0) throw std::invalid_argument("rbm: sample count must be non-negative");
  if (thin < 0) thin = params.n_visible;
  MarkovChainState chain = init_chain(params, seed);
  metropolis_sweep(params, chain, burn_in * params.n_visible);
  std::vector<Configuration> samples;
  samples.reserve((std::size_t)n_samples);
  for (int s = 0; s < n_samples; ++s) {
    metropolis_sweep(params, chain, thin);
    samples.push_back(chain.current);
  }
  if (acceptance_rate != nullptr) *acceptance_rate = chain.acceptance_rate();
  return samples;
}

std::vector<Configuration> exact_sample_configurations(const RbmParams& params, int n_samples,
                                                       std::uint64_t seed) {
  if (params.n_visible > 20)
    throw std::invalid_argument("rbm: exact sampling limited to 20 visible units");
  if (n_samples < 0) throw std::invalid_argument("rbm: sample count must be non-negative");
  const std::size_t dim = std::size_t{1} << params.n_visible;
  std::vector<double> log_p(dim);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < dim; ++idx) {
    const Configuration sigma = Configuration::from_index(idx, params.n_visible);
    log_p[idx] = effective_energy(params, sigma).real();
    top = std::max(top, log_p[idx]);
  }
  std::vector<double> cdf(dim);
  double total = 0.0;
  for (std::size_t idx = 0; idx < dim; ++idx) {
    total += std::exp(log_p[idx] - top);
    cdf[idx] = total;
  }
  Rng rng(seed);
  std::vector<Configuration> samples;
  samples.reserve((std::size_t)n_samples);
  for (int s = 0; s < n_samples; ++s) {
    const double u = rng.uniform() * total;
    const std::size_t idx =
        (std::size_t)(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    samples.push_back(Configuration::from_index(std::min(idx, dim - 1), params.n_visible));
  }
  return samples;
}

std::vector<std::complex<double>> effective_energy_gradient(const RbmParams& params,
                                                            const Configuration& sigma) {
  check_sigma(params, sigma);
  std::vector<cplx> g(params.weights.size() + params.visible_bias.size() +
                          params.hidden_bias.size(),
                      0.0);
  accumulate_energy_gradient(params, sigma, 1.0, g);
  return g;
}

std::vector<double> nll_gradient(const RbmParams& params,
                                 const std::vector<Configuration>& data_batch,
                                 const std::vector<Configuration>& model_samples) {
  if (data_batch.empty() || model_samples.empty())
    throw std::invalid_argument("rbm: nll gradient needs data and model samples");
  std::vector<cplx> g(params.weights.size() + params.visible_bias.size() +
                          params.hidden_bias.size(),
                      0.0);
  const cplx wm = 1.0 / (double)model_samples.size();
  for (const Configuration& sigma : model_samples) {
    check_sigma(params, sigma);
    accumulate_energy_gradient(params, sigma, wm, g);
  }
  const cplx wd = -1.0 / (double)data_batch.size();
  for (const Configuration& sigma : data_batch) {
    check_sigma(params, sigma);
    accumulate_energy_gradient(params, sigma, wd, g);
  }
  for (cplx& v : g) v = std::conj(v);
  return flatten_gradient(params, g);
}

std::complex<double> rotated_log_amplitude(const RbmParams& params, const std::string& basis,
                                           const Configuration& outcome, int max_rotated_sites) {
  check_sigma(params, outcome);
  const RotatedExpansion ex = expand_rotated(basis, outcome, max_rotated_sites);
  std::vector<cplx> half_e(ex.configs.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < ex.configs.size(); ++m) {
    half_e[m] = 0.5 * effective_energy(params, ex.configs[m]);
    top = std::max(top, half_e[m].real());
  }
  cplx sum = 0.0;
  for (std::size_t m = 0; m < ex.configs.size(); ++m)
    sum += ex.weights[m] * std::exp(half_e[m] - top);
  return top + std::log(sum);
}

std::vector<double> multi_basis_nll_gradient(const RbmParams& params,
                                             std::span<const MeasurementRecord> batch,
                                             const std::vector<Configuration>& model_samples,
                                             int max_rotated_sites) {
  if (batch.empty() || model_samples.empty())
    throw std::invalid_argument("rbm: nll gradient needs data and model samples");
  std::vector<cplx> g(params.weights.size() + params.visible_bias.size() +
                          params.hidden_bias.size(),
                      0.0);
  const cplx wm = 1.0 / (double)model_samples.size();
  for (const Configuration& sigma : model_samples) {
    check_sigma(params, sigma);
    accumulate_energy_gradient(params, sigma, wm, g);
  }

  // Data term: d log A / d theta = (1/2) sum_m what_m dE(sigma'_m), with
  // what_m the normalized complex weights of the rotated expansion; the 1/2
  // cancels against the 2 Re of |A|^2.
  const cplx wd = -1.0 / (double)batch.size();
  for (const MeasurementRecord& record : batch) {
    check_sigma(params, record.outcome);
    const RotatedExpansion ex = expand_rotated(record.basis, record.outcome, max_rotated_sites);
    std::vector<cplx> half_e(ex.configs.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < ex.configs.size(); ++m) {
      half_e[m] = 0.5 * effective_energy(params, ex.configs[m]);
      top = std::max(top, half_e[m].real());
    }
    cplx norm = 0.0;
    std::vector<cplx> scaled(ex.configs.size());
    for (std::size_t m = 0; m < ex.configs.size(); ++m) {
      scaled[m] = ex.weights[m] * std::exp(half_e[m] - top);
      norm += scaled[m];
    }
    if (norm == cplx(0.0, 0.0))
      throw std::runtime_error("rbm: measured outcome has zero amplitude under the model");
    for (std::size_t m = 0; m < ex.configs.size(); ++m)
      accumulate_energy_gradient(params, ex.configs[m], wd * scaled[m] / norm, g);
  }
  for (cplx& v : g) v = std::conj(v);
  return flatten_gradient(params, g);
}

std::complex<double> local_observable(const RbmParams& params, const Configuration& sigma,
                                      const PauliSumHamiltonian& op) {
  check_sigma(params, sigma);
  const cplx half_e = 0.5 * effective_energy(params, sigma);
  cplx acc = 0.0;
  for (const auto& [prime, amp] : pauli_matrix_row(sigma, op))
    acc += std::conj(amp) * std::exp(0.5 * effective_energy(params, prime) - half_e);
  return acc;
}

std::pair<double, double> estimate_expectation(const RbmParams& params,
                                               const PauliSumHamiltonian& op, int n_samples,
                                               std::uint64_t seed) {
  if (n_samples <= 0) throw std::invalid_argument("rbm: sample count must be positive");
  const std::vector<Configuration> samples =
      metropolis_chain(params, n_samples, 1000, params.n_visible, seed);
  long double mean = 0.0L;
  std::vector<double> vals;
  vals.reserve(samples.size());
  for (const Configuration& sigma : samples) {
    vals.push_back(local_observable(params, sigma, op).real());
    mean += vals.back();
  }
  const double mu = (double)(mean / (long double)vals.size());
  if (vals.size() == 1) return {mu, 0.0};
  long double var = 0.0L;
  for (double v : vals) var += (long double)(v - mu) * (v - mu);
  const double stderr_ = std::sqrt((double)(var / ((long double)vals.size() * (vals.size() - 1))));
  return {mu, stderr_};
}

StateVector rbm_statevector(const RbmParams& params) {
  if (params.n_visible > 20)
    throw std::invalid_argument("rbm: statevector enumeration limited to 20 sites");
  const std::uint64_t dim = std::uint64_t{1} << params.n_visible;
  std::vector<cplx> half_e(dim);
  double top = -std::numeric_limits<double>::infinity();
  for (std::uint64_t u = 0; u < dim; ++u) {
    half_e[u] = 0.5 * effective_energy(params, Configuration::from_index(u, params.n_visible));
    top = std::max(top, half_e[u].real());
  }
  StateVector state;
  state.n_sites = params.n_visible;
  state.amplitudes.resize((Eigen::Index)dim);
  for (std::uint64_t u = 0; u < dim; ++u)
    state.amplitudes[(Eigen::Index)u] = std::exp(half_e[u] - top);
  state.normalize();
  return state;
}

namespace {

std::vector<TomographyIterationStats> run_tomography(
    RbmParams& params, const TomographyOptions& options,
    const std::function<void(int, Rng&, std::vector<std::size_t>&)>& fill_batch,
    const std::function<std::vector<double>(const std::vector<std::size_t>&,
                                            const std::vector<Configuration>&)>& gradient_fn,
    const std::function<double(const std::vector<std::size_t>&, double)>& nll_fn) {
  if (options.iterations <= 0 || options.n_samples_data <= 0 || options.n_samples <= 0)
    throw std::invalid_argument("rbm: tomography counts must be positive");

  std::vector<double> theta = params.flatten_params();
  AdaDeltaState opt(theta.size(), options.rho, options.eps);
  const int thin = options.thin < 0 ? params.n_visible : options.thin;
  const bool exact_diag = params.n_visible <= 12;

  PauliSumHamiltonian h_pauli, sx_op, sz_op;
  if (options.model != nullptr) {
    h_pauli = rydberg_to_pauli_sum(*options.model);
    sx_op = average_sx(params.n_visible);
    sz_op = average_sz(params.n_visible);
  }

  std::vector<TomographyIterationStats> history;
  history.reserve((std::size_t)options.iterations);
  std::vector<std::size_t> batch((std::size_t)options.n_samples_data);
  for (int it = 0; it < options.iterations; ++it) {
    // Fresh accumulators when the rotated bases come online: the stale
    // Z-phase statistics otherwise launch the first phase gradients with
    // oversized steps and the fit overshoots before settling.
    if (it == options.pretrain_z_iterations && it > 0)
      opt = AdaDeltaState(theta.size(), options.rho, options.eps);
    Rng batch_rng(derive_seed(options.seed, 2 * (std::uint64_t)it));
    fill_batch(it, batch_rng, batch);

    const std::uint64_t chain_seed = derive_seed(options.seed, 2 * (std::uint64_t)it + 1);
    std::vector<Configuration> model_samples;
    double acceptance = 0.0;
    if (options.exact_model_samples) {
      model_samples = exact_sample_configurations(params, options.n_samples, chain_seed);
      acceptance = 1.0;
    } else {
      const int n_chains = std::max(1, std::min(options.n_chains, options.n_samples));
      model_samples.reserve((std::size_t)options.n_samples);
      for (int c = 0; c < n_chains; ++c) {
        const int take = options.n_samples / n_chains + (c < options.n_samples % n_chains ? 1 : 0);
        double chain_acceptance = 0.0;
        std::vector<Configuration> part =
            metropolis_chain(params, take, options.burn_in_sweeps, thin,
                             derive_seed(chain_seed, (std::uint64_t)c), &chain_acceptance);
        acceptance += chain_acceptance / n_chains;
        model_samples.insert(model_samples.end(), part.begin(), part.end());
      }
    }

    const std::vector<double> grad = gradient_fn(batch, model_samples);
    adadelta_update(opt, theta, grad);
    params.unflatten_params(theta);

    TomographyIterationStats row;
    row.iteration = it;
    row.acceptance = acceptance;
    row.nll = exact_diag ? nll_fn(batch, log_partition(params)) : nan_value();
    row.fidelity = nan_value();
    row.energy_per_site = nan_value();
    row.sx = nan_value();
    row.sz = nan_value();
    if (exact_diag && (options.reference != nullptr || options.model != nullptr)) {
      const StateVector psi = rbm_statevector(params);
      if (options.reference != nullptr) row.fidelity = fidelity(psi, *options.reference);
      if (options.model != nullptr) {
        row.energy_per_site = expectation_pauli(psi, h_pauli) / params.n_visible;
        row.sx = expectation_pauli(psi, sx_op);
        row.sz = expectation_pauli(psi, sz_op);
      }
    }
    history.push_back(row);
  }
  return history;
}

}  // namespace

std::vector<TomographyIterationStats> train_tomography(RbmParams& params,
                                                       const std::vector<Configuration>& shots,
                                                       const TomographyOptions& options) {
  if (shots.empty()) throw std::invalid_argument("rbm: empty training set");
  for (const Configuration& sigma : shots) check_sigma(params, sigma);
  auto fill_batch = [&](int, Rng& rng, std::vector<std::size_t>& batch) {
    for (std::size_t& idx : batch) idx = rng.uniform_int(shots.size());
  };
  auto gradient_fn = [&](const std::vector<std::size_t>& batch,
                         const std::vector<Configuration>& model_samples) {
    std::vector<Configuration> data;
    data.reserve(batch.size());
    for (std::size_t idx : batch) data.push_back(shots[idx]);
    return nll_gradient(params, data, model_samples);
  };
  auto nll_fn = [&](const std::vector<std::size_t>& batch, double log_z) {
    long double acc = 0.0L;
    for (std::size_t idx : batch) acc += log_prob_unnormalized(params, shots[idx]);
    return log_z - (double)(acc / (long double)batch.size());
  };
  return run_tomography(params, options, fill_batch, gradient_fn, nll_fn);
}

std::vector<TomographyIterationStats> train_tomography(RbmParams& params,
                                                       const MeasurementDataset& shots,
                                                       const TomographyOptions& options) {
  if (shots.records.empty()) throw std::invalid_argument("rbm: empty training set");
  for (const MeasurementRecord& r : shots.records) check_sigma(params, r.outcome);
  std::vector<std::size_t> z_only;
  for (std::size_t i = 0; i < shots.records.size(); ++i)
    if (shots.records[i].basis.find_first_not_of('Z') == std::string::npos) z_only.push_back(i);
  const bool curriculum = !z_only.empty() && z_only.size() < shots.records.size();
  auto fill_batch = [&](int it, Rng& rng, std::vector<std::size_t>& batch) {
    const bool z_phase = curriculum && it < options.pretrain_z_iterations;
    for (std::size_t& idx : batch)
      idx = z_phase ? z_only[rng.uniform_int(z_only.size())]
                    : rng.uniform_int(shots.records.size());
  };
  auto gradient_fn = [&](const std::vector<std::size_t>& batch,
                         const std::vector<Configuration>& model_samples) {
    std::vector<MeasurementRecord> data;
    data.reserve(batch.size());
    for (std::size_t idx : batch) data.push_back(shots.records[idx]);
    return multi_basis_nll_gradient(params, data, model_samples, options.max_rotated_sites);
  };
  auto nll_fn = [&](const std::vector<std::size_t>& batch, double log_z) {
    long double acc = 0.0L;
    for (std::size_t idx : batch) {
      const MeasurementRecord& r = shots.records[idx];
      acc += 2.0 * rotated_log_amplitude(params, r.basis, r.outcome, options.max_rotated_sites)
                       .real();
    }
    return log_z - (double)(acc / (long double)batch.size());
  };
  return run_tomography(params, options, fill_batch, gradient_fn, nll_fn);
}

void save_rbm(const std::string& path, const RbmParams& params) {
  auto interleave = [](const std::vector<cplx>& v) {
    std::vector<double> out;
    out.reserve(2 * v.size());
    for (const cplx& z : v) {
      out.push_back(z.real());
      out.push_back(z.imag());
    }
    return out;
  };
  std::vector<NamedArray> arrays;
  arrays.push_back({"shape",
                    {3},
                    {(double)params.n_visible, (double)params.n_hidden,
                     params.field == RbmField::kComplex ? 1.0 : 0.0}});
  arrays.push_back(
      {"weights", {params.n_hidden, params.n_visible, 2}, interleave(params.weights)});
  arrays.push_back({"visible_bias", {params.n_visible, 2}, interleave(params.visible_bias)});
  arrays.push_back({"hidden_bias", {params.n_hidden, 2}, interleave(params.hidden_bias)});
  save_checkpoint(path, arrays);
  write_key_values(path + ".meta",
                   {{"n_visible", std::to_string(params.n_visible)},
                    {"n_hidden", std::to_string(params.n_hidden)},
                    {"field", params.field == RbmField::kComplex ? "complex" : "real"}});
}

RbmParams load_rbm(const std::string& path) {
  const std::vector<NamedArray> arrays = load_checkpoint(path);
  const NamedArray& shape = find_array(arrays, "shape");
  if (shape.values.size() != 3) throw std::runtime_error("rbm checkpoint: bad shape record");
  RbmParams params;
  params.n_visible = (int)shape.values[0];
  params.n_hidden = (int)shape.values[1];
  params.field = shape.values[2] != 0.0 ? RbmField::kComplex : RbmField::kReal;
  auto fill = [&](const std::string& name, std::vector<cplx>& dst, std::size_t n) {
    const NamedArray& a = find_array(arrays, name);
    if (a.values.size() != 2 * n)
      throw std::runtime_error("rbm checkpoint: array size mismatch for " + name);
    dst.resize(n);
    for (std::size_t i = 0; i < n; ++i) dst[i] = cplx(a.values[2 * i], a.values[2 * i + 1]);
  };
  fill("weights", params.weights, (std::size_t)params.n_hidden * params.n_visible);
  fill("visible_bias", params.visible_bias, (std::size_t)params.n_visible);
  fill("hidden_bias", params.hidden_bias, (std::size_t)params.n_hidden);
  return params;
}

}  // namespace nqs
