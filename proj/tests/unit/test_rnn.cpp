#include "nqs/rnn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "nqs/exact.hpp"
#include "nqs/lattice.hpp"
#include "nqs/optim.hpp"
#include "nqs/rng.hpp"

namespace {

using nqs::Configuration;
using nqs::GruParams;
using nqs::RnnWavefunction;
using nqs::RydbergModel;

// Random parameters of O(scale) magnitude, well away from the Glorot init.
RnnWavefunction random_rnn(int lx, int ly, int n_hidden, std::uint64_t seed,
                           double scale = 1.0) {
  RnnWavefunction psi = nqs::make_rnn(lx, ly, n_hidden, seed);
  nqs::Rng rng(seed + 77);
  std::vector<double> theta = psi.params.flatten_params();
  for (double& v : theta) v = rng.normal() * scale;
  psi.params.unflatten_params(theta);
  return psi;
}

RnnWavefunction zero_rnn(int lx, int ly, int n_hidden) {
  RnnWavefunction psi = nqs::make_rnn(lx, ly, n_hidden, 1);
  std::vector<double> theta(psi.params.n_params(), 0.0);
  psi.params.unflatten_params(theta);
  return psi;
}

std::vector<Configuration> all_configs(int n_sites) {
  std::vector<Configuration> configs;
  const std::uint64_t dim = std::uint64_t{1} << n_sites;
  configs.reserve(dim);
  for (std::uint64_t u = 0; u < dim; ++u)
    configs.push_back(Configuration::from_index(u, n_sites));
  return configs;
}

Configuration random_config(int n_sites, nqs::Rng& rng) {
  Configuration sigma(static_cast<std::size_t>(n_sites));
  for (auto& b : sigma.bits) b = rng.uniform() < 0.5 ? 1 : 0;
  return sigma;
}

// Strictly positive ground-state amplitudes (global sign fixed); valid
// because the off-diagonal part of the Hamiltonian is negative and
// irreducible.
std::vector<double> positive_ground(const nqs::StateVector& ground) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < ground.amplitudes.size(); ++k)
    total += ground.amplitudes(k).real();
  const double sign = total >= 0.0 ? 1.0 : -1.0;
  std::vector<double> amps(ground.amplitudes.size());
  for (Eigen::Index k = 0; k < ground.amplitudes.size(); ++k) {
    amps[k] = sign * ground.amplitudes(k).real();
    EXPECT_GT(amps[k], 0.0);
  }
  return amps;
}

TEST(RnnCell, ZeroParamsHalveTheState) {
  const RnnWavefunction psi = zero_rnn(2, 2, 5);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(GruParams::kInputDim);
  x(2) = 1.0;

  const Eigen::VectorXd h0 = nqs::gru_step(psi.params, Eigen::VectorXd::Zero(5), x);
  EXPECT_NEAR(h0.norm(), 0.0, 1e-15);

  Eigen::VectorXd v(5);
  v << 0.3, -1.2, 0.0, 2.0, -0.5;
  const Eigen::VectorXd h1 = nqs::gru_step(psi.params, v, x);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(h1(i), 0.5 * v(i), 1e-15);

  const Eigen::Vector2d p = nqs::conditional(psi.params, v);
  EXPECT_NEAR(p(0), 0.5, 1e-15);
  EXPECT_NEAR(p(1), 0.5, 1e-15);
}

TEST(RnnCell, UpdateGateInterpolatesTowardABoundedCandidate) {
  const RnnWavefunction psi = random_rnn(3, 2, 7, 5);
  nqs::Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd h(7);
    for (int i = 0; i < 7; ++i) h(i) = rng.normal() * 2.0;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(GruParams::kInputDim);
    x(static_cast<int>(rng.uniform_int(3))) = 1.0;
    const Eigen::VectorXd h_next = nqs::gru_step(psi.params, h, x);
    // h' = (1-z) h + z g with z in (0,1) and |g| < 1.
    for (int i = 0; i < 7; ++i)
      EXPECT_LE(std::abs(h_next(i)), std::max(std::abs(h(i)), 1.0) + 1e-12);
  }
}

TEST(RnnCell, ConditionalIsANormalizedShiftInvariantSoftmax) {
  RnnWavefunction psi = random_rnn(2, 2, 6, 3);
  nqs::Rng rng(4);
  Eigen::VectorXd h(6);
  for (int i = 0; i < 6; ++i) h(i) = rng.normal();

  const Eigen::Vector2d p = nqs::conditional(psi.params, h);
  EXPECT_NEAR(p(0) + p(1), 1.0, 1e-15);
  EXPECT_GT(p(0), 0.0);
  EXPECT_GT(p(1), 0.0);

  RnnWavefunction shifted = psi;
  shifted.params.c_out.array() += 3.7;
  const Eigen::Vector2d q = nqs::conditional(shifted.params, h);
  EXPECT_NEAR(q(0), p(0), 1e-12);
  EXPECT_NEAR(q(1), p(1), 1e-12);

  // A large logit gap saturates the head.
  RnnWavefunction hard = psi;
  hard.params.u_out.row(0).setConstant(10.0);
  hard.params.u_out.row(1).setConstant(-10.0);
  const Eigen::Vector2d s = nqs::conditional(hard.params, Eigen::VectorXd::Ones(6));
  EXPECT_GT(s(0), 1.0 - 1e-9);
}

TEST(RnnOrder, SnakeAlternatesRowDirections) {
  const std::vector<int> o33 = nqs::snake_order(3, 3);
  const std::vector<int> want33 = {0, 1, 2, 5, 4, 3, 6, 7, 8};
  EXPECT_EQ(o33, want33);

  const std::vector<int> o42 = nqs::snake_order(4, 2);
  const std::vector<int> want42 = {0, 1, 2, 3, 7, 6, 5, 4};
  EXPECT_EQ(o42, want42);

  std::vector<int> o54 = nqs::snake_order(5, 4);
  std::sort(o54.begin(), o54.end());
  for (int k = 0; k < 20; ++k) EXPECT_EQ(o54[k], k);

  EXPECT_THROW(nqs::snake_order(0, 3), std::invalid_argument);
}

TEST(RnnLogPsi, ZeroParamsGiveTheUniformState) {
  const RnnWavefunction psi = zero_rnn(4, 3, 6);
  nqs::Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const Configuration sigma = random_config(12, rng);
    EXPECT_NEAR(nqs::log_psi(psi, sigma), -6.0 * std::log(2.0), 1e-12);
  }
}

TEST(RnnLogPsi, ProbabilitiesSumToOneForAnyParameters) {
  struct Case {
    int lx, ly, nh;
    double scale;
    std::uint64_t seed;
  };
  const std::vector<Case> cases = {
      {2, 2, 4, 1.0, 1}, {3, 2, 6, 2.0, 2}, {3, 3, 5, 0.5, 3}, {4, 3, 8, 1.5, 4}};
  for (const Case& c : cases) {
    const RnnWavefunction psi = random_rnn(c.lx, c.ly, c.nh, c.seed, c.scale);
    const auto configs = all_configs(c.lx * c.ly);
    const auto lp = nqs::log_psi_batch(psi, configs);
    long double total = 0.0L;
    for (double v : lp) total += std::exp(2.0L * (long double)v);
    EXPECT_NEAR((double)total, 1.0, 1e-10);
  }
}

TEST(RnnLogPsi, RaisingTheOccupiedLogitFavoursOccupation) {
  const RnnWavefunction psi = random_rnn(3, 2, 5, 8);
  RnnWavefunction bumped = psi;
  bumped.params.c_out(1) += 1.0;

  Configuration ones(std::size_t{6});
  for (auto& b : ones.bits) b = 1;
  Configuration zeros(std::size_t{6});

  EXPECT_GT(nqs::log_psi(bumped, ones), nqs::log_psi(psi, ones));
  EXPECT_LT(nqs::log_psi(bumped, zeros), nqs::log_psi(psi, zeros));
}

TEST(RnnLogPsi, RejectsMismatchedConfigurations) {
  const RnnWavefunction psi = random_rnn(2, 2, 4, 2);
  EXPECT_THROW(nqs::log_psi(psi, Configuration(std::size_t{5})), std::invalid_argument);
}

TEST(RnnSampling, ZeroParamsSampleUniformly) {
  const RnnWavefunction psi = zero_rnn(2, 2, 4);
  const auto batch = nqs::sample_rnn(psi, 100000, 17);
  std::vector<int> counts(16, 0);
  for (const Configuration& sigma : batch.configurations)
    counts[sigma.to_index()]++;
  const double expected = 100000.0 / 16.0;
  const double sigma3 = 3.0 * std::sqrt(100000.0 * (1.0 / 16.0) * (15.0 / 16.0));
  for (int k = 0; k < 16; ++k) EXPECT_NEAR(counts[k], expected, sigma3);
}

TEST(RnnSampling, LogProbsMatchTheEvaluatorAndSeedsAreReproducible) {
  const RnnWavefunction psi = random_rnn(3, 2, 6, 12, 0.9);
  const auto batch = nqs::sample_rnn(psi, 200, 33);
  for (int i = 0; i < 200; ++i) {
    EXPECT_NEAR(batch.log_probs[i], 2.0 * nqs::log_psi(psi, batch.configurations[i]),
                1e-12);
  }

  const auto again = nqs::sample_rnn(psi, 200, 33);
  for (int i = 0; i < 200; ++i)
    EXPECT_EQ(batch.configurations[i].to_index(), again.configurations[i].to_index());

  const auto other = nqs::sample_rnn(psi, 200, 34);
  bool any_diff = false;
  for (int i = 0; i < 200; ++i)
    any_diff = any_diff || batch.configurations[i].to_index() != other.configurations[i].to_index();
  EXPECT_TRUE(any_diff);
}

TEST(RnnSampling, FrequenciesFollowTheSquaredAmplitudes) {
  const RnnWavefunction psi = random_rnn(2, 2, 5, 6, 1.0);
  const int n_draws = 100000;
  const auto batch = nqs::sample_rnn(psi, n_draws, 71);
  std::vector<int> counts(16, 0);
  for (const Configuration& sigma : batch.configurations) counts[sigma.to_index()]++;

  const auto configs = all_configs(4);
  const auto lp = nqs::log_psi_batch(psi, configs);
  double chi2 = 0.0;
  for (int k = 0; k < 16; ++k) {
    const double expected = n_draws * std::exp(2.0 * lp[k]);
    chi2 += (counts[k] - expected) * (counts[k] - expected) / std::max(expected, 1e-9);
  }
  EXPECT_LT(chi2, 40.0);  // chi^2, 15 dof
}

TEST(RnnLocalEnergy, OmegaZeroLeavesOnlyTheDiagonal) {
  RydbergModel model{nqs::LatticeGeometry::square(3, 2), 0.0, 1.3, 2.0, 3};
  const RnnWavefunction psi = random_rnn(3, 2, 5, 14);
  nqs::Rng rng(15);
  std::vector<Configuration> sigmas;
  for (int k = 0; k < 20; ++k) sigmas.push_back(random_config(6, rng));
  const auto eloc = nqs::local_energy(psi, model, sigmas);
  for (int k = 0; k < 20; ++k)
    EXPECT_DOUBLE_EQ(eloc[k], nqs::diagonal_energy(sigmas[k], model));
}

TEST(RnnLocalEnergy, SuffixWalkMatchesTheCallbackPath) {
  RydbergModel model{nqs::LatticeGeometry::square(3, 3), 1.0, 0.7, 3.0, 3};
  const RnnWavefunction psi = random_rnn(3, 3, 6, 18, 0.8);
  nqs::Rng rng(19);
  std::vector<Configuration> sigmas;
  for (int k = 0; k < 50; ++k) sigmas.push_back(random_config(9, rng));

  const auto fast = nqs::local_energy(psi, model, sigmas);
  const auto slow = nqs::local_energy(
      [&psi](const Configuration& sigma) { return nqs::log_psi(psi, sigma); }, model, sigmas);
  for (int k = 0; k < 50; ++k)
    EXPECT_NEAR(fast[k], slow[k], 1e-10 * std::max(1.0, std::abs(slow[k])));
}

TEST(RnnLocalEnergy, ExactGroundStateHasConstantLocalEnergy) {
  RydbergModel model{nqs::LatticeGeometry::square(2, 2), 1.0, 1.0, 3.0, 3};
  const auto spectrum = nqs::solve_spectrum(model);
  const auto amps = positive_ground(spectrum.ground);

  const auto log_amp = [&amps](const Configuration& sigma) {
    return std::log(amps[sigma.to_index()]);
  };
  const auto eloc = nqs::local_energy(log_amp, model, all_configs(4));
  for (double e : eloc) EXPECT_NEAR(e, spectrum.e0, 1e-7);
}

TEST(RnnLocalEnergy, EnumeratedMeanMatchesTheDenseExpectation) {
  RydbergModel model{nqs::LatticeGeometry::square(3, 3), 1.0, 0.5, 3.0, 3};
  const RnnWavefunction psi = random_rnn(3, 3, 6, 25, 0.8);

  const auto configs = all_configs(9);
  const auto eloc = nqs::local_energy(psi, model, configs);
  const auto lp = nqs::log_psi_batch(psi, configs);
  double mean = 0.0;
  for (std::size_t k = 0; k < configs.size(); ++k) mean += std::exp(2.0 * lp[k]) * eloc[k];

  const Eigen::MatrixXd h = nqs::build_dense_hamiltonian(model);
  const Eigen::VectorXd v = nqs::rnn_statevector(psi).amplitudes.real();
  const double dense = v.dot(h * v) / v.squaredNorm();
  EXPECT_NEAR(mean, dense, 1e-8 * std::max(1.0, std::abs(dense)));
}

TEST(RnnGradient, BackpropMatchesFiniteDifferences) {
  RnnWavefunction psi = random_rnn(3, 1, 4, 31, 1.0);
  const Configuration sigma = {1, 0, 1};
  const auto grad = nqs::log_psi_gradient(psi, sigma);

  std::vector<double> theta = psi.params.flatten_params();
  ASSERT_EQ(grad.size(), theta.size());
  const double h = 1e-5;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    theta[k] = saved + h;
    psi.params.unflatten_params(theta);
    const double up = nqs::log_psi(psi, sigma);
    theta[k] = saved - h;
    psi.params.unflatten_params(theta);
    const double down = nqs::log_psi(psi, sigma);
    theta[k] = saved;
    const double fd = (up - down) / (2.0 * h);
    num += (grad[k] - fd) * (grad[k] - fd);
    den += fd * fd;
  }
  psi.params.unflatten_params(theta);
  EXPECT_LT(std::sqrt(num), 1e-6 * std::max(1.0, std::sqrt(den)));
}

TEST(RnnGradient, EstimatorGradientMatchesTheSurrogateLoss) {
  RydbergModel model{nqs::LatticeGeometry::square(2, 2), 1.0, 1.0, 3.0, 3};
  RnnWavefunction psi = random_rnn(2, 2, 6, 41, 0.7);
  const auto batch = nqs::sample_rnn(psi, 30, 42);
  const auto& sigmas = batch.configurations;

  const auto eloc = nqs::local_energy(psi, model, sigmas);
  double mean = 0.0;
  for (double e : eloc) mean += e;
  mean /= eloc.size();

  for (const auto estimator :
       {nqs::GradientEstimator::kPlain, nqs::GradientEstimator::kVarianceReduced}) {
    const auto eg = nqs::energy_and_gradient(psi, model, sigmas, estimator);
    EXPECT_NEAR(eg.energy, mean, 1e-10 * std::max(1.0, std::abs(mean)));

    // Frozen-coefficient surrogate whose gradient the estimator reports:
    // L(theta) = (2/B) sum_i log psi_theta(sigma_i) (E_i - baseline).
    const double baseline = estimator == nqs::GradientEstimator::kVarianceReduced ? mean : 0.0;
    const std::vector<double> theta0 = psi.params.flatten_params();
    auto surrogate = [&](const std::vector<double>& theta) {
      RnnWavefunction probe = psi;
      probe.params.unflatten_params(theta);
      const auto lp = nqs::log_psi_batch(probe, sigmas);
      double loss = 0.0;
      for (std::size_t i = 0; i < sigmas.size(); ++i)
        loss += 2.0 * lp[i] * (eloc[i] - baseline);
      return loss / sigmas.size();
    };

    nqs::Rng rng(43);
    const double h = 1e-5;
    for (int dir = 0; dir < 4; ++dir) {
      std::vector<double> v(theta0.size());
      double norm = 0.0;
      for (double& u : v) {
        u = rng.normal();
        norm += u * u;
      }
      norm = std::sqrt(norm);
      double slope = 0.0;
      std::vector<double> up = theta0, down = theta0;
      for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] /= norm;
        slope += eg.gradient[k] * v[k];
        up[k] += h * v[k];
        down[k] -= h * v[k];
      }
      const double fd = (surrogate(up) - surrogate(down)) / (2.0 * h);
      EXPECT_NEAR(slope, fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(RnnGradient, EstimatorsShareTheExactExpectation) {
  RydbergModel model{nqs::LatticeGeometry::square(3, 1), 1.0, 0.7, 3.0, 2};
  RnnWavefunction psi = random_rnn(3, 1, 5, 51, 0.9);

  const auto configs = all_configs(3);
  const auto lp = nqs::log_psi_batch(psi, configs);
  const auto eloc = nqs::local_energy(psi, model, configs);

  double energy = 0.0;
  for (std::size_t k = 0; k < configs.size(); ++k) energy += std::exp(2.0 * lp[k]) * eloc[k];

  const std::size_t n = psi.params.n_params();
  std::vector<double> g_plain(n, 0.0), g_reduced(n, 0.0);
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const double p = std::exp(2.0 * lp[k]);
    const auto dlog = nqs::log_psi_gradient(psi, configs[k]);
    for (std::size_t j = 0; j < n; ++j) {
      g_plain[j] += p * 2.0 * dlog[j] * eloc[k];
      g_reduced[j] += p * 2.0 * dlog[j] * (eloc[k] - energy);
    }
  }

  // Identical expectations: <dlogpsi> vanishes for a normalized state.
  double diff = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    diff = std::max(diff, std::abs(g_plain[j] - g_reduced[j]));
    scale = std::max(scale, std::abs(g_plain[j]));
  }
  EXPECT_LT(diff, 1e-8 * std::max(1.0, scale));

  // And both match the finite-difference slope of the exact energy.
  std::vector<double> theta = psi.params.flatten_params();
  auto exact_energy = [&](const std::vector<double>& t) {
    RnnWavefunction probe = psi;
    probe.params.unflatten_params(t);
    const auto lpp = nqs::log_psi_batch(probe, configs);
    const auto el = nqs::local_energy(probe, model, configs);
    double e = 0.0;
    for (std::size_t k = 0; k < configs.size(); ++k) e += std::exp(2.0 * lpp[k]) * el[k];
    return e;
  };
  nqs::Rng rng(52);
  const double h = 1e-5;
  std::vector<double> v(n);
  double norm = 0.0;
  for (double& u : v) {
    u = rng.normal();
    norm += u * u;
  }
  norm = std::sqrt(norm);
  double slope = 0.0;
  std::vector<double> up = theta, down = theta;
  for (std::size_t k = 0; k < n; ++k) {
    v[k] /= norm;
    slope += g_plain[k] * v[k];
    up[k] += h * v[k];
    down[k] -= h * v[k];
  }
  const double fd = (exact_energy(up) - exact_energy(down)) / (2.0 * h);
  EXPECT_NEAR(slope, fd, 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST(RnnGradient, SampledOverloadMatchesAnExplicitBatch) {
  RydbergModel model{nqs::LatticeGeometry::square(2, 2), 1.0, 1.0, 3.0, 3};
  const RnnWavefunction psi = random_rnn(2, 2, 5, 45, 0.8);
  const auto direct = nqs::energy_and_gradient(psi, model, 40, 46);
  const auto batch = nqs::sample_rnn(psi, 40, 46);
  const auto explicit_batch = nqs::energy_and_gradient(psi, model, batch.configurations);
  EXPECT_EQ(direct.energy, explicit_batch.energy);
  EXPECT_EQ(direct.gradient, explicit_batch.gradient);
}

TEST(RnnGradient, VarianceReducedGradientVanishesOnAConstantBatch) {
  RydbergModel model{nqs::LatticeGeometry::square(2, 2), 0.0, 1.0, 3.0, 3};
  const RnnWavefunction psi = random_rnn(2, 2, 5, 61);
  const std::vector<Configuration> sigmas(16, Configuration{1, 0, 0, 1});
  const auto eg =
      nqs::energy_and_gradient(psi, model, sigmas, nqs::GradientEstimator::kVarianceReduced);
  EXPECT_EQ(eg.local_energy_variance, 0.0);
  for (double g : eg.gradient) EXPECT_EQ(g, 0.0);
}

TEST(RnnGradient, BaselineShrinksTheSampleVariance) {
  RydbergModel model{nqs::LatticeGeometry::square(2, 2), 1.0, 1.0, 3.0, 3};
  RnnWavefunction psi = nqs::make_rnn(2, 2, 8, 71);
  nqs::VmcOptions options;
  options.n_samples = 100;
  options.epochs = 200;
  options.learning_rate = 5e-3;
  options.seed = 72;
  nqs::train_vmc(psi, model, options);

  const auto batch = nqs::sample_rnn(psi, 500, 73);
  const auto eloc = nqs::local_energy(psi, model, batch.configurations);
  double mean = 0.0;
  for (double e : eloc) mean += e;
  mean /= eloc.size();

  const std::size_t n = psi.params.n_params();
  std::vector<std::vector<double>> dlog(batch.configurations.size());
  for (std::size_t i = 0; i < batch.configurations.size(); ++i)
    dlog[i] = nqs::log_psi_gradient(psi, batch.configurations[i]);

  auto vector_variance = [&](double baseline) {
    std::vector<double> sum(n, 0.0);
    double sq = 0.0;
    for (std::size_t i = 0; i < dlog.size(); ++i) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double term = 2.0 * dlog[i][j] * (eloc[i] - baseline);
        sum[j] += term;
        norm2 += term * term;
      }
      sq += norm2;
    }
    double mean2 = 0.0;
    for (double s : sum) mean2 += (s / dlog.size()) * (s / dlog.size());
    return sq / dlog.size() - mean2;
  };

  const double var_plain = vector_variance(0.0);
  const double var_reduced = vector_variance(mean);
  EXPECT_LT(var_reduced, var_plain);
}

TEST(RnnVmc, TrainingLowersEnergyAndLocalEnergyVariance) {
  RydbergModel model{nqs::LatticeGeometry::square(2, 2), 1.0, 1.0, 3.0, 3};
  const auto spectrum = nqs::solve_spectrum(model);

  RnnWavefunction psi = nqs::make_rnn(2, 2, 16, 81);
  nqs::VmcOptions options;
  options.n_samples = 200;
  options.epochs = 300;
  options.learning_rate = 5e-3;
  options.seed = 82;
  const auto history = nqs::train_vmc(psi, model, options);
  ASSERT_EQ(history.size(), 300u);

  const double final_energy = history.back().energy;
  EXPECT_NEAR(final_energy, spectrum.e0, 0.05 * std::abs(spectrum.e0));
  EXPECT_LT(history.back().local_energy_variance,
            0.1 * history.front().local_energy_variance);

  // The optimized state still satisfies the variational bound.
  const auto configs = all_configs(4);
  const auto lp = nqs::log_psi_batch(psi, configs);
  const auto eloc = nqs::local_energy(psi, model, configs);
  double enumerated = 0.0;
  for (std::size_t k = 0; k < configs.size(); ++k)
    enumerated += std::exp(2.0 * lp[k]) * eloc[k];
  EXPECT_GE(enumerated, spectrum.e0 - 1e-8);
}

TEST(RnnVmc, EnumeratedEnergyRespectsTheVariationalBoundThroughoutTraining) {
  RydbergModel model{nqs::LatticeGeometry::square(2, 2), 1.0, 1.0, 3.0, 3};
  const auto spectrum = nqs::solve_spectrum(model);
  const auto configs = all_configs(4);

  RnnWavefunction psi = nqs::make_rnn(2, 2, 8, 131);
  std::vector<double> theta = psi.params.flatten_params();
  nqs::AdamState opt(theta.size(), 5e-3);
  for (int epoch = 0; epoch < 60; ++epoch) {
    const auto eg = nqs::energy_and_gradient(psi, model, 100, nqs::derive_seed(132, epoch));
    nqs::adam_update(opt, theta, eg.gradient);
    psi.params.unflatten_params(theta);

    const auto lp = nqs::log_psi_batch(psi, configs);
    const auto eloc = nqs::local_energy(psi, model, configs);
    double enumerated = 0.0;
    for (std::size_t k = 0; k < configs.size(); ++k)
      enumerated += std::exp(2.0 * lp[k]) * eloc[k];
    EXPECT_GE(enumerated, spectrum.e0 - 1e-8);
  }
}

TEST(RnnStatevector, MatchesTheEvaluatorAndIsNormalized) {
  const RnnWavefunction psi = random_rnn(3, 2, 6, 91, 0.8);
  const auto state = nqs::rnn_statevector(psi);
  EXPECT_EQ(state.n_sites, 6);
  EXPECT_NEAR(state.norm_sq(), 1.0, 1e-10);

  nqs::Rng rng(92);
  for (int k = 0; k < 5; ++k) {
    const Configuration sigma = random_config(6, rng);
    EXPECT_NEAR(state.amplitudes(sigma.to_index()).real(),
                std::exp(nqs::log_psi(psi, sigma)), 1e-13);
    EXPECT_EQ(state.amplitudes(sigma.to_index()).imag(), 0.0);
  }

  const RnnWavefunction big = nqs::make_rnn(17, 1, 2, 1);
  EXPECT_THROW(nqs::rnn_statevector(big), std::invalid_argument);
}

TEST(RnnParams, FlattenUnflattenRoundTrip) {
  RnnWavefunction psi = random_rnn(3, 2, 7, 101);
  const std::vector<double> theta = psi.params.flatten_params();
  EXPECT_EQ(theta.size(), psi.params.n_params());

  RnnWavefunction other = nqs::make_rnn(3, 2, 7, 999);
  other.params.unflatten_params(theta);
  EXPECT_EQ(other.params.flatten_params(), theta);

  std::vector<double> wrong(theta.size() + 1, 0.0);
  EXPECT_THROW(psi.params.unflatten_params(wrong), std::invalid_argument);
}

TEST(RnnInit, SeededGlorotKernelsWithZeroBiases) {
  const RnnWavefunction a = nqs::make_rnn(3, 3, 10, 7);
  const RnnWavefunction b = nqs::make_rnn(3, 3, 10, 7);
  const RnnWavefunction c = nqs::make_rnn(3, 3, 10, 8);
  EXPECT_EQ(a.params.flatten_params(), b.params.flatten_params());
  EXPECT_NE(a.params.flatten_params(), c.params.flatten_params());

  EXPECT_NEAR(a.params.b_update.norm(), 0.0, 0.0);
  EXPECT_NEAR(a.params.b_reset.norm(), 0.0, 0.0);
  EXPECT_NEAR(a.params.b_candidate.norm(), 0.0, 0.0);
  EXPECT_NEAR(a.params.c_out.norm(), 0.0, 0.0);

  const double limit = std::sqrt(6.0 / (10 + 13));
  EXPECT_LE(a.params.w_update.cwiseAbs().maxCoeff(), limit);
  EXPECT_GT(a.params.w_update.cwiseAbs().maxCoeff(), 0.5 * limit);
  const double out_limit = std::sqrt(6.0 / (2 + 10));
  EXPECT_LE(a.params.u_out.cwiseAbs().maxCoeff(), out_limit);
}

TEST(RnnCheckpoint, RoundTripsThroughDisk) {
  const RnnWavefunction psi = random_rnn(3, 3, 6, 111, 0.9);
  const std::string path =
      (std::filesystem::temp_directory_path() / "nqs_test_rnn.ckpt").string();
  nqs::save_rnn(path, psi);
  const RnnWavefunction loaded = nqs::load_rnn(path);

  EXPECT_EQ(loaded.order, psi.order);
  EXPECT_EQ(loaded.params.n_hidden, psi.params.n_hidden);
  EXPECT_EQ(loaded.params.flatten_params(), psi.params.flatten_params());

  const Configuration sigma = {1, 0, 0, 1, 0, 1, 0, 0, 1};
  EXPECT_DOUBLE_EQ(nqs::log_psi(loaded, sigma), nqs::log_psi(psi, sigma));

  std::remove(path.c_str());
  std::remove((path + ".meta").c_str());
}

}  // namespace
