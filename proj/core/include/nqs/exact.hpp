#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "nqs/data.hpp"
#include "nqs/lattice.hpp"

namespace nqs {

// Normalized wavefunction over the full occupation basis; amplitudes[idx]
// belongs to Configuration::from_index(idx, n_sites).
struct StateVector {
  Eigen::VectorXcd amplitudes;
  int n_sites = 0;

  static StateVector basis_state(std::uint64_t index, int n_sites);

  double norm_sq() const { return amplitudes.squaredNorm(); }
  void normalize();
};

struct SpectrumResult {
  double e0 = 0.0;
  double e1 = 0.0;
  double gap = 0.0;                // |e1 - e0|
  std::vector<double> energies;    // the n_states lowest levels
  StateVector ground;
};

// Dense matrix in the occupation basis; refuses more than `max_sites` sites.
Eigen::MatrixXd build_dense_hamiltonian(const RydbergModel& model, int max_sites = 12);

// Row-compressed sparse matrix (diagonal + N flips per row).
Eigen::SparseMatrix<double> build_sparse_hamiltonian(const RydbergModel& model,
                                                     int max_sites = 20);

struct LanczosOptions {
  int n_eigs = 2;
  double tol = 1e-9;      // residual ||Hv - Ev|| per eigenpair
  int max_basis = 110;    // Krylov basis size between restarts
  int n_keep = 24;        // Ritz vectors carried through a restart
  int max_restarts = 400;
  std::uint64_t seed = 7;
};

struct LanczosResult {
  std::vector<double> eigenvalues;
  std::vector<Eigen::VectorXd> eigenvectors;
  std::vector<double> residuals;
  int matvecs = 0;
};

// Thick-restart Lanczos with full reorthogonalization for the lowest
// eigenpairs of a symmetric sparse matrix. Throws on non-convergence.
LanczosResult lanczos_lowest(const Eigen::SparseMatrix<double>& h,
                             const LanczosOptions& opts = {});

// Lowest two levels and the ground state. Dense solve up to 12 sites,
// Lanczos up to 20.
SpectrumResult solve_spectrum(const RydbergModel& model, int n_states = 2);

// Neel order parameter <|m|> with m = N^-1 sum_r (-1)^(x+y) Sz(r) and
// Sz = +1/2 for an empty site. m is diagonal, and the absolute value is
// taken per basis state: on even lattices the exact ordered ground state is
// a symmetric superposition of both checkerboards whose site-resolved <Sz>
// vanishes, yet each measured configuration is fully ordered.
double staggered_magnetization(const StateVector& state, const LatticeGeometry& geometry);

// n(k) = N^-1/2 sum_r exp(i k.r) <n(r)>, n = |e><e|.
std::complex<double> momentum_occupation(const StateVector& state,
                                         const LatticeGeometry& geometry, double kx,
                                         double ky);

// <state|P|state> for a real-weighted Pauli sum (Hermitian).
double expectation_pauli(const StateVector& state, const PauliSumHamiltonian& ham);

// Dense matrix of a Pauli sum, for small cross-checks.
Eigen::MatrixXcd build_dense_pauli_matrix(const PauliSumHamiltonian& ham, int max_sites = 10);

// Maps amplitudes into the measurement basis given per site: 'Z' leaves a
// site alone, 'X' applies the Hadamard, 'Y' applies (1/sqrt2)[[1,-i],[1,i]].
void apply_basis_rotation(Eigen::VectorXcd& amplitudes, const std::string& basis);
StateVector rotate_state(const StateVector& state, const std::string& basis);

// Exact Born sampling: for every basis in `bases`, rotates the state and
// draws n_per_basis outcomes by inverse CDF. Deterministic in the seed.
MeasurementDataset sample_measurements(const StateVector& state,
                                       const std::vector<std::string>& bases,
                                       int n_per_basis, std::uint64_t seed);

// |<a|b>|^2, insensitive to global phase and to overall normalization.
double fidelity(const StateVector& a, const StateVector& b);

// Raw little-endian complex doubles plus a '<path>.meta' text sidecar
// recording length, site count and ordering.
void save_statevector(const std::string& path, const StateVector& state);
StateVector load_statevector(const std::string& path);

}  // namespace nqs
