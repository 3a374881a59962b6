#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

namespace nqs {

// Occupation pattern of the atom array; bits[j] == 1 means site j is in the
// Rydberg state |e>, 0 the ground state |g>. The computational-basis index
// of a configuration puts site j at bit j (site 0 = least significant bit).
struct Configuration {
  std::vector<std::uint8_t> bits;

  Configuration() = default;
  explicit Configuration(std::size_t n_sites) : bits(n_sites, 0) {}
  Configuration(std::initializer_list<int> values) {
    bits.reserve(values.size());
    for (int v : values) bits.push_back(static_cast<std::uint8_t>(v != 0));
  }

  std::size_t size() const { return bits.size(); }

  std::uint64_t to_index() const {
    std::uint64_t idx = 0;
    for (std::size_t j = 0; j < bits.size(); ++j)
      idx |= static_cast<std::uint64_t>(bits[j] & 1) << j;
    return idx;
  }

  static Configuration from_index(std::uint64_t index, std::size_t n_sites) {
    Configuration c(n_sites);
    for (std::size_t j = 0; j < n_sites; ++j)
      c.bits[j] = static_cast<std::uint8_t>((index >> j) & 1);
    return c;
  }

  Configuration flipped(std::size_t site) const {
    Configuration c = *this;
    c.bits[site] ^= 1;
    return c;
  }

  bool operator==(const Configuration&) const = default;
};

// Square lattice with unit spacing, open boundaries. Site order is
// row-major: site = y*lx + x.
struct LatticeGeometry {
  int lx = 1;
  int ly = 1;
  std::vector<std::array<int, 2>> coords;

  static LatticeGeometry square(int lx, int ly);

  int n_sites() const { return lx * ly; }
  int site(int x, int y) const { return y * lx + x; }
};

// H = -Omega sum_r Sx(r) - delta sum_r P(r) + sum_{i<j} V(r_i - r_j) P_i P_j
// with V(d) = v0 / d^6 and P = |e><e|. Interactions are kept up to `cutoff`
// distance shells (shell 1: d^2 = 1, shell 2: d^2 = 2, shell 3: d^2 = 4).
struct RydbergModel {
  LatticeGeometry geometry;
  double omega = 1.0;  // Rabi frequency (MHz)
  double delta = 0.0;  // detuning (MHz)
  double v0 = 3.0;     // nearest-neighbour interaction (MHz)
  int cutoff = 3;      // number of distance shells kept

  int n_sites() const { return geometry.n_sites(); }
};

struct Coupling {
  int i;
  int j;
  double v;
};

// Real-weighted sum of Pauli strings. Letter k of `paulis` acts on site k
// ('I', 'X', 'Y' or 'Z'); all strings must share one length.
struct PauliTerm {
  double coeff;
  std::string paulis;
};

struct PauliSumHamiltonian {
  std::vector<PauliTerm> terms;

  int n_sites() const {
    return terms.empty() ? 0 : static_cast<int>(terms.front().paulis.size());
  }
};

// Unordered interacting pairs (i < j) within the shell cutoff.
std::vector<Coupling> build_couplings(const RydbergModel& model);

// <sigma|H|sigma>: detuning plus pair interactions.
double diagonal_energy(const Configuration& sigma, const RydbergModel& model);
double diagonal_energy(const Configuration& sigma, const RydbergModel& model,
                       const std::vector<Coupling>& couplings);

// Off-diagonal row of H in the occupation basis: the N single-site flips,
// each with matrix element -Omega/2.
std::vector<std::pair<Configuration, double>> connected_configs(
    const Configuration& sigma, const RydbergModel& model);

// Row <sigma'|H|sigma> of a Pauli-sum Hamiltonian, merged over terms with
// exact-zero entries dropped.
std::vector<std::pair<Configuration, std::complex<double>>> pauli_matrix_row(
    const Configuration& sigma, const PauliSumHamiltonian& ham);

// Rewrites the Rydberg Hamiltonian over {I,X,Z}: P = (1 - Z)/2, Sx = X/2.
PauliSumHamiltonian rydberg_to_pauli_sum(const RydbergModel& model);

// Monitoring observables: (1/N) sum_j S^x_j and (1/N) sum_j S^z_j.
PauliSumHamiltonian average_sx(int n_sites);
PauliSumHamiltonian average_sz(int n_sites);

RydbergModel load_model(const std::string& path);
void save_model(const std::string& path, const RydbergModel& model);
PauliSumHamiltonian load_pauli_sum(const std::string& path);
void save_pauli_sum(const std::string& path, const PauliSumHamiltonian& ham);

}  // namespace nqs
