#include "nqs/exact.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "nqs/rng.hpp"

namespace nqs {

namespace {

std::uint64_t dimension_checked(int n_sites, int max_sites, const char* what) {
  if (n_sites < 1) throw std::invalid_argument("system has no sites");
  if (n_sites > max_sites)
    throw std::invalid_argument(std::string(what) + ": site count exceeds limit");
  return std::uint64_t{1} << n_sites;
}

// Per-basis-state diagonal <idx|H|idx> for all idx at once.
Eigen::VectorXd diagonal_table(const RydbergModel& model) {
  const int n = model.n_sites();
  const std::uint64_t dim = std::uint64_t{1} << n;
  const auto couplings = build_couplings(model);
  Eigen::VectorXd diag(static_cast<Eigen::Index>(dim));
  for (std::uint64_t idx = 0; idx < dim; ++idx) {
    double e = -model.delta * std::popcount(idx);
    for (const auto& c : couplings)
      e += c.v * (((idx >> c.i) & (idx >> c.j)) & 1);
    diag[static_cast<Eigen::Index>(idx)] = e;
  }
  return diag;
}

}  // namespace

StateVector StateVector::basis_state(std::uint64_t index, int n_sites) {
  const std::uint64_t dim = dimension_checked(n_sites, 30, "basis_state");
  if (index >= dim) throw std::invalid_argument("basis index out of range");
  StateVector s;
  s.n_sites = n_sites;
  s.amplitudes = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim));
  s.amplitudes[static_cast<Eigen::Index>(index)] = 1.0;
  return s;
}

void StateVector::normalize() {
  const double n = amplitudes.norm();
  if (n == 0.0) throw std::runtime_error("cannot normalize a zero state");
  amplitudes /= n;
}

Eigen::MatrixXd build_dense_hamiltonian(const RydbergModel& model, int max_sites) {
  const int n = model.n_sites();
  const std::uint64_t dim = dimension_checked(n, max_sites, "build_dense_hamiltonian");
  const Eigen::VectorXd diag = diagonal_table(model);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                            static_cast<Eigen::Index>(dim));
  for (std::uint64_t idx = 0; idx < dim; ++idx) {
    h(idx, idx) = diag[static_cast<Eigen::Index>(idx)];
    for (int j = 0; j < n; ++j) h(idx ^ (std::uint64_t{1} << j), idx) = -0.5 * model.omega;
  }
  return h;
}

Eigen::SparseMatrix<double> build_sparse_hamiltonian(const RydbergModel& model,
                                                     int max_sites) {
  const int n = model.n_sites();
  const std::uint64_t dim = dimension_checked(n, max_sites, "build_sparse_hamiltonian");
  const Eigen::VectorXd diag = diagonal_table(model);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(dim * (n + 1));
  for (std::uint64_t idx = 0; idx < dim; ++idx) {
    triplets.emplace_back(idx, idx, diag[static_cast<Eigen::Index>(idx)]);
    for (int j = 0; j < n; ++j)
      triplets.emplace_back(idx ^ (std::uint64_t{1} << j), idx, -0.5 * model.omega);
  }
  Eigen::SparseMatrix<double> h(static_cast<Eigen::Index>(dim),
                                static_cast<Eigen::Index>(dim));
  h.setFromTriplets(triplets.begin(), triplets.end());
  h.makeCompressed();
  return h;
}

LanczosResult lanczos_lowest(const Eigen::SparseMatrix<double>& h,
                             const LanczosOptions& opts) {
  const Eigen::Index dim = h.rows();
  if (h.cols() != dim) throw std::invalid_argument("lanczos needs a square matrix");
  const int k = opts.n_eigs;
  if (k < 1 || k > dim) throw std::invalid_argument("invalid eigenpair count");

  const int m = static_cast<int>(std::min<Eigen::Index>(opts.max_basis, dim));
  if (m <= k) throw std::invalid_argument("basis size must exceed eigenpair count");
  const double breakdown = 1e-12;

  Eigen::MatrixXd v(dim, m);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  Rng rng(opts.seed);

  for (Eigen::Index i = 0; i < dim; ++i) v(i, 0) = rng.normal();
  v.col(0).normalize();

  int n_cols = 1;
  int matvecs = 0;
  bool exhausted = false;

  // Multiplies by H and projects out the current basis (two passes). The
  // projection coefficients of the first pass are exactly column `j` of the
  // Rayleigh projection T = V^T H V.
  const auto expand = [&](int j, Eigen::VectorXd& w) -> double {
    w.noalias() = h * v.col(j);
    ++matvecs;
    const auto basis = v.leftCols(n_cols);
    Eigen::VectorXd c = basis.transpose() * w;
    t.col(j).head(n_cols) = c;
    t.row(j).head(n_cols) = c.transpose();
    w.noalias() -= basis * c;
    Eigen::VectorXd c2 = basis.transpose() * w;
    w.noalias() -= basis * c2;
    return w.norm();
  };

  const auto random_orthonormal = [&](Eigen::VectorXd& w) -> bool {
    for (int attempt = 0; attempt < 8; ++attempt) {
      for (Eigen::Index i = 0; i < dim; ++i) w[i] = rng.normal();
      const auto basis = v.leftCols(n_cols);
      w.noalias() -= basis * (basis.transpose() * w).eval();
      w.noalias() -= basis * (basis.transpose() * w).eval();
      const double norm = w.norm();
      if (norm > 1e-8) {
        w /= norm;
        return true;
      }
    }
    return false;
  };

  Eigen::VectorXd w(dim);
  LanczosResult result;

  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    while (n_cols < m && !exhausted) {
      const double beta = expand(n_cols - 1, w);
      if (beta > breakdown) {
        v.col(n_cols) = w / beta;
      } else if (n_cols >= dim || !random_orthonormal(w)) {
        exhausted = true;  // basis spans an invariant subspace
        break;
      } else {
        v.col(n_cols) = w;
      }
      ++n_cols;
    }

    double beta = 0.0;
    if (!exhausted) {
      beta = expand(n_cols - 1, w);
      if (beta > breakdown) w /= beta;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.topLeftCorner(n_cols, n_cols));
    const Eigen::VectorXd& theta = es.eigenvalues();
    const Eigen::MatrixXd& s = es.eigenvectors();

    bool converged = true;
    for (int i = 0; i < k; ++i)
      converged = converged && beta * std::abs(s(n_cols - 1, i)) <= opts.tol;

    if (converged || exhausted || restart == opts.max_restarts) {
      result.eigenvalues.assign(theta.data(), theta.data() + k);
      result.eigenvectors.clear();
      result.residuals.clear();
      bool verified = true;
      for (int i = 0; i < k; ++i) {
        Eigen::VectorXd u = v.leftCols(n_cols) * s.col(i);
        u.normalize();
        const double res = (h * u - theta[i] * u).norm();
        result.eigenvectors.push_back(std::move(u));
        result.residuals.push_back(res);
        verified = verified && res <= 10.0 * opts.tol;
      }
      result.matvecs = matvecs;
      if (verified || exhausted) return result;
      if (restart == opts.max_restarts)
        throw std::runtime_error("lanczos failed to converge within restart budget");
    }

    // Thick restart: keep the lowest Ritz vectors plus the residual vector.
    const int keep = std::min(opts.n_keep, n_cols - 1);
    Eigen::MatrixXd ritz = v.leftCols(n_cols) * s.leftCols(keep);
    v.leftCols(keep) = ritz;
    t.setZero();
    t.topLeftCorner(keep, keep) = theta.head(keep).asDiagonal();
    if (beta > breakdown) {
      v.col(keep) = w;
    } else if (!random_orthonormal(w)) {
      throw std::runtime_error("lanczos basis collapse");
    } else {
      v.col(keep) = w;
    }
    n_cols = keep + 1;
  }
  throw std::runtime_error("lanczos failed to converge");
}

SpectrumResult solve_spectrum(const RydbergModel& model, int n_states) {
  if (n_states < 2) throw std::invalid_argument("need at least two states for the gap");
  const int n = model.n_sites();
  SpectrumResult out;
  Eigen::VectorXd ground;

  if (n <= 12) {
    const Eigen::MatrixXd h = build_dense_hamiltonian(model);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    if (n_states > es.eigenvalues().size())
      throw std::invalid_argument("more states requested than basis dimension");
    out.energies.assign(es.eigenvalues().data(), es.eigenvalues().data() + n_states);
    ground = es.eigenvectors().col(0);
  } else if (n <= 20) {
    const auto h = build_sparse_hamiltonian(model);
    LanczosOptions opts;
    opts.n_eigs = n_states;
    const auto lr = lanczos_lowest(h, opts);
    out.energies = lr.eigenvalues;
    ground = lr.eigenvectors[0];
  } else {
    throw std::invalid_argument("solve_spectrum: site count exceeds sparse limit");
  }

  out.e0 = out.energies[0];
  out.e1 = out.energies[1];
  out.gap = std::abs(out.e1 - out.e0);

  // Fix the global sign so the dominant amplitude is positive.
  Eigen::Index imax = 0;
  ground.cwiseAbs().maxCoeff(&imax);
  if (ground[imax] < 0.0) ground = -ground;

  out.ground.n_sites = n;
  out.ground.amplitudes = ground.cast<std::complex<double>>();
  out.ground.normalize();
  return out;
}

namespace {

// <n(r)> for every site from the Born distribution of `state`.
Eigen::VectorXd occupation_profile(const StateVector& state, int n_sites) {
  const Eigen::Index dim = state.amplitudes.size();
  if (dim != (Eigen::Index{1} << n_sites))
    throw std::invalid_argument("state dimension does not match lattice");
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(n_sites);
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    const double p = std::norm(state.amplitudes[idx]);
    if (p == 0.0) continue;
    for (int j = 0; j < n_sites; ++j)
      if ((idx >> j) & 1) occ[j] += p;
  }
  return occ;
}

}  // namespace

double staggered_magnetization(const StateVector& state, const LatticeGeometry& geometry) {
  const int n = geometry.n_sites();
  const Eigen::Index dim = state.amplitudes.size();
  if (dim != (Eigen::Index{1} << n))
    throw std::invalid_argument("state dimension does not match lattice");

  // m(idx) = sum_r (-1)^(x+y) Sz_r in units of 1/2: count occupied/empty
  // sites per sublattice with bit masks.
  std::uint64_t even_mask = 0;
  int n_even = 0;
  for (int j = 0; j < n; ++j)
    if (((geometry.coords[j][0] + geometry.coords[j][1]) & 1) == 0) {
      even_mask |= std::uint64_t{1} << j;
      ++n_even;
    }
  const std::uint64_t odd_mask = ((std::uint64_t{1} << n) - 1) & ~even_mask;
  const int n_odd = n - n_even;

  long double acc = 0.0L;
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    const double p = std::norm(state.amplitudes[idx]);
    if (p == 0.0) continue;
    const auto u = static_cast<std::uint64_t>(idx);
    // sum over even sites of (1 - 2*bit) minus the same over odd sites
    const int twice_m = (n_even - 2 * std::popcount(u & even_mask)) -
                        (n_odd - 2 * std::popcount(u & odd_mask));
    acc += p * std::abs(twice_m);
  }
  return static_cast<double>(acc) / (2.0 * n);
}

std::complex<double> momentum_occupation(const StateVector& state,
                                         const LatticeGeometry& geometry, double kx,
                                         double ky) {
  const int n = geometry.n_sites();
  const Eigen::VectorXd occ = occupation_profile(state, n);
  std::complex<double> nk = 0.0;
  for (int j = 0; j < n; ++j) {
    const double phase = kx * geometry.coords[j][0] + ky * geometry.coords[j][1];
    nk += occ[j] * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return nk / std::sqrt(static_cast<double>(n));
}

double expectation_pauli(const StateVector& state, const PauliSumHamiltonian& ham) {
  const Eigen::Index dim = state.amplitudes.size();
  const int n = state.n_sites;
  if (!ham.terms.empty() && ham.n_sites() != n)
    throw std::invalid_argument("pauli sum does not match state size");

  std::complex<double> total = 0.0;
  for (const auto& term : ham.terms) {
    std::uint64_t flip = 0, sign_mask = 0;
    int n_y = 0;
    for (int j = 0; j < n; ++j) {
      switch (term.paulis[j]) {
        case 'I': break;
        case 'X': flip |= std::uint64_t{1} << j; break;
        case 'Y':
          flip |= std::uint64_t{1} << j;
          sign_mask |= std::uint64_t{1} << j;
          ++n_y;
          break;
        case 'Z': sign_mask |= std::uint64_t{1} << j; break;
        default: throw std::invalid_argument("unknown pauli letter in term");
      }
    }
    // Y|0> = i|1>, Y|1> = -i|0>: factor i * (-1)^bit per Y, (-1)^bit per Z.
    static constexpr std::complex<double> i_pow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const std::complex<double> y_phase = i_pow[n_y & 3];
    std::complex<double> acc = 0.0;
    for (std::uint64_t idx = 0; idx < static_cast<std::uint64_t>(dim); ++idx) {
      const double sign = (std::popcount(idx & sign_mask) & 1) ? -1.0 : 1.0;
      acc += std::conj(state.amplitudes[static_cast<Eigen::Index>(idx ^ flip)]) * sign *
             state.amplitudes[static_cast<Eigen::Index>(idx)];
    }
    total += term.coeff * y_phase * acc;
  }
  return total.real();
}

Eigen::MatrixXcd build_dense_pauli_matrix(const PauliSumHamiltonian& ham, int max_sites) {
  const int n = ham.n_sites();
  const std::uint64_t dim = dimension_checked(n, max_sites, "build_dense_pauli_matrix");
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
  for (std::uint64_t col = 0; col < dim; ++col) {
    const auto rows = pauli_matrix_row(Configuration::from_index(col, n), ham);
    for (const auto& [cfg, amp] : rows)
      m(static_cast<Eigen::Index>(cfg.to_index()), static_cast<Eigen::Index>(col)) += amp;
  }
  return m;
}

void apply_basis_rotation(Eigen::VectorXcd& amplitudes, const std::string& basis) {
  const Eigen::Index dim = amplitudes.size();
  if (dim != (Eigen::Index{1} << basis.size()))
    throw std::invalid_argument("basis string does not match state size");
  constexpr double inv_sqrt2 = 0.70710678118654752440;

  for (std::size_t j = 0; j < basis.size(); ++j) {
    std::complex<double> g00, g01, g10, g11;
    if (basis[j] == 'Z') continue;
    if (basis[j] == 'X') {
      g00 = g01 = g10 = inv_sqrt2;
      g11 = -inv_sqrt2;
    } else if (basis[j] == 'Y') {
      g00 = inv_sqrt2;
      g01 = std::complex<double>(0.0, -inv_sqrt2);
      g10 = inv_sqrt2;
      g11 = std::complex<double>(0.0, inv_sqrt2);
    } else {
      throw std::invalid_argument("unknown measurement basis letter");
    }
    const Eigen::Index bit = Eigen::Index{1} << j;
    for (Eigen::Index base = 0; base < dim; ++base) {
      if (base & bit) continue;
      const std::complex<double> a0 = amplitudes[base];
      const std::complex<double> a1 = amplitudes[base | bit];
      amplitudes[base] = g00 * a0 + g01 * a1;
      amplitudes[base | bit] = g10 * a0 + g11 * a1;
    }
  }
}

StateVector rotate_state(const StateVector& state, const std::string& basis) {
  StateVector out = state;
  apply_basis_rotation(out.amplitudes, basis);
  return out;
}

MeasurementDataset sample_measurements(const StateVector& state,
                                       const std::vector<std::string>& bases,
                                       int n_per_basis, std::uint64_t seed) {
  if (n_per_basis < 0) throw std::invalid_argument("shot count must be non-negative");
  MeasurementDataset data;
  data.meta.n_sites = state.n_sites;
  data.meta.seed = seed;
  data.records.reserve(bases.size() * static_cast<std::size_t>(n_per_basis));

  for (std::size_t b = 0; b < bases.size(); ++b) {
    const StateVector rotated = rotate_state(state, bases[b]);
    const Eigen::Index dim = rotated.amplitudes.size();
    std::vector<long double> cdf(static_cast<std::size_t>(dim));
    long double run = 0.0L;
    for (Eigen::Index i = 0; i < dim; ++i) {
      run += std::norm(rotated.amplitudes[i]);
      cdf[static_cast<std::size_t>(i)] = run;
    }
    const long double total = run;
    if (total <= 0.0L) throw std::runtime_error("cannot sample a zero state");

    Rng rng(derive_seed(seed, b));
    for (int shot = 0; shot < n_per_basis; ++shot) {
      const long double u = static_cast<long double>(rng.uniform()) * total;
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const auto idx = static_cast<std::uint64_t>(
          std::min<std::ptrdiff_t>(it - cdf.begin(), dim - 1));
      data.records.push_back({bases[b], Configuration::from_index(idx, state.n_sites)});
    }
  }
  return data;
}

double fidelity(const StateVector& a, const StateVector& b) {
  if (a.amplitudes.size() != b.amplitudes.size())
    throw std::invalid_argument("fidelity needs states of equal dimension");
  const double na = a.norm_sq(), nb = b.norm_sq();
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("fidelity of a zero state");
  return std::norm(a.amplitudes.dot(b.amplitudes)) / (na * nb);
}

void save_statevector(const std::string& path, const StateVector& state) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write file: " + path);
  bin.write(reinterpret_cast<const char*>(state.amplitudes.data()),
            static_cast<std::streamsize>(sizeof(std::complex<double>) *
                                         state.amplitudes.size()));
  std::ofstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("cannot write file: " + path + ".meta");
  meta << "n_sites=" << state.n_sites << "\n"
       << "length=" << state.amplitudes.size() << "\n"
       << "layout=complex128 interleaved little-endian\n"
       << "ordering=basis index bit j is site j (row-major sites)\n";
}

StateVector load_statevector(const std::string& path) {
  std::ifstream meta(path + ".meta");
  if (!meta) throw std::runtime_error("cannot open file: " + path + ".meta");
  int n_sites = -1;
  long length = -1;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    if (key == "n_sites") n_sites = std::stoi(line.substr(eq + 1));
    else if (key == "length") length = std::stol(line.substr(eq + 1));
  }
  if (n_sites < 0 || length != (1L << n_sites))
    throw std::runtime_error("malformed statevector sidecar: " + path + ".meta");

  StateVector out;
  out.n_sites = n_sites;
  out.amplitudes.resize(length);
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open file: " + path);
  bin.read(reinterpret_cast<char*>(out.amplitudes.data()),
           static_cast<std::streamsize>(sizeof(std::complex<double>) * length));
  if (bin.gcount() != static_cast<std::streamsize>(sizeof(std::complex<double>) * length))
    throw std::runtime_error("truncated statevector file: " + path);
  return out;
}

}  // namespace nqs
