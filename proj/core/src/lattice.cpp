#include "nqs/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace nqs {

LatticeGeometry LatticeGeometry::square(int lx, int ly) {
  if (lx < 1 || ly < 1) throw std::invalid_argument("lattice dimensions must be positive");
  LatticeGeometry g;
  g.lx = lx;
  g.ly = ly;
  g.coords.reserve(static_cast<std::size_t>(lx) * ly);
  for (int y = 0; y < ly; ++y)
    for (int x = 0; x < lx; ++x) g.coords.push_back({x, y});
  return g;
}

std::vector<Coupling> build_couplings(const RydbergModel& model) {
  if (model.cutoff < 0) throw std::invalid_argument("cutoff must be non-negative");
  const auto& g = model.geometry;
  const int n = g.n_sites();

  // Distance shells = sorted distinct squared separations on this lattice.
  std::set<long> shells;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const long dx = g.coords[i][0] - g.coords[j][0];
      const long dy = g.coords[i][1] - g.coords[j][1];
      shells.insert(dx * dx + dy * dy);
    }
  long max_d2 = 0;
  int count = 0;
  for (long d2 : shells) {
    if (++count > model.cutoff) break;
    max_d2 = d2;
  }

  std::vector<Coupling> couplings;
  if (model.cutoff == 0) return couplings;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const long dx = g.coords[i][0] - g.coords[j][0];
      const long dy = g.coords[i][1] - g.coords[j][1];
      const long d2 = dx * dx + dy * dy;
      if (d2 <= max_d2) {
        const double dist6 = static_cast<double>(d2) * d2 * d2;
        couplings.push_back({i, j, model.v0 / dist6});
      }
    }
  return couplings;
}

double diagonal_energy(const Configuration& sigma, const RydbergModel& model) {
  return diagonal_energy(sigma, model, build_couplings(model));
}

double diagonal_energy(const Configuration& sigma, const RydbergModel& model,
                       const std::vector<Coupling>& couplings) {
  if (sigma.size() != static_cast<std::size_t>(model.n_sites()))
    throw std::invalid_argument("configuration size does not match lattice");
  double e = 0.0;
  for (std::uint8_t b : sigma.bits) e -= model.delta * b;
  for (const auto& c : couplings) e += c.v * (sigma.bits[c.i] & sigma.bits[c.j]);
  return e;
}

std::vector<std::pair<Configuration, double>> connected_configs(
    const Configuration& sigma, const RydbergModel& model) {
  if (sigma.size() != static_cast<std::size_t>(model.n_sites()))
    throw std::invalid_argument("configuration size does not match lattice");
  std::vector<std::pair<Configuration, double>> out;
  out.reserve(sigma.size());
  for (std::size_t j = 0; j < sigma.size(); ++j)
    out.emplace_back(sigma.flipped(j), -0.5 * model.omega);
  return out;
}

std::vector<std::pair<Configuration, std::complex<double>>> pauli_matrix_row(
    const Configuration& sigma, const PauliSumHamiltonian& ham) {
  const std::size_t n = sigma.size();
  std::unordered_map<std::uint64_t, std::complex<double>> merged;
  for (const auto& term : ham.terms) {
    if (term.paulis.size() != n)
      throw std::invalid_argument("pauli string length does not match configuration");
    std::complex<double> amp(term.coeff, 0.0);
    std::uint64_t idx = sigma.to_index();
    for (std::size_t j = 0; j < n; ++j) {
      const int bit = sigma.bits[j];
      switch (term.paulis[j]) {
        case 'I':
          break;
        case 'X':
          idx ^= std::uint64_t{1} << j;
          break;
        case 'Y':
          // Y|0> = i|1>, Y|1> = -i|0>
          idx ^= std::uint64_t{1} << j;
          amp *= bit ? std::complex<double>(0.0, -1.0) : std::complex<double>(0.0, 1.0);
          break;
        case 'Z':
          if (bit) amp = -amp;
          break;
        default:
          throw std::invalid_argument("unknown pauli letter in term");
      }
    }
    merged[idx] += amp;
  }

  std::vector<std::pair<Configuration, std::complex<double>>> rows;
  rows.reserve(merged.size());
  for (const auto& [idx, amp] : merged)
    if (std::abs(amp) != 0.0) rows.emplace_back(Configuration::from_index(idx, n), amp);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.first.to_index() < b.first.to_index();
  });
  return rows;
}

PauliSumHamiltonian rydberg_to_pauli_sum(const RydbergModel& model) {
  const int n = model.n_sites();
  const auto couplings = build_couplings(model);
  const std::string identity(static_cast<std::size_t>(n), 'I');

  PauliSumHamiltonian ham;
  double constant = -0.5 * model.delta * n;
  std::vector<double> z_coeff(n, 0.5 * model.delta);
  for (const auto& c : couplings) {
    constant += 0.25 * c.v;
    z_coeff[c.i] -= 0.25 * c.v;
    z_coeff[c.j] -= 0.25 * c.v;
  }

  ham.terms.push_back({constant, identity});
  for (int j = 0; j < n; ++j) {
    std::string s = identity;
    s[j] = 'Z';
    ham.terms.push_back({z_coeff[j], s});
  }
  for (const auto& c : couplings) {
    std::string s = identity;
    s[c.i] = 'Z';
    s[c.j] = 'Z';
    ham.terms.push_back({0.25 * c.v, s});
  }
  for (int j = 0; j < n; ++j) {
    std::string s = identity;
    s[j] = 'X';
    ham.terms.push_back({-0.5 * model.omega, s});
  }
  return ham;
}

PauliSumHamiltonian average_sx(int n_sites) {
  PauliSumHamiltonian ham;
  const std::string identity(static_cast<std::size_t>(n_sites), 'I');
  for (int j = 0; j < n_sites; ++j) {
    std::string s = identity;
    s[j] = 'X';
    ham.terms.push_back({0.5 / n_sites, s});
  }
  return ham;
}

PauliSumHamiltonian average_sz(int n_sites) {
  PauliSumHamiltonian ham;
  const std::string identity(static_cast<std::size_t>(n_sites), 'I');
  for (int j = 0; j < n_sites; ++j) {
    std::string s = identity;
    s[j] = 'Z';
    ham.terms.push_back({0.5 / n_sites, s});
  }
  return ham;
}

namespace {

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed line in " + path + ": " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

RydbergModel load_model(const std::string& path) {
  const auto kv = read_key_values(path);
  RydbergModel m;
  try {
    m.geometry = LatticeGeometry::square(std::stoi(kv.at("lx")), std::stoi(kv.at("ly")));
    m.omega = std::stod(kv.at("omega"));
    m.delta = std::stod(kv.at("delta"));
    m.v0 = std::stod(kv.at("v0"));
    m.cutoff = std::stoi(kv.at("cutoff"));
  } catch (const std::out_of_range&) {
    throw std::runtime_error("model file missing a required key: " + path);
  }
  return m;
}

void save_model(const std::string& path, const RydbergModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  out << "lx=" << model.geometry.lx << "\n"
      << "ly=" << model.geometry.ly << "\n"
      << "omega=" << model.omega << "\n"
      << "delta=" << model.delta << "\n"
      << "v0=" << model.v0 << "\n"
      << "cutoff=" << model.cutoff << "\n";
}

PauliSumHamiltonian load_pauli_sum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  PauliSumHamiltonian ham;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    PauliTerm term;
    if (!(ss >> term.coeff >> term.paulis))
      throw std::runtime_error("malformed pauli term in " + path + ": " + line);
    for (char c : term.paulis)
      if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z')
        throw std::runtime_error("unknown pauli letter in " + path + ": " + line);
    if (!ham.terms.empty() && term.paulis.size() != ham.terms.front().paulis.size())
      throw std::runtime_error("inconsistent pauli string lengths in " + path);
    ham.terms.push_back(std::move(term));
  }
  return ham;
}

void save_pauli_sum(const std::string& path, const PauliSumHamiltonian& ham) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.precision(17);
  for (const auto& term : ham.terms) out << term.coeff << " " << term.paulis << "\n";
}

}  // namespace nqs
