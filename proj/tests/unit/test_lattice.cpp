#include "nqs/lattice.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace {

using nqs::Configuration;
using nqs::LatticeGeometry;
using nqs::PauliSumHamiltonian;
using nqs::RydbergModel;

RydbergModel make_model(int lx, int ly, double omega, double delta, double v0, int cutoff) {
  RydbergModel m;
  m.geometry = LatticeGeometry::square(lx, ly);
  m.omega = omega;
  m.delta = delta;
  m.v0 = v0;
  m.cutoff = cutoff;
  return m;
}

// Brute-force pair list: every pair whose squared distance is one of the
// first `cutoff` values in {1, 2, 4, 5, 8, ...} for this lattice.
std::vector<nqs::Coupling> couplings_by_enumeration(const RydbergModel& m) {
  std::vector<long> d2s;
  const auto& g = m.geometry;
  for (int i = 0; i < g.n_sites(); ++i)
    for (int j = i + 1; j < g.n_sites(); ++j) {
      const long dx = g.coords[i][0] - g.coords[j][0];
      const long dy = g.coords[i][1] - g.coords[j][1];
      d2s.push_back(dx * dx + dy * dy);
    }
  std::sort(d2s.begin(), d2s.end());
  d2s.erase(std::unique(d2s.begin(), d2s.end()), d2s.end());
  if (static_cast<std::size_t>(m.cutoff) < d2s.size()) d2s.resize(m.cutoff);

  std::vector<nqs::Coupling> out;
  for (int i = 0; i < g.n_sites(); ++i)
    for (int j = i + 1; j < g.n_sites(); ++j) {
      const long dx = g.coords[i][0] - g.coords[j][0];
      const long dy = g.coords[i][1] - g.coords[j][1];
      const long d2 = dx * dx + dy * dy;
      if (std::find(d2s.begin(), d2s.end(), d2) != d2s.end())
        out.push_back({i, j, m.v0 / (static_cast<double>(d2) * d2 * d2)});
    }
  return out;
}

TEST(Configuration, IndexRoundTripPutsSiteZeroInLowBit) {
  const Configuration c{1, 0, 0};
  EXPECT_EQ(c.to_index(), 1u);
  EXPECT_EQ((Configuration{0, 0, 1}).to_index(), 4u);
  for (std::uint64_t idx = 0; idx < 32; ++idx)
    EXPECT_EQ(Configuration::from_index(idx, 5).to_index(), idx);
}

TEST(Configuration, FlippedTogglesOneSite) {
  const Configuration c{1, 0, 1};
  EXPECT_EQ(c.flipped(1), (Configuration{1, 1, 1}));
  EXPECT_EQ(c.flipped(0).flipped(0), c);
}

TEST(Couplings, TwoSiteChainHasSingleNearestNeighbourPair) {
  const auto cs = build_couplings(make_model(2, 1, 1.0, 0.0, 3.0, 3));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].i, 0);
  EXPECT_EQ(cs[0].j, 1);
  EXPECT_DOUBLE_EQ(cs[0].v, 3.0);
}

TEST(Couplings, TwoByTwoShellsCarryInverseSixthPowerStrengths) {
  const auto cs = build_couplings(make_model(2, 2, 1.0, 0.0, 3.0, 2));
  ASSERT_EQ(cs.size(), 6u);
  int nn = 0, diag = 0;
  for (const auto& c : cs) {
    if (c.v == 3.0) ++nn;
    if (c.v == 0.375) ++diag;  // 3 / (sqrt2)^6
  }
  EXPECT_EQ(nn, 4);
  EXPECT_EQ(diag, 2);
}

TEST(Couplings, ShellCountsOnThreeByThree) {
  EXPECT_EQ(build_couplings(make_model(3, 3, 1, 0, 3, 1)).size(), 12u);
  EXPECT_EQ(build_couplings(make_model(3, 3, 1, 0, 3, 2)).size(), 20u);
  EXPECT_EQ(build_couplings(make_model(3, 3, 1, 0, 3, 3)).size(), 26u);
  EXPECT_TRUE(build_couplings(make_model(3, 3, 1, 0, 3, 0)).empty());
}

TEST(Couplings, MatchesPairEnumerationOnSeveralLattices) {
  for (const auto [lx, ly, cutoff] : {std::array{3, 3, 3}, {4, 4, 3}, {5, 2, 2}, {4, 1, 3}}) {
    const auto m = make_model(lx, ly, 1.0, 0.5, 2.3, cutoff);
    const auto got = build_couplings(m);
    const auto want = couplings_by_enumeration(m);
    ASSERT_EQ(got.size(), want.size()) << lx << "x" << ly;
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].i, want[k].i);
      EXPECT_EQ(got[k].j, want[k].j);
      EXPECT_NEAR(got[k].v, want[k].v, 1e-15);
    }
  }
}

TEST(DiagonalEnergy, CountsDetuningAndPairTerms) {
  const auto m = make_model(2, 2, 1.0, 1.0, 3.0, 3);
  EXPECT_NEAR(diagonal_energy(Configuration{0, 0, 0, 0}, m), 0.0, 1e-15);
  // adjacent pair: -2*delta + v0
  EXPECT_NEAR(diagonal_energy(Configuration{1, 1, 0, 0}, m), 1.0, 1e-15);
  // diagonal pair: -2*delta + v0/8
  EXPECT_NEAR(diagonal_energy(Configuration{1, 0, 0, 1}, m), -1.625, 1e-15);
}

TEST(DiagonalEnergy, CheckerboardOnThreeByThree) {
  const auto m = make_model(3, 3, 1.0, 2.0, 3.0, 3);
  const Configuration cb{1, 0, 1, 0, 1, 0, 1, 0, 1};
  // 5 occupied sites; 4 pairs at d^2=2 and 4 at d^2=4 inside the cutoff
  EXPECT_NEAR(diagonal_energy(cb, m), -10.0 + 4 * 0.375 + 4 * 3.0 / 64.0, 1e-12);
}

TEST(DiagonalEnergy, AgreesWithPairEnumerationOnRandomPatterns) {
  const auto m = make_model(4, 3, 1.0, 1.7, 5.1, 3);
  const auto cs = couplings_by_enumeration(m);
  for (std::uint64_t idx : {0ull, 1ull, 0xfffull, 0x5a5ull, 0x333ull, 0x78ull}) {
    const auto sigma = Configuration::from_index(idx, 12);
    double want = 0.0;
    for (auto b : sigma.bits) want -= m.delta * b;
    for (const auto& c : cs) want += c.v * (sigma.bits[c.i] && sigma.bits[c.j]);
    EXPECT_NEAR(diagonal_energy(sigma, m), want, 1e-12);
  }
}

TEST(ConnectedConfigs, EverySingleFlipWithHalfRabiElement) {
  const auto m = make_model(2, 2, 2.0, 0.3, 3.0, 3);
  const Configuration sigma{1, 0, 1, 0};
  const auto rows = connected_configs(sigma, m);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    EXPECT_EQ(rows[j].first, sigma.flipped(j));
    EXPECT_DOUBLE_EQ(rows[j].second, -1.0);  // -omega/2
  }
}

TEST(PauliRow, SingleLetterActions) {
  const PauliSumHamiltonian z{{{1.0, "Z"}}};
  const auto rz = pauli_matrix_row(Configuration{1}, z);
  ASSERT_EQ(rz.size(), 1u);
  EXPECT_EQ(rz[0].first.to_index(), 1u);
  EXPECT_EQ(rz[0].second, std::complex<double>(-1.0, 0.0));

  const PauliSumHamiltonian x{{{0.5, "X"}}};
  const auto rx = pauli_matrix_row(Configuration{0}, x);
  ASSERT_EQ(rx.size(), 1u);
  EXPECT_EQ(rx[0].first.to_index(), 1u);
  EXPECT_EQ(rx[0].second, std::complex<double>(0.5, 0.0));

  const PauliSumHamiltonian y{{{1.0, "Y"}}};
  const auto ry0 = pauli_matrix_row(Configuration{0}, y);
  ASSERT_EQ(ry0.size(), 1u);
  EXPECT_EQ(ry0[0].second, std::complex<double>(0.0, 1.0));  // Y|0> = i|1>
  const auto ry1 = pauli_matrix_row(Configuration{1}, y);
  EXPECT_EQ(ry1[0].second, std::complex<double>(0.0, -1.0));  // Y|1> = -i|0>
}

TEST(PauliRow, MergesTermsAndDropsExactZeros) {
  const PauliSumHamiltonian merged{{{1.0, "X"}, {1.0, "Y"}}};
  const auto rows = pauli_matrix_row(Configuration{0}, merged);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].second, std::complex<double>(1.0, 1.0));

  const PauliSumHamiltonian cancel{{{1.0, "XI"}, {-1.0, "XI"}}};
  EXPECT_TRUE(pauli_matrix_row(Configuration{0, 1}, cancel).empty());
}

TEST(PauliRow, TwoSiteStringCombinesSiteFactors) {
  const PauliSumHamiltonian zz{{{2.0, "ZZ"}}};
  const auto rows = pauli_matrix_row(Configuration{1, 0}, zz);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].second, std::complex<double>(-2.0, 0.0));

  const PauliSumHamiltonian xy{{{1.0, "XY"}}};
  const auto rxy = pauli_matrix_row(Configuration{0, 1}, xy);
  ASSERT_EQ(rxy.size(), 1u);
  EXPECT_EQ(rxy[0].first.to_index(), 1u);  // both sites toggle
  EXPECT_EQ(rxy[0].second, std::complex<double>(0.0, -1.0));
}

TEST(PauliRow, RejectsUnknownLetterAndLengthMismatch) {
  EXPECT_THROW(pauli_matrix_row(Configuration{0}, PauliSumHamiltonian{{{1.0, "Q"}}}),
               std::invalid_argument);
  EXPECT_THROW(pauli_matrix_row(Configuration{0, 1}, PauliSumHamiltonian{{{1.0, "X"}}}),
               std::invalid_argument);
}

TEST(RydbergPauliForm, TermCountAndConstant) {
  const auto m = make_model(2, 2, 1.0, 1.0, 3.0, 2);
  const auto ham = rydberg_to_pauli_sum(m);
  // identity + 4 Z + 6 ZZ + 4 X
  ASSERT_EQ(ham.terms.size(), 15u);
  // -delta*N/2 + sum_pairs v/4 = -2 + (4*3 + 2*0.375)/4
  EXPECT_NEAR(ham.terms[0].coeff, -2.0 + 12.75 / 4.0, 1e-14);
}

TEST(ModelFiles, RoundTripPreservesEveryField) {
  const auto dir = std::filesystem::temp_directory_path() / "nqs_lattice_io";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "model.txt").string();

  const auto m = make_model(4, 3, 1.25, -2.5, 7.0, 2);
  save_model(path, m);
  const auto back = nqs::load_model(path);
  EXPECT_EQ(back.geometry.lx, 4);
  EXPECT_EQ(back.geometry.ly, 3);
  EXPECT_DOUBLE_EQ(back.omega, 1.25);
  EXPECT_DOUBLE_EQ(back.delta, -2.5);
  EXPECT_DOUBLE_EQ(back.v0, 7.0);
  EXPECT_EQ(back.cutoff, 2);
  std::filesystem::remove_all(dir);
}

TEST(PauliFiles, LoadRejectsMalformedContent) {
  const auto dir = std::filesystem::temp_directory_path() / "nqs_pauli_io";
  std::filesystem::create_directories(dir);
  const auto good = (dir / "good.txt").string();
  const auto bad = (dir / "bad.txt").string();

  nqs::save_pauli_sum(good, PauliSumHamiltonian{{{0.5, "XZ"}, {-1.0, "YI"}}});
  const auto back = nqs::load_pauli_sum(good);
  ASSERT_EQ(back.terms.size(), 2u);
  EXPECT_DOUBLE_EQ(back.terms[0].coeff, 0.5);
  EXPECT_EQ(back.terms[1].paulis, "YI");

  {
    std::FILE* f = std::fopen(bad.c_str(), "w");
    std::fputs("0.5 XQ\n", f);
    std::fclose(f);
  }
  EXPECT_THROW(nqs::load_pauli_sum(bad), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
