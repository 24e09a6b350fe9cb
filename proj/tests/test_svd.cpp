#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "entconv/svd.hpp"
#include "oracles.hpp"

using entconv::schmidt_from_amplitudes;
using entconv::from_amplitude_matrix;
using C = std::complex<double>;

namespace {

std::vector<C> random_amps(std::mt19937_64& rng, int rows, int cols,
                           bool unit_norm) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<C> a(size_t(rows) * size_t(cols));
  double fro2 = 0;
  for (auto& v : a) {
    v = C(g(rng), g(rng));
    fro2 += std::norm(v);
  }
  if (unit_norm) {
    const double f = 1.0 / std::sqrt(fro2);
    for (auto& v : a) v *= f;
  }
  return a;
}

void check_against_oracle(const std::vector<C>& a, int rows, int cols,
                          double tol) {
  const auto got = schmidt_from_amplitudes<double>(a, rows, cols);
  const auto ref = oracle::eigen_schmidt(a, rows, cols);
  const size_t n = std::max(got.coefficients.size(), ref.size());
  for (size_t k = 0; k < n; ++k) {
    const double g = k < got.coefficients.size() ? got.coefficients[k] : 0.0;
    const double r = k < ref.size() ? ref[k] : 0.0;
    CAPTURE(rows, cols, k);
    CHECK(std::abs(g - r) <= tol);
  }
  CHECK(got.sweeps < 64);
}

}  // namespace

TEST_CASE("maximally entangled two-qubit state splits evenly") {
  const double h = 1.0 / std::sqrt(2.0);
  const std::vector<C> bell = {C(h), C(0), C(0), C(h)};
  const auto r = schmidt_from_amplitudes<double>(bell, 2, 2);
  REQUIRE(r.coefficients.size() == 2);
  CHECK(r.coefficients[0] == Catch::Approx(0.5).epsilon(1e-14));
  CHECK(r.coefficients[1] == Catch::Approx(0.5).epsilon(1e-14));
  CHECK(r.singular_values[0] == Catch::Approx(h).epsilon(1e-14));
  CHECK(r.frobenius == Catch::Approx(1.0).epsilon(1e-14));
  CHECK_FALSE(r.renormalized);
}

TEST_CASE("shear matrix reproduces its closed-form spectrum") {
  // A = [[1,1],[0,1]]/sqrt(3); Gram eigenvalues (3 +- sqrt(5))/2 over trace 3
  const double f = 1.0 / std::sqrt(3.0);
  const std::vector<C> a = {C(f), C(f), C(0), C(f)};
  const auto r = schmidt_from_amplitudes<double>(a, 2, 2);
  const double s5 = std::sqrt(5.0);
  REQUIRE(r.coefficients.size() == 2);
  CHECK(r.coefficients[0] == Catch::Approx((3.0 + s5) / 6.0).epsilon(1e-14));
  CHECK(r.coefficients[1] == Catch::Approx((3.0 - s5) / 6.0).epsilon(1e-14));
}

TEST_CASE("random states match dense eigensolver spectra") {
  std::mt19937_64 rng(20260816);
  std::uniform_int_distribution<int> dim(1, 16);
  for (int trial = 0; trial < 120; ++trial) {
    const int rows = dim(rng);
    const int cols = dim(rng);
    const bool unit = trial % 3 != 0;
    check_against_oracle(random_amps(rng, rows, cols, unit), rows, cols, 1e-12);
  }
}

TEST_CASE("coefficients ignore global and one-sided phases") {
  std::mt19937_64 rng(7);
  const int rows = 5, cols = 7;
  const auto a = random_amps(rng, rows, cols, true);
  const auto base = schmidt_from_amplitudes<double>(a, rows, cols);

  std::uniform_real_distribution<double> ang(0.0, 6.28318);
  auto twisted = a;
  const C global = std::polar(1.0, ang(rng));
  std::vector<C> row_phase;
  for (int i = 0; i < rows; ++i) row_phase.push_back(std::polar(1.0, ang(rng)));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      twisted[size_t(i * cols + j)] *= global * row_phase[size_t(i)];

  const auto t = schmidt_from_amplitudes<double>(twisted, rows, cols);
  REQUIRE(t.coefficients.size() == base.coefficients.size());
  for (size_t k = 0; k < base.coefficients.size(); ++k)
    CHECK(t.coefficients[k] == Catch::Approx(base.coefficients[k]).margin(1e-13));
}

TEST_CASE("transposing the amplitude matrix leaves the spectrum alone") {
  std::mt19937_64 rng(11);
  for (auto [rows, cols] : {std::pair{2, 3}, std::pair{7, 3}, std::pair{4, 9}}) {
    const auto a = random_amps(rng, rows, cols, true);
    std::vector<C> at(a.size());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) at[size_t(j * rows + i)] = a[size_t(i * cols + j)];
    const auto r1 = schmidt_from_amplitudes<double>(a, rows, cols);
    const auto r2 = schmidt_from_amplitudes<double>(at, cols, rows);
    REQUIRE(r1.coefficients.size() == r2.coefficients.size());
    for (size_t k = 0; k < r1.coefficients.size(); ++k)
      CHECK(r1.coefficients[k] == Catch::Approx(r2.coefficients[k]).margin(1e-13));
  }
}

TEST_CASE("product states collapse to a single coefficient") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  const int rows = 6, cols = 5;
  std::vector<C> u, v;
  for (int i = 0; i < rows; ++i) u.push_back(C(g(rng), g(rng)));
  for (int j = 0; j < cols; ++j) v.push_back(C(g(rng), g(rng)));
  std::vector<C> a(size_t(rows) * size_t(cols));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a[size_t(i * cols + j)] = u[size_t(i)] * v[size_t(j)];
  const auto r = schmidt_from_amplitudes<double>(a, rows, cols);
  REQUIRE(r.coefficients.size() == 1);
  CHECK(r.coefficients[0] == 1.0);
  CHECK(r.singular_values.size() == 1);
}

TEST_CASE("repeated columns drop from the spectrum") {
  std::mt19937_64 rng(17);
  auto a = random_amps(rng, 4, 4, true);
  for (int i = 0; i < 4; ++i) {
    a[size_t(i * 4 + 3)] = a[size_t(i * 4 + 2)];  // rank at most 3
  }
  const auto r = schmidt_from_amplitudes<double>(a, 4, 4);
  CHECK(r.coefficients.size() <= 3);
  double s = 0;
  for (double c : r.coefficients) s += c;
  CHECK(s == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("off-norm inputs are rescaled and flagged") {
  std::mt19937_64 rng(19);
  const auto a = random_amps(rng, 3, 3, true);
  auto b = a;
  for (auto& v : b) v *= 2.0;
  const auto ra = schmidt_from_amplitudes<double>(a, 3, 3);
  const auto rb = schmidt_from_amplitudes<double>(b, 3, 3);
  CHECK_FALSE(ra.renormalized);
  CHECK(rb.renormalized);
  CHECK(rb.frobenius == Catch::Approx(2.0).epsilon(1e-12));
  REQUIRE(ra.coefficients.size() == rb.coefficients.size());
  for (size_t k = 0; k < ra.coefficients.size(); ++k)
    CHECK(ra.coefficients[k] == Catch::Approx(rb.coefficients[k]).margin(1e-13));
}

TEST_CASE("degenerate inputs are rejected") {
  const std::vector<C> zero(6, C(0));
  CHECK_THROWS_AS(schmidt_from_amplitudes<double>(zero, 2, 3),
                  entconv::domain_error);
  const std::vector<C> five(5, C(1));
  CHECK_THROWS_AS(schmidt_from_amplitudes<double>(five, 2, 3),
                  entconv::domain_error);
  CHECK_THROWS_AS(schmidt_from_amplitudes<double>({}, 0, 3),
                  entconv::domain_error);
}

TEST_CASE("amplitude matrices load as finite spectra") {
  std::mt19937_64 rng(23);
  const auto a = random_amps(rng, 4, 6, true);
  const auto r = schmidt_from_amplitudes<double>(a, 4, 6);
  const auto s = from_amplitude_matrix<double>(a, 4, 6);
  REQUIRE(s.kind() == entconv::SpectrumKind::Finite);
  REQUIRE(size_t(s.rank_count()) == r.coefficients.size());
  for (size_t k = 0; k < r.coefficients.size(); ++k)
    CHECK(s.value_at_rank(entconv::Index(k + 1)) == r.coefficients[k]);
}

TEST_CASE("extended precision instantiation works") {
  using CL = std::complex<long double>;
  const long double h = 1.0L / std::sqrt(2.0L);
  const std::vector<CL> bell = {CL(h), CL(0), CL(0), CL(h)};
  const auto r = schmidt_from_amplitudes<long double>(bell, 2, 2);
  REQUIRE(r.coefficients.size() == 2);
  CHECK(std::abs(r.coefficients[0] - 0.5L) < 1e-18L);
  CHECK(std::abs(r.coefficients[1] - 0.5L) < 1e-18L);
}
