#ifndef ENTCONV_SVD_HPP
#define ENTCONV_SVD_HPP

#include <cmath>
#include <complex>
#include <vector>

#include "entconv/spectrum.hpp"
#include "entconv/util.hpp"

namespace entconv {

template <class Real>
struct SchmidtResult {
  std::vector<Real> coefficients;  // squared singular values / ||A||_F^2, sorted
  std::vector<Real> singular_values;
  Real frobenius = 0;
  bool renormalized = false;  // input norm deviated beyond tol and was rescaled
  int sweeps = 0;
};

// Schmidt decomposition of a bipartite pure state given by its amplitude
// matrix a[row * cols + col]. One-sided Jacobi on columns: each rotation
// zeroes one Gram off-diagonal entry exactly, so the column norms converge to
// the singular values without ever forming A^H A.
template <class Real>
SchmidtResult<Real> schmidt_from_amplitudes(
    const std::vector<std::complex<Real>>& a, Index rows, Index cols,
    Real norm_tol = Real(1e-8)) {
  using C = std::complex<Real>;
  if (rows < 1 || cols < 1 || Index(a.size()) != rows * cols)
    throw domain_error("schmidt_from_amplitudes: shape mismatch");

  // work on the orientation with fewer columns; the spectrum is symmetric
  const bool flip = cols > rows;
  const Index m = flip ? cols : rows;  // rows of the working matrix
  const Index n = flip ? rows : cols;
  std::vector<C> w(size_t(m * n));
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const C v = a[size_t(i * cols + j)];
      if (flip)
        w[size_t(j * n + i)] = v;
      else
        w[size_t(i * n + j)] = v;
    }

  Real fro2 = 0;
  for (const C& v : w) fro2 += std::norm(v);
  if (!(fro2 > 0))
    throw domain_error("schmidt_from_amplitudes: zero amplitude matrix");
  const Real fro = std::sqrt(fro2);

  auto col = [&](Index j) { return w.data() + j; };  // stride n
  auto dot = [&](Index i, Index j) {
    C acc = 0;
    const C* ci = col(i);
    const C* cj = col(j);
    for (Index r = 0; r < m; ++r) acc += std::conj(ci[size_t(r * n)]) * cj[size_t(r * n)];
    return acc;
  };

  const Real eps = std::numeric_limits<Real>::epsilon();
  const Real off_tol = eps * std::sqrt(Real(m));
  int sweeps = 0;
  for (; sweeps < 64; ++sweeps) {
    bool rotated = false;
    for (Index i = 0; i < n - 1; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const C gam = dot(i, j);
        const Real g = std::abs(gam);
        Real alpha = 0, beta = 0;
        const C* ci = col(i);
        const C* cj = col(j);
        for (Index r = 0; r < m; ++r) {
          alpha += std::norm(ci[size_t(r * n)]);
          beta += std::norm(cj[size_t(r * n)]);
        }
        if (g <= off_tol * std::sqrt(alpha * beta) || g == 0) continue;
        rotated = true;
        const C phase = gam / g;  // e^{i phi}
        const Real tau = (beta - alpha) / (2 * g);
        const Real t = (tau >= 0 ? Real(1) : Real(-1)) /
                       (std::abs(tau) + std::sqrt(1 + tau * tau));
        const Real c = 1 / std::sqrt(1 + t * t);
        const Real s = c * t;
        // columns (i, j) <- (c*i - s*conj(phase)*j, s*phase*i + c*j)
        C* pi = col(i);
        C* pj = col(j);
        for (Index r = 0; r < m; ++r) {
          const C vi = pi[size_t(r * n)];
          const C vj = pj[size_t(r * n)];
          pi[size_t(r * n)] = c * vi - s * std::conj(phase) * vj;
          pj[size_t(r * n)] = s * phase * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  SchmidtResult<Real> out;
  out.frobenius = fro;
  out.renormalized = std::abs(fro - 1) > norm_tol;
  out.sweeps = sweeps;
  out.singular_values.reserve(size_t(n));
  for (Index j = 0; j < n; ++j) {
    Real s2 = 0;
    const std::complex<Real>* cj = col(j);
    for (Index r = 0; r < m; ++r) s2 += std::norm(cj[size_t(r * n)]);
    out.singular_values.push_back(std::sqrt(s2));
  }
  std::sort(out.singular_values.begin(), out.singular_values.end(),
            std::greater<Real>());
  const Real smax = out.singular_values.front();
  const Real cut = Real(std::max(m, n)) * eps * smax;
  while (out.singular_values.size() > 1 && out.singular_values.back() <= cut)
    out.singular_values.pop_back();

  Real sum2 = 0;
  for (Real s : out.singular_values) sum2 += s * s;
  out.coefficients.reserve(out.singular_values.size());
  for (Real s : out.singular_values) out.coefficients.push_back(s * s / sum2);
  return out;
}

// Spectrum of the reduced state of |psi> with amplitudes a[i * cols + j].
// Inputs off unit norm beyond norm_tol are rescaled; retrieve the flag via
// schmidt_from_amplitudes when the caller needs to surface a warning.
template <class Real>
Spectrum<Real> from_amplitude_matrix(const std::vector<std::complex<Real>>& a,
                                     Index rows, Index cols,
                                     Real norm_tol = Real(1e-8)) {
  SchmidtResult<Real> r = schmidt_from_amplitudes(a, rows, cols, norm_tol);
  return Spectrum<Real>::finite(std::move(r.coefficients));
}

}  // namespace entconv

#endif  // ENTCONV_SVD_HPP
