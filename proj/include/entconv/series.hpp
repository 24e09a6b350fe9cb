#ifndef ENTCONV_SERIES_HPP
#define ENTCONV_SERIES_HPP

#include <cmath>
#include <functional>

#include "entconv/util.hpp"

namespace entconv {

// Certified two-sided bound on an infinite tail sum. `tight` is cleared when
// the evaluation budget ran out before the requested width was met; the
// bounds stay valid either way.
template <class Real>
struct TailInterval {
  Real lower = 0;
  Real upper = 0;
  bool tight = true;

  Interval<Real> iv() const { return {lower, upper}; }
  Real mid() const { return (lower + upper) / 2; }
  Real width() const { return upper - lower; }
};

template <class Real>
TailInterval<Real> make_tail(const Interval<Real>& iv, bool tight = true) {
  Interval<Real> c = iv.clamped_nonneg();
  return {c.lo, c.hi, tight};
}

struct EvalBudget {
  Index max_terms = 1'000'000;
  double target_width = 1e-13;
};

namespace series {

// Tail bracket for sum_{i=n}^inf f(i) with f positive, decreasing and convex
// on [n - 1/2, inf). Chord vs midpoint comparison gives
//
//     F(n) + f(n)/2  <=  sum_{i>=n} f(i)  <=  F(n - 1/2),
//
// where F(x) = integral_x^inf f. The chord over [i, i+1] lies above a convex
// f, so the trapezoid sum overestimates F(n) by exactly the amount that makes
// the left inequality work; the midpoint rule underestimates each unit cell
// for the right one. Width is O(|f'(n)|), the same order as a two-term
// Euler-Maclaurin correction, but with certified signs.
template <class Real, class F, class Fint>
Interval<Real> convex_tail_bracket(const F& f, const Fint& F_int, Real n) {
  const Real fl = f(n);
  const Real lo = F_int(n) + fl / 2;
  const Real hi = F_int(n - Real(0.5));
  // Directed slop for the float evaluation of the closed forms themselves.
  const Real eps = std::numeric_limits<Real>::epsilon();
  const Real slop = 8 * eps * (std::abs(hi) + fl);
  return Interval<Real>(std::min(lo, hi), hi).widened(slop).clamped_nonneg();
}

// sum_{i=n}^inf f(i): explicit partial sum to shrink the bracket until the
// requested width (or the term budget) is hit.
template <class Real, class F, class Fint>
TailInterval<Real> sum_tail(const F& f, const Fint& F_int, Index n,
                            const EvalBudget& budget) {
  CompensatedSum<Real> partial;
  Index m = n;
  Interval<Real> bracket = convex_tail_bracket<Real>(f, F_int, Real(m));
  Index used = 0;
  while (bracket.width() > Real(budget.target_width) && used < budget.max_terms) {
    // Grow the explicit part geometrically so wide tails don't crawl.
    Index chunk = std::max<Index>(16, m / 8);
    chunk = std::min(chunk, budget.max_terms - used);
    for (Index i = 0; i < chunk; ++i) partial.add(f(Real(m + i)));
    m += chunk;
    used += chunk;
    bracket = convex_tail_bracket<Real>(f, F_int, Real(m));
  }
  const Real p = partial.value();
  const Real perr = partial.error_bound();
  Interval<Real> total{p - perr + bracket.lo, p + perr + bracket.hi};
  return make_tail(total, bracket.width() <= Real(budget.target_width));
}

// ---- closed-form families ----------------------------------------------

// sum_{i=n}^inf i^(-s), s > 1, n >= 1.
template <class Real>
TailInterval<Real> power_tail(Real s, Index n, const EvalBudget& budget) {
  if (!(s > 1)) throw domain_error("power_tail: exponent must exceed 1");
  auto f = [s](Real x) { return std::pow(x, -s); };
  auto F = [s](Real x) { return std::pow(x, 1 - s) / (s - 1); };
  return sum_tail<Real>(f, F, n, budget);
}

// zeta(s) = sum_{i>=1} i^(-s) as a certified interval.
template <class Real>
Interval<Real> zeta_interval(Real s, const EvalBudget& budget) {
  TailInterval<Real> t = power_tail<Real>(s, 1, budget);
  return t.iv();
}

// sum_{i=n}^inf 1/(i ln^t i), t > 1, n >= 2. 1/(x ln^t x) is decreasing and
// convex on x >= 2 for every t > 0.
template <class Real>
TailInterval<Real> log_power_tail(Real t, Index n, const EvalBudget& budget) {
  if (!(t > 1)) throw domain_error("log_power_tail: exponent must exceed 1");
  if (n < 2) throw domain_error("log_power_tail: defined from i = 2");
  auto f = [t](Real x) { return Real(1) / (x * std::pow(std::log(x), t)); };
  auto F = [t](Real x) { return std::pow(std::log(x), 1 - t) / (t - 1); };
  return sum_tail<Real>(f, F, n, budget);
}

// Normalizer C_t = sum_{i>=2} 1/(i ln^t i).
template <class Real>
Interval<Real> log_power_norm(Real t, const EvalBudget& budget) {
  return log_power_tail<Real>(t, 2, budget).iv();
}

// ---- log-space closed forms (huge n, no summation) -----------------------

// log of the pure integral bracket for sum_{i>=n} i^(-s); valid for all
// n >= 1, loose by O(1/n) relative width, immune to underflow.
template <class Real>
Interval<Real> log_power_tail_log(Real s, Real n) {
  const Real lo = (1 - s) * std::log(n) - std::log(s - 1) +
                  std::log1p((s - 1) / (2 * n));
  const Real hi = (1 - s) * std::log(n - Real(0.5)) - std::log(s - 1);
  const Real eps = 16 * std::numeric_limits<Real>::epsilon() * (std::abs(hi) + 1);
  return Interval<Real>(std::min(lo, hi), hi).widened(eps);
}

template <class Real>
Interval<Real> log_log_power_tail_log(Real t, Real n) {
  const Real lo = (1 - t) * std::log(std::log(n)) - std::log(t - 1);
  const Real hi = (1 - t) * std::log(std::log(n - Real(0.5))) - std::log(t - 1);
  const Real eps = 16 * std::numeric_limits<Real>::epsilon() * (std::abs(hi) + 1);
  return Interval<Real>(std::min(lo, hi), std::max(lo, hi)).widened(eps);
}

// ---- eventually-geometric sums -------------------------------------------

// sum_{i=n}^inf g(i) for positive g whose term ratio g(i+1)/g(i) is bounded
// by ratio_bound(i), itself nonincreasing in i. Once the bound drops below 1
// the remainder closes geometrically.
template <class Real>
TailInterval<Real> sum_eventually_geometric(
    const std::function<Real(Index)>& g,
    const std::function<Real(Index)>& ratio_bound, Index n,
    const EvalBudget& budget) {
  CompensatedSum<Real> partial;
  Real last = 0;
  Index i = n;
  for (Index used = 0; used < budget.max_terms; ++used, ++i) {
    last = g(i);
    partial.add(last);
    const Real r = ratio_bound(i);
    if (r < 1 && last * r / (1 - r) <= Real(budget.target_width)) {
      const Real p = partial.value(), e = partial.error_bound();
      return make_tail(Interval<Real>(p - e, p + e + last * r / (1 - r)), true);
    }
  }
  const Real p = partial.value(), e = partial.error_bound();
  const Real r = ratio_bound(i - 1);
  const Real rem =
      r < 1 ? last * r / (1 - r) : std::numeric_limits<Real>::infinity();
  return make_tail(Interval<Real>(p - e, p + e + rem), false);
}

}  // namespace series
}  // namespace entconv

#endif  // ENTCONV_SERIES_HPP
