#ifndef ENTCONV_UTIL_HPP
#define ENTCONV_UTIL_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace entconv {

using Index = std::int64_t;

// Sentinel for spectra with infinitely many nonzero coefficients.
inline constexpr Index kInfiniteRank = std::numeric_limits<Index>::max();

struct domain_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct budget_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct internal_error : std::logic_error {
  using std::logic_error::logic_error;
};

// Neumaier variant of Kahan summation: the compensation also absorbs the
// case where the incoming term is larger than the running sum.
template <class Real>
class CompensatedSum {
 public:
  void add(Real x) {
    const Real t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
    ++count_;
  }
  Real value() const { return sum_ + comp_; }
  Index count() const { return count_; }
  // Coarse bound on accumulated rounding of the compensated result.
  Real error_bound() const {
    const Real eps = std::numeric_limits<Real>::epsilon();
    return 2 * eps * std::abs(value()) + eps * eps * Real(count_ + 1);
  }

 private:
  Real sum_ = 0, comp_ = 0;
  Index count_ = 0;
};

// Closed interval [lo, hi]; the minimal operations the tail brackets need.
template <class Real>
struct Interval {
  Real lo = 0, hi = 0;

  Interval() = default;
  Interval(Real a, Real b) : lo(a), hi(b) {
    if (!(lo <= hi)) throw internal_error("interval endpoints out of order");
  }
  static Interval point(Real x) { return Interval(x, x); }

  Real mid() const { return (lo + hi) / 2; }
  Real width() const { return hi - lo; }
  bool contains(Real x) const { return lo <= x && x <= hi; }

  Interval operator+(const Interval& o) const { return {lo + o.lo, hi + o.hi}; }
  Interval operator-(const Interval& o) const { return {lo - o.hi, hi - o.lo}; }
  Interval operator*(Real c) const {
    return c >= 0 ? Interval(lo * c, hi * c) : Interval(hi * c, lo * c);
  }
  Interval operator+(Real c) const { return {lo + c, hi + c}; }
  Interval operator/(const Interval& o) const {
    if (o.lo <= 0) throw internal_error("interval division by non-positive");
    return {lo / o.hi, hi / o.lo};
  }
  // Directed outward rounding slop for results of float evaluation.
  Interval widened(Real slop) const { return {lo - slop, hi + slop}; }
  Interval clamped_nonneg() const { return {lo < 0 ? 0 : lo, hi < 0 ? 0 : hi}; }
};

template <class Real>
Interval<Real> intersect(const Interval<Real>& a, const Interval<Real>& b) {
  const Real lo = std::max(a.lo, b.lo), hi = std::min(a.hi, b.hi);
  if (lo > hi) throw internal_error("empty interval intersection");
  return {lo, hi};
}

// log(C(n, k)) without overflow; exact for tiny cases the tests enumerate.
template <class Real>
Real log_binomial(Index n, Index k) {
  if (k < 0 || k > n) return -std::numeric_limits<Real>::infinity();
  return static_cast<Real>(std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
                           std::lgamma(double(n - k) + 1.0));
}

// C(n, k) >= threshold, evaluated without overflow (saturates once exceeded).
inline bool binomial_at_least(Index n, Index k, double threshold) {
  if (k < 0 || k > n) return threshold <= 0;
  k = std::min(k, n - k);
  double acc = 1;
  for (Index j = 1; j <= k; ++j) {
    acc *= double(n - k + j) / double(j);
    if (acc >= threshold) return true;
  }
  return acc >= threshold;
}

template <class Real>
bool nearly_equal(Real a, Real b, Real tol) {
  return std::abs(a - b) <= tol;
}

}  // namespace entconv

#endif  // ENTCONV_UTIL_HPP
