#ifndef ENTCONV_RANK_MONOTONE_HPP
#define ENTCONV_RANK_MONOTONE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "entconv/decay.hpp"
#include "entconv/majorization.hpp"
#include "entconv/series.hpp"
#include "entconv/slocc.hpp"
#include "entconv/spectrum.hpp"
#include "entconv/util.hpp"

namespace entconv {

// A rate family is a one-parameter scale of positive, strictly decreasing,
// convex profiles f_r(n). Tail sums are measured against the scale: the
// extended ranks R-/R+ of a state are the infimum parameters at which
// E_n / f_r(n) still tends to zero (liminf resp. limsup).
enum class RateFamilyKind { Power, Squeeze };

template <class Real>
struct RateFamily {
  RateFamilyKind kind = RateFamilyKind::Power;
  Real lo = 0, hi = 1;  // open parameter interval

  const char* name() const {
    return kind == RateFamilyKind::Power ? "power" : "squeeze";
  }

  // power:   f_r(n) = n^{-(1/r - 1)}
  // squeeze: f_q(n) = q^{2n}
  Real log_f(Real r, Real n) const {
    check_param(r);
    if (kind == RateFamilyKind::Power) return -(1 / r - 1) * std::log(n);
    return 2 * n * std::log(r);
  }

  Real f(Real r, Real n) const { return std::exp(log_f(r, n)); }

  // ln(-f'_r(x)); the x-derivative is negative everywhere on [1, inf)
  Real log_neg_fprime(Real r, Real x) const {
    check_param(r);
    if (kind == RateFamilyKind::Power)
      return std::log(1 / r - 1) - (1 / r) * std::log(x);
    return std::log(-2 * std::log(r)) + 2 * x * std::log(r);
  }

  void check_param(Real r) const {
    if (!(r > lo) || !(r < hi))
      throw domain_error(std::string(name()) +
                         " family: parameter outside the open interval");
  }
};

template <class Real>
std::vector<RateFamily<Real>> stock_families() {
  return {RateFamily<Real>{RateFamilyKind::Power, 0, 1},
          RateFamily<Real>{RateFamilyKind::Squeeze, 0, 1}};
}

template <class Real>
RateFamily<Real> rate_family(const std::string& name) {
  for (const auto& f : stock_families<Real>())
    if (name == f.name()) return f;
  throw domain_error("unknown rate family: " + name);
}

// Spot checks of the scale conditions at widely spaced ranks. All values are
// carried in log space; the squeeze profiles underflow double well before
// n = 10^9.
template <class Real>
struct ValidityWitness {
  std::string condition;
  Real n = 0;
  Real value = 0;  // margin; nonnegative means the condition holds
  bool pass = false;
};

template <class Real>
std::vector<ValidityWitness<Real>> family_witnesses(const RateFamily<Real>& fam,
                                                    Real r) {
  std::vector<ValidityWitness<Real>> out;
  const Real ns[] = {Real(1e3), Real(1e6), Real(1e9)};
  for (Real n : ns) {
    const Real l = fam.log_f(r, n);
    out.push_back({"finite positive value", n, l, std::isfinite(l)});
    const Real drop = fam.log_f(r, n) - fam.log_f(r, n + 1);
    out.push_back({"strictly decreasing", n, drop, drop > 0});
    // log((f(n-1) + f(n+1)) / 2) >= log f(n), evaluated stably
    const Real a = fam.log_f(r, n - 1), b = fam.log_f(r, n), c = fam.log_f(r, n + 1);
    const Real m = std::max(a, c);
    const Real lhs = m + std::log((std::exp(a - m) + std::exp(c - m)) / 2);
    out.push_back({"convex", n, lhs - b, lhs >= b});
    const Real dneg = fam.log_neg_fprime(r, n) - fam.log_neg_fprime(r, n + 1);
    out.push_back({"-f' decreasing", n, dneg, dneg > 0});
  }
  return out;
}

// Cross-scale separation: for r1 < r2 the ratio f_{r1}(n) / f_{r2}(n + m)
// must vanish; witnessed by the log-ratio falling across the spot ranks.
template <class Real>
std::vector<ValidityWitness<Real>> cross_ratio_witnesses(
    const RateFamily<Real>& fam, Real r1, Real r2, Real shift = 0) {
  if (!(r1 < r2))
    throw domain_error("cross_ratio_witnesses: needs r1 < r2");
  std::vector<ValidityWitness<Real>> out;
  const Real ns[] = {Real(1e3), Real(1e6), Real(1e9)};
  Real prev = std::numeric_limits<Real>::infinity();
  for (Real n : ns) {
    const Real lr = fam.log_f(r1, n) - fam.log_f(r2, n + shift);
    out.push_back({"log ratio falls", n, prev - lr, lr < prev});
    prev = lr;
  }
  out.push_back({"well separated at the last rank", ns[2], -prev, prev < -20});
  return out;
}

// Normalization constant of the reference state: c_r = sum_n -f'_r(n).
template <class Real>
Interval<Real> reference_normalization(const RateFamily<Real>& fam, Real r,
                                       const EvalBudget& budget = {}) {
  fam.check_param(r);
  if (fam.kind == RateFamilyKind::Power) {
    // -f' = (1/r - 1) n^{-1/r}; the zeta value is of order 1/(s - 1), so the
    // width target scales with it to keep cost bounded near r = 1
    EvalBudget b = budget;
    const Real s = 1 / r;
    b.target_width = std::max(1e-14, 1e-11 * double(1 / (s - 1) + 1));
    Interval<Real> z = series::zeta_interval<Real>(s, b);
    Interval<Real> c = z * (1 / r - 1);
    if (c.width() > Real(1e-10) * c.mid())
      throw budget_error("reference_normalization: requested width not met");
    return c;
  }
  // -f' = -2 ln q q^{2n}: geometric with ratio q^2
  const Real q2 = r * r;
  const Real v = -2 * std::log(r) * q2 / (1 - q2);
  const Real slop = 8 * std::numeric_limits<Real>::epsilon() * v;
  return {v - slop, v + slop};
}

// Reference states lambda_n = -f'_r(n) / c_r; for the stock families these
// are exactly the power-law and geometric spectra.
template <class Real>
Spectrum<Real> reference_state(const RateFamily<Real>& fam, Real r) {
  fam.check_param(r);
  for (const auto& w : family_witnesses(fam, r))
    if (!w.pass)
      throw internal_error("reference_state: scale condition failed: " +
                           w.condition);
  if (fam.kind == RateFamilyKind::Power) return Spectrum<Real>::power_law(r);
  return Spectrum<Real>::geometric(r);
}

enum class EstimateMethod { Analytic, NumericBisection };

inline const char* estimate_method_name(EstimateMethod m) {
  return m == EstimateMethod::Analytic ? "analytic" : "numeric_bisection";
}

template <class Real>
struct TrendRow {
  Real r = 0;
  Real n = 0;
  Real log10_g = 0;  // g(n) = E_n / f_r(n)
};

template <class Real>
struct MonotoneEstimate {
  Interval<Real> r_minus{0, 0};
  Interval<Real> r_plus{0, 0};
  EstimateMethod method = EstimateMethod::Analytic;
  std::vector<TrendRow<Real>> evidence;
  bool inconclusive_trend = false;
  std::string note;
};

struct MonotoneOptions {
  double n_max = 1e9;
  double r_tol = 0.004;           // numeric bisection resolution
  double slope_threshold = -0.5;  // per decade over the final two decades
  double cutoff = 1e-6;           // ceiling for g at the far end
  int grid_per_decade = 8;
  bool force_numeric = false;
  EvalBudget budget;
};

namespace detail {

template <class Real>
std::optional<Real> analytic_rank_value(const DecayClass<Real>& c,
                                        const RateFamily<Real>& fam) {
  if (fam.kind == RateFamilyKind::Power) {
    switch (c.kind) {
      case DecayKind::FiniteRank:
      case DecayKind::Exponential:
      case DecayKind::Stretched:
        return Real(0);
      case DecayKind::Power:
        return 1 / (1 + c.alpha);
      case DecayKind::LogPoly:
        return Real(1);
      default:
        return std::nullopt;
    }
  }
  switch (c.kind) {
    case DecayKind::FiniteRank:
      return Real(0);
    case DecayKind::Exponential:
      return std::sqrt(c.rho);
    case DecayKind::Stretched:
    case DecayKind::Power:
    case DecayKind::LogPoly:
      return Real(1);  // slower than every squeeze profile
    default:
      return std::nullopt;
  }
}

// Samples of log10 E_n on the final two decades of the rank grid.
template <class Real>
struct RankSample {
  Real n = 0;
  Real log10_e = 0;
};

template <class Real>
std::vector<RankSample<Real>> sample_log_tails(const Spectrum<Real>& s,
                                               Real n_hi, int per_decade,
                                               const EvalBudget& budget) {
  std::vector<RankSample<Real>> out;
  const Real ln10 = std::log(Real(10));
  const Real n_lo = std::max(Real(s.first_index() + 1), n_hi / 100);
  const int steps = std::max(2, int(std::ceil(
                                 per_decade * std::log10(n_hi / n_lo))));
  Index prev = 0;
  for (int i = 0; i <= steps; ++i) {
    const Real t = std::log(n_lo) + (std::log(n_hi) - std::log(n_lo)) *
                                        Real(i) / Real(steps);
    const Index n = Index(std::llround(std::exp(t)));
    if (n <= prev) continue;
    prev = n;
    Real le;
    if (auto l = s.log_tail_at_rank(n)) {
      le = l->mid() / ln10;
    } else {
      const Real e = s.tail_at_rank(n, budget).iv().mid();
      le = e > 0 ? std::log10(e) : -std::numeric_limits<Real>::infinity();
    }
    out.push_back({Real(n), le});
  }
  return out;
}

}  // namespace detail

// R-estimate for the state against the family. Known decay classes resolve
// analytically; otherwise the vanishing test g(n) = E_n / f_r(n) -> 0 is
// judged on the final two decades of a geometric rank grid (slope and
// smallness), and the boundary parameter is bisected.
template <class Real>
MonotoneEstimate<Real> estimate_R(const Spectrum<Real>& s,
                                  const RateFamily<Real>& fam,
                                  const MonotoneOptions& opts = {}) {
  MonotoneEstimate<Real> out;
  const DecayClass<Real> cls = s.decay_class();
  if (!opts.force_numeric) {
    if (auto v = detail::analytic_rank_value(cls, fam)) {
      const Real x = std::min(fam.hi, std::max(fam.lo, *v));
      out.r_minus = out.r_plus = {x, x};
      out.method = EstimateMethod::Analytic;
      out.note = std::string("decay class resolves the ") + fam.name() +
                 " scale exactly";
      return out;
    }
  }

  out.method = EstimateMethod::NumericBisection;
  Real n_hi = Real(opts.n_max);
  if (!detail::has_fast_tail(s) && !s.has_log_tail()) {
    n_hi = std::min(n_hi, Real(1e5));  // enumeration cost caps the grid
    out.note = "grid capped: no closed-form tail";
  }
  const auto samples = detail::sample_log_tails(s, n_hi, opts.grid_per_decade,
                                                opts.budget);
  if (samples.size() < 3)
    throw budget_error("estimate_R: rank grid too small");

  const Real l10cut = std::log10(Real(opts.cutoff));
  bool osc_seen = false;

  auto vanishes = [&](Real r, bool use_min) {
    const Real l10 = std::log(Real(10));
    const Real first = samples.front().log10_e - fam.log_f(r, samples.front().n) / l10;
    Real stat = use_min ? std::numeric_limits<Real>::infinity()
                        : -std::numeric_limits<Real>::infinity();
    Real last = first, prev = first;
    int direction_flips = 0, last_sign = 0;
    for (const auto& sm : samples) {
      const Real g = sm.log10_e - fam.log_f(r, sm.n) / l10;
      stat = use_min ? std::min(stat, g) : std::max(stat, g);
      const Real step = g - prev;
      // a monotone trend either way is a verdict, not an oscillation
      if (std::isfinite(step) && std::abs(step) > Real(0.05)) {
        const int sign = step > 0 ? 1 : -1;
        if (last_sign != 0 && sign != last_sign) ++direction_flips;
        last_sign = sign;
      }
      prev = g;
      last = g;
    }
    if (direction_flips >= 2) osc_seen = true;
    const Real decades =
        std::log10(samples.back().n) - std::log10(samples.front().n);
    Real slope;
    if (!std::isfinite(last) && !std::isfinite(first))
      slope = -std::numeric_limits<Real>::infinity();
    else
      slope = (last - first) / decades;
    return slope <= Real(opts.slope_threshold) && stat <= l10cut;
  };

  auto record = [&](Real r) {
    size_t stride = std::max<size_t>(1, samples.size() / 5);
    for (size_t i = 0; i < samples.size(); i += stride) {
      const auto& sm = samples[i];
      out.evidence.push_back(
          {r, sm.n, sm.log10_e - fam.log_f(r, sm.n) / std::log(Real(10))});
    }
  };

  auto bisect = [&](bool use_min) -> Interval<Real> {
    const Real margin = std::min(Real(opts.r_tol), (fam.hi - fam.lo) / 100);
    Real lo = fam.lo + margin, hi = fam.hi - margin;
    if (vanishes(lo, use_min)) {
      record(lo);
      return {fam.lo, lo};
    }
    if (!vanishes(hi, use_min)) {
      record(hi);
      return {hi, fam.hi};
    }
    while (hi - lo > Real(opts.r_tol)) {
      const Real mid = (lo + hi) / 2;
      (vanishes(mid, use_min) ? hi : lo) = mid;
    }
    record(lo);
    record(hi);
    return {lo, hi};
  };

  out.r_minus = bisect(true);
  out.r_plus = bisect(false);
  // liminf-based vanishing is the easier test, so r_minus cannot exceed
  // r_plus; interval slop is absorbed by widening toward the union
  if (out.r_plus.lo < out.r_minus.lo) out.r_plus.lo = out.r_minus.lo;
  if (out.r_minus.hi > out.r_plus.hi) out.r_minus.hi = out.r_plus.hi;
  if (osc_seen) {
    out.inconclusive_trend = true;
    const Real w = Real(opts.r_tol);
    out.r_minus = {std::max(fam.lo, out.r_minus.lo - w),
                   std::min(fam.hi, out.r_minus.hi + w)};
    out.r_plus = {std::max(fam.lo, out.r_plus.lo - w),
                  std::min(fam.hi, out.r_plus.hi + w)};
    out.note += std::string(out.note.empty() ? "" : "; ") +
                "non-monotone trend in the decision window; bracket widened";
  }
  return out;
}

enum class OrderVerdict { ConvertibleCertified, BlockedCertified, Inconclusive };

inline const char* order_verdict_name(OrderVerdict v) {
  switch (v) {
    case OrderVerdict::ConvertibleCertified: return "convertible_certified";
    case OrderVerdict::BlockedCertified: return "blocked_certified";
    case OrderVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

template <class Real>
struct OrderReport {
  OrderVerdict verdict = OrderVerdict::Inconclusive;
  MonotoneEstimate<Real> source;
  MonotoneEstimate<Real> target;
  std::string note;
};

// Rank order test for stochastic conversion from source to target: a source
// whose extended rank strictly exceeds the target's R+ converts with some
// probability; a certified drop in either extended rank blocks conversion
// at every positive probability.
template <class Real>
OrderReport<Real> order_check(const Spectrum<Real>& source,
                              const Spectrum<Real>& target,
                              const RateFamily<Real>& fam,
                              const MonotoneOptions& opts = {}) {
  OrderReport<Real> rep;
  rep.source = estimate_R(source, fam, opts);
  rep.target = estimate_R(target, fam, opts);
  if (rep.target.r_plus.hi < rep.source.r_minus.lo) {
    rep.verdict = OrderVerdict::ConvertibleCertified;
    rep.note = "target R+ certified below source R-";
  } else if (rep.source.r_plus.hi < rep.target.r_plus.lo ||
             rep.source.r_minus.hi < rep.target.r_minus.lo) {
    rep.verdict = OrderVerdict::BlockedCertified;
    rep.note = "an extended rank of the source sits certified below the target's";
  } else {
    rep.verdict = OrderVerdict::Inconclusive;
    rep.note = "estimate brackets overlap";
  }
  return rep;
}

// ---- strong inhibition of exponential-to-power conversion -------------------

// Exponent level of the k-th largest amplitude of p copies of an exponential
// state with base amplitude q^n (n >= 1 on each factor): the smallest total
// s with C(s, p) >= k.
inline Index exponent_level_of_rank(Index k, int copies) {
  if (k < 1 || copies < 1) throw domain_error("exponent_level_of_rank");
  Index lo = copies, hi = copies;
  while (!binomial_at_least(hi, copies, double(k))) {
    hi *= 2;
    if (hi > Index(1) << 60) throw budget_error("exponent level overflow");
  }
  while (lo < hi) {
    const Index mid = lo + (hi - lo) / 2;
    if (binomial_at_least(mid, copies, double(k)))
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

template <class Real>
struct InhibitionRow {
  Index k = 0;
  Index s = 0;              // exponent level: amplitude is q^s
  Real log_f = 0;           // s ln q
  Real verbatim_bound = 0;  // -r ((p! k)^{1/p} + 1)
  Real robust_bound = 0;    // -r (p! k)^{1/p}
  bool verbatim_ok = false;
  bool robust_ok = false;
};

template <class Real>
struct InhibitionReport {
  Real q = 0;  // base amplitude ratio; r = -ln q
  int copies = 0;
  std::vector<InhibitionRow<Real>> rows;
  Index verbatim_violations = 0;
  bool robust_all_ok = true;
  ProbabilityVerdict<Real> conversion;  // p copies against the target
  std::string note;
};

// Amplitude decay of p exponential copies versus a power-law target. The
// k-th amplitude is exp(-r s(k)) with s(k) >= (p! k)^{1/p}; the sharper
// printed bound with the extra +1 in the exponent fails at small k and is
// reported per rank rather than assumed.
template <class Real>
InhibitionReport<Real> check_inhibition(Real q, int copies,
                                        const Spectrum<Real>& target, Index k_max,
                                        const SloccOptions& opts = {}) {
  if (!(q > 0) || !(q < 1))
    throw domain_error("check_inhibition: base ratio must lie in (0, 1)");
  if (copies < 1) throw domain_error("check_inhibition: copies must be positive");
  InhibitionReport<Real> rep;
  rep.q = q;
  rep.copies = copies;
  const Real r = -std::log(q);
  const Real lfact = std::lgamma(Real(copies) + 1);
  for (Index k = 1; k <= k_max; ++k) {
    InhibitionRow<Real> row;
    row.k = k;
    row.s = exponent_level_of_rank(k, copies);
    row.log_f = -r * Real(row.s);
    const Real root = std::exp((lfact + std::log(Real(k))) / Real(copies));
    row.verbatim_bound = -r * (root + 1);
    row.robust_bound = -r * root;
    row.verbatim_ok = row.log_f <= row.verbatim_bound + Real(1e-12);
    row.robust_ok = row.log_f <= row.robust_bound + Real(1e-12);
    if (!row.verbatim_ok) ++rep.verbatim_violations;
    if (!row.robust_ok) rep.robust_all_ok = false;
    rep.rows.push_back(row);
  }
  const auto lam =
      Spectrum<Real>::tensor_power(Spectrum<Real>::geometric(q), copies);
  rep.conversion = max_probability(lam, target, opts);
  rep.note = rep.verbatim_violations
                 ? "printed bound fails at small ranks; the robust form holds"
                 : "printed bound holds on the checked range";
  return rep;
}

}  // namespace entconv

#endif
