#ifndef ENTCONV_LOCC_HPP
#define ENTCONV_LOCC_HPP

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "entconv/majorization.hpp"
#include "entconv/spectrum.hpp"
#include "entconv/util.hpp"

namespace entconv {

// Deterministic convertibility into every trace-norm neighborhood of the
// target: Certified exactly when the source spectrum is majorized by the
// target spectrum.
template <class Real>
CompareReport<Real> decide_locc(const Spectrum<Real>& lambda,
                                const Spectrum<Real>& mu,
                                const CompareOptions& opts = {}) {
  return compare(lambda, mu, Relation::Standard, opts);
}

// Certified bracket on the trace distance 2 sqrt(1 - F^2) between the pure
// states with sorted Schmidt spectra a and b; F is bracketed by the depth-K
// partial overlap plus a Cauchy-Schwarz tail term.
template <class Real>
Interval<Real> trace_distance_pure(const Spectrum<Real>& a,
                                   const Spectrum<Real>& b, Index depth,
                                   const EvalBudget& budget = {}) {
  CompensatedSum<Real> acc;
  auto ea = a.enumerate();
  auto eb = b.enumerate();
  for (Index k = 0; k < depth; ++k) {
    const Real va = ea.next(), vb = eb.next();
    if (va <= 0 && vb <= 0) break;
    acc.add(std::sqrt(va * vb));
  }
  const Real slack = acc.error_bound() +
                     8 * std::numeric_limits<Real>::epsilon() * acc.value();
  const Real f_lo = std::min(acc.value() - slack, Real(1));
  const Real ta = a.tail_at_rank(depth + 1, budget).upper;
  const Real tb = b.tail_at_rank(depth + 1, budget).upper;
  const Real f_hi = std::min(acc.value() + slack + std::sqrt(ta * tb), Real(1));
  const Real lo = 2 * std::sqrt(std::max(Real(0), 1 - f_hi * f_hi));
  const Real hi = 2 * std::sqrt(std::max(Real(0), 1 - std::max(Real(0), f_lo) *
                                                          std::max(Real(0), f_lo)));
  return {lo, hi};
}

enum class PlanCase { BothFinite, FiniteTarget, InfiniteA, InfiniteB };

inline const char* plan_case_name(PlanCase c) {
  switch (c) {
    case PlanCase::BothFinite: return "both_finite";
    case PlanCase::FiniteTarget: return "finite_target";
    case PlanCase::InfiniteA: return "infinite_a";
    case PlanCase::InfiniteB: return "infinite_b";
  }
  return "?";
}

template <class Real>
struct ConversionPlan {
  PlanCase tag = PlanCase::BothFinite;
  Spectrum<Real> mu_prime;
  Index n1 = 0, n2 = 0;     // construction cutoffs
  Index big_m = 0, big_n = 0;  // finite-target table sizes
  Real delta = 0;           // plateau increment (infinite case b)
  Real d_adjust = 0;        // mass absorbed into the target's last level
  Real plateau = 0;
  Real distance_bound = 0;  // certified, guaranteed <= requested epsilon
  Real fidelity_lower = 1;
  CompareReport<Real> cert_lambda_muprime;  // lambda < mu'
  CompareReport<Real> cert_muprime_mu;      // mu' < mu
  std::vector<TTransform> finite_transcript;  // BothFinite: Nielsen factors
  std::vector<std::string> transcript;        // verified inequalities, in order
};

namespace detail {

// minimal m >= lo with monotone pred(m) true; nullopt when cap reached
template <class Pred>
std::optional<Index> find_min_true(const Pred& pred, Index lo, Index cap) {
  Index hi = lo;
  Index step = 1;
  while (!pred(hi)) {
    if (hi >= cap) return std::nullopt;
    step = std::min(step * 2, cap);
    hi = std::min(hi + step, cap);
  }
  Index lo2 = lo;  // invariant: pred(hi) true, pred below lo2 unknown/false
  while (lo2 < hi) {
    const Index mid = lo2 + (hi - lo2) / 2;
    if (pred(mid)) hi = mid; else lo2 = mid + 1;
  }
  return hi;
}

template <class Real>
std::string fmt_real(Real v) {
  std::ostringstream os;
  os.precision(12);
  os << double(v);
  return os.str();
}

// First rank m such that n * lambda_n < tau for every n >= m; requires a
// family whose n lambda_n is decreasing beyond a computable peak.
template <class Real>
Index first_rank_small_n_lambda(const Spectrum<Real>& lam, Real tau,
                                Index cap) {
  Real factor = 1;
  Spectrum<Real> core = lam;
  while (core.kind() == SpectrumKind::Scaled) {
    factor *= core.param_factor();
    core = core.child_base();
  }
  Index peak = 1;
  switch (core.kind()) {
    case SpectrumKind::Geometric:
      peak = Index(1 / (2 * std::abs(std::log(core.param_q())))) + 2;
      break;
    case SpectrumKind::PowerLaw:
    case SpectrumKind::LogPower:
      peak = 1;  // n lambda_n decreasing from the first rank
      break;
    default:
      throw domain_error(
          "finite-target construction requires a closed-form source family");
  }
  peak = std::min(peak, cap);
  Real sup = 0;
  for (Index n = 1; n <= peak; ++n)
    sup = std::max(sup, Real(n) * lam.value_at_rank(n));
  if (sup < tau) return 1;
  auto pred = [&](Index m) {
    return m >= peak && Real(m) * lam.value_at_rank(m) < tau;
  };
  auto r = find_min_true(pred, peak, cap);
  if (!r) throw budget_error("finite-target cutoff search exceeded budget");
  return *r;
}

}  // namespace detail

struct PlanOptions {
  CompareOptions compare;
  Index search_cap = 50'000'000;  // rank search ceiling for cutoffs
  Index verify_depth = 1000;      // pointwise depth for the sandwich checks
};

// Intermediate-state construction: a spectrum mu' with lambda < mu' < mu
// (standard majorization, certified) whose pure state lies within epsilon
// trace distance of the target. Head agrees with the target, tail with the
// source, so the conversion needs only finitely much classical communication.
template <class Real>
ConversionPlan<Real> build_intermediate(const Spectrum<Real>& lambda,
                                        const Spectrum<Real>& mu, Real eps,
                                        const PlanOptions& opts = {}) {
  if (!(eps > 0 && eps <= 2))
    throw domain_error("build_intermediate: epsilon must lie in (0, 2]");
  const EvalBudget& budget = opts.compare.budget;
  CompareOptions vopts = opts.compare;
  vopts.scan_depth = std::max(vopts.scan_depth, opts.verify_depth);

  ConversionPlan<Real> plan;
  auto note = [&plan](std::string s) { plan.transcript.push_back(std::move(s)); };

  CompareReport<Real> pre = decide_locc(lambda, mu, vopts);
  if (pre.verdict == Verdict::Refuted)
    throw domain_error("build_intermediate: source is not convertible (majorization refuted at rank " +
                       std::to_string(pre.witness_rank) + ")");
  if (pre.verdict == Verdict::Undecided)
    throw budget_error("build_intermediate: convertibility undecided: " + pre.method);
  note("precondition lambda < mu: certified (" + pre.method + ")");

  const Index rl = lambda.rank_count();
  const Index rm = mu.rank_count();

  if (same_structure(lambda, mu)) {
    plan.tag = rm == kInfiniteRank ? PlanCase::InfiniteA : PlanCase::BothFinite;
    plan.mu_prime = mu;
    plan.n1 = plan.n2 = rm == kInfiniteRank ? 0 : rm;
    plan.distance_bound = 0;
    plan.cert_lambda_muprime = pre;
    plan.cert_muprime_mu = pre;
    note("identity conversion: mu' = mu, distance 0");
    return plan;
  }

  if (rl != kInfiniteRank && rm != kInfiniteRank) {
    // finite Nielsen case: mu' = mu, transcript via T-transforms
    plan.tag = PlanCase::BothFinite;
    plan.mu_prime = mu;
    plan.n1 = plan.n2 = rm;
    plan.distance_bound = 0;
    plan.cert_lambda_muprime = pre;
    plan.cert_muprime_mu = pre;
    const Index n = std::max(rl, rm);
    std::vector<Real> x, y;
    for (Index k = 1; k <= n; ++k) {
      x.push_back(lambda.value_at_rank(k));
      y.push_back(mu.value_at_rank(k));
    }
    plan.finite_transcript = synthesize_t_transforms<Real>(x, y);
    note("mu' = mu; " + std::to_string(plan.finite_transcript.size()) +
         " T-transform factors map mu to lambda");
    return plan;
  }

  if (rl != kInfiniteRank) {
    // finite source cannot majorize-below an infinite target; decide_locc
    // would have refuted, so reaching here means the certificate lied
    throw internal_error("build_intermediate: finite source with infinite target passed decide_locc");
  }

  using Piece = typename Spectrum<Real>::SplicePiece;
  const Real tol = Real(opts.compare.tol);

  if (rm != kInfiniteRank) {
    // finite target: push the source's deep tail onto the target's last level
    const Index big_n = rm;
    const Real mu_last = mu.value_at_rank(big_n);
    if (!(eps < mu_last))
      throw domain_error("build_intermediate: epsilon must be below the target's smallest coefficient");
    const Real tau = eps * eps / 16;
    const Index n1 =
        detail::first_rank_small_n_lambda(lambda, tau, opts.search_cap);
    auto tail_small = [&](Index m) {
      return lambda.tail_at_rank(m, budget).upper < tau;
    };
    auto n2opt = detail::find_min_true(tail_small, Index(1), opts.search_cap);
    if (!n2opt) throw budget_error("finite-target tail search exceeded budget");
    const Index n2 = *n2opt;
    const Index big_m = std::max({n1, n2, big_n});
    const Real lam_m = lambda.value_at_rank(big_m);
    const Interval<Real> tail_m1 = lambda.tail_at_rank(big_m + 1, budget).iv();
    const Interval<Real> d_iv =
        tail_m1 + Real(big_m - big_n) * lam_m;
    const Real d = d_iv.mid();
    note("n lambda_n < " + detail::fmt_real(tau) + " from rank " +
         std::to_string(n1) + "; E_m(lambda) < same threshold from rank " +
         std::to_string(n2));
    note("d = (M-N) lambda_M + E_{M+1}(lambda) = " + detail::fmt_real(d) +
         " <= eps^2/8 = " + detail::fmt_real(eps * eps / 8));
    if (!(d_iv.hi <= eps * eps / 8 + tol))
      throw internal_error("finite-target: mass adjustment exceeded its bound");
    if (!(mu_last - d > 0))
      throw internal_error("finite-target: adjusted level went nonpositive");

    std::vector<Piece> pieces;
    if (big_n > 1) {
      Piece head;
      head.type = Piece::Type::Slice;
      head.src = mu.node();
      head.count = big_n - 1;
      pieces.push_back(head);
    }
    Piece adj;
    adj.type = Piece::Type::Explicit;
    adj.values = {mu_last - d};
    pieces.push_back(adj);
    if (big_m > big_n) {
      Piece block;
      block.type = Piece::Type::Block;
      block.value = lam_m;
      block.count = big_m - big_n;
      pieces.push_back(block);
    }
    Piece tail;
    tail.type = Piece::Type::Tail;
    tail.src = lambda.node();
    tail.from = big_m + 1;
    pieces.push_back(tail);

    plan.tag = PlanCase::FiniteTarget;
    plan.mu_prime = Spectrum<Real>::spliced(std::move(pieces));
    plan.n1 = n1;
    plan.n2 = n2;
    plan.big_m = big_m;
    plan.big_n = big_n;
    plan.d_adjust = d;
    // the overlap is exact: shared head plus sqrt((mu_N - d) mu_N) on the
    // adjusted level, nothing beyond rank N on the mu side
    CompensatedSum<Real> head_sum;
    for (Index k = 1; k < big_n; ++k) head_sum.add(mu.value_at_rank(k));
    const Real overlap =
        head_sum.value() - head_sum.error_bound() +
        std::sqrt(std::max(Real(0), (mu_last - d_iv.hi) * mu_last)) * (1 - Real(1e-15));
    plan.fidelity_lower = std::max(1 - d_iv.hi, overlap);
    plan.distance_bound =
        2 * std::sqrt(std::max(Real(0), 1 - plan.fidelity_lower * plan.fidelity_lower));
    note("fidelity >= " + detail::fmt_real(plan.fidelity_lower));
  } else {
    // infinite target: keep the target's head, splice the source's tail
    auto head_close = [&](Index m) {
      const Real t = mu.tail_at_rank(m + 1, budget).upper;
      return 2 * std::sqrt(2 * t) <= eps;
    };
    auto n1opt = detail::find_min_true(head_close, Index(1), opts.search_cap);
    if (!n1opt) throw budget_error("head cutoff search exceeded budget");
    const Index n1 = *n1opt;
    const Interval<Real> mu_head_tail = mu.tail_at_rank(n1 + 1, budget).iv();
    note("N1 = " + std::to_string(n1) + ": 2 sqrt(2 E_{N1+1}(mu)) = " +
         detail::fmt_real(2 * std::sqrt(2 * mu_head_tail.hi)) +
         " <= eps = " + detail::fmt_real(eps));

    // minimal m > N1 with sum_{k<=m} lambda_k - (m - N1) lambda_m >= sum_{k<=N1} mu_k,
    // i.e. (m - N1) lambda_m + E_{m+1}(lambda) <= E_{N1+1}(mu); the left side
    // is nonincreasing in m, so the search is monotone.
    auto splice_ok = [&](Index m) {
      const Interval<Real> lhs =
          lambda.tail_at_rank(m + 1, budget).iv() +
          Real(m - n1) * lambda.value_at_rank(m);
      return lhs.hi <= mu_head_tail.lo + tol;
    };
    auto n2opt = detail::find_min_true(splice_ok, n1 + 1, opts.search_cap);
    if (!n2opt) throw budget_error("splice index search exceeded budget");
    const Index n2 = *n2opt;
    plan.n1 = n1;
    plan.n2 = n2;

    std::vector<Piece> pieces;
    Piece head;
    head.type = Piece::Type::Slice;
    head.src = mu.node();
    head.count = n1;
    pieces.push_back(head);

    if (n2 == n1 + 1) {
      plan.tag = PlanCase::InfiniteA;
      Piece tail;
      tail.type = Piece::Type::Tail;
      tail.src = lambda.node();
      tail.from = n1 + 1;
      pieces.push_back(tail);
      note("N2 = N1 + 1: head sums coincide, pure splice");
    } else {
      plan.tag = PlanCase::InfiniteB;
      // delta = [S_N1(lambda) - S_N1(mu) + sum_{N1<k<N2} (lambda_k - lambda_N2)]
      //         / (N2 - N1 - 1); the numerator's first part equals
      // E_{N1+1}(mu) - E_{N1+1}(lambda), free of cancellation
      const Interval<Real> s_gap =
          mu_head_tail - lambda.tail_at_rank(n1 + 1, budget).iv();
      const Real lam_n2 = lambda.value_at_rank(n2);
      CompensatedSum<Real> excess;
      for (Index k = n1 + 1; k <= n2 - 1; ++k)
        excess.add(lambda.value_at_rank(k) - lam_n2);
      const Real denom = Real(n2 - n1 - 1);
      Interval<Real> delta_iv =
          (s_gap + excess.value()).widened(excess.error_bound()) * (1 / denom);
      Real delta = delta_iv.mid();
      if (delta < 0) {
        if (delta_iv.hi < -tol)
          throw internal_error("plateau increment certified negative");
        delta = 0;
      }
      plan.delta = delta;
      plan.plateau = lam_n2 + delta;
      const Real lam_n1p1 = lambda.value_at_rank(n1 + 1);
      if (plan.plateau > lam_n1p1 * (1 + Real(1e-9)) + tol)
        throw internal_error("plateau exceeds the source coefficient at N1+1");
      note("delta = " + detail::fmt_real(delta) + " >= 0; plateau " +
           detail::fmt_real(plan.plateau) + " <= lambda_{N1+1} = " +
           detail::fmt_real(lam_n1p1));
      Piece block;
      block.type = Piece::Type::Block;
      block.value = plan.plateau;
      block.count = n2 - 1 - n1;
      pieces.push_back(block);
      Piece tail;
      tail.type = Piece::Type::Tail;
      tail.src = lambda.node();
      tail.from = n2;
      pieces.push_back(tail);
    }
    plan.mu_prime = Spectrum<Real>::spliced(std::move(pieces));
    // states agree on the first N1 basis levels
    plan.fidelity_lower = 1 - mu_head_tail.hi;
    plan.distance_bound =
        2 * std::sqrt(std::max(Real(0), 1 - plan.fidelity_lower * plan.fidelity_lower));
  }

  const Interval<Real> tot = plan.mu_prime.total(budget).iv();
  note("mu' total mass in [" + detail::fmt_real(tot.lo) + ", " +
       detail::fmt_real(tot.hi) + "]");
  if (std::abs(tot.mid() - 1) > Real(1e-9))
    throw internal_error("intermediate spectrum is not unit-sum");
  if (!(plan.distance_bound <= eps))
    throw internal_error("certified distance bound exceeds requested epsilon");
  note("trace distance bound " + detail::fmt_real(plan.distance_bound) +
       " <= eps = " + detail::fmt_real(eps));

  plan.cert_lambda_muprime = compare(lambda, plan.mu_prime, Relation::Standard, vopts);
  plan.cert_muprime_mu = compare(plan.mu_prime, mu, Relation::Standard, vopts);
  note(std::string("lambda < mu' standard: ") +
       verdict_name(plan.cert_lambda_muprime.verdict) + " (" +
       plan.cert_lambda_muprime.method + ")");
  note(std::string("mu' < mu standard: ") +
       verdict_name(plan.cert_muprime_mu.verdict) + " (" +
       plan.cert_muprime_mu.method + ")");
  return plan;
}

}  // namespace entconv

#endif  // ENTCONV_LOCC_HPP
