#ifndef ENTCONV_SLOCC_HPP
#define ENTCONV_SLOCC_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "entconv/decay.hpp"
#include "entconv/majorization.hpp"
#include "entconv/spectrum.hpp"
#include "entconv/util.hpp"

namespace entconv {

enum class ProbStatus { Exact, Bracketed, CertifiedZero };

inline const char* prob_status_name(ProbStatus s) {
  switch (s) {
    case ProbStatus::Exact: return "exact";
    case ProbStatus::Bracketed: return "bracketed";
    case ProbStatus::CertifiedZero: return "certified_zero";
  }
  return "?";
}

template <class Real>
struct RatioRow {
  Index n = 0;
  Interval<Real> e_lambda{0, 0};
  Interval<Real> e_mu{0, 0};
  Interval<Real> ratio{0, 0};
  bool binding = false;  // participates in the infimum (e_mu > 0)
};

// Optimal single-copy conversion probability: the infimum over n of
// E_n(lambda) / E_n(mu). p_lower is always an achievable probability;
// p_upper always dominates the optimum.
template <class Real>
struct ProbabilityVerdict {
  Real p_lower = 0;
  Real p_upper = 1;
  Index witness_index = 0;  // rank pinning p_upper (0 when none applies)
  ProbStatus status = ProbStatus::Bracketed;
  std::vector<RatioRow<Real>> rows;
  std::string method;
};

struct SloccOptions {
  Index scan_depth = 1000;
  CompareOptions compare;
  double exact_width_abs = 1e-12;  // bracket width treated as a point
  double exact_width_rel = 1e-9;
};

template <class Real>
ProbabilityVerdict<Real> max_probability(const Spectrum<Real>& lambda,
                                         const Spectrum<Real>& mu,
                                         const SloccOptions& opts = {}) {
  ProbabilityVerdict<Real> out;
  const Real inf = std::numeric_limits<Real>::infinity();
  const Real tol = Real(opts.compare.tol);

  if (same_structure(lambda, mu)) {
    detail::TailScanner<Real> sl(lambda, opts.compare.budget);
    detail::TailScanner<Real> sm(mu, opts.compare.budget);
    for (Index n = 1; n <= std::min<Index>(opts.scan_depth, 8); ++n) {
      RatioRow<Real> row;
      row.n = n;
      row.e_lambda = sl.tail(n);
      row.e_mu = sm.tail(n);
      row.ratio = {1, 1};
      row.binding = true;
      out.rows.push_back(row);
      if (row.e_mu.hi <= 0) break;
    }
    out.p_lower = out.p_upper = 1;
    out.witness_index = 1;
    out.status = ProbStatus::Exact;
    out.method = "identical structure";
    return out;
  }

  const Index rl = lambda.rank_count();
  const Index rm = mu.rank_count();

  if (rl == kInfiniteRank && rm == kInfiniteRank &&
      compare_decay(lambda.decay_class(), mu.decay_class()) ==
          DecayOrder::FasterStrict) {
    // the tail ratio tends to zero along the whole family, so no positive
    // scaling of the target is ever dominated; a scan cannot add anything
    out.p_lower = out.p_upper = 0;
    out.witness_index = 0;
    out.status = ProbStatus::CertifiedZero;
    out.method = "source tail decays strictly faster than the target tail";
    return out;
  }

  detail::TailScanner<Real> sl(lambda, opts.compare.budget);
  detail::TailScanner<Real> sm(mu, opts.compare.budget);

  Real min_lo = inf, min_hi = inf;
  Index arg_hi = 0;
  bool saw_binding = false;
  bool underflow_stop = false;

  Index scan_to = opts.scan_depth;
  if (rl != kInfiniteRank && rl < rm) scan_to = std::min(scan_to, rl + 1);
  if (rm != kInfiniteRank) scan_to = std::min(scan_to, rm);

  for (Index n = 1; n <= scan_to; ++n) {
    RatioRow<Real> row;
    row.n = n;
    row.e_lambda = sl.tail(n);
    row.e_mu = sm.tail(n);
    if (row.e_mu.hi <= 0) {
      // the target's support ends within scan_to only past its rank; a zero
      // before that is floating underflow, an information horizon either way
      underflow_stop = rm == kInfiniteRank || n <= rm;
      break;
    }
    if (row.e_lambda.hi <= 0) {
      if (rl != kInfiniteRank && n > rl && row.e_mu.lo > 0) {
        // genuine rank gap: the optimum is zero exactly
        row.ratio = {0, 0};
        row.binding = true;
        out.rows.push_back(row);
        out.p_lower = out.p_upper = 0;
        out.witness_index = n;
        out.status = ProbStatus::Exact;
        out.method = "source rank below target rank";
        return out;
      }
      // underflowed source tail gives no ratio information at this depth
      underflow_stop = true;
      break;
    }
    if (row.e_mu.hi < std::numeric_limits<Real>::min() ||
        row.e_lambda.hi < std::numeric_limits<Real>::min()) {
      // subnormal tails have lost most mantissa bits; their ratios are
      // rounding noise, so the scan's information ends here
      underflow_stop = true;
      break;
    }
    row.binding = row.e_mu.lo > 0;
    const Real r_lo = std::max(Real(0), row.e_lambda.lo) / row.e_mu.hi;
    const Real r_hi =
        row.e_mu.lo > 0 ? row.e_lambda.hi / row.e_mu.lo : inf;
    row.ratio = {r_lo, std::max(r_lo, r_hi)};
    out.rows.push_back(row);
    if (row.binding) {
      saw_binding = true;
      min_lo = std::min(min_lo, row.ratio.lo);
      if (row.ratio.hi < min_hi) {
        min_hi = row.ratio.hi;
        arg_hi = n;
      }
    }
  }

  if (rl != kInfiniteRank && rl < rm && rl + 1 > scan_to && !underflow_stop) {
    // deep finite source never reached by the scan; rank gap alone decides
    RatioRow<Real> row;
    row.n = rl + 1;
    row.e_lambda = {0, 0};
    row.e_mu = sm.tail(rl + 1);
    if (row.e_mu.lo > 0) {
      row.ratio = {0, 0};
      row.binding = true;
      out.rows.push_back(row);
      out.p_lower = out.p_upper = 0;
      out.witness_index = rl + 1;
      out.status = ProbStatus::Exact;
      out.method = "source rank below target rank";
      return out;
    }
  }

  if (!saw_binding) {
    // no resolvable constraint at all; report the trivial bracket
    out.method = "no binding ratio resolved within the scan window";
    return out;
  }
  min_lo = std::max(Real(0), std::min(min_lo, min_hi));

  const bool scan_complete =
      !underflow_stop &&
      rm != kInfiniteRank && scan_to >= rm;  // every binding rank examined

  auto finish_bracket = [&](const char* how) {
    // a probability; ratios above one only say the constraint is slack
    out.p_lower = std::min(Real(1), min_lo);
    out.p_upper = std::min(Real(1), min_hi);
    out.witness_index = arg_hi;
    const Real width = out.p_upper - out.p_lower;
    out.status = (width <= Real(opts.exact_width_abs) ||
                  width <= Real(opts.exact_width_rel) * min_hi)
                     ? ProbStatus::Exact
                     : ProbStatus::Bracketed;
    out.method = how;
  };

  if (scan_complete) {
    finish_bracket("complete scan over the target's support");
    return out;
  }

  if (min_lo > tol) {
    CompareReport<Real> cert = certify_tail_dominance(
        lambda, Spectrum<Real>::scaled(mu, min_lo), scan_to + 1, Real(0),
        opts.compare);
    if (cert.verdict == Verdict::Certified) {
      finish_bracket("scan window plus certified tail dominance");
      return out;
    }
  }

  const DecayOrder ord =
      compare_decay(lambda.decay_class(), mu.decay_class());
  if (ord == DecayOrder::FasterStrict) {
    out.p_lower = out.p_upper = 0;
    out.witness_index = 0;
    out.status = ProbStatus::CertifiedZero;
    out.method = "source tail decays strictly faster than the target tail";
    return out;
  }

  out.p_lower = 0;
  out.p_upper = std::min(Real(1), min_hi);
  out.witness_index = arg_hi;
  out.status = ProbStatus::Bracketed;
  out.method = "scan window only; tail behaviour uncertified";
  return out;
}

// Decision form: is conversion at probability p certified, refuted, or open?
template <class Real>
CompareReport<Real> check_p_convertibility(const Spectrum<Real>& lambda,
                                           const Spectrum<Real>& mu, Real p,
                                           const CompareOptions& opts = {}) {
  if (!(p > 0) || p > 1)
    throw domain_error("check_p_convertibility: p must lie in (0, 1]");
  return compare(lambda, Spectrum<Real>::scaled(mu, p), Relation::Super, opts);
}

// The dilution target: nu_1 = 1 - p (1 - mu_1) and nu_i = p mu_i beyond.
// lambda < nu (standard) if and only if lambda <^w p mu, so conversion to
// mu at probability p factors through a deterministic step to nu.
template <class Real>
Spectrum<Real> nu_spectrum(const Spectrum<Real>& mu, Real p) {
  if (!(p > 0) || p > 1) throw domain_error("nu_spectrum: p must lie in (0, 1]");
  if (p == Real(1)) return mu;
  const Real mu1 = mu.value_at_rank(1);
  using Piece = typename Spectrum<Real>::SplicePiece;
  Piece head;
  head.type = Piece::Type::Explicit;
  head.values = {1 - p * (1 - mu1)};
  Piece rest;
  rest.type = Piece::Type::Tail;
  rest.src = Spectrum<Real>::scaled(mu, p).node();
  rest.from = 2;
  return Spectrum<Real>::spliced({head, rest});
}

// Local filter mapping the mu-state to the nu-state. Diagonal entries are
// proportional to sqrt(nu_i / mu_i); normalizing by the largest keeps the
// operator a valid measurement element, and the success probability of the
// filtering outcome is sum_i nu_i / max^2.
template <class Real>
struct FilterCoefficients {
  Real head = 1;     // entry on the leading level
  Real rest = 1;     // entry on every other level
  Real raw_max = 1;  // sqrt(nu_1 / mu_1) before normalization
  Real success = 1;
};

template <class Real>
FilterCoefficients<Real> filter_coefficients(const Spectrum<Real>& mu, Real p) {
  if (!(p > 0) || p > 1)
    throw domain_error("filter_coefficients: p must lie in (0, 1]");
  FilterCoefficients<Real> f;
  const Real mu1 = mu.value_at_rank(1);
  const Real nu1 = 1 - p * (1 - mu1);
  f.raw_max = std::sqrt(nu1 / mu1);
  f.rest = std::sqrt(p * mu1 / nu1);
  f.success = mu1 / nu1;
  return f;
}

}  // namespace entconv

#endif
