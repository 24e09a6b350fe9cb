#ifndef ENTCONV_MAJORIZATION_HPP
#define ENTCONV_MAJORIZATION_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "entconv/decay.hpp"
#include "entconv/spectrum.hpp"
#include "entconv/util.hpp"

namespace entconv {

enum class Verdict { Certified, Refuted, Undecided };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Certified: return "certified";
    case Verdict::Refuted: return "refuted";
    case Verdict::Undecided: return "undecided";
  }
  return "?";
}

// x "<" y readings: Standard = x majorized by y (all prefix sums of x below
// y's, equal totals); Sub = prefix sums below without total equality;
// Super = every tail sum of x at least y's.
enum class Relation { Standard, Sub, Super };

inline const char* relation_name(Relation r) {
  switch (r) {
    case Relation::Standard: return "standard";
    case Relation::Sub: return "sub";
    case Relation::Super: return "super";
  }
  return "?";
}

struct CompareOptions {
  Index scan_depth = 1000;      // pointwise ranks the caller wants examined
  Index max_scan = 2'000'000;   // hard ceiling when closure needs more
  double tol = 1e-12;           // slack treated as equality
  EvalBudget budget;
};

template <class Real>
struct CompareReport {
  Verdict verdict = Verdict::Undecided;
  Relation relation = Relation::Standard;
  Index checked_through = 0;  // last rank verified pointwise
  Index witness_rank = 0;     // rank of a certified violation
  Real margin = std::numeric_limits<Real>::infinity();  // min slack seen
  bool used_tolerance = false;
  std::string method;
};

namespace detail {

// Closed-form tails cost O(1); everything else pays O(1) amortized only via
// a single enumerator pass.
template <class Real>
bool has_fast_tail(const Spectrum<Real>& s) {
  switch (s.kind()) {
    case SpectrumKind::Finite:
    case SpectrumKind::Geometric:
    case SpectrumKind::PowerLaw:
    case SpectrumKind::LogPower:
      return true;
    case SpectrumKind::Scaled:
    case SpectrumKind::TruncatedView:
      return has_fast_tail(s.child_base());
    case SpectrumKind::TensorPower:
      return s.child_base().kind() == SpectrumKind::Geometric;
    case SpectrumKind::Spliced: {
      // positional splices pay O(head) per rank and keep relative error;
      // anything needing a merge falls back to the enumerator path
      if (!s.splice_positionally_sorted()) return false;
      using Piece = typename Spectrum<Real>::SplicePiece;
      for (const auto& p : s.splice_pieces()) {
        if ((p.type == Piece::Type::Slice || p.type == Piece::Type::Tail) &&
            !has_fast_tail(Spectrum<Real>(p.src)))
          return false;
      }
      return true;
    }
    default:
      return false;
  }
}

// Sequential tail evaluator: call tail(k) with k strictly increasing.
template <class Real>
class TailScanner {
 public:
  TailScanner(const Spectrum<Real>& s, const EvalBudget& budget)
      : s_(s), budget_(budget), fast_(has_fast_tail(s)) {
    if (!fast_) {
      total_ = s.total(budget).iv();
      en_.emplace(s.enumerate());
    }
  }

  Interval<Real> tail(Index k) {
    if (fast_) return s_.tail_at_rank(k, budget_).iv();
    while (pos_ < k - 1) {
      en_->next();
      ++pos_;
    }
    const Real pre = en_->prefix_sum();
    const Real err = en_->prefix_error() +
                     4 * std::numeric_limits<Real>::epsilon() * std::abs(pre);
    return (total_ - Interval<Real>{pre - err, pre + err}).clamped_nonneg();
  }

 private:
  Spectrum<Real> s_;
  EvalBudget budget_;
  bool fast_;
  Interval<Real> total_{0, 0};
  std::optional<typename Spectrum<Real>::Enumerator> en_;
  Index pos_ = 0;
};

// Unwraps Scaled to find the underlying kind and accumulated factor.
template <class Real>
Spectrum<Real> unwrap_scaled(const Spectrum<Real>& s, Real& factor) {
  factor = 1;
  Spectrum<Real> cur = s;
  while (cur.kind() == SpectrumKind::Scaled) {
    factor *= cur.param_factor();
    cur = cur.child_base();
  }
  return cur;
}

enum class ScanOutcome { AllPass, Closed, Violation, Unresolved };

template <class Real>
struct ScanResult {
  ScanOutcome outcome = ScanOutcome::AllPass;
  Index last_rank = 0;   // last rank examined
  Index rank = 0;        // closure or violation rank
  Real margin = std::numeric_limits<Real>::infinity();
  bool used_tol = false;
};

// Pointwise dominance scan over ranks [k_from, k_to]:
// pass when E_x.lo >= E_y.hi + c - tol, closure when E_y.hi + c <= tol
// (monotone in k, so every later rank passes as well).
template <class Real>
ScanResult<Real> scan_dominance(TailScanner<Real>& sx, TailScanner<Real>& sy,
                                Index k_from, Index k_to, Real c,
                                const CompareOptions& opts) {
  ScanResult<Real> r;
  const Real tol = Real(opts.tol);
  for (Index k = k_from; k <= k_to; ++k) {
    const Interval<Real> ex = sx.tail(k);
    const Interval<Real> ey = sy.tail(k);
    r.last_rank = k;
    if (ey.hi + c <= tol) {
      r.outcome = ScanOutcome::Closed;
      r.rank = k;
      r.used_tol = r.used_tol || ex.lo < ey.hi + c;
      return r;
    }
    const Real slack = ex.lo - (ey.hi + c);
    r.margin = std::min(r.margin, slack);
    if (slack >= 0) continue;
    if (slack >= -tol) {
      r.used_tol = true;
      continue;
    }
    if (ex.hi < ey.lo + c - tol) {
      r.outcome = ScanOutcome::Violation;
      r.rank = k;
      return r;
    }
    r.outcome = ScanOutcome::Unresolved;  // intervals too wide to decide
    r.rank = k;
    return r;
  }
  return r;
}

// Turning point for the envelope gap D(n) = log E_x^lo(n) - log E_y^hi(n)
// of a strictly slower x against y: beyond the returned rank D is
// nondecreasing, so one nonnegative sample certifies all larger ranks.
// Empty when the pair has no supported closed-form argument.
template <class Real>
std::optional<Index> envelope_turning_point(const Spectrum<Real>& x,
                                            const Spectrum<Real>& y) {
  Real fx = 1, fy = 1;
  const Spectrum<Real> cx = unwrap_scaled(x, fx);
  const Spectrum<Real> cy = unwrap_scaled(y, fy);
  const SpectrumKind kx = cx.kind(), ky = cy.kind();
  const Real big = Real(4e15);
  if (kx == SpectrumKind::PowerLaw) {
    const Real sx = cx.param_s();
    if (ky == SpectrumKind::PowerLaw) return Index(2);
    if (ky == SpectrumKind::Geometric) {
      // d/dn: -(sx-1)/n + 2|ln qy| > 0
      const Real n0 = (sx - 1) / (2 * std::abs(std::log(cy.param_q())));
      if (n0 > big) return std::nullopt;
      return Index(n0) + 2;
    }
    return std::nullopt;
  }
  if (kx == SpectrumKind::LogPower) {
    const Real tx = cx.param_t();
    if (ky == SpectrumKind::LogPower) return Index(3);
    if (ky == SpectrumKind::PowerLaw) {
      const Real sy = cy.param_s();
      const Real ln_n0 = (tx - 1) / (sy - 1);
      if (ln_n0 > std::log(big)) return std::nullopt;
      return Index(std::exp(ln_n0)) + 2;
    }
    if (ky == SpectrumKind::Geometric) {
      // -(tx-1)/(n ln n) + 2|ln qy| > 0; n ln n >= n for n >= 3
      const Real n0 = (tx - 1) / (2 * std::abs(std::log(cy.param_q())));
      if (n0 > big) return std::nullopt;
      return std::max<Index>(3, Index(n0) + 2);
    }
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

// Certifies E_k(x) >= E_k(y) + c for every k >= k_from. The scan handles a
// finite window; the infinite remainder closes through one of: structural
// equality, finite rank of y, tails below tolerance, geometric closed forms,
// or a decay-class envelope crossing. Anything else stays Undecided.
template <class Real>
CompareReport<Real> certify_tail_dominance(const Spectrum<Real>& x,
                                           const Spectrum<Real>& y,
                                           Index k_from, Real c,
                                           const CompareOptions& opts) {
  CompareReport<Real> rep;
  rep.relation = Relation::Super;
  const Real tol = Real(opts.tol);

  if (c <= tol && same_structure(x, y)) {
    rep.verdict = Verdict::Certified;
    rep.used_tolerance = c > 0;
    rep.method = "identical structure";
    return rep;
  }

  // splice realignment: beyond P both sides' tails equal their sources'
  const bool spx = x.kind() == SpectrumKind::Spliced && x.splice_tail_source().valid();
  const bool spy = y.kind() == SpectrumKind::Spliced && y.splice_tail_source().valid();
  if (spx || spy) {
    const Index px = spx ? x.splice_realign_rank() : 0;
    const Index py = spy ? y.splice_realign_rank() : 0;
    const Index p = std::max(px, py);
    if (p >= k_from) {
      if (p - k_from + 1 > opts.max_scan) {
        rep.method = "splice head exceeds scan budget";
        return rep;
      }
      detail::TailScanner<Real> sx(x, opts.budget), sy(y, opts.budget);
      auto sr = detail::scan_dominance(sx, sy, k_from, p, c, opts);
      rep.checked_through = sr.last_rank;
      rep.margin = sr.margin;
      rep.used_tolerance = sr.used_tol;
      if (sr.outcome == detail::ScanOutcome::Violation) {
        rep.verdict = Verdict::Refuted;
        rep.witness_rank = sr.rank;
        rep.method = "tail violation inside splice head";
        return rep;
      }
      if (sr.outcome == detail::ScanOutcome::Unresolved) {
        rep.method = "interval overlap unresolved inside splice head";
        return rep;
      }
      if (sr.outcome == detail::ScanOutcome::Closed) {
        rep.verdict = Verdict::Certified;
        rep.method = "remaining tail below tolerance";
        return rep;
      }
    }
    CompareReport<Real> deep = certify_tail_dominance(
        spx ? x.splice_tail_source() : x, spy ? y.splice_tail_source() : y,
        std::max(k_from, p + 1), c, opts);
    deep.checked_through = std::max(deep.checked_through, rep.checked_through);
    deep.margin = std::min(deep.margin, rep.margin);
    deep.used_tolerance = deep.used_tolerance || rep.used_tolerance;
    deep.method = "splice realignment; then " + deep.method;
    return deep;
  }

  const Index ry = y.rank_count();
  const Index rx = x.rank_count();

  // exact geometric closed forms, including scaled ones
  {
    Real fx = 1, fy = 1;
    const Spectrum<Real> cxs = detail::unwrap_scaled(x, fx);
    const Spectrum<Real> cys = detail::unwrap_scaled(y, fy);
    if (c == 0 && cxs.kind() == SpectrumKind::Geometric &&
        cys.kind() == SpectrumKind::Geometric) {
      const Real qx = cxs.param_q(), qy = cys.param_q();
      // E_k = f q^(2(k-1)), so the log gap is affine in k
      if (qx >= qy && fx >= fy) {
        rep.verdict = Verdict::Certified;
        rep.method = "geometric closed form";
        return rep;
      }
      if (qx > qy && fx < fy) {
        // gap closes at k*; scan to it, certified beyond
        const Real kstar =
            1 + std::log(fy / fx) / (2 * std::log(qx / qy));
        const Index k1 = std::max<Index>(k_from, Index(kstar) + 2);
        if (k1 - k_from + 1 <= opts.max_scan) {
          detail::TailScanner<Real> sx(x, opts.budget), sy(y, opts.budget);
          auto sr = detail::scan_dominance(sx, sy, k_from, k1, c, opts);
          rep.checked_through = sr.last_rank;
          rep.margin = sr.margin;
          rep.used_tolerance = sr.used_tol;
          if (sr.outcome == detail::ScanOutcome::Violation) {
            rep.verdict = Verdict::Refuted;
            rep.witness_rank = sr.rank;
            rep.method = "tail violation";
          } else if (sr.outcome == detail::ScanOutcome::Unresolved) {
            rep.method = "interval overlap unresolved";
          } else {
            rep.verdict = Verdict::Certified;
            rep.method = "geometric crossover at rank " + std::to_string(k1);
          }
          return rep;
        }
      }
      // qx < qy: y's tail eventually dwarfs x's; fall through to the scan,
      // whose closure either finds the certified witness or puts the whole
      // remainder below tolerance.
    }
  }

  // same core structure with multipliers: tails are proportional
  {
    Real fx = 1, fy = 1;
    const Spectrum<Real> cxs = detail::unwrap_scaled(x, fx);
    const Spectrum<Real> cys = detail::unwrap_scaled(y, fy);
    if (c == 0 && same_structure(cxs, cys)) {
      if (fx >= fy) {
        rep.verdict = Verdict::Certified;
        rep.method = "proportional tails, factor ratio >= 1";
        return rep;
      }
      // deficit (fy - fx) E_base(k) is maximal at k_from and decreasing
      const Interval<Real> base = cxs.tail_at_rank(k_from, opts.budget).iv();
      const Real deficit = (fy - fx) * base.hi;
      if (deficit <= tol) {
        rep.verdict = Verdict::Certified;
        rep.used_tolerance = true;
        rep.method = "proportional tails within tolerance";
      } else {
        rep.verdict = Verdict::Refuted;
        rep.witness_rank = k_from;
        rep.method = "proportional tails, factor ratio < 1";
      }
      return rep;
    }
  }

  // y of finite rank: scan up to that rank, zero beyond
  if (ry != kInfiniteRank) {
    const Index k_to = std::max(k_from, ry + (c > 0 ? Index(1) : Index(0)));
    detail::TailScanner<Real> sx(x, opts.budget), sy(y, opts.budget);
    auto sr = detail::scan_dominance(sx, sy, k_from,
                                     std::min(k_to, k_from + opts.max_scan - 1),
                                     c, opts);
    rep.checked_through = sr.last_rank;
    rep.margin = sr.margin;
    rep.used_tolerance = sr.used_tol;
    if (sr.outcome == detail::ScanOutcome::Violation) {
      rep.verdict = Verdict::Refuted;
      rep.witness_rank = sr.rank;
      rep.method = "tail violation";
      return rep;
    }
    if (sr.outcome == detail::ScanOutcome::Unresolved) {
      rep.method = "interval overlap unresolved";
      return rep;
    }
    if (sr.outcome == detail::ScanOutcome::AllPass && sr.last_rank < k_to) {
      rep.method = "finite target rank exceeds scan budget";
      return rep;
    }
    rep.verdict = Verdict::Certified;
    rep.method = sr.outcome == detail::ScanOutcome::Closed
                     ? "remaining tail below tolerance"
                     : "finite target rank covered";
    return rep;
  }

  // x finite, y infinite: the scan reaches E_x = 0 and either closes on y's
  // tail dropping below tolerance or certifies the violation.
  // both infinite: decide by decay class.
  Index k_need = kInfiniteRank;
  std::string cert;
  if (rx == kInfiniteRank) {
    const DecayOrder ord = compare_decay(x.decay_class(), y.decay_class());
    if (ord == DecayOrder::SlowerStrict) {
      auto turn = detail::envelope_turning_point(x, y);
      if (turn && x.has_log_tail() && y.has_log_tail()) {
        // exponential search for a nonnegative envelope gap
        const Real log_off = c > 0 ? std::log(c) : -std::numeric_limits<Real>::infinity();
        Index n1 = std::max(k_from, *turn);
        bool found = false;
        for (int step = 0; step < 60; ++step) {
          auto lx = x.log_tail_at_rank(n1);
          auto ly = y.log_tail_at_rank(n1);
          if (!lx || !ly) break;
          // need E_x >= E_y + c: suffices E_x >= 2 max(E_y, c)
          const Real need = std::max(ly->hi, log_off) +
                            (c > 0 ? std::log(Real(2)) : Real(0));
          if (lx->lo >= need && n1 >= *turn) {
            found = true;
            break;
          }
          if (n1 > Real(4e15)) break;
          n1 *= 2;
        }
        if (found && c == 0) {
          k_need = n1;
          cert = "envelope crossing certified from rank " + std::to_string(n1);
        } else if (found) {
          // with offset the gap D(n) = log E_x - log(E_y + c) is monotone
          // only while E_y dominates c; conservative: require closure instead
          k_need = kInfiniteRank;
        }
      }
    }
    // FasterStrict or unsupported: rely on scan closure / witness
  } else {
    k_need = kInfiniteRank;  // resolved by closure inside the scan
  }

  detail::TailScanner<Real> sx(x, opts.budget), sy(y, opts.budget);
  const Index window_end =
      k_need != kInfiniteRank
          ? k_need
          : k_from + std::max<Index>(opts.scan_depth, 1) - 1;
  if (window_end - k_from + 1 > opts.max_scan) {
    rep.method = "certified crossover beyond scan budget";
    return rep;
  }
  auto sr = detail::scan_dominance(sx, sy, k_from, window_end, c, opts);
  rep.checked_through = sr.last_rank;
  rep.margin = sr.margin;
  rep.used_tolerance = sr.used_tol;
  if (sr.outcome == detail::ScanOutcome::Violation) {
    rep.verdict = Verdict::Refuted;
    rep.witness_rank = sr.rank;
    rep.method = "tail violation";
    return rep;
  }
  if (sr.outcome == detail::ScanOutcome::Unresolved) {
    rep.method = "interval overlap unresolved";
    return rep;
  }
  if (sr.outcome == detail::ScanOutcome::Closed) {
    rep.verdict = Verdict::Certified;
    rep.method = "remaining tail below tolerance";
    return rep;
  }
  if (k_need != kInfiniteRank) {
    rep.verdict = Verdict::Certified;
    rep.method = cert;
    return rep;
  }
  rep.method = "scan exhausted without closure";
  return rep;
}

// Relation comparison entry point; x < y in the requested sense.
template <class Real>
CompareReport<Real> compare(const Spectrum<Real>& x, const Spectrum<Real>& y,
                            Relation rel, const CompareOptions& opts = {}) {
  const Real tol = Real(opts.tol);
  if (rel == Relation::Super) {
    CompareReport<Real> rep = certify_tail_dominance(x, y, Index(1), Real(0), opts);
    rep.relation = Relation::Super;
    return rep;
  }
  if (rel == Relation::Standard) {
    const Interval<Real> tx = x.total(opts.budget).iv();
    const Interval<Real> ty = y.total(opts.budget).iv();
    if (tx.lo > ty.hi + tol || ty.lo > tx.hi + tol) {
      CompareReport<Real> rep;
      rep.relation = rel;
      rep.verdict = Verdict::Refuted;
      rep.witness_rank = 1;
      rep.method = "total mass differs";
      return rep;
    }
    CompareReport<Real> rep = certify_tail_dominance(x, y, Index(2), Real(0), opts);
    rep.relation = rel;
    return rep;
  }
  // Sub: prefix dominance P_k(x) <= P_k(y) without total equality, i.e.
  // E_k(x) >= E_k(y) + (T_x - T_y) for all k >= 2. Scan with closure only.
  const Interval<Real> tx = x.total(opts.budget).iv();
  const Interval<Real> ty = y.total(opts.budget).iv();
  const Real c = tx.mid() - ty.mid();
  CompareReport<Real> rep = certify_tail_dominance(x, y, Index(2), c, opts);
  rep.relation = Relation::Sub;
  return rep;
}

// ---- doubly stochastic maps and T-transform synthesis -----------------------

template <class Real>
bool is_doubly_stochastic(const std::vector<Real>& m, Index n, Real tol) {
  if (Index(m.size()) != n * n) return false;
  for (Index i = 0; i < n; ++i) {
    Real row = 0, col = 0;
    for (Index j = 0; j < n; ++j) {
      const Real a = m[size_t(i * n + j)];
      const Real b = m[size_t(j * n + i)];
      if (a < -tol || b < -tol) return false;
      row += a;
      col += b;
    }
    if (std::abs(row - 1) > tol || std::abs(col - 1) > tol) return false;
  }
  return true;
}

// y = D x for doubly stochastic D; the result is majorized by x.
template <class Real>
std::vector<Real> apply_doubly_stochastic(const std::vector<Real>& m, Index n,
                                          const std::vector<Real>& x,
                                          Real tol = Real(1e-9)) {
  if (Index(x.size()) != n) throw domain_error("apply: size mismatch");
  if (!is_doubly_stochastic(m, n, tol))
    throw domain_error("apply: matrix is not doubly stochastic");
  std::vector<Real> y(size_t(n), Real(0));
  for (Index i = 0; i < n; ++i) {
    CompensatedSum<Real> acc;
    for (Index j = 0; j < n; ++j) acc.add(m[size_t(i * n + j)] * x[size_t(j)]);
    y[size_t(i)] = acc.value();
  }
  return y;
}

// One T-transform: mixes coordinates (i, j) as (1-t) I + t Q_{ij}.
struct TTransform {
  Index i = 0, j = 0;
  double t = 0;
};

template <class Real>
std::vector<Real> apply_t_transform(const TTransform& tt, std::vector<Real> v) {
  const Real t = Real(tt.t);
  const Real a = v[size_t(tt.i)], b = v[size_t(tt.j)];
  v[size_t(tt.i)] = (1 - t) * a + t * b;
  v[size_t(tt.j)] = t * a + (1 - t) * b;
  return v;
}

template <class Real>
std::vector<Real> t_transform_matrix(const TTransform& tt, Index n) {
  std::vector<Real> m(size_t(n * n), Real(0));
  for (Index k = 0; k < n; ++k) m[size_t(k * n + k)] = 1;
  const Real t = Real(tt.t);
  m[size_t(tt.i * n + tt.i)] = 1 - t;
  m[size_t(tt.j * n + tt.j)] = 1 - t;
  m[size_t(tt.i * n + tt.j)] = t;
  m[size_t(tt.j * n + tt.i)] = t;
  return m;
}

// Writes x as a product of at most n-1 T-transforms applied to y, for
// finite x majorized by y (both sorted nonincreasing, equal totals). Each
// step transfers mass between one surplus and one deficit coordinate and
// pins at least one coordinate to its target for good.
template <class Real>
std::vector<TTransform> synthesize_t_transforms(std::vector<Real> x,
                                                std::vector<Real> y,
                                                Real tol = Real(1e-12)) {
  const size_t n = std::max(x.size(), y.size());
  x.resize(n, 0);
  y.resize(n, 0);
  // require x < y (standard): prefix sums of x never exceed y's
  Real px = 0, py = 0;
  for (size_t k = 0; k < n; ++k) {
    px += x[k];
    py += y[k];
    if (px > py + Real(16) * tol * Real(k + 1))
      throw domain_error("synthesize: x is not majorized by y");
  }
  if (std::abs(px - py) > Real(16) * tol * Real(n))
    throw domain_error("synthesize: totals differ");

  std::vector<TTransform> out;
  std::vector<Real> cur = y;
  for (size_t round = 0; round + 1 < n + 1; ++round) {
    // largest j with surplus, then the nearest deficit below it
    Index j = -1;
    for (Index k = Index(n) - 1; k >= 0; --k) {
      if (cur[size_t(k)] > x[size_t(k)] + tol) { j = k; break; }
    }
    if (j < 0) break;  // converged
    Index m = -1;
    for (Index k = j + 1; k < Index(n); ++k) {
      if (cur[size_t(k)] < x[size_t(k)] - tol) { m = k; break; }
    }
    if (m < 0) throw internal_error("synthesize: no deficit below surplus");
    const Real delta =
        std::min(cur[size_t(j)] - x[size_t(j)], x[size_t(m)] - cur[size_t(m)]);
    const Real denom = cur[size_t(j)] - cur[size_t(m)];
    if (!(denom > 0)) throw internal_error("synthesize: non-positive gap");
    TTransform tt{j, m, double(delta / denom)};
    tt.t = std::min(1.0, std::max(0.0, tt.t));
    cur = apply_t_transform<Real>(tt, std::move(cur));
    // pin exactly to kill drift
    if (std::abs(cur[size_t(j)] - x[size_t(j)]) <= 4 * tol)
      cur[size_t(j)] = x[size_t(j)];
    if (std::abs(cur[size_t(m)] - x[size_t(m)]) <= 4 * tol)
      cur[size_t(m)] = x[size_t(m)];
    out.push_back(tt);
    if (out.size() > n) throw internal_error("synthesize: too many factors");
  }
  return out;
}

}  // namespace entconv

#endif  // ENTCONV_MAJORIZATION_HPP
