#ifndef ENTCONV_SPECTRUM_HPP
#define ENTCONV_SPECTRUM_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <unordered_set>
#include <vector>

#include "entconv/decay.hpp"
#include "entconv/series.hpp"
#include "entconv/util.hpp"

namespace entconv {

enum class SpectrumKind {
  Finite,
  Geometric,
  PowerLaw,
  LogPower,
  TensorProduct,
  TensorPower,
  TruncatedView,
  Scaled,
  Spliced
};

inline const char* kind_name(SpectrumKind k) {
  switch (k) {
    case SpectrumKind::Finite: return "finite";
    case SpectrumKind::Geometric: return "geometric";
    case SpectrumKind::PowerLaw: return "power_law";
    case SpectrumKind::LogPower: return "log_power";
    case SpectrumKind::TensorProduct: return "tensor_product";
    case SpectrumKind::TensorPower: return "tensor_power";
    case SpectrumKind::TruncatedView: return "truncated_view";
    case SpectrumKind::Scaled: return "scaled";
    case SpectrumKind::Spliced: return "spliced";
  }
  return "?";
}

template <class Real>
struct MomentResult {
  enum class Status { Convergent, Divergent, Undecided } status;
  TailInterval<Real> value;  // partial sums when Divergent/Undecided
  std::string certificate;
};

// A sorted Schmidt coefficient sequence. Value-semantic handle over an
// immutable node DAG; all mutation is construction. Enumeration cursors are
// caller-owned, so const spectra are safe to share across threads.
template <class Real>
class Spectrum {
 public:
  struct Data;
  using NodePtr = std::shared_ptr<const Data>;

  struct SplicePiece {
    enum class Type { Slice, Explicit, Block, Tail } type;
    NodePtr src;               // Slice, Tail
    std::vector<Real> values;  // Explicit (sorted nonincreasing)
    Real value = 0;            // Block
    Index count = 0;           // Slice, Block
    Index from = 0;            // Tail: first source rank
  };

  struct Data {
    SpectrumKind kind;
    // Finite
    std::vector<Real> values;      // sorted nonincreasing, no trailing zeros
    std::vector<Real> suffix;      // suffix[i] = values[i] + ...
    std::vector<Real> suffix_err;  // accumulated rounding of suffix[i]
    // Geometric
    Real q = 0;
    // PowerLaw: s = 1/r, zeta = certified zeta(s)
    Real r = 0, s = 0;
    Interval<Real> zeta{1, 1};
    // LogPower: norm = certified C_t
    Real t = 0;
    Interval<Real> norm{1, 1};
    // TensorProduct / TensorPower / TruncatedView / Scaled
    NodePtr left, right, base;
    int copies = 0;
    Index cutoff = 0;
    Interval<Real> trunc_tail{0, 0};  // base tail at rank cutoff+1
    Real factor = 1;
    // Spliced
    std::vector<SplicePiece> pieces;
  };

  Spectrum() = default;
  explicit Spectrum(NodePtr n) : node_(std::move(n)) {}

  // ---- constructors -------------------------------------------------------

  // Unit-sum finite spectrum; values are sorted and validated.
  static Spectrum finite(std::vector<Real> values, Real sum_tol = Real(1e-9)) {
    Spectrum s = finite_weights(std::move(values));
    const Real tot = s.node_->suffix.empty() ? Real(0) : s.node_->suffix[0];
    if (std::abs(tot - 1) > sum_tol)
      throw domain_error("finite spectrum does not sum to 1");
    return s;
  }

  // Finite nonnegative weight vector with arbitrary positive total; used for
  // sub/super-majorization comparisons of unnormalized sequences.
  static Spectrum finite_weights(std::vector<Real> values) {
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::Finite;
    for (Real v : values) {
      if (!(v >= -Real(1e-14)) || !std::isfinite(double(v)))
        throw domain_error("finite spectrum entries must be nonnegative");
    }
    std::sort(values.begin(), values.end(), std::greater<Real>());
    while (!values.empty() && values.back() <= 0) values.pop_back();
    if (values.empty()) throw domain_error("finite spectrum is empty");
    d->values = std::move(values);
    d->suffix.assign(d->values.size() + 1, 0);
    d->suffix_err.assign(d->values.size() + 1, 0);
    const Real eps = std::numeric_limits<Real>::epsilon();
    for (Index i = Index(d->values.size()) - 1; i >= 0; --i) {
      // 2Sum: exact rounding error of each suffix addition
      const Real a = d->suffix[size_t(i) + 1];
      const Real b = d->values[size_t(i)];
      const Real s = a + b;
      const Real bp = s - a;
      const Real e = std::abs((a - (s - bp)) + (b - bp));
      d->suffix[size_t(i)] = s;
      d->suffix_err[size_t(i)] =
          (d->suffix_err[size_t(i) + 1] + e) * (1 + 2 * eps);
    }
    d->suffix.pop_back();
    d->suffix_err.pop_back();
    return Spectrum(std::move(d));
  }

  // lambda_n = (1 - q^2) q^(2(n-1)); amplitude-squared convention, so the
  // amplitudes are sqrt(1-q^2) q^(n-1) and E_n = q^(2(n-1)) exactly.
  static Spectrum geometric(Real q) {
    if (!(q > 0 && q < 1)) throw domain_error("geometric: q must lie in (0,1)");
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::Geometric;
    d->q = q;
    return Spectrum(std::move(d));
  }

  // lambda_n = n^(-1/r) / zeta(1/r), r in (0,1).
  static Spectrum power_law(Real r, const EvalBudget& budget = {}) {
    if (!(r > 0 && r < 1)) throw domain_error("power_law: r must lie in (0,1)");
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::PowerLaw;
    d->r = r;
    d->s = 1 / r;
    d->zeta = series::zeta_interval<Real>(d->s, budget);
    return Spectrum(std::move(d));
  }

  // lambda_n = 1 / (C_t n ln^t n) for n >= 2, t > 1 (t <= 1 is not
  // normalizable). Rank k corresponds to n = k + 1.
  static Spectrum log_power(Real t, const EvalBudget& budget = {}) {
    if (!(t > 1)) throw domain_error("log_power: t must exceed 1");
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::LogPower;
    d->t = t;
    d->norm = series::log_power_norm<Real>(t, budget);
    return Spectrum(std::move(d));
  }

  static Spectrum tensor(const Spectrum& a, const Spectrum& b) {
    a.require(); b.require();
    // identity factor
    if (a.is_trivial()) return b;
    if (b.is_trivial()) return a;
    if (a.kind() == SpectrumKind::Finite && b.kind() == SpectrumKind::Finite &&
        a.node_->values.size() * b.node_->values.size() <= 4096) {
      std::vector<Real> prod;
      prod.reserve(a.node_->values.size() * b.node_->values.size());
      for (Real x : a.node_->values)
        for (Real y : b.node_->values) prod.push_back(x * y);
      return finite_weights(std::move(prod));
    }
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::TensorProduct;
    d->left = a.node_;
    d->right = b.node_;
    return Spectrum(std::move(d));
  }

  static Spectrum tensor_power(const Spectrum& base, int copies) {
    base.require();
    if (copies < 1) throw domain_error("tensor_power: copies must be >= 1");
    if (copies == 1) return base;
    if (base.kind() == SpectrumKind::Finite) {
      double total = 1;
      for (int i = 0; i < copies; ++i) total *= double(base.node_->values.size());
      if (total <= 4096) {
        Spectrum acc = base;
        for (int i = 1; i < copies; ++i) acc = tensor(acc, base);
        return acc;
      }
    }
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::TensorPower;
    d->base = base.node_;
    d->copies = copies;
    return Spectrum(std::move(d));
  }

  // First `cutoff` coefficients, renormalized to unit sum.
  static Spectrum truncate(const Spectrum& base, Index cutoff,
                           const EvalBudget& budget = {}) {
    base.require();
    if (cutoff < 1) throw domain_error("truncate: cutoff must be >= 1");
    TailInterval<Real> t = base.tail_at_rank(cutoff + 1, budget);
    if (!(t.upper < 1))
      throw domain_error("truncate: remaining mass is not positive");
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::TruncatedView;
    d->base = base.node_;
    d->cutoff = std::min(cutoff, base.rank_count());
    d->trunc_tail = t.iv();
    return Spectrum(std::move(d));
  }

  // Term-wise scaling; total mass becomes factor * base mass. Internal
  // building block for p-scaled comparison targets.
  static Spectrum scaled(const Spectrum& base, Real factor) {
    base.require();
    if (!(factor > 0)) throw domain_error("scaled: factor must be positive");
    if (factor == Real(1)) return base;
    if (base.kind() == SpectrumKind::Scaled) {
      auto d = std::make_shared<Data>(*base.node_);
      d->factor *= factor;
      return Spectrum(NodePtr(std::move(d)));
    }
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::Scaled;
    d->base = base.node_;
    d->factor = factor;
    return Spectrum(std::move(d));
  }

  // Piecewise multiset: explicitly described head pieces plus one source
  // tail. Requires sum of head counts == tail.from - 1, so beyond the merge
  // of the head the positions realign with the tail source exactly.
  static Spectrum spliced(std::vector<SplicePiece> pieces) {
    Index head_count = 0;
    Index tails = 0;
    Index tail_from = 0;
    for (const auto& p : pieces) {
      switch (p.type) {
        case SplicePiece::Type::Slice:
          if (!p.src || p.count < 0) throw domain_error("spliced: bad slice");
          head_count += p.count;
          break;
        case SplicePiece::Type::Explicit:
          head_count += Index(p.values.size());
          break;
        case SplicePiece::Type::Block:
          if (!(p.value >= 0) || p.count < 0)
            throw domain_error("spliced: bad block");
          head_count += p.count;
          break;
        case SplicePiece::Type::Tail:
          if (!p.src || p.from < 1) throw domain_error("spliced: bad tail");
          ++tails;
          tail_from = p.from;
          break;
      }
    }
    if (tails > 1) throw domain_error("spliced: at most one tail piece");
    if (tails == 1 && head_count != tail_from - 1)
      throw internal_error("spliced: head count must equal tail offset");
    auto d = std::make_shared<Data>();
    d->kind = SpectrumKind::Spliced;
    d->pieces = std::move(pieces);
    return Spectrum(std::move(d));
  }

  // ---- basic observers ----------------------------------------------------

  bool valid() const { return node_ != nullptr; }
  SpectrumKind kind() const { require(); return node_->kind; }
  const NodePtr& node() const { return node_; }

  Real param_q() const { return node_->q; }
  Real param_r() const { return node_->r; }
  Real param_s() const { return node_->s; }
  Real param_t() const { return node_->t; }
  Real param_factor() const { return node_->factor; }
  int param_copies() const { return node_->copies; }
  Index param_cutoff() const { return node_->cutoff; }
  Interval<Real> normalizer() const {
    return node_->kind == SpectrumKind::PowerLaw ? node_->zeta : node_->norm;
  }
  Spectrum child_left() const { return Spectrum(node_->left); }
  Spectrum child_right() const { return Spectrum(node_->right); }
  Spectrum child_base() const { return Spectrum(node_->base); }
  const std::vector<Real>& finite_values() const { return node_->values; }
  const std::vector<SplicePiece>& splice_pieces() const { return node_->pieces; }

  // Spliced: the tail source and its starting rank (invalid handle if the
  // splice is purely finite).
  Spectrum splice_tail_source() const {
    for (const auto& p : node_->pieces)
      if (p.type == SplicePiece::Type::Tail) return Spectrum(p.src);
    return Spectrum();
  }
  Index splice_tail_from() const {
    for (const auto& p : node_->pieces)
      if (p.type == SplicePiece::Type::Tail) return p.from;
    return 0;
  }

  // Spliced: rank P such that for every k > P the merged tail equals the
  // source tail exactly, E_k(this) = E_k(source). P = (head count) + (number
  // of source-tail elements >= the smallest head element); beyond it the
  // merged prefix contains the whole head plus the source prefix, position
  // for position.
  Index splice_realign_rank() const {
    require();
    if (node_->kind != SpectrumKind::Spliced)
      throw domain_error("splice_realign_rank: not a spliced spectrum");
    Spectrum src = splice_tail_source();
    if (!src.valid()) return rank_count();
    const Index from = splice_tail_from();
    const Index head = from - 1;
    Real vmin = std::numeric_limits<Real>::infinity();
    for (const auto& p : node_->pieces) {
      switch (p.type) {
        case SplicePiece::Type::Slice:
          if (p.count > 0)
            vmin = std::min(vmin, Spectrum(p.src).value_at_rank(p.count));
          break;
        case SplicePiece::Type::Explicit:
          if (!p.values.empty()) vmin = std::min(vmin, p.values.back());
          break;
        case SplicePiece::Type::Block:
          if (p.count > 0) vmin = std::min(vmin, p.value);
          break;
        case SplicePiece::Type::Tail:
          break;
      }
    }
    if (head == 0) return 0;
    if (!(vmin > 0)) return head;  // zero head elements sort last anyway
    // count source ranks >= vmin by exponential + binary search
    if (src.value_at_rank(from) < vmin) return head;
    Index lo = from, hi = from + 1;  // value(lo) >= vmin
    const Index cap = src.rank_count() == kInfiniteRank
                          ? std::numeric_limits<Index>::max() / 4
                          : src.rank_count();
    while (hi <= cap && src.value_at_rank(hi) >= vmin) {
      lo = hi;
      hi = std::min(cap + 1, hi * 2);
    }
    if (hi > cap) hi = cap + 1;
    while (lo + 1 < hi) {
      const Index mid = lo + (hi - lo) / 2;
      if (src.value_at_rank(mid) >= vmin) lo = mid; else hi = mid;
    }
    return head + (lo - from + 1);
  }

  // Spliced: true when the concatenated pieces are already non-increasing, so
  // merged rank k is literally position k of the layout and no re-sorting can
  // move mass across piece boundaries.
  bool splice_positionally_sorted() const {
    require();
    if (node_->kind != SpectrumKind::Spliced)
      throw domain_error("splice_positionally_sorted: not a spliced spectrum");
    Real prev = std::numeric_limits<Real>::infinity();
    for (const auto& p : node_->pieces) {
      switch (p.type) {
        case SplicePiece::Type::Explicit:
          for (Real v : p.values) {
            if (v > prev) return false;
            prev = v;
          }
          break;
        case SplicePiece::Type::Block:
          if (p.count > 0) {
            if (p.value > prev) return false;
            prev = p.value;
          }
          break;
        case SplicePiece::Type::Tail:
          if (Spectrum(p.src).value_at_rank(p.from) > prev) return false;
          break;
        case SplicePiece::Type::Slice:
          if (p.count > 0) {
            Spectrum src(p.src);
            if (src.value_at_rank(1) > prev) return false;
            prev = src.value_at_rank(p.count);
          }
          break;
      }
    }
    return true;
  }

  // Family index of the first coefficient: 2 for the log-corrected family
  // (its n = 1 term is undefined), 1 otherwise.
  Index first_index() const {
    return kind() == SpectrumKind::LogPower ? 2 : 1;
  }

  Index rank_count() const {
    require();
    switch (node_->kind) {
      case SpectrumKind::Finite: return Index(node_->values.size());
      case SpectrumKind::Geometric:
      case SpectrumKind::PowerLaw:
      case SpectrumKind::LogPower: return kInfiniteRank;
      case SpectrumKind::TensorProduct: {
        const Index a = Spectrum(node_->left).rank_count();
        const Index b = Spectrum(node_->right).rank_count();
        if (a == kInfiniteRank || b == kInfiniteRank) return kInfiniteRank;
        if (double(a) * double(b) > 9e17) return kInfiniteRank;
        return a * b;
      }
      case SpectrumKind::TensorPower: {
        const Index a = Spectrum(node_->base).rank_count();
        if (a == kInfiniteRank) return kInfiniteRank;
        double tot = 1;
        for (int i = 0; i < node_->copies; ++i) {
          tot *= double(a);
          if (tot > 9e17) return kInfiniteRank;
        }
        return Index(tot);
      }
      case SpectrumKind::TruncatedView: return node_->cutoff;
      case SpectrumKind::Scaled: return Spectrum(node_->base).rank_count();
      case SpectrumKind::Spliced: {
        Index n = 0;
        for (const auto& p : node_->pieces) {
          if (p.type == SplicePiece::Type::Tail) {
            const Index t = Spectrum(p.src).rank_count();
            if (t == kInfiniteRank) return kInfiniteRank;
            n += std::max<Index>(0, t - p.from + 1);
          } else if (p.type == SplicePiece::Type::Explicit) {
            n += Index(p.values.size());
          } else {
            n += p.count;
          }
        }
        return n;
      }
    }
    return 0;
  }

  bool infinite_rank() const { return rank_count() == kInfiniteRank; }

  // ---- values -------------------------------------------------------------

  // k-th largest coefficient, k >= 1. O(1) for closed-form kinds, O(k) for
  // composites (fresh enumeration; use an Enumerator for scans).
  Real value_at_rank(Index k) const {
    require();
    if (k < 1) throw domain_error("rank must be >= 1");
    switch (node_->kind) {
      case SpectrumKind::Finite:
        return k <= Index(node_->values.size()) ? node_->values[size_t(k - 1)]
                                                : Real(0);
      case SpectrumKind::Geometric: {
        const Real q = node_->q;
        return (1 - q * q) * std::pow(q, Real(2) * Real(k - 1));
      }
      case SpectrumKind::PowerLaw:
        return std::pow(Real(k), -node_->s) / node_->zeta.mid();
      case SpectrumKind::LogPower: {
        const Real n = Real(k + 1);
        return 1 / (node_->norm.mid() * n * std::pow(std::log(n), node_->t));
      }
      case SpectrumKind::TruncatedView:
        if (k > node_->cutoff) return 0;
        return Spectrum(node_->base).value_at_rank(k) /
               (1 - node_->trunc_tail.mid());
      case SpectrumKind::Scaled:
        return node_->factor * Spectrum(node_->base).value_at_rank(k);
      default: {
        if (node_->kind == SpectrumKind::Spliced) {
          Spectrum src = splice_tail_source();
          if (src.valid() && k > splice_realign_rank())
            return src.value_at_rank(k);
        }
        Enumerator en = enumerate();
        Real v = 0;
        for (Index i = 0; i < k; ++i) v = en.next();
        return v;
      }
    }
  }

  // Spec-facing accessor with family indexing (n >= first_index).
  Real coefficient(Index n) const {
    if (n < first_index())
      throw domain_error("coefficient: index below first index of family");
    return value_at_rank(n - first_index() + 1);
  }

  // ---- tails ----------------------------------------------------------------

  // Certified E_k = sum_{j >= k} value_at_rank(j).
  TailInterval<Real> tail_at_rank(Index k, const EvalBudget& budget = {}) const {
    require();
    if (k < 1) k = 1;
    const Real eps = std::numeric_limits<Real>::epsilon();
    switch (node_->kind) {
      case SpectrumKind::Finite: {
        if (k > Index(node_->values.size())) return make_tail(Interval<Real>{0, 0});
        const Real v = node_->suffix[size_t(k - 1)];
        const Real slop = node_->suffix_err[size_t(k - 1)];
        return make_tail(Interval<Real>{v - slop, v + slop});
      }
      case SpectrumKind::Geometric: {
        const Real v = std::pow(node_->q, Real(2) * Real(k - 1));
        return make_tail(Interval<Real>{v * (1 - 8 * eps), v * (1 + 8 * eps)});
      }
      case SpectrumKind::PowerLaw: {
        TailInterval<Real> num = series::power_tail<Real>(node_->s, k, budget);
        return make_tail(num.iv() / node_->zeta, num.tight);
      }
      case SpectrumKind::LogPower: {
        TailInterval<Real> num =
            series::log_power_tail<Real>(node_->t, k + 1, budget);
        return make_tail(num.iv() / node_->norm, num.tight);
      }
      case SpectrumKind::TruncatedView: {
        if (k > node_->cutoff) return make_tail(Interval<Real>{0, 0});
        TailInterval<Real> e = Spectrum(node_->base).tail_at_rank(k, budget);
        Interval<Real> num = Interval<Real>{e.lower, e.upper} - node_->trunc_tail;
        Interval<Real> den{1 - node_->trunc_tail.hi, 1 - node_->trunc_tail.lo};
        return make_tail(num.clamped_nonneg() / den, e.tight);
      }
      case SpectrumKind::Scaled: {
        TailInterval<Real> e = Spectrum(node_->base).tail_at_rank(k, budget);
        return make_tail(e.iv() * node_->factor, e.tight);
      }
      case SpectrumKind::TensorPower:
        if (Spectrum(node_->base).kind() == SpectrumKind::Geometric)
          return tensor_power_geometric_tail(k, budget);
        [[fallthrough]];
      default:
        return composite_tail(k, budget);
    }
  }

  // Spec-facing tail with family indexing; tail(n) for n < first_index equals
  // the total mass.
  TailInterval<Real> tail(Index n, const EvalBudget& budget = {}) const {
    const Index k = std::max<Index>(1, n - first_index() + 1);
    return tail_at_rank(k, budget);
  }

  TailInterval<Real> total(const EvalBudget& budget = {}) const {
    return tail_at_rank(1, budget);
  }

  // Certified bounds on log E_k without underflow; empty when no closed form
  // exists for this kind.
  std::optional<Interval<Real>> log_tail_at_rank(Index k) const {
    require();
    switch (node_->kind) {
      case SpectrumKind::Finite: {
        if (k > Index(node_->values.size())) return std::nullopt;
        const Real v = node_->suffix[size_t(k - 1)];
        if (!(v > 0)) return std::nullopt;
        const Real l = std::log(v);
        const Real slop =
            16 * std::numeric_limits<Real>::epsilon() * (std::abs(l) + 1);
        return Interval<Real>{l - slop, l + slop};
      }
      case SpectrumKind::Geometric: {
        const Real l = Real(2) * Real(k - 1) * std::log(node_->q);
        const Real slop =
            16 * std::numeric_limits<Real>::epsilon() * (std::abs(l) + 1);
        return Interval<Real>{l - slop, l + slop};
      }
      case SpectrumKind::PowerLaw: {
        Interval<Real> num = series::log_power_tail_log<Real>(node_->s, Real(k));
        Interval<Real> lz{std::log(node_->zeta.lo), std::log(node_->zeta.hi)};
        return Interval<Real>{num.lo - lz.hi, num.hi - lz.lo};
      }
      case SpectrumKind::LogPower: {
        Interval<Real> num =
            series::log_log_power_tail_log<Real>(node_->t, Real(k + 1));
        Interval<Real> ln{std::log(node_->norm.lo), std::log(node_->norm.hi)};
        return Interval<Real>{num.lo - ln.hi, num.hi - ln.lo};
      }
      case SpectrumKind::Scaled: {
        auto b = Spectrum(node_->base).log_tail_at_rank(k);
        if (!b) return std::nullopt;
        const Real lf = std::log(node_->factor);
        return Interval<Real>{b->lo + lf, b->hi + lf};
      }
      case SpectrumKind::TensorPower:
        if (Spectrum(node_->base).kind() == SpectrumKind::Geometric)
          return tensor_power_geometric_log_tail(k);
        return std::nullopt;
      case SpectrumKind::Spliced: {
        Spectrum src = splice_tail_source();
        if (src.valid() && k > splice_realign_rank())
          return src.log_tail_at_rank(k);
        return std::nullopt;
      }
      default:
        return std::nullopt;
    }
  }

  bool has_log_tail() const { return log_tail_at_rank(1).has_value(); }

  // ---- decay class ----------------------------------------------------------

  DecayClass<Real> decay_class() const {
    require();
    switch (node_->kind) {
      case SpectrumKind::Finite:
        return DecayClass<Real>::finite_rank(Index(node_->values.size()));
      case SpectrumKind::Geometric:
        return DecayClass<Real>::exponential(node_->q * node_->q);
      case SpectrumKind::PowerLaw:
        return DecayClass<Real>::power(node_->s - 1);
      case SpectrumKind::LogPower:
        return DecayClass<Real>::log_poly(node_->t - 1);
      case SpectrumKind::TensorProduct:
        return combine_tensor(Spectrum(node_->left).decay_class(),
                              Spectrum(node_->right).decay_class());
      case SpectrumKind::TensorPower:
        return combine_tensor_power(Spectrum(node_->base).decay_class(),
                                    node_->copies);
      case SpectrumKind::TruncatedView:
        return DecayClass<Real>::finite_rank(node_->cutoff);
      case SpectrumKind::Scaled:
        return Spectrum(node_->base).decay_class();
      case SpectrumKind::Spliced:
        for (const auto& p : node_->pieces)
          if (p.type == SplicePiece::Type::Tail)
            return Spectrum(p.src).decay_class();
        return DecayClass<Real>::finite_rank(rank_count());
    }
    return DecayClass<Real>::unknown();
  }

  // ---- enumeration ----------------------------------------------------------

  class Enumerator {
   public:
    explicit Enumerator(const Spectrum& s) : impl_(make_stream(s.node_)) {}
    // Next coefficient in nonincreasing order; 0 once a finite spectrum is
    // exhausted.
    Real next() {
      const Real v = impl_ ? impl_->next() : Real(0);
      prefix_.add(v);
      return v;
    }
    Real prefix_sum() const { return prefix_.value(); }
    Real prefix_error() const { return prefix_.error_bound(); }
    Index emitted() const { return prefix_.count(); }

   private:
    struct Stream {
      virtual ~Stream() = default;
      virtual Real next() = 0;
    };
    using StreamPtr = std::unique_ptr<Stream>;

    struct FiniteStream : Stream {
      const std::vector<Real>* v;
      size_t i = 0;
      explicit FiniteStream(const std::vector<Real>* vs) : v(vs) {}
      Real next() override { return i < v->size() ? (*v)[i++] : Real(0); }
    };
    struct ClosedStream : Stream {
      NodePtr node;
      Index k = 0;
      explicit ClosedStream(NodePtr n) : node(std::move(n)) {}
      Real next() override { return Spectrum(node).value_at_rank(++k); }
    };
    struct BlockStream : Stream {
      Real value;
      Index left;
      BlockStream(Real v, Index c) : value(v), left(c) {}
      Real next() override { return left-- > 0 ? value : Real(0); }
    };
    struct OffsetStream : Stream {
      StreamPtr inner;
      OffsetStream(StreamPtr s, Index skip) : inner(std::move(s)) {
        for (Index i = 0; i < skip; ++i) inner->next();
      }
      Real next() override { return inner->next(); }
    };
    // rank-addressable view over a stream, memoized
    struct RankCache {
      StreamPtr s;
      std::vector<Real> v;
      bool done = false;
      Real at(Index k) {
        while (Index(v.size()) < k && !done) {
          const Real x = s->next();
          v.push_back(x);
          if (x <= 0) done = true;
        }
        return k <= Index(v.size()) ? v[size_t(k - 1)] : Real(0);
      }
    };
    // best-first frontier walk over the product lattice of two sorted
    // streams; the visited set keyed by the index pair dedups pushes
    struct PairHeapStream : Stream {
      RankCache a, b;
      struct Node {
        Real value;
        Index i, j;
        bool operator<(const Node& o) const {
          if (value != o.value) return value < o.value;
          if (i != o.i) return i > o.i;
          return j > o.j;
        }
      };
      std::priority_queue<Node> heap;
      std::unordered_set<std::uint64_t> seen;
      PairHeapStream(StreamPtr sa, StreamPtr sb) {
        a.s = std::move(sa);
        b.s = std::move(sb);
        push(1, 1);
      }
      void push(Index i, Index j) {
        const std::uint64_t key =
            (std::uint64_t(std::uint32_t(i)) << 32) | std::uint64_t(std::uint32_t(j));
        if (!seen.insert(key).second) return;
        const Real va = a.at(i), vb = b.at(j);
        if (va <= 0 || vb <= 0) return;
        heap.push(Node{va * vb, i, j});
      }
      Real next() override {
        if (heap.empty()) return 0;
        const Node top = heap.top();
        heap.pop();
        push(top.i + 1, top.j);
        push(top.i, top.j + 1);
        return top.value;
      }
    };
    struct MergeStream : Stream {
      struct Cursor {
        StreamPtr s;
        Real cur;
        void advance() { cur = s->next(); }
      };
      std::vector<Cursor> cs;
      explicit MergeStream(std::vector<StreamPtr> streams) {
        for (auto& s : streams) {
          cs.push_back(Cursor{std::move(s), 0});
          cs.back().advance();
        }
      }
      Real next() override {
        size_t best = 0;
        Real bv = -1;
        for (size_t i = 0; i < cs.size(); ++i)
          if (cs[i].cur > bv) { bv = cs[i].cur; best = i; }
        if (bv <= 0) return 0;
        cs[best].advance();
        return bv;
      }
    };

    static StreamPtr make_stream(const NodePtr& n) {
      if (!n) return nullptr;
      switch (n->kind) {
        case SpectrumKind::Finite:
          return std::make_unique<FiniteStream>(&n->values);
        case SpectrumKind::Geometric:
        case SpectrumKind::PowerLaw:
        case SpectrumKind::LogPower:
        case SpectrumKind::TruncatedView:
        case SpectrumKind::Scaled:
          return std::make_unique<ClosedStream>(n);
        case SpectrumKind::TensorProduct:
          return std::make_unique<PairHeapStream>(make_stream(n->left),
                                                  make_stream(n->right));
        case SpectrumKind::TensorPower: {
          StreamPtr acc = make_stream(n->base);
          for (int i = 1; i < n->copies; ++i)
            acc = std::make_unique<PairHeapStream>(std::move(acc),
                                                   make_stream(n->base));
          return acc;
        }
        case SpectrumKind::Spliced: {
          std::vector<StreamPtr> parts;
          for (const auto& p : n->pieces) {
            switch (p.type) {
              case SplicePiece::Type::Slice: {
                // first `count` ranks of src
                auto inner = make_stream(p.src);
                struct LimitStream : Stream {
                  StreamPtr s;
                  Index left;
                  LimitStream(StreamPtr in, Index c) : s(std::move(in)), left(c) {}
                  Real next() override { return left-- > 0 ? s->next() : Real(0); }
                };
                parts.push_back(
                    std::make_unique<LimitStream>(std::move(inner), p.count));
                break;
              }
              case SplicePiece::Type::Explicit: {
                struct VecStream : Stream {
                  std::vector<Real> v;
                  size_t i = 0;
                  explicit VecStream(std::vector<Real> vs) : v(std::move(vs)) {}
                  Real next() override { return i < v.size() ? v[i++] : Real(0); }
                };
                parts.push_back(std::make_unique<VecStream>(p.values));
                break;
              }
              case SplicePiece::Type::Block:
                parts.push_back(std::make_unique<BlockStream>(p.value, p.count));
                break;
              case SplicePiece::Type::Tail:
                parts.push_back(std::make_unique<OffsetStream>(make_stream(p.src),
                                                               p.from - 1));
                break;
            }
          }
          return std::make_unique<MergeStream>(std::move(parts));
        }
      }
      return nullptr;
    }

    StreamPtr impl_;
    CompensatedSum<Real> prefix_;
  };

  Enumerator enumerate() const { require(); return Enumerator(*this); }

  // ---- moments ---------------------------------------------------------------

  // sum_n n^d lambda_n over family indices n (certified by comparison test).
  MomentResult<Real> mean_moment(int degree, const EvalBudget& budget = {}) const {
    require();
    if (degree < 0) throw domain_error("mean_moment: degree must be >= 0");
    using MR = MomentResult<Real>;
    if (degree == 0)
      return MR{MR::Status::Convergent, total(budget), "degree 0: total mass"};
    switch (node_->kind) {
      case SpectrumKind::Finite:
      case SpectrumKind::TruncatedView: {
        CompensatedSum<Real> acc;
        const Index n = rank_count();
        for (Index k = 1; k <= n; ++k)
          acc.add(std::pow(Real(k), Real(degree)) * value_at_rank(k));
        const Real v = acc.value(), e = acc.error_bound();
        return MR{MR::Status::Convergent,
                  make_tail(Interval<Real>{v - e, v + e}),
                  "finite rank: exact sum"};
      }
      case SpectrumKind::Geometric: {
        const Real q = node_->q, d = Real(degree);
        auto g = [this, d](Index n) {
          return std::pow(Real(n), d) * value_at_rank(n);
        };
        auto rho = [q, d](Index n) {
          return std::pow(Real(n + 1) / Real(n), d) * q * q;
        };
        TailInterval<Real> v = series::sum_eventually_geometric<Real>(
            g, rho, 1, budget);
        return MR{v.tight ? MR::Status::Convergent : MR::Status::Undecided, v,
                  "ratio test: term ratio -> q^2 < 1"};
      }
      case SpectrumKind::PowerLaw: {
        const Real s = node_->s, d = Real(degree);
        if (s - d <= 1) {
          CompensatedSum<Real> acc;
          for (Index k = 1; k <= 64; ++k)
            acc.add(std::pow(Real(k), d) * value_at_rank(k));
          return MR{MR::Status::Divergent,
                    make_tail(Interval<Real>{acc.value(), acc.value()}, false),
                    "integral test: sum n^(d-s) diverges for s - d <= 1"};
        }
        TailInterval<Real> num = series::power_tail<Real>(s - d, 1, budget);
        return MR{MR::Status::Convergent, make_tail(num.iv() / node_->zeta, num.tight),
                  "comparison: sum n^(d-s) with s - d > 1"};
      }
      case SpectrumKind::LogPower: {
        CompensatedSum<Real> acc;
        for (Index k = 1; k <= 64; ++k)
          acc.add(std::pow(Real(k + 1), Real(degree)) * value_at_rank(k));
        return MR{MR::Status::Divergent,
                  make_tail(Interval<Real>{acc.value(), acc.value()}, false),
                  "comparison: n^(d-1)/ln^t n has divergent sum for d >= 1"};
      }
      default: {
        // composites: decide by decay class; certified value only when the
        // tensor-power level structure gives a closed remainder
        DecayClass<Real> dc = decay_class();
        if (dc.kind == DecayKind::Power && Real(degree) >= dc.alpha) {
          return MR{MR::Status::Divergent, TailInterval<Real>{},
                    "comparison: polynomial tail index <= degree"};
        }
        if (dc.kind == DecayKind::LogPoly)
          return MR{MR::Status::Divergent, TailInterval<Real>{},
                    "comparison: log-poly tail"};
        if (node_->kind == SpectrumKind::TensorPower &&
            Spectrum(node_->base).kind() == SpectrumKind::Geometric)
          return tensor_power_geometric_moment(degree, budget);
        // enumerate what the budget allows; no certified remainder
        Enumerator en = enumerate();
        CompensatedSum<Real> acc;
        for (Index k = 1; k <= budget.max_terms; ++k) {
          const Real v = en.next();
          if (v <= 0) {
            const Real val = acc.value(), e = acc.error_bound();
            return MR{MR::Status::Convergent,
                      make_tail(Interval<Real>{val - e, val + e}),
                      "finite support exhausted"};
          }
          acc.add(std::pow(Real(k), Real(degree)) * v);
        }
        return MR{MR::Status::Undecided,
                  make_tail(Interval<Real>{acc.value(),
                                           std::numeric_limits<Real>::infinity()},
                            false),
                  "budget exhausted before a certified remainder"};
      }
    }
  }

  // ---- structural equality ---------------------------------------------------

  friend bool same_structure(const Spectrum& a, const Spectrum& b) {
    return same_node(a.node_, b.node_);
  }

 private:
  NodePtr node_;

  void require() const {
    if (!node_) throw internal_error("empty spectrum handle");
  }

  bool is_trivial() const {
    return node_->kind == SpectrumKind::Finite && node_->values.size() == 1 &&
           std::abs(node_->values[0] - 1) <= Real(1e-12);
  }

  static bool same_node(const NodePtr& a, const NodePtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
      case SpectrumKind::Finite: return a->values == b->values;
      case SpectrumKind::Geometric: return a->q == b->q;
      case SpectrumKind::PowerLaw: return a->r == b->r;
      case SpectrumKind::LogPower: return a->t == b->t;
      case SpectrumKind::TensorProduct:
        return same_node(a->left, b->left) && same_node(a->right, b->right);
      case SpectrumKind::TensorPower:
        return a->copies == b->copies && same_node(a->base, b->base);
      case SpectrumKind::TruncatedView:
        return a->cutoff == b->cutoff && same_node(a->base, b->base);
      case SpectrumKind::Scaled:
        return a->factor == b->factor && same_node(a->base, b->base);
      case SpectrumKind::Spliced:
        return false;  // plans are never deduplicated structurally
    }
    return false;
  }

  // ---- tensor powers of a geometric base: exact level structure -------------
  //
  // Coefficients are c_p q^(2m) with multiplicity C(m+p-1, p-1), m >= 0,
  // c_p = (1-q^2)^p. Cumulative count through level m is C(m+p, p), so the
  // level of rank k is the minimal m with C(m+p, p) >= k.

  Index level_of_rank(Index k) const {
    const int p = node_->copies;
    Index lo = 0, hi = 1;
    while (!binomial_at_least(hi + p, p, double(k))) hi *= 2;
    while (lo < hi) {
      const Index mid = lo + (hi - lo) / 2;
      if (binomial_at_least(mid + p, p, double(k))) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

  static double binom_count(Index n, Index k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    double acc = 1;
    for (Index j = 1; j <= k; ++j) {
      acc *= double(n - k + j) / double(j);
      if (acc > 9e17) return 9e17;
    }
    return acc;
  }

  TailInterval<Real> tensor_power_geometric_tail(Index k,
                                                 const EvalBudget& budget) const {
    const int p = node_->copies;
    const Real q = Spectrum(node_->base).param_q();
    const Real cp = std::pow(1 - q * q, Real(p));
    const Index m = level_of_rank(k);
    const double cum = binom_count(m + p, p);  // ranks through level m
    const Real vm = cp * std::pow(q, Real(2) * Real(m));
    const Real within = Real(cum - double(k) + 1) * vm;
    auto cnt = [p](Index j) { return binom_count(j + p - 1, p - 1); };
    auto g = [&, cp, q](Index j) {
      return Real(cnt(j)) * cp * std::pow(q, Real(2) * Real(j));
    };
    auto rho = [p, q](Index j) {
      return q * q * Real(j + p) / Real(j + 1);
    };
    TailInterval<Real> rest =
        series::sum_eventually_geometric<Real>(g, rho, m + 1, budget);
    Interval<Real> total = rest.iv() + within;
    const Real eps = std::numeric_limits<Real>::epsilon();
    return make_tail(total.widened(8 * eps * (total.hi + vm)), rest.tight);
  }

  std::optional<Interval<Real>> tensor_power_geometric_log_tail(Index k) const {
    const int p = node_->copies;
    const Real q = Spectrum(node_->base).param_q();
    const Index m = level_of_rank(k);
    const Real kappa = q * q * Real(m + p) / Real(m + 1);
    if (!(kappa < 1)) return std::nullopt;  // level too shallow for the bound
    const Real log_cp = Real(p) * std::log1p(-double(q) * double(q));
    const Real log_vm = log_cp + Real(2) * Real(m) * std::log(q);
    // E_k >= remaining part of level m >= v_m; E_k <= full mass from level m
    // bounded by the geometric envelope of the level sums.
    const Real log_hi = log_vm + log_binomial<Real>(m + p - 1, p - 1) -
                        std::log1p(-double(kappa));
    return Interval<Real>{log_vm, std::max(log_vm, log_hi)};
  }

  MomentResult<Real> tensor_power_geometric_moment(int degree,
                                                   const EvalBudget& budget) const {
    using MR = MomentResult<Real>;
    const int p = node_->copies;
    const Real q = Spectrum(node_->base).param_q();
    const Real cp = std::pow(1 - q * q, Real(p));
    const Real d = Real(degree);
    // bound sum_k k^d lambda_k by whole levels: every rank in level j is
    // <= C(j+p, p), so the level contributes at most C(j+p,p)^d cnt(j) v_j.
    auto g_hi = [&, cp, q, d](Index j) {
      return std::pow(Real(binom_count(j + p, p)), d) *
             Real(binom_count(j + p - 1, p - 1)) * cp *
             std::pow(q, Real(2) * Real(j));
    };
    auto rho = [p, q, d](Index j) {
      return q * q * std::pow(Real(j + 1 + p) / Real(j + 1), d + Real(p - 1));
    };
    TailInterval<Real> hi = series::sum_eventually_geometric<Real>(g_hi, rho, 0, budget);
    // lower bound by direct enumeration
    Enumerator en = enumerate();
    CompensatedSum<Real> lo;
    for (Index k = 1; k <= std::min<Index>(budget.max_terms, 20000); ++k) {
      const Real v = en.next();
      if (v <= 0) break;
      lo.add(std::pow(Real(k), d) * v);
    }
    return MR{hi.tight ? MR::Status::Convergent : MR::Status::Undecided,
              make_tail(Interval<Real>{lo.value(), hi.upper}, hi.tight),
              "level bound: geometric level sums"};
  }

  // Suffix evaluation over the piece layout. Sound only for positionally
  // sorted splices; keeps the error relative to the tail itself instead of
  // the total mass, which matters once the tail is many digits below one.
  TailInterval<Real> spliced_positional_tail(Index k,
                                             const EvalBudget& budget) const {
    Interval<Real> acc{0, 0};
    bool tight = true;
    Index pos = 1;  // rank of the current piece's first element
    for (const auto& p : node_->pieces) {
      switch (p.type) {
        case SplicePiece::Type::Explicit: {
          const Index n = Index(p.values.size());
          if (k < pos + n) {
            CompensatedSum<Real> s;
            for (Index j = std::max<Index>(0, k - pos); j < n; ++j)
              s.add(p.values[size_t(j)]);
            acc = acc +
                  Interval<Real>::point(s.value()).widened(s.error_bound());
          }
          pos += n;
          break;
        }
        case SplicePiece::Type::Block: {
          if (k < pos + p.count) {
            const Index m = p.count - std::max<Index>(0, k - pos);
            acc = acc + Interval<Real>::point(p.value * Real(m))
                            .widened(std::numeric_limits<Real>::epsilon() *
                                     p.value * Real(m + 1));
          }
          pos += p.count;
          break;
        }
        case SplicePiece::Type::Tail: {
          const Index start = std::max(k, pos);
          TailInterval<Real> t =
              Spectrum(p.src).tail_at_rank(p.from + (start - pos), budget);
          acc = acc + t.iv();
          tight = tight && t.tight;
          break;
        }
        case SplicePiece::Type::Slice: {
          if (k < pos + p.count) {
            // remaining slice mass as a difference of source tails; a head
            // slice keeps this tight because the minuend is within a small
            // factor of the difference
            Spectrum src(p.src);
            const Index skip = std::max<Index>(0, k - pos);
            TailInterval<Real> whole = src.tail_at_rank(skip + 1, budget);
            TailInterval<Real> beyond = src.tail_at_rank(p.count + 1, budget);
            acc = acc + (whole.iv() - beyond.iv()).clamped_nonneg();
            tight = tight && whole.tight && beyond.tight;
          }
          pos += p.count;
          break;
        }
      }
    }
    return make_tail(acc, tight);
  }

  TailInterval<Real> composite_tail(Index k, const EvalBudget& budget) const {
    if (node_->kind == SpectrumKind::Spliced) {
      Spectrum src = splice_tail_source();
      if (src.valid() && k > splice_realign_rank())
        return src.tail_at_rank(k, budget);
      if (splice_positionally_sorted())
        return spliced_positional_tail(k, budget);
    }
    // E_k = total - prefix(k-1); totals multiply across tensor factors
    Interval<Real> tot = total_interval(budget);
    if (k == 1) return make_tail(tot);
    if (k - 1 > budget.max_terms) {
      // cannot enumerate that deep: valid but useless bounds, flagged
      return make_tail(Interval<Real>{0, tot.hi}, false);
    }
    Enumerator en = enumerate();
    for (Index i = 0; i < k - 1; ++i) {
      if (en.next() <= 0) return make_tail(Interval<Real>{0, 0});
    }
    const Real pre = en.prefix_sum();
    const Real err = en.prefix_error() +
                     4 * std::numeric_limits<Real>::epsilon() * pre;
    Interval<Real> e = tot - Interval<Real>{pre - err, pre + err};
    return make_tail(e);
  }

  Interval<Real> total_interval(const EvalBudget& budget) const {
    switch (node_->kind) {
      case SpectrumKind::TensorProduct: {
        Interval<Real> a = Spectrum(node_->left).total(budget).iv();
        Interval<Real> b = Spectrum(node_->right).total(budget).iv();
        return {a.lo * b.lo, a.hi * b.hi};
      }
      case SpectrumKind::TensorPower: {
        Interval<Real> a = Spectrum(node_->base).total(budget).iv();
        Real lo = 1, hi = 1;
        for (int i = 0; i < node_->copies; ++i) { lo *= a.lo; hi *= a.hi; }
        return {lo, hi};
      }
      case SpectrumKind::Spliced: {
        Interval<Real> acc{0, 0};
        for (const auto& p : node_->pieces) {
          switch (p.type) {
            case SplicePiece::Type::Slice: {
              Spectrum src(p.src);
              Interval<Real> whole = src.total(budget).iv();
              Interval<Real> beyond = src.tail_at_rank(p.count + 1, budget).iv();
              acc = acc + (whole - beyond).clamped_nonneg();
              break;
            }
            case SplicePiece::Type::Explicit: {
              CompensatedSum<Real> s;
              for (Real v : p.values) s.add(v);
              acc = acc + Interval<Real>::point(s.value())
                              .widened(s.error_bound());
              break;
            }
            case SplicePiece::Type::Block:
              acc = acc + Interval<Real>::point(p.value * Real(p.count))
                              .widened(std::numeric_limits<Real>::epsilon() *
                                       p.value * Real(p.count + 1));
              break;
            case SplicePiece::Type::Tail:
              acc = acc + Spectrum(p.src).tail_at_rank(p.from, budget).iv();
              break;
          }
        }
        return acc;
      }
      default:
        return tail_at_rank(1, budget).iv();
    }
  }
};

}  // namespace entconv

#endif  // ENTCONV_SPECTRUM_HPP
