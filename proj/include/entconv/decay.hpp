#ifndef ENTCONV_DECAY_HPP
#define ENTCONV_DECAY_HPP

#include <algorithm>
#include <cmath>

#include "entconv/util.hpp"

namespace entconv {

// Asymptotic class of the tail sums E_n = sum_{k>=n} lambda_k:
//   FiniteRank   E_n = 0 for n > rank
//   Exponential  E_n = Theta(rho^n)
//   Stretched    E_n = exp(-rate * n^(1/order) * (1 + o(1)))
//   Power        E_n = Theta(n^-alpha)
//   LogPoly      E_n = Theta((ln n)^-beta)
// Ordered fastest to slowest; only strict cross-parameter comparisons are
// used to certify vanishing or diverging tail ratios.
enum class DecayKind { FiniteRank, Exponential, Stretched, Power, LogPoly, Unknown };

template <class Real>
struct DecayClass {
  DecayKind kind = DecayKind::Unknown;
  Index rank = 0;  // FiniteRank
  Real rho = 0;    // Exponential
  int order = 0;   // Stretched
  Real rate = 0;   // Stretched
  Real alpha = 0;  // Power
  Real beta = 0;   // LogPoly

  static DecayClass finite_rank(Index r) {
    DecayClass c; c.kind = DecayKind::FiniteRank; c.rank = r; return c;
  }
  static DecayClass exponential(Real rho) {
    DecayClass c; c.kind = DecayKind::Exponential; c.rho = rho; return c;
  }
  static DecayClass stretched(int order, Real rate) {
    DecayClass c; c.kind = DecayKind::Stretched; c.order = order; c.rate = rate;
    return c;
  }
  static DecayClass power(Real alpha) {
    DecayClass c; c.kind = DecayKind::Power; c.alpha = alpha; return c;
  }
  static DecayClass log_poly(Real beta) {
    DecayClass c; c.kind = DecayKind::LogPoly; c.beta = beta; return c;
  }
  static DecayClass unknown() { return DecayClass{}; }
};

enum class DecayOrder {
  FasterStrict,  // left tail = o(right tail)
  SlowerStrict,  // right tail = o(left tail)
  EqualParams,   // same class and parameters: no strict conclusion
  Unknown
};

inline int decay_speed_rank(DecayKind k) {
  switch (k) {
    case DecayKind::FiniteRank: return 0;
    case DecayKind::Exponential: return 1;
    case DecayKind::Stretched: return 2;
    case DecayKind::Power: return 3;
    case DecayKind::LogPoly: return 4;
    default: return -1;
  }
}

template <class Real>
DecayOrder compare_decay(const DecayClass<Real>& a, const DecayClass<Real>& b) {
  if (a.kind == DecayKind::Unknown || b.kind == DecayKind::Unknown)
    return DecayOrder::Unknown;
  const int ra = decay_speed_rank(a.kind), rb = decay_speed_rank(b.kind);
  if (ra < rb) return DecayOrder::FasterStrict;
  if (ra > rb) return DecayOrder::SlowerStrict;
  auto strict = [](auto x, auto y) {
    return x < y ? DecayOrder::FasterStrict
                 : (x > y ? DecayOrder::SlowerStrict : DecayOrder::EqualParams);
  };
  switch (a.kind) {
    case DecayKind::FiniteRank:
      // Both vanish exactly; scans decide everything at finite depth.
      return DecayOrder::EqualParams;
    case DecayKind::Exponential:
      return strict(a.rho, b.rho);
    case DecayKind::Stretched:
      if (a.order != b.order) return strict(a.order, b.order);
      // larger rate dies faster
      return strict(b.rate, a.rate);
    case DecayKind::Power:
      return strict(b.alpha, a.alpha);
    case DecayKind::LogPoly:
      return strict(b.beta, a.beta);
    default:
      return DecayOrder::Unknown;
  }
}

// Class of a tensor product, from lattice point counting on the log-value
// grid. A finite factor of size R dilutes indices by R; two exponential
// factors with log-rates a, b give a 2d lattice whose k-th point sits at
// depth ~ sqrt(2ab k); a power-law factor swallows anything lighter.
template <class Real>
DecayClass<Real> combine_tensor(const DecayClass<Real>& x,
                                const DecayClass<Real>& y) {
  using D = DecayClass<Real>;
  if (x.kind == DecayKind::Unknown || y.kind == DecayKind::Unknown)
    return D::unknown();
  const DecayClass<Real>& a =
      decay_speed_rank(x.kind) <= decay_speed_rank(y.kind) ? x : y;
  const DecayClass<Real>& b =
      decay_speed_rank(x.kind) <= decay_speed_rank(y.kind) ? y : x;
  // a is at least as fast as b
  switch (b.kind) {
    case DecayKind::FiniteRank:
      return D::finite_rank(a.rank * b.rank);
    case DecayKind::Exponential: {
      if (a.kind == DecayKind::FiniteRank)
        return D::exponential(std::pow(b.rho, Real(1) / Real(a.rank)));
      // exponential x exponential
      const Real la = -std::log(a.rho), lb = -std::log(b.rho);
      return D::stretched(2, std::sqrt(2 * la * lb));
    }
    case DecayKind::Stretched: {
      if (a.kind == DecayKind::FiniteRank)
        return D::stretched(b.order,
                            b.rate / std::pow(Real(a.rank), Real(1) / b.order));
      if (a.kind == DecayKind::Exponential) {
        const Real la = -std::log(a.rho);
        const int p = b.order;
        // rate^order / order! is the product of the underlying log-rates
        const Real prod = std::pow(b.rate, Real(p)) / std::tgamma(Real(p) + 1);
        const Real rate = std::pow(std::tgamma(Real(p) + 2) * la * prod,
                                   Real(1) / Real(p + 1));
        return D::stretched(p + 1, rate);
      }
      // stretched x stretched: order adds, rate recombined the same way
      {
        const int p = a.order + b.order;
        const Real prod = std::pow(a.rate, Real(a.order)) /
                              std::tgamma(Real(a.order) + 1) *
                          std::pow(b.rate, Real(b.order)) /
                          std::tgamma(Real(b.order) + 1);
        return D::stretched(
            p, std::pow(std::tgamma(Real(p) + 1) * prod, Real(1) / Real(p)));
      }
    }
    case DecayKind::Power:
      // any lighter factor leaves the tail exponent alone
      if (a.kind == DecayKind::Power)
        return D::power(std::min(a.alpha, b.alpha));
      return D::power(b.alpha);
    case DecayKind::LogPoly:
      if (a.kind == DecayKind::LogPoly)
        return D::log_poly(std::min(a.beta, b.beta));
      return D::log_poly(b.beta);
    default:
      return D::unknown();
  }
}

template <class Real>
DecayClass<Real> combine_tensor_power(const DecayClass<Real>& base, int copies) {
  DecayClass<Real> acc = base;
  for (int i = 1; i < copies; ++i) acc = combine_tensor(acc, base);
  return acc;
}

}  // namespace entconv

#endif  // ENTCONV_DECAY_HPP
