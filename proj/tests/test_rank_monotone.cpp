#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "entconv/rank_monotone.hpp"

using entconv::EstimateMethod;
using entconv::MonotoneOptions;
using entconv::OrderVerdict;
using entconv::ProbStatus;
using entconv::RateFamily;
using entconv::RateFamilyKind;
using entconv::Spectrum;
using Spec = Spectrum<double>;

namespace {

RateFamily<double> power_fam() { return entconv::rate_family<double>("power"); }
RateFamily<double> squeeze_fam() {
  return entconv::rate_family<double>("squeeze");
}

// smallest s with C(s, p) >= k, by direct accumulation
entconv::Index brute_level(entconv::Index k, int p) {
  for (entconv::Index s = p;; ++s) {
    double binom = 1;
    for (int i = 0; i < p; ++i) binom = binom * double(s - i) / double(i + 1);
    if (binom >= double(k)) return s;
  }
}

}  // namespace

TEST_CASE("profile formulas and scale conditions hold across the grid") {
  const auto pf = power_fam();
  CHECK(pf.log_f(0.5, 100.0) == Catch::Approx(-std::log(100.0)).epsilon(1e-14));
  CHECK(pf.f(0.25, 10.0) == Catch::Approx(std::pow(10.0, -3.0)).epsilon(1e-12));
  const auto sf = squeeze_fam();
  CHECK(sf.log_f(0.7, 20.0) ==
        Catch::Approx(40.0 * std::log(0.7)).epsilon(1e-14));

  for (double r : {0.1, 0.5, 0.9}) {
    for (const auto& fam : entconv::stock_families<double>()) {
      const auto ws = entconv::family_witnesses(fam, r);
      REQUIRE(ws.size() == 12);
      for (const auto& w : ws) {
        CAPTURE(fam.name(), r, w.condition, w.n);
        CHECK(w.pass);
      }
    }
  }

  CHECK_THROWS_AS(pf.check_param(0.0), entconv::domain_error);
  CHECK_THROWS_AS(pf.check_param(1.0), entconv::domain_error);
  CHECK_THROWS_AS(sf.check_param(-0.2), entconv::domain_error);
  CHECK_THROWS_AS(entconv::rate_family<double>("bogus"), entconv::domain_error);
}

TEST_CASE("cross-scale ratios separate distinct parameters") {
  for (const auto& fam : entconv::stock_families<double>()) {
    const auto ws = entconv::cross_ratio_witnesses(fam, 0.3, 0.6);
    for (const auto& w : ws) {
      CAPTURE(fam.name(), w.condition, w.n);
      CHECK(w.pass);
    }
  }
  // a fixed rank shift does not rescue the faster profile
  const auto shifted = entconv::cross_ratio_witnesses(squeeze_fam(), 0.4, 0.8,
                                                      100.0);
  for (const auto& w : shifted) CHECK(w.pass);
  CHECK_THROWS_AS(entconv::cross_ratio_witnesses(power_fam(), 0.6, 0.3),
                  entconv::domain_error);
}

TEST_CASE("reference normalizations match closed forms") {
  const auto cp = entconv::reference_normalization(power_fam(), 0.5);
  CHECK(cp.lo <= 1.644934066848226436472);
  CHECK(cp.hi >= 1.644934066848226436472);
  CHECK(cp.width() <= 1e-10 * cp.mid());

  const double q = 0.5;
  const double ref = -2.0 * std::log(q) * q * q / (1 - q * q);
  const auto cs = entconv::reference_normalization(squeeze_fam(), q);
  CHECK(cs.lo <= ref);
  CHECK(cs.hi >= ref);

  const auto rp = entconv::reference_state(power_fam(), 0.5);
  CHECK(rp.kind() == entconv::SpectrumKind::PowerLaw);
  CHECK(rp.param_r() == 0.5);
  const auto rs = entconv::reference_state(squeeze_fam(), 0.7);
  CHECK(rs.kind() == entconv::SpectrumKind::Geometric);
  CHECK(rs.param_q() == 0.7);
}

TEST_CASE("known decay classes resolve the extended rank analytically") {
  const auto pf = power_fam();
  const auto sf = squeeze_fam();

  for (int i = 1; i <= 9; ++i) {
    const double r = i / 10.0;
    const auto e = entconv::estimate_R(Spec::power_law(r), pf);
    REQUIRE(e.method == EstimateMethod::Analytic);
    CHECK(e.r_minus.lo == e.r_plus.hi);
    CHECK(e.r_minus.lo == Catch::Approx(r).epsilon(1e-12));
  }
  for (int i = 2; i <= 8; i += 2) {
    const double q = i / 10.0;
    const auto zero = entconv::estimate_R(Spec::geometric(q), pf);
    CHECK(zero.r_minus.lo == 0.0);
    CHECK(zero.r_plus.hi == 0.0);
    const auto root = entconv::estimate_R(Spec::geometric(q), sf);
    REQUIRE(root.method == EstimateMethod::Analytic);
    CHECK(root.r_minus.lo == Catch::Approx(q).epsilon(1e-12));
    CHECK(root.r_plus.hi == Catch::Approx(q).epsilon(1e-12));
  }

  const auto fin = Spec::finite({0.6, 0.4});
  CHECK(entconv::estimate_R(fin, pf).r_plus.hi == 0.0);
  CHECK(entconv::estimate_R(fin, sf).r_plus.hi == 0.0);

  const auto lp = Spec::log_power(2.5);
  CHECK(entconv::estimate_R(lp, pf).r_minus.lo == 1.0);
  CHECK(entconv::estimate_R(lp, sf).r_minus.lo == 1.0);

  const auto tp = Spec::tensor_power(Spec::geometric(0.5), 2);
  CHECK(entconv::estimate_R(tp, pf).r_plus.hi == 0.0);
  CHECK(entconv::estimate_R(tp, sf).r_minus.lo == 1.0);
}

TEST_CASE("forced numeric bisection recovers sharp brackets") {
  MonotoneOptions opts;
  opts.force_numeric = true;

  // geometric against its own squeeze scale: the bracket pins q
  const auto gs = entconv::estimate_R(Spec::geometric(0.6), squeeze_fam(),
                                      opts);
  REQUIRE(gs.method == EstimateMethod::NumericBisection);
  CHECK_FALSE(gs.inconclusive_trend);
  CHECK(gs.r_minus.lo >= 0.59);
  CHECK(gs.r_plus.hi <= 0.61);
  CHECK(gs.r_minus.lo <= 0.6);
  CHECK(gs.r_plus.hi >= 0.6);
  CHECK(!gs.evidence.empty());

  // geometric against the power scale vanishes for every parameter
  const auto gp = entconv::estimate_R(Spec::geometric(0.5), power_fam(), opts);
  CHECK(gp.r_plus.lo == 0.0);
  CHECK(gp.r_plus.hi <= 0.0105);

  // power law against the squeeze scale never vanishes
  const auto ps = entconv::estimate_R(Spec::power_law(0.5), squeeze_fam(),
                                      opts);
  CHECK(ps.r_minus.lo >= 0.99);
  CHECK(ps.r_minus.hi == 1.0);
}

TEST_CASE("rank order decides stochastic reachability") {
  const auto conv = entconv::order_check(Spec::power_law(0.9),
                                         Spec::geometric(0.99), power_fam());
  CHECK(conv.verdict == OrderVerdict::ConvertibleCertified);

  for (double r : {0.3, 0.9, 0.99}) {
    const auto blocked = entconv::order_check(Spec::power_law(r),
                                              Spec::log_power(2.0),
                                              power_fam());
    CAPTURE(r);
    CHECK(blocked.verdict == OrderVerdict::BlockedCertified);
  }

  const auto tie = entconv::order_check(Spec::power_law(0.5),
                                        Spec::power_law(0.5), power_fam());
  CHECK(tie.verdict == OrderVerdict::Inconclusive);
}

TEST_CASE("exponent levels match the combinatorial definition") {
  for (int p : {1, 2, 3}) {
    for (entconv::Index k = 1; k <= 200; ++k) {
      CAPTURE(p, k);
      CHECK(entconv::exponent_level_of_rank(k, p) == brute_level(k, p));
    }
  }
  CHECK(entconv::exponent_level_of_rank(1, 2) == 2);
  CHECK(entconv::exponent_level_of_rank(2, 2) == 3);
  CHECK(entconv::exponent_level_of_rank(3, 2) == 3);
  CHECK(entconv::exponent_level_of_rank(4, 2) == 4);
  CHECK(entconv::exponent_level_of_rank(1, 3) == 3);
  CHECK(entconv::exponent_level_of_rank(2, 3) == 4);
  CHECK_THROWS_AS(entconv::exponent_level_of_rank(0, 2),
                  entconv::domain_error);
  CHECK_THROWS_AS(entconv::exponent_level_of_rank(5, 0),
                  entconv::domain_error);

  // deep ranks: the amplitude beats any polynomial weight
  const double r = -std::log(0.5);
  const entconv::Index deep = 1'000'000'000'000LL;
  const double s = double(entconv::exponent_level_of_rank(deep, 2));
  CHECK(-r * s + 4.0 * std::log(double(deep)) < -100.0);
}

TEST_CASE("two exponential copies cannot reach a power-law tail") {
  const auto rep = entconv::check_inhibition(0.5, 2, Spec::power_law(0.5),
                                             entconv::Index(30));
  CHECK(rep.q == 0.5);
  CHECK(rep.copies == 2);
  REQUIRE(rep.rows.size() == 30);

  // brute recount of both bounds, straight from the definitions
  entconv::Index violations = 0;
  const double r = -std::log(0.5);
  for (const auto& row : rep.rows) {
    const entconv::Index s = brute_level(row.k, 2);
    CHECK(row.s == s);
    const double root = std::sqrt(2.0 * double(row.k));
    CHECK(row.robust_bound == Catch::Approx(-r * root).epsilon(1e-12));
    CHECK(row.verbatim_bound == Catch::Approx(-r * (root + 1)).epsilon(1e-12));
    const bool v_ok = -r * double(s) <= -r * (root + 1) + 1e-12;
    CHECK(row.verbatim_ok == v_ok);
    CHECK(row.robust_ok);
    if (!v_ok) ++violations;
  }
  CHECK(rep.verbatim_violations == violations);
  CHECK(rep.verbatim_violations == 16);
  CHECK(rep.robust_all_ok);
  CHECK_FALSE(rep.rows[0].verbatim_ok);
  CHECK(rep.rows[1].verbatim_ok);
  CHECK_FALSE(rep.rows[2].verbatim_ok);
  CHECK(rep.conversion.status == ProbStatus::CertifiedZero);
  CHECK(rep.note.find("robust") != std::string::npos);

  // one copy: the printed bound fails at every rank, the robust one never
  const auto one = entconv::check_inhibition(0.5, 1, Spec::power_law(0.5),
                                             entconv::Index(20));
  CHECK(one.verbatim_violations == 20);
  CHECK(one.robust_all_ok);

  CHECK_THROWS_AS(
      entconv::check_inhibition(1.0, 2, Spec::power_law(0.5), entconv::Index(5)),
      entconv::domain_error);
  CHECK_THROWS_AS(
      entconv::check_inhibition(0.5, 0, Spec::power_law(0.5), entconv::Index(5)),
      entconv::domain_error);
}
