#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "entconv/slocc.hpp"
#include "oracles.hpp"

using entconv::ProbStatus;
using entconv::Relation;
using entconv::Spectrum;
using entconv::Verdict;
using Spec = Spectrum<double>;

TEST_CASE("optimal probability matches the brute tail-ratio infimum") {
  std::mt19937_64 rng(211);
  std::uniform_int_distribution<int> dim(2, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto lv = oracle::random_prob(rng, dim(rng));
    const auto mv = oracle::random_prob(rng, dim(rng));
    const double truth = std::min(1.0, oracle::vidal_p(lv, mv));
    const auto v = entconv::max_probability(Spec::finite(lv), Spec::finite(mv));
    CAPTURE(trial, lv.size(), mv.size());
    REQUIRE(v.status == ProbStatus::Exact);
    CHECK(std::abs(v.p_lower - truth) <= 1e-9);
    CHECK(std::abs(v.p_upper - truth) <= 1e-9);
    CHECK(v.p_lower <= v.p_upper);
    if (v.p_upper < 1.0 && v.witness_index > 0) {
      const double el = oracle::tail(lv, size_t(v.witness_index));
      const double em = oracle::tail(mv, size_t(v.witness_index));
      REQUIRE(em > 0);
      CHECK(el / em == Catch::Approx(truth).margin(1e-9));
    }
  }
}

TEST_CASE("three-level example pins the infimum at the bottom tail") {
  const auto v = entconv::max_probability(Spec::finite({0.7, 0.2, 0.1}),
                                          Spec::finite({0.4, 0.3, 0.3}));
  REQUIRE(v.status == ProbStatus::Exact);
  CHECK(v.p_lower == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(v.p_upper == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(v.witness_index == 3);
  REQUIRE(v.rows.size() == 3);
  CHECK(v.rows[1].binding);
  CHECK(v.rows[1].ratio.lo == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("slow geometric sources convert to fast targets with certainty") {
  const auto v = entconv::max_probability(Spec::geometric(0.8),
                                          Spec::geometric(0.5));
  REQUIRE(v.status == ProbStatus::Exact);
  CHECK(v.p_lower >= 1.0 - 1e-9);
  CHECK(v.p_upper == 1.0);
}

TEST_CASE("fast sources cannot reach slow targets at any probability") {
  const auto v = entconv::max_probability(Spec::geometric(0.5),
                                          Spec::geometric(0.8));
  CHECK(v.status == ProbStatus::CertifiedZero);
  CHECK(v.p_lower == 0.0);
  CHECK(v.p_upper == 0.0);

  // nearly equal decay rates: the scan cannot close, the class order can
  const auto close = entconv::max_probability(Spec::geometric(0.9),
                                              Spec::geometric(0.95));
  CHECK(close.status == ProbStatus::CertifiedZero);

  // rates too close for the scan to separate before underflow: the class
  // order still pins the limit at zero
  const auto fuzz = entconv::max_probability(Spec::geometric(0.496),
                                             Spec::geometric(0.5));
  CHECK(fuzz.p_upper <= 1e-3);
  CHECK(fuzz.p_lower <= fuzz.p_upper);

  // square of a geometric beats any power tail
  const auto sq = entconv::max_probability(
      Spec::tensor_power(Spec::geometric(0.6), 2), Spec::power_law(0.5));
  CHECK(sq.status == ProbStatus::CertifiedZero);

  // exponential against power law
  const auto gp = entconv::max_probability(Spec::geometric(0.5),
                                           Spec::power_law(0.5));
  CHECK(gp.status == ProbStatus::CertifiedZero);
}

TEST_CASE("deep tails that underflow do not masquerade as structural zeros") {
  const auto g = Spec::geometric(0.5);
  const auto up = entconv::max_probability(g, Spec::scaled(g, 0.9));
  REQUIRE(up.status == ProbStatus::Exact);
  CHECK(up.p_lower >= 1.0 - 1e-9);
  CHECK(up.p_upper == 1.0);

  const auto down = entconv::max_probability(Spec::scaled(g, 0.9), g);
  REQUIRE(down.status == ProbStatus::Exact);
  CHECK(down.p_lower == Catch::Approx(0.9).epsilon(1e-9));
  CHECK(down.p_upper == Catch::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("slower power tails win; mixed transitions stay decided") {
  const auto pw = entconv::max_probability(Spec::power_law(0.7),
                                           Spec::power_law(0.3));
  REQUIRE(pw.status == ProbStatus::Exact);
  CHECK(pw.p_lower >= 1.0 - 1e-9);
  CHECK(pw.p_upper == 1.0);
}

TEST_CASE("finite versus infinite support decides by rank") {
  const auto fin = entconv::max_probability(Spec::geometric(0.5),
                                            Spec::finite({0.6, 0.4}));
  REQUIRE(fin.status == ProbStatus::Exact);
  CHECK(fin.p_lower == Catch::Approx(0.625).epsilon(1e-12));
  CHECK(fin.p_upper == Catch::Approx(0.625).epsilon(1e-12));
  CHECK(fin.witness_index == 2);

  const auto gap = entconv::max_probability(Spec::finite({0.6, 0.4}),
                                            Spec::geometric(0.5));
  REQUIRE(gap.status == ProbStatus::Exact);
  CHECK(gap.p_lower == 0.0);
  CHECK(gap.p_upper == 0.0);
  CHECK(gap.witness_index == 3);
  CHECK(gap.method == "source rank below target rank");
}

TEST_CASE("identical structure short-circuits to probability one") {
  const auto v = entconv::max_probability(Spec::geometric(0.7),
                                          Spec::geometric(0.7));
  REQUIRE(v.status == ProbStatus::Exact);
  CHECK(v.p_lower == 1.0);
  CHECK(v.p_upper == 1.0);
  CHECK(v.witness_index == 1);
  CHECK(!v.rows.empty());
}

TEST_CASE("probability decision form agrees with the tail certificates") {
  const auto lam = Spec::finite({0.7, 0.2, 0.1});
  const auto mu = Spec::finite({0.4, 0.3, 0.3});
  CHECK(entconv::check_p_convertibility(lam, mu, 1.0 / 3.0).verdict ==
        Verdict::Certified);
  CHECK(entconv::check_p_convertibility(lam, mu, 0.3).verdict ==
        Verdict::Certified);
  CHECK(entconv::check_p_convertibility(lam, mu, 0.34).verdict ==
        Verdict::Refuted);

  CHECK(entconv::check_p_convertibility(Spec::geometric(0.8),
                                        Spec::geometric(0.5), 1.0)
            .verdict == Verdict::Certified);
  CHECK(entconv::check_p_convertibility(Spec::geometric(0.5),
                                        Spec::geometric(0.8), 0.1)
            .verdict == Verdict::Refuted);

  CHECK_THROWS_AS(entconv::check_p_convertibility(lam, mu, 0.0),
                  entconv::domain_error);
  CHECK_THROWS_AS(entconv::check_p_convertibility(lam, mu, 1.2),
                  entconv::domain_error);
}

TEST_CASE("dilution spectrum and filter reproduce the worked example") {
  const auto mu = Spec::finite({0.5, 0.3, 0.2});
  const auto nu = entconv::nu_spectrum(mu, 0.5);
  CHECK(nu.value_at_rank(1) == 0.75);
  CHECK(nu.value_at_rank(2) == 0.15);
  CHECK(nu.value_at_rank(3) == 0.10);

  const auto f = entconv::filter_coefficients(mu, 0.5);
  CHECK(f.head == 1.0);
  CHECK(f.rest == Catch::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(f.raw_max == Catch::Approx(std::sqrt(1.5)).epsilon(1e-15));
  CHECK(f.success == Catch::Approx(2.0 / 3.0).epsilon(1e-15));

  CHECK(same_structure(entconv::nu_spectrum(mu, 1.0), mu));
  CHECK_THROWS_AS(entconv::nu_spectrum(mu, 0.0), entconv::domain_error);
  CHECK_THROWS_AS(entconv::filter_coefficients(mu, 1.5), entconv::domain_error);
}

TEST_CASE("dilution invariants hold across random targets") {
  std::mt19937_64 rng(223);
  std::uniform_int_distribution<int> dim(2, 7);
  std::uniform_real_distribution<double> pr(0.05, 1.0);
  for (int trial = 0; trial < 150; ++trial) {
    const auto mv = oracle::random_prob(rng, dim(rng));
    const double p = pr(rng);
    const auto mu = Spec::finite(mv);
    const auto nu = entconv::nu_spectrum(mu, p);

    CHECK(nu.value_at_rank(1) >= mv[0] - 1e-15);
    for (size_t i = 1; i < mv.size(); ++i) {
      CHECK(nu.value_at_rank(entconv::Index(i + 1)) <= mv[i] + 1e-15);
      const auto en = nu.tail_at_rank(entconv::Index(i + 1)).iv();
      const auto em = mu.tail_at_rank(entconv::Index(i + 1)).iv();
      CHECK(en.mid() == Catch::Approx(p * em.mid()).margin(1e-12));
    }
    const auto tot = nu.total().iv();
    CHECK(std::abs(tot.mid() - 1.0) <= 1e-12);

    const auto f = entconv::filter_coefficients(mu, p);
    CHECK(f.head == 1.0);
    CHECK(f.rest > 0.0);
    CHECK(f.rest <= 1.0 + 1e-15);
    double succ = mv[0] * f.head * f.head;
    for (size_t i = 1; i < mv.size(); ++i) succ += mv[i] * f.rest * f.rest;
    CHECK(f.success == Catch::Approx(succ).epsilon(1e-12));
  }
}

TEST_CASE("converting to the dilution target is the probability-p relation") {
  std::mt19937_64 rng(227);
  std::uniform_int_distribution<int> dim(2, 7);
  const double ps[] = {0.3, 0.7, 1.0};
  for (int trial = 0; trial < 150; ++trial) {
    const int n = dim(rng);
    const auto lv = oracle::random_prob(rng, n);
    const auto mv = oracle::random_prob(rng, dim(rng));
    const double p = ps[trial % 3];

    auto pm = mv;
    for (auto& x : pm) x *= p;
    std::vector<double> nuv = mv;
    nuv[0] = 1 - p * (1 - mv[0]);
    for (size_t i = 1; i < nuv.size(); ++i) nuv[i] *= p;
    const bool super = oracle::supermajorized(lv, pm, 1e-12);
    const bool standard = oracle::majorizes_standard(lv, nuv, 1e-12);
    CHECK(super == standard);

    const auto lam = Spec::finite(lv);
    const auto mu = Spec::finite(mv);
    const auto direct = entconv::check_p_convertibility(lam, mu, p);
    const auto via_nu = entconv::compare(lam, entconv::nu_spectrum(mu, p),
                                         Relation::Standard);
    CAPTURE(trial, p);
    REQUIRE(direct.verdict != Verdict::Undecided);
    REQUIRE(via_nu.verdict != Verdict::Undecided);
    CHECK(direct.verdict == via_nu.verdict);
    CHECK((direct.verdict == Verdict::Certified) == super);
  }
}
