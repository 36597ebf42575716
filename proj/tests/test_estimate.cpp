#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <gx/estimate.hpp>

using namespace gx;

namespace {

const GSpec kSpec{1.0, 2.0};
const TimeGrid kGrid{1.0, 64};
const std::uint64_t kSeed = 20250817;

PathFunctional constant_functional(double c) {
  return {"const", [c](const PathBundle& b) {
            return Array(Array::Constant(b.n_paths(), c));
          }};
}

PathFunctional sum_of(const PathFunctional& f, const PathFunctional& g) {
  auto ef = f.eval, eg = g.eval;
  return {"sum", [ef, eg](const PathBundle& b) {
            return Array(ef(b) + eg(b));
          }};
}

PathFunctional scale_of(const PathFunctional& f, double a) {
  auto ef = f.eval;
  return {"scaled", [ef, a](const PathBundle& b) { return Array(a * ef(b)); }};
}

}  // namespace

TEST_CASE("running statistics match hand values") {
  StatCounter s;
  for (double x : {1.0, 2.0, 3.0, 4.0}) s.add(x);
  CHECK(s.num == 4);
  CHECK(s.mean() == doctest::Approx(2.5));
  CHECK(s.var() == doctest::Approx(5.0 / 3.0));
  CHECK(s.se() == doctest::Approx(std::sqrt(5.0 / 12.0)));

  StatCounter t;
  t.add_all(Array::LinSpaced(4, 1.0, 4.0));
  CHECK(t.mean() == doctest::Approx(s.mean()));
  CHECK(t.var() == doctest::Approx(s.var()));
}

TEST_CASE("functional builders carry structured names") {
  CHECK(terminal_payoff(Payoff::parse("x2")).name == "payoff:x2");
  CHECK(terminal_qv().name == "qv");
  CHECK(terminal_b().name == "b");
  CHECK(negate(terminal_qv()).name == "neg:qv");
  CHECK(dt_abs_diff(constant_process(1.0), constant_process(0.0)).name ==
        "m1:const:1-const:0");
}

TEST_CASE("terminal variance rides the band edges without noise") {
  const auto up = estimate_upper(terminal_qv(), default_family(kSpec), kGrid,
                                 256, kSeed, kSpec);
  CHECK(up.value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(up.se < 1e-9);
  CHECK(up.winner_control == "const:" + format_double(kSpec.sigma_hi()));

  const auto dn = estimate_lower(terminal_qv(), default_family(kSpec), kGrid,
                                 256, kSeed, kSpec);
  CHECK(dn.value == 1.0);
  CHECK(dn.functional == "lower:qv");
}

TEST_CASE("terminal square matches the band edge within noise") {
  const auto e = estimate_upper(terminal_payoff(Payoff::parse("x2")),
                                default_family(kSpec), kGrid, 20000, kSeed,
                                kSpec);
  CHECK(std::abs(e.value - kSpec.sigma_hi_sq * kGrid.T) <= 3.0 * e.se + 0.02);
  CHECK(e.means.size() == default_family(kSpec).size());
  CHECK(e.n_paths == 20000);
  CHECK(e.seed == kSeed);
}

TEST_CASE("upper estimates are monotone, subadditive, and homogeneous") {
  const PathFunctional f = terminal_payoff(Payoff::parse("x2"));
  const PathFunctional g = terminal_qv();
  const auto family = default_family(kSpec);
  const auto ests = estimate_upper_multi(
      {f, g, sum_of(f, g), scale_of(f, 2.0), constant_functional(5.0)},
      family, kGrid, 2000, kSeed, kSpec);

  // Same bundles throughout, so the inequalities hold exactly.
  CHECK(ests[2].value <= ests[0].value + ests[1].value + 1e-12);
  CHECK(ests[0].value <= ests[2].value + 1e-12);  // g >= 0 pathwise
  CHECK(ests[3].value == 2.0 * ests[0].value);
  CHECK(ests[4].value == 5.0);
  CHECK(ests[4].se == 0.0);
}

TEST_CASE("enlarging the family can only raise the estimate") {
  const PathFunctional f = terminal_payoff(Payoff::parse("abs"));
  const auto small = estimate_upper(
      f, {VolControl::constant(kSpec.sigma_lo())}, kGrid, 2000, kSeed, kSpec);
  const auto large = estimate_upper(f, default_family(kSpec), kGrid, 2000,
                                    kSeed, kSpec);
  // Control 0 of the default family is the same sigma_lo constant under
  // the same derived seed.
  CHECK(large.means[0] == small.value);
  CHECK(large.value >= small.value);
}

TEST_CASE("lower duality flips only the sign") {
  const PathFunctional f = terminal_payoff(Payoff::parse("x2"));
  const auto up_neg = estimate_upper(negate(f), default_family(kSpec), kGrid,
                                     2000, kSeed, kSpec);
  const auto dn = estimate_lower(f, default_family(kSpec), kGrid, 2000, kSeed,
                                 kSpec);
  CHECK(dn.value == -up_neg.value);
  for (std::size_t c = 0; c < dn.means.size(); ++c) {
    CHECK(dn.means[c] == -up_neg.means[c]);
  }
}

TEST_CASE("ties go to the first control in family order") {
  // Unit volatility realizes variance T exactly however it is scheduled.
  const auto e = estimate_upper(
      terminal_qv(),
      {VolControl::constant(1.0),
       VolControl::piecewise(StepFunction::constant(1.0, kGrid.T))},
      kGrid, 64, kSeed, kSpec);
  CHECK(e.means[0] == e.means[1]);
  CHECK(e.winner == 0);
}

TEST_CASE("symmetry defect of the terminal value sits at zero") {
  const auto r = symmetry_defect(
      terminal_b(),
      {VolControl::constant(kSpec.sigma_lo()),
       VolControl::constant(kSpec.sigma_hi())},
      kGrid, 20000, kSeed, kSpec);
  CHECK(std::abs(r.defect) <= 3.0 * r.se);
  CHECK(r.defect == r.up.value + r.up_neg.value);
}

TEST_CASE("integrable-process distance has exact trivial cases") {
  const auto zero = m1_norm(realized_control(), realized_control(),
                            {VolControl::random_adapted()}, kGrid, 128, kSeed,
                            kSpec);
  CHECK(zero.value == 0.0);
  CHECK(zero.se == 0.0);

  const auto unit = m1_norm(constant_process(1.0), constant_process(0.0),
                            {VolControl::constant(kSpec.sigma_lo())}, kGrid,
                            128, kSeed, kSpec);
  CHECK(unit.value == doctest::Approx(kGrid.T).epsilon(1e-12));
}

TEST_CASE("step-weighted integrals reduce to plain integrals on constants") {
  const auto e = estimate_upper(
      dt_weighted_integral(oscillator(1, kGrid.T), constant_process(2.0),
                           "osc1"),
      {VolControl::constant(kSpec.sigma_lo())}, kGrid, 64, kSeed, kSpec);
  CHECK(e.value == doctest::Approx(2.0 * kGrid.T).epsilon(1e-12));
}

TEST_CASE("chunking regroups sums without changing the draws") {
  const PathFunctional f = terminal_payoff(Payoff::parse("x2"));
  EstimateParams small;
  small.chunk = 37;
  EstimateParams big;
  big.chunk = 4096;
  const auto a = estimate_upper(f, {VolControl::random_adapted()}, kGrid, 500,
                                kSeed, kSpec, small);
  const auto b = estimate_upper(f, {VolControl::random_adapted()}, kGrid, 500,
                                kSeed, kSpec, big);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-13));
  CHECK(a.se == doctest::Approx(b.se).epsilon(1e-10));
}

TEST_CASE("estimator guards") {
  const PathFunctional f = terminal_qv();
  CHECK_THROWS_AS(estimate_upper(f, {}, kGrid, 100, kSeed, kSpec),
                  ConfigError);
  CHECK_THROWS_AS(
      estimate_upper(f, default_family(kSpec), kGrid, 1, kSeed, kSpec),
      ConfigError);
  CHECK_THROWS_AS(estimate_upper_multi({}, default_family(kSpec), kGrid, 100,
                                       kSeed, kSpec),
                  ConfigError);
}

TEST_CASE("default family spans the band and the ladders") {
  const auto family = default_family(kSpec);
  CHECK(family.size() == 13);
  CHECK(family.front().descriptor() == "const:" + format_double(kSpec.sigma_lo()));
  CHECK(family[8].descriptor() == "const:" + format_double(kSpec.sigma_hi()));
  CHECK(family.back().descriptor() == "alt:8");
}

TEST_CASE("rate reports police the band inversion invariant") {
  const GapReport ok(2.0, 1.0, 0.0, 0.0, {0.0, 0.5, 1.0}, {2.0, 2.0},
                     {1.0, 1.0}, {0.0, 0.0}, {0.0, 0.0});
  CHECK(ok.gap() == doctest::Approx(1.0));
  CHECK(ok.stationary());
  CHECK(ok.max_window_dev() == 0.0);

  const GapReport drift(1.0, 1.0, 0.0, 0.0, {0.0, 0.5, 1.0}, {0.0, 2.0},
                        {0.0, 2.0}, {0.0, 0.0}, {0.0, 0.0});
  CHECK_FALSE(drift.stationary());
  CHECK(drift.max_window_dev() == doctest::Approx(1.0));
  CHECK(drift.stationary(1.0 + 1e-12));

  CHECK_THROWS_AS(GapReport(1.0, 2.0, 0.0, 0.0, {}, {}, {}, {}, {}),
                  GuardError);
}
