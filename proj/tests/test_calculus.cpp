#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <gx/calculus.hpp>
#include <gx/errors.hpp>

using namespace gx;

namespace {

const GSpec kSpec{1.0, 2.0};
const std::uint64_t kSeed = 20250817;

PathBundle random_bundle(Index n_steps, Index n_paths) {
  return simulate_bundle(VolControl::random_adapted(), TimeGrid(1.0, n_steps),
                         n_paths, kSeed, kSpec);
}

// Reference block predictor, written out longhand: block k carries the
// plain average of the previous block, block 0 and the partial tail are
// zero.
PathMat block_predictor_oracle(const PathMat& steps, Index m) {
  PathMat out = PathMat::Zero(steps.rows(), steps.cols());
  const Index k_eps = steps.cols() / m;
  for (Index p = 0; p < steps.rows(); ++p) {
    for (Index k = 1; k < k_eps; ++k) {
      double avg = 0.0;
      for (Index i = (k - 1) * m; i < k * m; ++i) avg += steps(p, i);
      avg /= double(m);
      for (Index i = k * m; i < (k + 1) * m; ++i) out(p, i) = avg;
    }
  }
  return out;
}

double dt_l1_distance(const PathMat& a, const PathMat& b, double dt) {
  return ((a - b).abs().rowwise().sum() * dt).mean();
}

}  // namespace

TEST_CASE("integrating the unit coefficient recovers the integrator") {
  const PathBundle b = random_bundle(64, 20);
  const PathMat ones = PathMat::Ones(20, 64);
  const PathMat ib = ito_integral(ones, b);
  CHECK(((ib - b.B).abs() < 1e-12).all());
  const PathMat iq = integrate_dqv(ones, b);
  CHECK(((iq - b.qv).abs() < 1e-12).all());
}

TEST_CASE("stochastic integral is linear in the integrand") {
  const PathBundle b = random_bundle(32, 15);
  const PathMat f = b.h;  // any adapted step matrix will do
  const PathMat two_f = 2.0 * f;
  const PathMat i1 = ito_integral(f, b);
  const PathMat i2 = ito_integral(two_f, b);
  CHECK(((i2 - 2.0 * i1).abs() < 1e-12).all());
}

TEST_CASE("a frozen indicator integrand stops accumulating when it ends") {
  const PathBundle b = random_bundle(64, 10);
  PathMat ind = PathMat::Zero(10, 64);
  ind.leftCols(32).setOnes();
  const PathMat integral = ito_integral(ind, b);
  CHECK(((integral.col(64) - b.B.col(32)).abs() < 1e-12).all());
  CHECK(((integral.col(40) - b.B.col(32)).abs() < 1e-12).all());
}

TEST_CASE("time integral of a constant is the elapsed time") {
  const TimeGrid grid{2.0, 50};
  const PathMat c = PathMat::Constant(3, 50, 1.5);
  const PathMat out = integrate_dt(c, grid);
  for (Index i = 0; i <= 50; ++i) {
    CHECK(out(0, i) == doctest::Approx(1.5 * grid.t(i)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(integrate_dt(PathMat::Ones(3, 49), grid), ConfigError);
}

TEST_CASE("step-weighted increments match a handwritten sum") {
  const PathBundle b = random_bundle(32, 12);
  const StepFunction a = oscillator(4, 1.0);
  const Array got = integrate_step_against(a, b.B, b.grid);
  for (Index p = 0; p < 12; ++p) {
    double acc = 0.0;
    for (Index i = 0; i < 32; ++i) {
      acc += a(b.grid.t(i + 1)) * (b.B(p, i + 1) - b.B(p, i));
    }
    CHECK(got(p) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("dyadic quadratic variation of the running-time path is exact") {
  const TimeGrid grid{1.0, 256};
  PathMat line(3, 257);
  for (Index i = 0; i <= 256; ++i) line.col(i).setConstant(grid.t(i));
  for (int level : {0, 2, 4, 8}) {
    const Array qv = qv_dyadic(line, level, grid, grid.T);
    const double expect = grid.T * grid.T / double(Index(1) << level);
    CHECK(((qv - expect).abs() < 1e-14).all());
  }
  // Half-horizon blocks still align on this grid.
  const Array half = qv_dyadic(line, 4, grid, 0.5);
  CHECK(((half - 0.25 / 16.0).abs() < 1e-14).all());
}

TEST_CASE("dyadic blocks must align with the grid") {
  const TimeGrid grid{1.0, 100};
  const PathMat series = PathMat::Zero(2, 101);
  CHECK(qv_dyadic(series, 2, grid, grid.T).size() == 2);  // 4 | 100
  CHECK_THROWS_AS(qv_dyadic(series, 3, grid, grid.T), ConfigError);
  CHECK_THROWS_AS(qv_dyadic(series, -1, grid, grid.T), ConfigError);
  CHECK_THROWS_AS(qv_dyadic(series, 2, grid, 0.33), ConfigError);
}

TEST_CASE("block predictor matches the longhand oracle") {
  const TimeGrid grid{1.0, 8};
  PathMat steps(2, 8);
  steps << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0,
      -1.0, 0.5, 0.25, -2.0, 3.0, 0.0, 1.0, -1.0;
  const double eps = 0.25;  // m = 2, four whole blocks
  const PathMat oracle = block_predictor_oracle(steps, 2);
  const PathMat got = mollify_block(steps, grid, eps);
  CHECK(((got - oracle).abs() < 1e-14).all());
  // First block is zero, later blocks repeat the previous average.
  CHECK(got(0, 0) == 0.0);
  CHECK(got(0, 1) == 0.0);
  CHECK(got(0, 2) == doctest::Approx(1.5));
  CHECK(got(0, 4) == doctest::Approx(3.5));
  CHECK(got(0, 6) == doctest::Approx(5.5));
}

TEST_CASE("block predictor fixes constants after the first block") {
  const TimeGrid grid{1.0, 40};
  const PathMat c = PathMat::Constant(3, 40, 2.5);
  const PathMat got = mollify_block(c, grid, 0.1);  // m = 4, k_eps = 10
  CHECK((got.leftCols(4) == 0.0).all());
  CHECK(((got.middleCols(4, 36) - 2.5).abs() < 1e-14).all());
}

TEST_CASE("block predictor shifts a half-horizon indicator forward") {
  const TimeGrid grid{1.0, 8};
  PathMat ind = PathMat::Zero(1, 8);
  ind.leftCols(4).setOnes();
  const PathMat got = mollify_block(ind, grid, 0.5);  // two blocks
  CHECK((got.leftCols(4) == 0.0).all());
  CHECK((got.rightCols(4) == 1.0).all());
}

TEST_CASE("partial tail blocks are zeroed") {
  const TimeGrid grid{1.0, 10};
  const PathMat c = PathMat::Constant(1, 10, 1.0);
  const PathMat got = mollify_block(c, grid, 0.4);  // m = 4, k_eps = 2
  CHECK((got.leftCols(4) == 0.0).all());
  CHECK((got.middleCols(4, 4) == 1.0).all());
  CHECK((got.rightCols(2) == 0.0).all());
}

TEST_CASE("block prediction contracts the integrable distance") {
  const PathBundle b = random_bundle(64, 30);
  const PathBundle b2 = simulate_bundle(VolControl::alternating_blocks(4),
                                        b.grid, 30, kSeed + 1, kSpec);
  const double eps = 0.125;
  const double before = dt_l1_distance(b.h, b2.h, b.grid.dt);
  const double after = dt_l1_distance(mollify_block(b.h, b.grid, eps),
                                      mollify_block(b2.h, b.grid, eps),
                                      b.grid.dt);
  CHECK(after <= before + 1e-12);
}

TEST_CASE("trailing average reproduces constants and ramps from zero") {
  const TimeGrid grid{1.0, 32};
  const PathMat c = PathMat::Constant(2, 32, 1.75);
  const PathMat got = mollify_uniform(c, grid, 0.25);  // m = 8
  for (Index i = 0; i <= 32; ++i) {
    const double expect = i >= 8 ? 1.75 : 1.75 * double(i) / 8.0;
    CHECK(got(0, i) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK_THROWS_AS(mollify_uniform(c, grid, 0.013), ConfigError);
  CHECK_THROWS_AS(mollify_uniform(c, grid, 0.0), ConfigError);
  CHECK_THROWS_AS(mollify_block(c, grid, -0.25), ConfigError);
}

TEST_CASE("running drift correction vanishes when the control saturates") {
  const TimeGrid grid{1.0, 64};
  // Under sigma_hi, eta = +1 makes d<B> = sigma_hi^2 dt = 2 G(1) dt.
  const PathBundle hi = simulate_bundle(
      VolControl::constant(kSpec.sigma_hi()), grid, 8, kSeed, kSpec);
  const PathMat plus = PathMat::Ones(8, 64);
  CHECK((k_process(plus, hi).abs() < 1e-12).all());
  // Under sigma_lo, eta = -1 is the saturating sign.
  const PathBundle lo = simulate_bundle(
      VolControl::constant(kSpec.sigma_lo()), grid, 8, kSeed, kSpec);
  CHECK((k_process(-plus, lo).abs() < 1e-12).all());
}

TEST_CASE("running drift correction drops at the band gap rate off-side") {
  const TimeGrid grid{1.0, 64};
  const PathBundle hi = simulate_bundle(
      VolControl::constant(kSpec.sigma_hi()), grid, 8, kSeed, kSpec);
  // eta = -1 under sigma_hi: each step adds (lo_sq - hi_sq) dt.
  const PathMat minus = PathMat::Constant(8, 64, -1.0);
  const PathMat k = k_process(minus, hi);
  const double rate = kSpec.sigma_lo_sq - kSpec.sigma_hi_sq;
  for (Index i = 0; i <= 64; ++i) {
    CHECK(((k.col(i) - rate * grid.t(i)).abs() < 1e-12).all());
  }
}

TEST_CASE("drift correction matches a handwritten recursion") {
  const PathBundle b = random_bundle(32, 6);
  PathMat eta(6, 32);
  for (Index p = 0; p < 6; ++p) {
    for (Index i = 0; i < 32; ++i) {
      eta(p, i) = ((p + i) % 3 == 0) ? -0.75 : 1.25;
    }
  }
  const PathMat k = k_process(eta, b);
  for (Index p = 0; p < 6; ++p) {
    double acc = 0.0;
    for (Index i = 0; i < 32; ++i) {
      const double e = eta(p, i);
      const double two_g = e > 0.0 ? kSpec.sigma_hi_sq * e
                                   : kSpec.sigma_lo_sq * e;
      acc += e * (b.qv(p, i + 1) - b.qv(p, i)) - two_g * b.grid.dt;
      CHECK(k(p, i + 1) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("shape guards reject mismatched coefficient matrices") {
  const PathBundle b = random_bundle(16, 4);
  CHECK_THROWS_AS(ito_integral(PathMat::Ones(4, 15), b), ConfigError);
  CHECK_THROWS_AS(ito_integral(PathMat::Ones(3, 16), b), ConfigError);
  CHECK_THROWS_AS(integrate_dqv(PathMat::Ones(4, 17), b), ConfigError);
  CHECK_THROWS_AS(k_process(PathMat::Ones(5, 16), b), ConfigError);
  CHECK_THROWS_AS(mollify_block(PathMat::Ones(4, 17), b.grid, 0.25),
                  ConfigError);
}
