#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include <gx/bundle.hpp>
#include <gx/errors.hpp>
#include <gx/io.hpp>

using namespace gx;

namespace {

const GSpec kSpec{1.0, 2.0};
const std::uint64_t kSeed = 20250817;

bool bitwise_equal(const PathMat& a, const PathMat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a == b).all();
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("constant control reproduces scaled driver noise") {
  const TimeGrid grid{1.0, 64};
  const double sigma = 1.2;
  const PathBundle b =
      simulate_bundle(VolControl::constant(sigma), grid, 50, kSeed, kSpec);
  CHECK(b.n_paths() == 50);
  CHECK((b.h == sigma).all());
  CHECK(b.W.col(0).isZero());
  CHECK(b.B.col(0).isZero());
  CHECK(b.qv.col(0).isZero());
  CHECK(((b.B - sigma * b.W).abs() < 1e-12).all());
  CHECK(b.control == "const:1.2");
}

TEST_CASE("realized quadratic variation accumulates h^2 dt") {
  const TimeGrid grid{1.0, 32};
  const PathBundle b = simulate_bundle(VolControl::random_adapted(), grid, 40,
                                       kSeed, kSpec);
  for (Index i = 0; i < grid.n_steps; ++i) {
    const Array inc = b.qv.col(i + 1) - b.qv.col(i);
    const Array expect = b.h.col(i).square() * grid.dt;
    CHECK(((inc - expect).abs() < 1e-12).all());
  }
}

TEST_CASE("every emitted volatility stays inside the band") {
  const TimeGrid grid{1.0, 64};
  const PathBundle b = simulate_bundle(VolControl::random_adapted(), grid, 200,
                                       kSeed, kSpec);
  CHECK((b.h >= kSpec.sigma_lo()).all());
  CHECK((b.h <= kSpec.sigma_hi()).all());
}

TEST_CASE("alternating control splits time evenly across the band edges") {
  const TimeGrid grid{1.0, 64};
  const PathBundle b = simulate_bundle(VolControl::alternating_blocks(2), grid,
                                       8, kSeed, kSpec);
  // 4 blocks of 16 steps, sigma_lo first.
  CHECK((b.h.col(0) == kSpec.sigma_lo()).all());
  CHECK((b.h.col(16) == kSpec.sigma_hi()).all());
  CHECK((b.h.col(32) == kSpec.sigma_lo()).all());
  CHECK((b.h.col(63) == kSpec.sigma_hi()).all());
  const double half = (kSpec.sigma_lo_sq + kSpec.sigma_hi_sq) / 2.0;
  const Array qv_T = b.qv.col(grid.n_steps);
  CHECK(((qv_T - half * grid.T).abs() < 1e-12).all());
}

TEST_CASE("piecewise control follows its schedule and rejects misalignment") {
  const TimeGrid grid{1.0, 256};
  const StepFunction sched({0.0, 0.5, 1.0}, {1.0, std::sqrt(2.0)});
  const PathBundle b = simulate_bundle(VolControl::piecewise(sched), grid, 4,
                                       kSeed, kSpec);
  CHECK((b.h.leftCols(128) == 1.0).all());
  CHECK((b.h.rightCols(128) == std::sqrt(2.0)).all());

  const StepFunction off({0.0, 0.3, 1.0}, {1.0, std::sqrt(2.0)});
  CHECK_THROWS_AS(
      simulate_bundle(VolControl::piecewise(off), grid, 4, kSeed, kSpec),
      ConfigError);
  const StepFunction shortd({0.0, 0.5}, {1.0});
  CHECK_THROWS_AS(
      simulate_bundle(VolControl::piecewise(shortd), grid, 4, kSeed, kSpec),
      ConfigError);
}

TEST_CASE("terminal second moment matches the driving variance") {
  const TimeGrid grid{1.0, 128};
  const double sigma = kSpec.sigma_hi();
  const PathBundle b = simulate_bundle(VolControl::constant(sigma), grid,
                                       20000, kSeed, kSpec);
  const Array bt2 = b.B.col(grid.n_steps).square();
  const double mean = bt2.mean();
  const double var = (bt2 - mean).square().sum() / double(bt2.size() - 1);
  const double se = std::sqrt(var / double(bt2.size()));
  CHECK(std::abs(mean - kSpec.sigma_hi_sq * grid.T) <= 3.0 * se);
}

TEST_CASE("worker count never changes the simulated ensemble") {
  const TimeGrid grid{1.0, 48};
  const PathBundle one = simulate_bundle(VolControl::random_adapted(), grid,
                                         101, kSeed, kSpec, 1);
  const PathBundle four = simulate_bundle(VolControl::random_adapted(), grid,
                                          101, kSeed, kSpec, 4);
  CHECK(bitwise_equal(one.W, four.W));
  CHECK(bitwise_equal(one.h, four.h));
  CHECK(bitwise_equal(one.B, four.B));
  CHECK(bitwise_equal(one.qv, four.qv));
}

TEST_CASE("chunked simulation with path offsets tiles one big run") {
  const TimeGrid grid{1.0, 48};
  const PathBundle whole = simulate_bundle(VolControl::random_adapted(), grid,
                                           100, kSeed, kSpec);
  const PathBundle head = simulate_bundle(VolControl::random_adapted(), grid,
                                          60, kSeed, kSpec, 1, 0);
  const PathBundle tail = simulate_bundle(VolControl::random_adapted(), grid,
                                          40, kSeed, kSpec, 1, 60);
  CHECK(bitwise_equal(PathMat(whole.B.topRows(60)), head.B));
  CHECK(bitwise_equal(PathMat(whole.B.bottomRows(40)), tail.B));
  CHECK(bitwise_equal(PathMat(whole.h.bottomRows(40)), tail.h));
  CHECK(bitwise_equal(PathMat(whole.qv.bottomRows(40)), tail.qv));
}

TEST_CASE("tabulated feedback policy drives sigma through the lattice") {
  const TimeGrid grid{1.0, 16};
  auto policy = std::make_shared<FeedbackPolicy>();
  policy->T = grid.T;
  policy->slice_dt = 0.25;
  policy->x0 = -4.0;
  policy->dx = 0.1;
  policy->nodes = 81;
  policy->pick_hi.resize(5, 81);
  policy->pick_hi.setConstant(1);
  const PathBundle b = simulate_bundle(VolControl::feedback(policy), grid, 6,
                                       kSeed, kSpec);
  CHECK((b.h == kSpec.sigma_hi()).all());

  auto wrong = std::make_shared<FeedbackPolicy>(*policy);
  wrong->T = 2.0;
  CHECK_THROWS_AS(
      simulate_bundle(VolControl::feedback(wrong), grid, 2, kSeed, kSpec),
      ConfigError);
}

TEST_CASE("control construction and validation guards") {
  const TimeGrid grid{1.0, 100};
  CHECK_THROWS_AS(simulate_bundle(VolControl::constant(0.5), grid, 2, kSeed,
                                  kSpec),
                  GuardError);
  CHECK_THROWS_AS(simulate_bundle(VolControl::alternating_blocks(8), grid, 2,
                                  kSeed, kSpec),
                  ConfigError);
  CHECK_THROWS_AS(VolControl::alternating_blocks(0), ConfigError);
  CHECK_THROWS_AS(VolControl::random_adapted(-0.1, 0.2), ConfigError);
  CHECK_THROWS_AS(VolControl::feedback(nullptr), ConfigError);
  CHECK_THROWS_AS(simulate_bundle(VolControl::constant(1.5), grid, 0, kSeed,
                                  kSpec),
                  ConfigError);
}

TEST_CASE("control descriptors are stable strings") {
  CHECK(VolControl::constant(1.5).descriptor() == "const:1.5");
  CHECK(VolControl::alternating_blocks(4).descriptor() == "alt:4");
  CHECK(VolControl::random_adapted().descriptor() == "random:0.8:0.2");
  const StepFunction sched({0.0, 0.5, 1.0}, {1.0, 1.2});
  CHECK(VolControl::piecewise(sched).descriptor() == "piecewise:2");
}

TEST_CASE("bundle csv round trip preserves every sample and the metadata") {
  const TimeGrid grid{0.5, 12};
  const PathBundle b = simulate_bundle(VolControl::random_adapted(), grid, 7,
                                       kSeed, kSpec, 1, 3);
  const std::string csv = bundle_to_csv(b);
  const PathBundle back = bundle_from_csv(csv);
  CHECK(back.grid.n_steps == grid.n_steps);
  CHECK(back.grid.T == grid.T);
  CHECK(back.seed == b.seed);
  CHECK(back.first_path == 3);
  CHECK(back.control == b.control);
  CHECK(bitwise_equal(b.W, back.W));
  CHECK(bitwise_equal(b.h, back.h));
  CHECK(bitwise_equal(b.B, back.B));
  CHECK(bitwise_equal(b.qv, back.qv));
  CHECK(bundle_to_csv(back) == csv);

  CHECK_THROWS_AS(bundle_from_csv("not a bundle\n"), ConfigError);
}

TEST_CASE("bundle binary round trip is lossless") {
  const TimeGrid grid{1.0, 20};
  const PathBundle b = simulate_bundle(VolControl::alternating_blocks(2), grid,
                                       9, kSeed, kSpec);
  const auto path = temp_file("gx_test_bundle.bin");
  bundle_write_binary(b, path);
  const PathBundle back = bundle_read_binary(path);
  CHECK(back.seed == b.seed);
  CHECK(back.control == b.control);
  CHECK(back.grid.n_steps == b.grid.n_steps);
  CHECK(bitwise_equal(b.W, back.W));
  CHECK(bitwise_equal(b.h, back.h));
  CHECK(bitwise_equal(b.B, back.B));
  CHECK(bitwise_equal(b.qv, back.qv));
  std::filesystem::remove(path);

  const auto bad = temp_file("gx_test_bundle_bad.bin");
  write_file(bad.string(), "GARBAGE");
  CHECK_THROWS_AS(bundle_read_binary(bad), ConfigError);
  std::filesystem::remove(bad);
}
