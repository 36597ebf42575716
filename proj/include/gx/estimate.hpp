#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gx/bundle.hpp"
#include "gx/calculus.hpp"
#include "gx/errors.hpp"
#include "gx/payoff.hpp"
#include "gx/simple_process.hpp"
#include "gx/step_function.hpp"

namespace gx {

// Running sample statistics.
struct StatCounter {
  double sum = 0.0;
  double sumsq = 0.0;
  Index num = 0;

  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++num;
  }
  void add_all(const Array& xs) {
    sum += xs.sum();
    sumsq += xs.square().sum();
    num += xs.size();
  }
  double mean() const { return num > 0 ? sum / static_cast<double>(num) : 0.0; }
  double var() const {
    if (num < 2) return 0.0;
    const double n = static_cast<double>(num);
    return std::max(0.0, (sumsq - sum * sum / n) / (n - 1.0));
  }
  double se() const {
    return num > 0 ? std::sqrt(var() / static_cast<double>(num)) : 0.0;
  }
};

// Per-path scalar read off a bundle.
struct PathFunctional {
  std::string name;
  std::function<Array(const PathBundle&)> eval;
};

inline PathFunctional terminal_payoff(const Payoff& phi) {
  return {"payoff:" + phi.name(), [phi](const PathBundle& b) {
            Array out = b.B.col(b.grid.n_steps);
            return Array(out.unaryExpr([&phi](double x) { return phi(x); }));
          }};
}

inline PathFunctional terminal_qv() {
  return {"qv", [](const PathBundle& b) {
            return Array(b.qv.col(b.grid.n_steps));
          }};
}

inline PathFunctional terminal_b() {
  return {"b", [](const PathBundle& b) {
            return Array(b.B.col(b.grid.n_steps));
          }};
}

inline PathFunctional negate(const PathFunctional& f) {
  auto eval = f.eval;
  return {"neg:" + f.name,
          [eval](const PathBundle& b) { return Array(-eval(b)); }};
}

// int_0^T |a_s - b_s| ds per path.
inline PathFunctional dt_abs_diff(const ProcessFunctional& a,
                                  const ProcessFunctional& b) {
  auto ra = a.realize, rb = b.realize;
  return {"m1:" + a.name + "-" + b.name, [ra, rb](const PathBundle& bun) {
            return Array((ra(bun) - rb(bun)).abs().rowwise().sum() *
                         bun.grid.dt);
          }};
}

// int_0^T a(s) h_s ds per path for a step function a.
inline PathFunctional dt_weighted_integral(const StepFunction& a,
                                           const ProcessFunctional& h,
                                           std::string name) {
  auto rh = h.realize;
  StepFunction aw = a;
  return {std::move(name), [aw, rh](const PathBundle& b) {
            const PathMat m = rh(b);
            Array out = Array::Zero(b.n_paths());
            for (Index i = 0; i < b.grid.n_steps; ++i) {
              out += aw(b.grid.t(i + 1)) * m.col(i);
            }
            out *= b.grid.dt;
            return out;
          }};
}

struct EstimateParams {
  Index chunk = 4096;
  int jobs = 1;
};

// Maximum of per-control sample means; `value` always equals
// means[winner] and `se` is that control's standard error.
struct UpperEstimate {
  std::string functional;
  double value = 0.0;
  double se = 0.0;
  Index winner = 0;
  std::string winner_control;
  std::vector<double> means;
  std::vector<double> ses;
  std::vector<std::string> controls;
  Index n_paths = 0;
  std::uint64_t seed = 0;
};

// One pass over the control family, all functionals evaluated on the same
// bundles.  Control c simulates under seed chain_seed(master_seed, c).
// Path draws depend only on (seed, control, global path index), so jobs
// never changes any result; the chunk size regroups the accumulation and
// can move sums by rounding only.
inline std::vector<UpperEstimate> estimate_upper_multi(
    const std::vector<PathFunctional>& fs,
    const std::vector<VolControl>& family, const TimeGrid& grid,
    Index n_paths, std::uint64_t master_seed, const GSpec& spec,
    const EstimateParams& params = {}) {
  if (family.empty()) throw ConfigError("estimate needs a nonempty family");
  if (fs.empty()) throw ConfigError("estimate needs at least one functional");
  if (n_paths < 2) throw ConfigError("estimate needs n_paths >= 2");
  const Index chunk = std::max<Index>(1, params.chunk);
  std::vector<std::vector<StatCounter>> stats(
      fs.size(), std::vector<StatCounter>(family.size()));
  for (std::size_t c = 0; c < family.size(); ++c) {
    const std::uint64_t seed_c = chain_seed(master_seed, c);
    for (Index start = 0; start < n_paths; start += chunk) {
      const Index count = std::min(chunk, n_paths - start);
      const PathBundle bundle = simulate_bundle(
          family[c], grid, count, seed_c, spec, params.jobs, start);
      for (std::size_t q = 0; q < fs.size(); ++q) {
        stats[q][c].add_all(fs[q].eval(bundle));
      }
    }
  }
  std::vector<UpperEstimate> out(fs.size());
  for (std::size_t q = 0; q < fs.size(); ++q) {
    UpperEstimate& e = out[q];
    e.functional = fs[q].name;
    e.n_paths = n_paths;
    e.seed = master_seed;
    e.means.resize(family.size());
    e.ses.resize(family.size());
    e.controls.resize(family.size());
    for (std::size_t c = 0; c < family.size(); ++c) {
      e.means[c] = stats[q][c].mean();
      e.ses[c] = stats[q][c].se();
      e.controls[c] = family[c].descriptor();
      if (c == 0 || e.means[c] > e.value) {
        e.value = e.means[c];
        e.se = e.ses[c];
        e.winner = static_cast<Index>(c);
      }
    }
    e.winner_control = e.controls[static_cast<std::size_t>(e.winner)];
  }
  return out;
}

inline UpperEstimate estimate_upper(const PathFunctional& f,
                                    const std::vector<VolControl>& family,
                                    const TimeGrid& grid, Index n_paths,
                                    std::uint64_t master_seed,
                                    const GSpec& spec,
                                    const EstimateParams& params = {}) {
  return estimate_upper_multi({f}, family, grid, n_paths, master_seed, spec,
                              params)[0];
}

// Lower expectation through the duality -E(-xi); means are reported for
// xi itself and the winner attains the minimum.
inline UpperEstimate estimate_lower(const PathFunctional& f,
                                    const std::vector<VolControl>& family,
                                    const TimeGrid& grid, Index n_paths,
                                    std::uint64_t master_seed,
                                    const GSpec& spec,
                                    const EstimateParams& params = {}) {
  UpperEstimate e = estimate_upper(negate(f), family, grid, n_paths,
                                   master_seed, spec, params);
  e.functional = "lower:" + f.name;
  e.value = -e.value;
  for (double& m : e.means) m = -m;
  return e;
}

struct DefectReport {
  double defect = 0.0;  // upper(xi) + upper(-xi), zero iff symmetric
  double se = 0.0;
  UpperEstimate up;
  UpperEstimate up_neg;
};

// Both sides estimated on the same bundles.
inline DefectReport symmetry_defect(const PathFunctional& f,
                                    const std::vector<VolControl>& family,
                                    const TimeGrid& grid, Index n_paths,
                                    std::uint64_t master_seed,
                                    const GSpec& spec,
                                    const EstimateParams& params = {}) {
  auto ests = estimate_upper_multi({f, negate(f)}, family, grid, n_paths,
                                   master_seed, spec, params);
  DefectReport r;
  r.up = std::move(ests[0]);
  r.up_neg = std::move(ests[1]);
  r.defect = r.up.value + r.up_neg.value;
  r.se = std::hypot(r.up.se, r.up_neg.se);
  return r;
}

// Sample version of the integrable-process distance E int |a - b| ds.
inline UpperEstimate m1_norm(const ProcessFunctional& a,
                             const ProcessFunctional& b,
                             const std::vector<VolControl>& family,
                             const TimeGrid& grid, Index n_paths,
                             std::uint64_t master_seed, const GSpec& spec,
                             const EstimateParams& params = {}) {
  return estimate_upper(dt_abs_diff(a, b), family, grid, n_paths, master_seed,
                        spec, params);
}

// Nine constants across the band, short alternating ladders, and the
// lattice policy when one is supplied.
inline std::vector<VolControl> default_family(
    const GSpec& spec,
    std::shared_ptr<const FeedbackPolicy> policy = nullptr) {
  std::vector<VolControl> family;
  const double lo = spec.sigma_lo(), hi = spec.sigma_hi();
  const int n_const = 9;
  for (int i = 0; i < n_const; ++i) {
    const double s =
        lo + (hi - lo) * static_cast<double>(i) / (n_const - 1);
    family.push_back(VolControl::constant(s));
  }
  for (int n : {1, 2, 4, 8}) {
    family.push_back(VolControl::alternating_blocks(n));
  }
  if (policy) family.push_back(VolControl::feedback(std::move(policy)));
  return family;
}

// Increment rate band of a process A over [0, T] and over sub-windows.
// c_hi and c_lo are the full-span upper and lower rates; the invariant
// c_hi >= c_lo - 3 * combined SE is checked at construction.
struct GapReport {
  double c_hi = 0.0, c_lo = 0.0;
  double se_hi = 0.0, se_lo = 0.0;
  std::vector<double> edges;
  std::vector<double> win_hi, win_lo, win_se_hi, win_se_lo;

  GapReport(double chi, double clo, double sehi, double selo,
            std::vector<double> window_edges, std::vector<double> whi,
            std::vector<double> wlo, std::vector<double> wsehi,
            std::vector<double> wselo)
      : c_hi(chi), c_lo(clo), se_hi(sehi), se_lo(selo),
        edges(std::move(window_edges)), win_hi(std::move(whi)),
        win_lo(std::move(wlo)), win_se_hi(std::move(wsehi)),
        win_se_lo(std::move(wselo)) {
    if (!(c_hi >= c_lo - 3.0 * std::hypot(se_hi, se_lo))) {
      std::ostringstream os;
      os << "rate band inverted: c_hi = " << c_hi << " < c_lo = " << c_lo;
      throw GuardError(os.str());
    }
  }

  double gap() const { return c_hi - c_lo; }

  // Every window rate agrees with the full-span rate within 3 SE plus
  // `slack`.
  bool stationary(double slack = 0.0) const {
    for (std::size_t k = 0; k < win_hi.size(); ++k) {
      const double tol_hi = 3.0 * std::hypot(win_se_hi[k], se_hi) + slack;
      const double tol_lo = 3.0 * std::hypot(win_se_lo[k], se_lo) + slack;
      if (std::abs(win_hi[k] - c_hi) > tol_hi) return false;
      if (std::abs(win_lo[k] - c_lo) > tol_lo) return false;
    }
    return true;
  }

  double max_window_dev() const {
    double dev = 0.0;
    for (std::size_t k = 0; k < win_hi.size(); ++k) {
      dev = std::max(dev, std::abs(win_hi[k] - c_hi));
      dev = std::max(dev, std::abs(win_lo[k] - c_lo));
    }
    return dev;
  }
};

}  // namespace gx
