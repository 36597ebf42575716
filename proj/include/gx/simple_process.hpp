#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gx/bundle.hpp"
#include "gx/errors.hpp"
#include "gx/step_function.hpp"
#include "gx/types.hpp"

namespace gx {

// Piecewise-constant integrand: one coefficient per partition interval
// ]t_j, t_j+1], frozen at t_j.  Adaptedness is structural: an adapted
// coefficient sees only the B and qv histories up to t_j.
class SimpleProcess {
 public:
  // (B history nodes 0..j, qv history nodes 0..j, t_j) -> coefficient.
  using AdaptedFn =
      std::function<double(ConstArrayMap b_hist, ConstArrayMap qv_hist,
                           double t_j)>;

  static SimpleProcess constant(double c, double T) {
    SimpleProcess sp;
    sp.partition_ = {0.0, T};
    sp.constants_ = {c};
    return sp;
  }

  static SimpleProcess from_step(const StepFunction& f) {
    SimpleProcess sp;
    sp.partition_ = f.breakpoints();
    sp.constants_ = f.values();
    return sp;
  }

  // One adapted rule applied on every interval of `partition`.
  static SimpleProcess adapted(std::vector<double> partition, AdaptedFn fn,
                               std::string label) {
    if (partition.size() < 2 || partition.front() != 0.0) {
      throw ConfigError("simple process partition must start at 0");
    }
    for (std::size_t j = 0; j + 1 < partition.size(); ++j) {
      if (!(partition[j] < partition[j + 1])) {
        throw ConfigError("simple process partition must increase");
      }
    }
    SimpleProcess sp;
    sp.partition_ = std::move(partition);
    sp.fn_ = std::move(fn);
    sp.label_ = std::move(label);
    return sp;
  }

  bool is_deterministic() const { return !fn_; }
  const std::vector<double>& partition() const { return partition_; }
  const std::string& label() const { return label_; }

  // Per-step coefficients on the bundle grid, n_paths x n_steps.
  // Partition points must land on grid nodes.
  PathMat realize(const PathBundle& bundle) const {
    const TimeGrid& grid = bundle.grid;
    if (std::abs(partition_.back() - grid.T) > 1e-9 * grid.T) {
      throw ConfigError("simple process must cover [0, T]");
    }
    std::vector<Index> cut(partition_.size());
    for (std::size_t j = 0; j < partition_.size(); ++j) {
      cut[j] = grid.index_of(partition_[j]);
    }
    PathMat out(bundle.n_paths(), grid.n_steps);
    for (std::size_t j = 0; j + 1 < partition_.size(); ++j) {
      const Index a = cut[j], b = cut[j + 1];
      if (!fn_) {
        out.middleCols(a, b - a).setConstant(constants_[j]);
        continue;
      }
      for (Index p = 0; p < bundle.n_paths(); ++p) {
        const ConstArrayMap b_hist(bundle.B.row(p).data(), a + 1);
        const ConstArrayMap qv_hist(bundle.qv.row(p).data(), a + 1);
        const double c = fn_(b_hist, qv_hist, grid.t(a));
        out.row(p).segment(a, b - a).setConstant(c);
      }
    }
    return out;
  }

 private:
  SimpleProcess() = default;
  std::vector<double> partition_;
  std::vector<double> constants_;  // used when fn_ is empty
  AdaptedFn fn_;
  std::string label_ = "step";
};

// Named per-step realization on a bundle; the common currency of the
// norm and integral estimators.
struct ProcessFunctional {
  std::string name;
  std::function<PathMat(const PathBundle&)> realize;
};

inline ProcessFunctional process_of(const SimpleProcess& sp,
                                    std::string name) {
  return {std::move(name),
          [sp](const PathBundle& b) { return sp.realize(b); }};
}

inline ProcessFunctional constant_process(double c) {
  return {"const:" + format_double(c), [c](const PathBundle& b) {
            PathMat m(b.n_paths(), b.grid.n_steps);
            m.setConstant(c);
            return m;
          }};
}

inline ProcessFunctional step_process(const StepFunction& f,
                                      std::string name) {
  return process_of(SimpleProcess::from_step(f), std::move(name));
}

// Realized scenario volatility h.
inline ProcessFunctional realized_control() {
  return {"h", [](const PathBundle& b) { return PathMat(b.h); }};
}

// Realized quadratic-variation density: forward difference of qv over dt,
// which reproduces h^2 exactly on the simulation grid.
inline ProcessFunctional realized_qv_density() {
  return {"qv_density", [](const PathBundle& b) {
            const Index n = b.grid.n_steps;
            PathMat m = (b.qv.rightCols(n) - b.qv.leftCols(n)) / b.grid.dt;
            return m;
          }};
}

// Adapted state feedback sigma_lo + (sigma_hi - sigma_lo) * exp(-B^2 / 2),
// evaluated at the left node of each step.
inline ProcessFunctional gauss_feedback_process() {
  return {"gauss_feedback", [](const PathBundle& b) {
            const double lo = b.spec.sigma_lo();
            const double span = b.spec.sigma_hi() - lo;
            const Index n = b.grid.n_steps;
            PathMat m =
                lo + span * (-b.B.leftCols(n).square() / 2.0).exp();
            return m;
          }};
}

// Adapted decay sigma_lo + (sigma_hi - sigma_lo) * exp(-qv), evaluated at
// the left node of each step.  Its mean drifts downward in time, which is
// what the oscillator integrals are sensitive to.
inline ProcessFunctional qv_decay_process() {
  return {"qv_decay", [](const PathBundle& b) {
            const double lo = b.spec.sigma_lo();
            const double span = b.spec.sigma_hi() - lo;
            const Index n = b.grid.n_steps;
            PathMat m = lo + span * (-b.qv.leftCols(n)).exp();
            return m;
          }};
}

// Reciprocal of the realized control; integrating it against dB yields a
// process whose realized quadratic variation is exactly t.
inline ProcessFunctional inverse_control_process() {
  return {"inv_h", [](const PathBundle& b) { return PathMat(1.0 / b.h); }};
}

}  // namespace gx
