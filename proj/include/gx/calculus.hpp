#pragma once

#include <cmath>
#include <sstream>

#include "gx/bundle.hpp"
#include "gx/errors.hpp"
#include "gx/gspec.hpp"
#include "gx/step_function.hpp"
#include "gx/types.hpp"

namespace gx {

namespace detail {

inline void check_step_shape(const PathMat& coeff, const PathBundle& b,
                             const char* who) {
  if (coeff.rows() != b.n_paths() || coeff.cols() != b.grid.n_steps) {
    std::ostringstream os;
    os << who << ": coefficient matrix must be n_paths x n_steps, got "
       << coeff.rows() << "x" << coeff.cols();
    throw ConfigError(os.str());
  }
}

// Running sum of coeff(p, i) * (series(p, i+1) - series(p, i)).
inline PathMat integrate_against(const PathMat& coeff, const PathMat& series,
                                 Index n_steps) {
  PathMat out(series.rows(), n_steps + 1);
  out.col(0).setZero();
  for (Index i = 0; i < n_steps; ++i) {
    out.col(i + 1) =
        out.col(i) + coeff.col(i) * (series.col(i + 1) - series.col(i));
  }
  return out;
}

}  // namespace detail

// Running integral of a per-step integrand against dB; linear in the
// integrand and additive over time.
inline PathMat ito_integral(const PathMat& coeff, const PathBundle& b) {
  detail::check_step_shape(coeff, b, "ito_integral");
  return detail::integrate_against(coeff, b.B, b.grid.n_steps);
}

inline PathMat integrate_dqv(const PathMat& coeff, const PathBundle& b) {
  detail::check_step_shape(coeff, b, "integrate_dqv");
  return detail::integrate_against(coeff, b.qv, b.grid.n_steps);
}

inline PathMat integrate_dt(const PathMat& coeff, const TimeGrid& grid) {
  if (coeff.cols() != grid.n_steps) {
    throw ConfigError("integrate_dt: coefficient matrix must have n_steps columns");
  }
  PathMat out(coeff.rows(), grid.n_steps + 1);
  out.col(0).setZero();
  for (Index i = 0; i < grid.n_steps; ++i) {
    out.col(i + 1) = out.col(i) + coeff.col(i) * grid.dt;
  }
  return out;
}

// int_0^T a(s) dX_s for a step function a with grid-aligned breakpoints.
inline Array integrate_step_against(const StepFunction& a,
                                    const PathMat& series,
                                    const TimeGrid& grid) {
  if (series.cols() != grid.n_steps + 1) {
    throw ConfigError("integrate_step_against: series must have n_steps+1 columns");
  }
  Array out = Array::Zero(series.rows());
  for (Index i = 0; i < grid.n_steps; ++i) {
    const double w = a(grid.t(i + 1));
    out += w * (series.col(i + 1) - series.col(i)).array();
  }
  return out;
}

// Dyadic quadratic variation at time t: sum over 2^level blocks of the
// squared increments of `series`.  Block edges k * t / 2^level must land
// on grid nodes.
inline Array qv_dyadic(const PathMat& series, int level, const TimeGrid& grid,
                       double t) {
  if (level < 0 || level > 30) throw ConfigError("qv_dyadic level out of range");
  if (series.cols() != grid.n_steps + 1) {
    throw ConfigError("qv_dyadic: series must have n_steps+1 columns");
  }
  const Index it = grid.index_of(t);
  const Index blocks = Index(1) << level;
  if (it % blocks != 0) {
    std::ostringstream os;
    os << "qv_dyadic: 2^" << level << " blocks do not align with " << it
       << " grid steps";
    throw ConfigError(os.str());
  }
  const Index stride = it / blocks;
  Array out = Array::Zero(series.rows());
  for (Index k = 0; k < blocks; ++k) {
    out += (series.col((k + 1) * stride) - series.col(k * stride))
               .array()
               .square();
  }
  return out;
}

namespace detail {

inline Index mollifier_steps(const TimeGrid& grid, double eps,
                             const char* who) {
  if (!(eps > 0.0)) throw ConfigError(std::string(who) + ": eps must be > 0");
  const double k = eps / grid.dt;
  const auto m = static_cast<Index>(std::llround(k));
  if (m < 1 || std::abs(k - static_cast<double>(m)) > 1e-9 * std::max(1.0, k)) {
    throw ConfigError(std::string(who) +
                      ": eps must be a positive multiple of the grid step");
  }
  return m;
}

}  // namespace detail

// Trailing-window average (1/eps) * int_{(t-eps)+}^{t} zeta(s) ds at every
// grid node; note the divisor stays eps even while t < eps.
inline PathMat mollify_uniform(const PathMat& steps, const TimeGrid& grid,
                               double eps) {
  if (steps.cols() != grid.n_steps) {
    throw ConfigError("mollify_uniform: input must have n_steps columns");
  }
  const Index m = detail::mollifier_steps(grid, eps, "mollify_uniform");
  PathMat prefix(steps.rows(), grid.n_steps + 1);
  prefix.col(0).setZero();
  for (Index i = 0; i < grid.n_steps; ++i) {
    prefix.col(i + 1) = prefix.col(i) + steps.col(i) * grid.dt;
  }
  PathMat out(steps.rows(), grid.n_steps + 1);
  for (Index i = 0; i <= grid.n_steps; ++i) {
    const Index lobound = std::max<Index>(0, i - m);
    out.col(i) = (prefix.col(i) - prefix.col(lobound)) / eps;
  }
  return out;
}

// Block predictor: on block ]k*eps, (k+1)*eps] the value is the average of
// zeta over the previous block, for k = 1 .. k_eps - 1 where k_eps is the
// number of whole eps-blocks in [0, T].  The first block and any partial
// tail are zero.  Output is per-step like the input.
inline PathMat mollify_block(const PathMat& steps, const TimeGrid& grid,
                             double eps) {
  if (steps.cols() != grid.n_steps) {
    throw ConfigError("mollify_block: input must have n_steps columns");
  }
  const Index m = detail::mollifier_steps(grid, eps, "mollify_block");
  const Index k_eps = grid.n_steps / m;
  PathMat out = PathMat::Zero(steps.rows(), grid.n_steps);
  for (Index k = 1; k < k_eps; ++k) {
    Array avg = Array::Zero(steps.rows());
    for (Index i = (k - 1) * m; i < k * m; ++i) {
      avg += steps.col(i);
    }
    avg /= static_cast<double>(m);
    for (Index i = k * m; i < (k + 1) * m; ++i) {
      out.col(i) = avg;
    }
  }
  return out;
}

// K_t = int_0^t eta d<B> - int_0^t 2 G(eta) ds, per path at every node.
inline PathMat k_process(const PathMat& eta, const PathBundle& b) {
  detail::check_step_shape(eta, b, "k_process");
  PathMat out(b.n_paths(), b.grid.n_steps + 1);
  out.col(0).setZero();
  const double hi = b.spec.sigma_hi_sq, lo = b.spec.sigma_lo_sq;
  for (Index i = 0; i < b.grid.n_steps; ++i) {
    const auto e = eta.col(i);
    // 2 G(eta) = hi * eta+ - lo * eta-.
    const auto two_g = hi * e.max(0.0) + lo * e.min(0.0);
    out.col(i + 1) = out.col(i) + e * (b.qv.col(i + 1) - b.qv.col(i)) -
                     two_g * b.grid.dt;
  }
  return out;
}

}  // namespace gx
