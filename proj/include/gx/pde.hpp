#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gx/control.hpp"
#include "gx/errors.hpp"
#include "gx/gspec.hpp"
#include "gx/payoff.hpp"
#include "gx/types.hpp"

namespace gx {

// Explicit monotone lattice for u_t = G(u_xx), u(0, x) = phi(x).
// u(tau, 0) is the sublinear expectation of phi(B_tau).
struct LatticeParams {
  Index nodes = 400;
  double width_mult = 6.0;   // half-width = width_mult * sigma_hi * sqrt(T)
  double cfl_safety = 0.9;
  double tolerance = 1e-3;   // boundary influence guard
  bool probe = true;         // run the influence probe
  bool store_slices = true;  // keep every time slice (needed for policies)
  double dt_override = 0.0;  // 0 = derive from the CFL bound
};

struct LatticeSolution {
  GSpec spec;
  std::string payoff_name;
  double T = 0.0;
  Index nodes = 0;
  double x0 = 0.0;  // leftmost node; x_j = x0 + j * dx, x(center) = 0
  double dx = 0.0;
  double dt = 0.0;
  Index n_slices = 0;  // time rows stored, counting tau = 0
  Eigen::ArrayXXd u;   // n_slices x nodes; row r is tau = r * dt
  double cfl = 0.0;    // dt * sigma_hi_sq / dx^2, must be <= 1
  double boundary_check = 0.0;  // edge influence weight at the centre

  Index center() const { return nodes / 2; }
  double x_at(Index j) const { return x0 + static_cast<double>(j) * dx; }
  double value() const { return u(u.rows() - 1, center()); }

  // Quadratic interpolation through the three nodes nearest x.
  double value_at(double x, Index row) const {
    auto j = static_cast<Index>(std::llround((x - x0) / dx));
    j = std::clamp<Index>(j, 1, nodes - 2);
    const double s = (x - x_at(j)) / dx;  // in [-1, 1] for interior x
    const double um = u(row, j - 1), uc = u(row, j), up = u(row, j + 1);
    return uc + 0.5 * s * (up - um) + 0.5 * s * s * (up - 2.0 * uc + um);
  }
  double value_at(double x) const { return value_at(x, u.rows() - 1); }
};

namespace detail {

struct HeatGrid {
  Index nodes;
  Index center;
  double dx, dt, x0;
  Index n_t;
};

inline HeatGrid heat_grid(double T, const GSpec& g, const LatticeParams& p) {
  if (p.nodes < 5) throw ConfigError("lattice needs at least 5 nodes");
  if (!(T > 0.0)) throw ConfigError("lattice needs T > 0");
  if (!(p.width_mult > 0.0)) throw ConfigError("width_mult must be > 0");
  HeatGrid hg;
  hg.nodes = p.nodes;
  hg.center = p.nodes / 2;
  const double half_width = p.width_mult * g.sigma_hi() * std::sqrt(T);
  hg.dx = half_width / static_cast<double>(hg.center);
  hg.x0 = -static_cast<double>(hg.center) * hg.dx;
  const double dx2 = hg.dx * hg.dx;
  double dt = p.dt_override > 0.0
                  ? p.dt_override
                  : p.cfl_safety * dx2 / g.sigma_hi_sq;
  hg.n_t = static_cast<Index>(std::ceil(T / dt - 1e-12));
  if (hg.n_t < 1) hg.n_t = 1;
  hg.dt = T / static_cast<double>(hg.n_t);
  if (hg.dt * g.sigma_hi_sq > dx2 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "CFL violation: dt = " << hg.dt << " exceeds dx^2 / sigma_hi_sq = "
       << dx2 / g.sigma_hi_sq;
    throw GuardError(os.str());
  }
  return hg;
}

// One explicit step of u_t = G(u_xx) on the interior; edges keep their
// values (zero second difference at the boundary).
inline void heat_step(Array& u, Array& un, Array& d2, const GSpec& g,
                      double dt, double inv_dx2) {
  const Index n = u.size();
  d2 = (u.head(n - 2) - 2.0 * u.segment(1, n - 2) + u.tail(n - 2)) * inv_dx2;
  un.segment(1, n - 2) =
      u.segment(1, n - 2) +
      (0.5 * dt) * (g.sigma_hi_sq * d2.max(0.0) + g.sigma_lo_sq * d2.min(0.0));
  un(0) = u(0);
  un(n - 1) = u(n - 1);
  u.swap(un);
}

}  // namespace detail

// Core solver over an arbitrary callable payoff.  The probe evolves an
// edge indicator under the same sup-envelope dynamics; since the scheme
// is monotone, boundary errors reach the centre with at most this weight,
// and the guard trips when the weight exceeds `tolerance`.
inline LatticeSolution solve_g_heat_1d(
    const std::function<double(double)>& phi, std::string payoff_name,
    double T, const GSpec& g, const LatticeParams& params = {}) {
  const detail::HeatGrid hg = detail::heat_grid(T, g, params);
  LatticeSolution sol;
  sol.spec = g;
  sol.payoff_name = std::move(payoff_name);
  sol.T = T;
  sol.nodes = hg.nodes;
  sol.x0 = hg.x0;
  sol.dx = hg.dx;
  sol.dt = hg.dt;
  sol.cfl = hg.dt * g.sigma_hi_sq / (hg.dx * hg.dx);
  sol.n_slices = params.store_slices ? hg.n_t + 1 : 1;

  Array u(hg.nodes), un(hg.nodes), d2(hg.nodes - 2);
  for (Index j = 0; j < hg.nodes; ++j) {
    u(j) = phi(sol.x_at(j));
  }
  if (!u.isFinite().all()) {
    throw GuardError("payoff is not finite on the lattice domain");
  }
  const double inv_dx2 = 1.0 / (hg.dx * hg.dx);
  if (params.store_slices) {
    sol.u.resize(hg.n_t + 1, hg.nodes);
    sol.u.row(0) = u.transpose();
    for (Index r = 0; r < hg.n_t; ++r) {
      detail::heat_step(u, un, d2, g, hg.dt, inv_dx2);
      sol.u.row(r + 1) = u.transpose();
    }
  } else {
    for (Index r = 0; r < hg.n_t; ++r) {
      detail::heat_step(u, un, d2, g, hg.dt, inv_dx2);
    }
    sol.u.resize(1, hg.nodes);
    sol.u.row(0) = u.transpose();
  }
  if (!sol.u.isFinite().all()) {
    throw GuardError("lattice solve diverged");
  }

  if (params.probe) {
    Array v = Array::Zero(hg.nodes), vn(hg.nodes), vd2(hg.nodes - 2);
    v(0) = v(hg.nodes - 1) = 1.0;
    for (Index r = 0; r < hg.n_t; ++r) {
      detail::heat_step(v, vn, vd2, g, hg.dt, inv_dx2);
    }
    sol.boundary_check = v(hg.center);
    if (sol.boundary_check > params.tolerance) {
      std::ostringstream os;
      os << "domain too narrow: boundary influence " << sol.boundary_check
         << " above tolerance " << params.tolerance;
      throw GuardError(os.str());
    }
  }
  return sol;
}

inline LatticeSolution solve_g_heat_1d(const Payoff& phi, double T,
                                       const GSpec& g,
                                       const LatticeParams& params = {}) {
  return solve_g_heat_1d([phi](double x) { return phi(x); }, phi.name(), T, g,
                         params);
}

// A stored slice reused as a payoff: linear between nodes, extended by the
// end slopes outside the domain.
inline std::function<double(double)> payoff_from_slice(
    const LatticeSolution& sol, Index row) {
  if (row < 0 || row >= sol.u.rows()) throw ConfigError("slice row out of range");
  const Array slice = sol.u.row(row).transpose();
  const double x0 = sol.x0, dx = sol.dx;
  const Index nodes = sol.nodes;
  return [slice, x0, dx, nodes](double x) {
    double s = (x - x0) / dx;
    const auto j = std::clamp<Index>(static_cast<Index>(std::floor(s)), 0,
                                     nodes - 2);
    s -= static_cast<double>(j);
    return slice(j) * (1.0 - s) + slice(j + 1) * s;
  };
}

// Bang-bang policy read off the lattice: at remaining time tau and node j,
// choose sigma_hi where the discrete second difference of u(tau, .) is
// nonnegative, sigma_lo otherwise.
inline std::shared_ptr<const FeedbackPolicy> feedback_control_from_lattice(
    const LatticeSolution& sol) {
  if (sol.n_slices < 2) {
    throw ConfigError("policy extraction needs a lattice with stored slices");
  }
  auto policy = std::make_shared<FeedbackPolicy>();
  policy->T = sol.T;
  policy->slice_dt = sol.dt;
  policy->x0 = sol.x0;
  policy->dx = sol.dx;
  policy->nodes = sol.nodes;
  policy->pick_hi.resize(sol.u.rows(), sol.nodes);
  for (Index r = 0; r < sol.u.rows(); ++r) {
    for (Index j = 1; j + 1 < sol.nodes; ++j) {
      const double d2 = sol.u(r, j - 1) - 2.0 * sol.u(r, j) + sol.u(r, j + 1);
      policy->pick_hi(r, j) = d2 >= 0.0 ? 1 : 0;
    }
    policy->pick_hi(r, 0) = policy->pick_hi(r, 1);
    policy->pick_hi(r, sol.nodes - 1) = policy->pick_hi(r, sol.nodes - 2);
  }
  return policy;
}

// Explicit monotone lattice for the pair (B, <B>):
//   u_t = sup over sigma^2 in [lo, hi] of sigma^2 * (u_bb / 2 + u_q),
// u(0, b, q) = psi(b, q), value u(T, 0, 0).  The q derivative is one-sided
// in the drift direction; the top q row uses u_q = 0 and is padded far
// beyond the reachable region.
struct Lattice2Params {
  Index b_nodes = 161;
  Index q_nodes = 81;
  double width_mult = 6.0;
  double q_pad = 1.0;  // q_max = (1 + q_pad) * sigma_hi_sq * T
  double cfl_safety = 0.9;
  double tolerance = 1e-3;
  bool probe = true;
};

struct Lattice2Solution {
  GSpec spec;
  std::string payoff_name;
  double T = 0.0;
  Index b_nodes = 0, q_nodes = 0;
  double b0 = 0.0, db = 0.0, dq = 0.0, dt = 0.0;
  Eigen::ArrayXXd u;  // final slice, b_nodes x q_nodes
  double cfl = 0.0;
  double boundary_check = 0.0;

  Index center_b() const { return b_nodes / 2; }
  double value() const { return u(center_b(), 0); }
};

namespace detail {

inline void hjb_step(Eigen::ArrayXXd& u, Eigen::ArrayXXd& un,
                     Eigen::ArrayXXd& a, const GSpec& g, double dt,
                     double inv_db2, double inv_dq) {
  const Index bn = u.rows(), qn = u.cols();
  a.setZero();
  a.middleRows(1, bn - 2) =
      (u.topRows(bn - 2) - 2.0 * u.middleRows(1, bn - 2) +
       u.bottomRows(bn - 2)) *
      (0.5 * inv_db2);
  a.leftCols(qn - 1) += (u.rightCols(qn - 1) - u.leftCols(qn - 1)) * inv_dq;
  un = u + dt * (g.sigma_hi_sq * a.max(0.0) + g.sigma_lo_sq * a.min(0.0));
  un.row(0) = u.row(0);
  un.row(bn - 1) = u.row(bn - 1);
  u.swap(un);
}

}  // namespace detail

inline Lattice2Solution solve_hjb_2d(const Payoff2& psi, double T,
                                     const GSpec& g,
                                     const Lattice2Params& params = {}) {
  if (params.b_nodes < 5 || params.q_nodes < 5) {
    throw ConfigError("pair lattice needs at least 5 nodes per axis");
  }
  if (!(T > 0.0)) throw ConfigError("pair lattice needs T > 0");
  Lattice2Solution sol;
  sol.spec = g;
  sol.payoff_name = psi.name();
  sol.T = T;
  sol.b_nodes = params.b_nodes;
  sol.q_nodes = params.q_nodes;
  const Index bc = params.b_nodes / 2;
  const double half_width = params.width_mult * g.sigma_hi() * std::sqrt(T);
  sol.db = half_width / static_cast<double>(bc);
  sol.b0 = -static_cast<double>(bc) * sol.db;
  const double q_max = (1.0 + params.q_pad) * g.sigma_hi_sq * T;
  sol.dq = q_max / static_cast<double>(params.q_nodes - 1);
  const double inv_db2 = 1.0 / (sol.db * sol.db);
  const double inv_dq = 1.0 / sol.dq;
  const double dt0 = params.cfl_safety / (g.sigma_hi_sq * (inv_db2 + inv_dq));
  auto n_t = static_cast<Index>(std::ceil(T / dt0 - 1e-12));
  if (n_t < 1) n_t = 1;
  sol.dt = T / static_cast<double>(n_t);
  sol.cfl = sol.dt * g.sigma_hi_sq * (inv_db2 + inv_dq);
  if (sol.cfl > 1.0 + 1e-12) {
    throw GuardError("CFL violation on the pair lattice");
  }

  Eigen::ArrayXXd u(params.b_nodes, params.q_nodes);
  for (Index j = 0; j < params.b_nodes; ++j) {
    const double b = sol.b0 + static_cast<double>(j) * sol.db;
    for (Index k = 0; k < params.q_nodes; ++k) {
      u(j, k) = psi(b, static_cast<double>(k) * sol.dq);
    }
  }
  if (!u.isFinite().all()) {
    throw GuardError("payoff is not finite on the pair lattice domain");
  }
  Eigen::ArrayXXd un(params.b_nodes, params.q_nodes);
  Eigen::ArrayXXd a(params.b_nodes, params.q_nodes);
  for (Index r = 0; r < n_t; ++r) {
    detail::hjb_step(u, un, a, g, sol.dt, inv_db2, inv_dq);
  }
  if (!u.isFinite().all()) throw GuardError("pair lattice solve diverged");
  sol.u = u;

  if (params.probe) {
    Eigen::ArrayXXd v = Eigen::ArrayXXd::Zero(params.b_nodes, params.q_nodes);
    v.row(0).setConstant(1.0);
    v.row(params.b_nodes - 1).setConstant(1.0);
    v.col(params.q_nodes - 1).setConstant(1.0);
    for (Index r = 0; r < n_t; ++r) {
      detail::hjb_step(v, un, a, sol.spec, sol.dt, inv_db2, inv_dq);
      v.col(params.q_nodes - 1).setConstant(1.0);
    }
    sol.boundary_check = v(sol.center_b(), 0);
    if (sol.boundary_check > params.tolerance) {
      std::ostringstream os;
      os << "domain too narrow on the pair lattice: influence "
         << sol.boundary_check << " above tolerance " << params.tolerance;
      throw GuardError(os.str());
    }
  }
  return sol;
}

// Nested expectation of phi(increment_1, ..., increment_m) over
// 0 < t_1 < ... < t_m: the innermost argument is integrated out by a
// lattice solve for each frozen outer node, recursively.  Cost grows as
// nodes^(m-1) solves, hence the cap.
inline double compose_semigroup(
    const std::vector<double>& times,
    const std::function<double(const std::vector<double>&)>& phi,
    const GSpec& g, const LatticeParams& params = {}, int cap = 3) {
  const auto m = static_cast<int>(times.size());
  if (m < 1) throw ConfigError("compose_semigroup needs at least one time");
  if (m > cap) {
    std::ostringstream os;
    os << "compose_semigroup: " << m << " stages exceed the cap " << cap;
    throw ConfigError(os.str());
  }
  double prev = 0.0;
  for (double t : times) {
    if (!(t > prev)) {
      throw ConfigError("compose_semigroup times must increase from 0");
    }
    prev = t;
  }
  LatticeParams inner = params;
  inner.store_slices = false;
  inner.probe = false;

  std::vector<double> xs;
  xs.reserve(times.size());
  std::function<double()> eval = [&]() -> double {
    const auto k = static_cast<int>(xs.size());
    if (k == m) return phi(xs);
    const double tau = times[static_cast<std::size_t>(k)] -
                       (k > 0 ? times[static_cast<std::size_t>(k - 1)] : 0.0);
    const LatticeParams& stage = (k == 0) ? params : inner;
    LatticeParams stage_params = stage;
    stage_params.store_slices = false;
    const auto payoff = [&](double y) {
      xs.push_back(y);
      const double v = eval();
      xs.pop_back();
      return v;
    };
    return solve_g_heat_1d(payoff, "nested", tau, g, stage_params).value();
  };
  return eval();
}

}  // namespace gx
