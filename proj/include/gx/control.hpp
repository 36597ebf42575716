#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "gx/errors.hpp"
#include "gx/grid.hpp"
#include "gx/gspec.hpp"
#include "gx/rng.hpp"
#include "gx/step_function.hpp"
#include "gx/types.hpp"

namespace gx {

// Bang-bang volatility choice tabulated from a lattice solution:
// pick_hi(r, j) decides sigma at remaining time tau = r * slice_dt and
// state node j.
struct FeedbackPolicy {
  double T = 0.0;
  double slice_dt = 0.0;
  double x0 = 0.0;  // leftmost node
  double dx = 0.0;
  Index nodes = 0;
  Eigen::Array<signed char, Eigen::Dynamic, Eigen::Dynamic> pick_hi;

  double sigma_at(double tau, double b, const GSpec& g) const {
    auto r = static_cast<Index>(std::llround(tau / slice_dt));
    r = std::clamp<Index>(r, 0, pick_hi.rows() - 1);
    auto j = static_cast<Index>(std::llround((b - x0) / dx));
    j = std::clamp<Index>(j, 1, nodes - 2);
    return pick_hi(r, j) != 0 ? g.sigma_hi() : g.sigma_lo();
  }
};

// Scenario volatility control; emits sigma for the step ]t_i, t_i+1]
// from information available at t_i.  Only the random kind consumes the
// control stream, one uniform per step.
class VolControl {
 public:
  enum class Kind { constant, piecewise, alternating, feedback, random };

  static VolControl constant(double sigma) {
    VolControl c(Kind::constant);
    c.sigma_const_ = sigma;
    return c;
  }

  // sigma_of_t(t) gives sigma on the interval containing t; breakpoints
  // must land on grid nodes.
  static VolControl piecewise(StepFunction sigma_of_t) {
    VolControl c(Kind::piecewise);
    c.step_ = std::make_shared<StepFunction>(std::move(sigma_of_t));
    return c;
  }

  // 2n equal blocks, sigma_lo on the first.
  static VolControl alternating_blocks(int n) {
    if (n < 1) throw ConfigError("alternating control needs n >= 1");
    VolControl c(Kind::alternating);
    c.alt_n_ = n;
    return c;
  }

  static VolControl feedback(std::shared_ptr<const FeedbackPolicy> policy) {
    if (!policy) throw ConfigError("feedback control needs a policy");
    VolControl c(Kind::feedback);
    c.policy_ = std::move(policy);
    return c;
  }

  // sigma = sigma_lo + (sigma_hi - sigma_lo) *
  //         clamp01(state_weight * exp(-qv) + noise_weight * U).
  static VolControl random_adapted(double state_weight = 0.8,
                                   double noise_weight = 0.2) {
    if (state_weight < 0.0 || noise_weight < 0.0) {
      throw ConfigError("random control weights must be nonnegative");
    }
    VolControl c(Kind::random);
    c.state_w_ = state_weight;
    c.noise_w_ = noise_weight;
    return c;
  }

  Kind kind() const { return kind_; }

  std::string descriptor() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::constant: os << "const:" << format_double(sigma_const_); break;
      case Kind::piecewise: os << "piecewise:" << step_->values().size(); break;
      case Kind::alternating: os << "alt:" << alt_n_; break;
      case Kind::feedback: os << "feedback"; break;
      case Kind::random:
        os << "random:" << format_double(state_w_) << ":"
           << format_double(noise_w_);
        break;
    }
    return os.str();
  }

  // Structural checks that do not depend on the path.
  void validate(const TimeGrid& grid, const GSpec& g) const {
    switch (kind_) {
      case Kind::constant:
        check_band(sigma_const_, g);
        break;
      case Kind::piecewise: {
        if (std::abs(step_->domain_end() - grid.T) > 1e-9 * grid.T) {
          throw ConfigError("piecewise control must cover [0, T]");
        }
        for (double bp : step_->breakpoints()) {
          if (!grid.aligned(bp)) {
            throw ConfigError("piecewise control breakpoints must be grid nodes");
          }
        }
        for (double v : step_->values()) check_band(v, g);
        break;
      }
      case Kind::alternating:
        if (grid.n_steps % (2 * alt_n_) != 0) {
          std::ostringstream os;
          os << "alternating control with " << 2 * alt_n_
             << " blocks needs n_steps divisible by it, got " << grid.n_steps;
          throw ConfigError(os.str());
        }
        break;
      case Kind::feedback:
        if (std::abs(policy_->T - grid.T) > 1e-9 * grid.T) {
          throw ConfigError("feedback policy was built for a different horizon");
        }
        break;
      case Kind::random:
        break;
    }
  }

  double sigma(Index step, double b, double qv, const TimeGrid& grid,
               const GSpec& g, CounterRng& ctrl) const {
    switch (kind_) {
      case Kind::constant:
        return sigma_const_;
      case Kind::piecewise:
        return (*step_)(grid.t(step + 1));
      case Kind::alternating: {
        const Index steps_per_block = grid.n_steps / (2 * alt_n_);
        const Index block = step / steps_per_block;
        return (block % 2 == 0) ? g.sigma_lo() : g.sigma_hi();
      }
      case Kind::feedback:
        return policy_->sigma_at(grid.T - grid.t(step), b, g);
      case Kind::random: {
        const double u = state_w_ * std::exp(-qv) + noise_w_ * ctrl.next_unit();
        const double w = std::clamp(u, 0.0, 1.0);
        return g.sigma_lo() + (g.sigma_hi() - g.sigma_lo()) * w;
      }
    }
    throw ConfigError("unreachable control kind");
  }

 private:
  explicit VolControl(Kind kind) : kind_(kind) {}

  static void check_band(double sigma, const GSpec& g) {
    const double tol = 1e-12 * g.sigma_hi();
    if (sigma < g.sigma_lo() - tol || sigma > g.sigma_hi() + tol) {
      std::ostringstream os;
      os << "control volatility " << sigma << " outside band ["
         << g.sigma_lo() << ", " << g.sigma_hi() << "]";
      throw GuardError(os.str());
    }
  }

  Kind kind_;
  double sigma_const_ = 0.0;
  std::shared_ptr<const StepFunction> step_;
  int alt_n_ = 0;
  std::shared_ptr<const FeedbackPolicy> policy_;
  double state_w_ = 0.0;
  double noise_w_ = 0.0;
};

}  // namespace gx
