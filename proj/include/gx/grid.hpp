#pragma once

#include <cmath>
#include <sstream>

#include "gx/errors.hpp"
#include "gx/types.hpp"

namespace gx {

// Uniform grid on [0, T]; t_i = i * dt, never an accumulated sum.
struct TimeGrid {
  double T = 1.0;
  Index n_steps = 1;
  double dt = 1.0;

  TimeGrid() = default;
  TimeGrid(double horizon, Index steps) : T(horizon), n_steps(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw ConfigError("time grid needs T > 0");
    }
    if (steps < 1) throw ConfigError("time grid needs n_steps >= 1");
    dt = T / static_cast<double>(n_steps);
  }

  double t(Index i) const { return static_cast<double>(i) * dt; }
  Index n_nodes() const { return n_steps + 1; }

  bool aligned(double time, double tol = 1e-9) const {
    const double k = time / dt;
    return std::abs(k - std::round(k)) <= tol * std::max(1.0, std::abs(k));
  }

  // Nearest node index; throws unless `time` sits on the grid.
  Index index_of(double time, double tol = 1e-9) const {
    if (!aligned(time, tol)) {
      std::ostringstream os;
      os << "time " << time << " is not a grid node (dt = " << dt << ")";
      throw ConfigError(os.str());
    }
    const auto i = static_cast<Index>(std::llround(time / dt));
    if (i < 0 || i > n_steps) throw ConfigError("time outside [0, T]");
    return i;
  }
};

}  // namespace gx
