#pragma once

#include <cmath>
#include <sstream>

#include "gx/errors.hpp"

namespace gx {

// Volatility band [sigma_lo, sigma_hi], stored squared.
// Invariant: 0 < sigma_lo_sq <= sigma_hi_sq.
template <typename S>
struct GSpecT {
  S sigma_lo_sq{1};
  S sigma_hi_sq{2};

  GSpecT() = default;
  GSpecT(S lo_sq, S hi_sq) : sigma_lo_sq(lo_sq), sigma_hi_sq(hi_sq) {
    if (!(lo_sq > S(0)) || !(hi_sq >= lo_sq)) {
      std::ostringstream os;
      os << "volatility band needs 0 < sigma_lo_sq <= sigma_hi_sq, got ["
         << lo_sq << ", " << hi_sq << "]";
      throw ConfigError(os.str());
    }
  }

  S sigma_lo() const { return std::sqrt(sigma_lo_sq); }
  S sigma_hi() const { return std::sqrt(sigma_hi_sq); }
  S band_gap() const { return sigma_hi_sq - sigma_lo_sq; }
};

using GSpec = GSpecT<double>;

// G(a) = (sigma_hi_sq * a+ - sigma_lo_sq * a-) / 2.
template <typename S>
S g_function(S a, const GSpecT<S>& g) {
  const S pos = a > S(0) ? a : S(0);
  const S neg = a < S(0) ? -a : S(0);
  return (g.sigma_hi_sq * pos - g.sigma_lo_sq * neg) / S(2);
}

// C(a) = c_hi * a+ - c_lo * a-, the upper rate of int a(s) dA_s for a
// process A whose increment rates lie in [c_lo, c_hi].
template <typename S>
S envelope_c(S a, S c_hi, S c_lo) {
  if (!(c_hi >= c_lo)) throw ConfigError("envelope_c needs c_hi >= c_lo");
  const S pos = a > S(0) ? a : S(0);
  const S neg = a < S(0) ? -a : S(0);
  return c_hi * pos - c_lo * neg;
}

}  // namespace gx
