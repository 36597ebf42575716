#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gx/errors.hpp"

namespace gx {

// Terminal payoff phi(x) from a small named catalog, so configs and the
// command line can refer to payoffs by name.  Arbitrary callables enter
// only through the library API (solver overloads taking std::function).
//
//   x              identity
//   x2, neg_x2     +- x^2
//   x4             x^4
//   abs            |x|
//   abs_minus_x2   |x| - x^2
//   call:K, put:K  (x - K)+, (K - x)+
//
// scale composes the catalog entry with a dilation: phi(scale * x).
class Payoff {
 public:
  enum class Kind {
    identity,
    square,
    neg_square,
    quartic,
    abs,
    abs_minus_square,
    call,
    put
  };

  Payoff(Kind kind, double strike = 0.0, double scale = 1.0)
      : kind_(kind), strike_(strike), scale_(scale) {}

  static Payoff parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    double strike = 0.0;
    if (colon != std::string::npos) {
      try {
        strike = std::stod(text.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad payoff parameter in '" + text + "'");
      }
    }
    if (head == "x") return Payoff(Kind::identity);
    if (head == "x2") return Payoff(Kind::square);
    if (head == "neg_x2") return Payoff(Kind::neg_square);
    if (head == "x4") return Payoff(Kind::quartic);
    if (head == "abs") return Payoff(Kind::abs);
    if (head == "abs_minus_x2") return Payoff(Kind::abs_minus_square);
    if (head == "call") return Payoff(Kind::call, strike);
    if (head == "put") return Payoff(Kind::put, strike);
    throw ConfigError("unknown payoff '" + text + "'");
  }

  static std::vector<std::string> catalog() {
    return {"x", "x2", "neg_x2", "x4", "abs", "abs_minus_x2"};
  }

  Payoff scaled(double a) const {
    Payoff p = *this;
    p.scale_ *= a;
    return p;
  }

  double operator()(double x) const {
    const double y = scale_ * x;
    switch (kind_) {
      case Kind::identity: return y;
      case Kind::square: return y * y;
      case Kind::neg_square: return -y * y;
      case Kind::quartic: return y * y * y * y;
      case Kind::abs: return std::abs(y);
      case Kind::abs_minus_square: return std::abs(y) - y * y;
      case Kind::call: return std::max(y - strike_, 0.0);
      case Kind::put: return std::max(strike_ - y, 0.0);
    }
    throw ConfigError("unreachable payoff kind");
  }

  std::string name() const {
    std::string base;
    switch (kind_) {
      case Kind::identity: base = "x"; break;
      case Kind::square: base = "x2"; break;
      case Kind::neg_square: base = "neg_x2"; break;
      case Kind::quartic: base = "x4"; break;
      case Kind::abs: base = "abs"; break;
      case Kind::abs_minus_square: base = "abs_minus_x2"; break;
      case Kind::call: base = "call:" + std::to_string(strike_); break;
      case Kind::put: base = "put:" + std::to_string(strike_); break;
    }
    if (scale_ != 1.0) base += "@" + std::to_string(scale_);
    return base;
  }

 private:
  Kind kind_;
  double strike_;
  double scale_;
};

// Terminal payoff psi(b, q) on (terminal value, terminal quadratic
// variation).  q_bump:V is -(q - V)^2, maximized inside the band when
// sigma_lo_sq * T < V < sigma_hi_sq * T.
class Payoff2 {
 public:
  enum class Kind { q, neg_q, q_bump, b_square };

  explicit Payoff2(Kind kind, double v0 = 0.0) : kind_(kind), v0_(v0) {}

  static Payoff2 parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    double v0 = 0.0;
    if (colon != std::string::npos) {
      try {
        v0 = std::stod(text.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad payoff parameter in '" + text + "'");
      }
    }
    if (head == "q") return Payoff2(Kind::q);
    if (head == "neg_q") return Payoff2(Kind::neg_q);
    if (head == "q_bump") return Payoff2(Kind::q_bump, v0);
    if (head == "b2") return Payoff2(Kind::b_square);
    throw ConfigError("unknown terminal-pair payoff '" + text + "'");
  }

  double operator()(double b, double q) const {
    switch (kind_) {
      case Kind::q: return q;
      case Kind::neg_q: return -q;
      case Kind::q_bump: return -(q - v0_) * (q - v0_);
      case Kind::b_square: return b * b;
    }
    throw ConfigError("unreachable payoff kind");
  }

  std::string name() const {
    switch (kind_) {
      case Kind::q: return "q";
      case Kind::neg_q: return "neg_q";
      case Kind::q_bump: return "q_bump:" + std::to_string(v0_);
      case Kind::b_square: return "b2";
    }
    return "?";
  }

 private:
  Kind kind_;
  double v0_;
};

}  // namespace gx
