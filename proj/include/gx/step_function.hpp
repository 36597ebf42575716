#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "gx/errors.hpp"
#include "gx/types.hpp"

namespace gx {

// Shortest decimal that parses back to the same double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  double back = 0.0;
  std::sscanf(buf, "%lg", &back);
  if (back == x) {
    for (int prec = 1; prec < 17; ++prec) {
      char probe[40];
      std::snprintf(probe, sizeof(probe), "%.*g", prec, x);
      std::sscanf(probe, "%lg", &back);
      if (back == x) return probe;
    }
  }
  return buf;
}

// Piecewise-constant function of time; value_[k] holds on ]t_[k], t_[k+1]].
// Breakpoints start at 0 and increase strictly.
class StepFunction {
 public:
  StepFunction(std::vector<double> breakpoints, std::vector<double> values)
      : t_(std::move(breakpoints)), v_(std::move(values)) {
    if (t_.size() < 2 || v_.size() + 1 != t_.size()) {
      throw ConfigError("step function needs n+1 breakpoints for n values");
    }
    if (t_.front() != 0.0) throw ConfigError("step function must start at 0");
    for (std::size_t k = 0; k + 1 < t_.size(); ++k) {
      if (!(t_[k] < t_[k + 1])) {
        throw ConfigError("step function breakpoints must increase");
      }
    }
  }

  static StepFunction constant(double c, double T) {
    return StepFunction({0.0, T}, {c});
  }

  double domain_end() const { return t_.back(); }
  const std::vector<double>& breakpoints() const { return t_; }
  const std::vector<double>& values() const { return v_; }

  // Evaluation at 0 returns the first interval's value.
  double operator()(double time) const {
    if (time < 0.0 || time > t_.back() * (1.0 + 1e-12)) {
      throw ConfigError("step function evaluated outside its domain");
    }
    if (time <= t_.front()) return v_.front();
    const auto it = std::lower_bound(t_.begin(), t_.end(), time);
    auto k = static_cast<std::size_t>(it - t_.begin());
    // t_[k-1] < time <= t_[k]; value on that interval is v_[k-1].
    if (k >= t_.size()) k = t_.size() - 1;
    return v_[k - 1];
  }

  double integral() const {
    double acc = 0.0;
    for (std::size_t k = 0; k < v_.size(); ++k) {
      acc += v_[k] * (t_[k + 1] - t_[k]);
    }
    return acc;
  }

  // Rows (t_k, value on the interval starting at t_k); the final row repeats
  // the last value at t = T so the breakpoint list is complete.
  std::string to_csv() const {
    std::ostringstream os;
    os << "t,value\n";
    for (std::size_t k = 0; k < v_.size(); ++k) {
      os << format_double(t_[k]) << "," << format_double(v_[k]) << "\n";
    }
    os << format_double(t_.back()) << "," << format_double(v_.back()) << "\n";
    return os.str();
  }

  static StepFunction from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("t,value", 0) != 0) {
      throw ConfigError("step function csv must start with header t,value");
    }
    std::vector<double> ts, vs;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) {
        throw ConfigError("malformed step function csv row: " + line);
      }
      ts.push_back(std::stod(line.substr(0, comma)));
      vs.push_back(std::stod(line.substr(comma + 1)));
    }
    if (ts.size() < 2) throw ConfigError("step function csv needs >= 2 rows");
    vs.pop_back();  // final row repeats the last value
    return StepFunction(std::move(ts), std::move(vs));
  }

 private:
  std::vector<double> t_;
  std::vector<double> v_;
};

// Alternating +1/-1 indicator over `blocks` equal blocks of [0, T],
// +1 on the first block.
inline StepFunction oscillator(int blocks, double T) {
  if (blocks < 1) throw ConfigError("oscillator needs >= 1 block");
  if (!(T > 0.0)) throw ConfigError("oscillator needs T > 0");
  std::vector<double> ts(static_cast<std::size_t>(blocks) + 1);
  std::vector<double> vs(static_cast<std::size_t>(blocks));
  const double w = T / blocks;
  for (int i = 0; i <= blocks; ++i) ts[static_cast<std::size_t>(i)] = i * w;
  ts.back() = T;
  for (int i = 0; i < blocks; ++i) {
    vs[static_cast<std::size_t>(i)] = (i % 2 == 0) ? 1.0 : -1.0;
  }
  return StepFunction(std::move(ts), std::move(vs));
}

}  // namespace gx
