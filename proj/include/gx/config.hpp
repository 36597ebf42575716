#pragma once

#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gx/errors.hpp"
#include "gx/grid.hpp"
#include "gx/gspec.hpp"
#include "gx/labs.hpp"
#include "gx/pde.hpp"
#include "gx/step_function.hpp"
#include "gx/types.hpp"

namespace gx {

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_real(const std::string& key, const std::string& val) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(val, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + val + "'");
  }
  if (used != val.size())
    throw ConfigError("bad number for " + key + ": '" + val + "'");
  return x;
}

inline long long parse_int(const std::string& key, const std::string& val) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(val, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + val + "'");
  }
  if (used != val.size())
    throw ConfigError("bad integer for " + key + ": '" + val + "'");
  return x;
}

inline std::uint64_t parse_u64(const std::string& key,
                               const std::string& val) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(val, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad seed for " + key + ": '" + val + "'");
  }
  if (used != val.size())
    throw ConfigError("bad seed for " + key + ": '" + val + "'");
  return static_cast<std::uint64_t>(x);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline std::vector<int> parse_int_list(const std::string& key,
                                       const std::string& val) {
  std::vector<int> out;
  for (const auto& tok : split(val, ','))
    out.push_back(static_cast<int>(parse_int(key, tok)));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs,
                 const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

}  // namespace cfgdetail

// Flat sectioned key=value file.  Unknown sections and keys are rejected so
// typos cannot silently revert to defaults; emit() is canonical and
// re-parses to an identical config.
struct RunConfig {
  double sigma_lo_sq = 1.0;
  double sigma_hi_sq = 2.0;
  double T = 1.0;
  Index n_steps = 256;
  Index n_paths = 20000;
  std::uint64_t seed = 20250817;
  Index chunk = 4096;
  Index pde_nodes = 400;
  double pde_width_mult = 6.0;
  double pde_tolerance = 1e-3;
  double pde_cfl_safety = 0.9;
  Index hjb_b_nodes = 161;
  Index hjb_q_nodes = 81;
  double hjb_q_pad = 1.0;
  int semigroup_cap = 3;
  int jobs = 1;
  std::string outdir = "out";
  int windows = 4;
  std::vector<int> thm32_n{10};
  std::vector<int> cor33_n{2, 5, 10, 20};
  std::vector<int> prop35_n{8};
  std::vector<int> delta_n{1, 2, 4, 8, 16};
  double lemma42_c = 1.0;
  double thm44_c = 1.0;
  double qv_c = 4.0;
  std::vector<std::pair<double, double>> gnormal_ab{
      {1.0, 0.0}, {1.0, 1.0}, {2.0, 0.0}, {3.0, 4.0}};
  std::vector<std::string> gnormal_payoffs{"x2", "abs", "x4"};

  GSpec spec() const { return GSpec(sigma_lo_sq, sigma_hi_sq); }
  TimeGrid grid() const { return TimeGrid(T, n_steps); }

  LatticeParams lattice() const {
    LatticeParams p;
    p.nodes = pde_nodes;
    p.width_mult = pde_width_mult;
    p.tolerance = pde_tolerance;
    p.cfl_safety = pde_cfl_safety;
    return p;
  }

  Lattice2Params lattice2() const {
    Lattice2Params p;
    p.b_nodes = hjb_b_nodes;
    p.q_nodes = hjb_q_nodes;
    p.width_mult = pde_width_mult;
    p.q_pad = hjb_q_pad;
    p.cfl_safety = pde_cfl_safety;
    p.tolerance = pde_tolerance;
    return p;
  }

  LabSettings lab_settings() const {
    LabSettings s;
    s.spec = spec();
    s.T = T;
    s.n_paths = n_paths;
    s.seed = seed;
    s.jobs = jobs;
    s.chunk = chunk;
    s.windows = windows;
    s.thm32_n = thm32_n;
    s.cor33_n = cor33_n;
    s.prop35_n = prop35_n;
    s.delta_n = delta_n;
    s.lemma42_c = lemma42_c;
    s.thm44_c = thm44_c;
    s.qv_c = qv_c;
    s.gnormal_ab = gnormal_ab;
    s.gnormal_payoffs = gnormal_payoffs;
    s.lattice = lattice();
    return s;
  }

  void validate() const {
    (void)spec();
    (void)grid();
    if (n_paths < 2) throw ConfigError("mc.n_paths must be >= 2");
    if (chunk < 1) throw ConfigError("mc.chunk must be >= 1");
    if (jobs < 1 || jobs > 256)
      throw ConfigError("run.jobs must be in [1, 256]");
    if (windows < 2) throw ConfigError("lab.windows must be >= 2");
    if (pde_nodes < 16) throw ConfigError("pde.nodes must be >= 16");
    if (semigroup_cap < 1 || semigroup_cap > 4)
      throw ConfigError("pde.semigroup_cap must be in [1, 4]");
    if (outdir.empty()) throw ConfigError("run.outdir must be nonempty");
  }

  static RunConfig parse(const std::string& text) {
    using namespace cfgdetail;
    RunConfig c;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError("unterminated section at line " +
                            std::to_string(lineno));
        section = trim(t.substr(1, t.size() - 2));
        if (section != "spec" && section != "grid" && section != "mc" &&
            section != "pde" && section != "run" && section != "lab")
          throw ConfigError("unknown section [" + section + "]");
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected key = value at line " +
                          std::to_string(lineno));
      const std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      const std::string qual = section + "." + key;
      if (qual == "spec.sigma_lo_sq") c.sigma_lo_sq = parse_real(qual, val);
      else if (qual == "spec.sigma_hi_sq")
        c.sigma_hi_sq = parse_real(qual, val);
      else if (qual == "grid.T") c.T = parse_real(qual, val);
      else if (qual == "grid.n_steps")
        c.n_steps = static_cast<Index>(parse_int(qual, val));
      else if (qual == "mc.n_paths")
        c.n_paths = static_cast<Index>(parse_int(qual, val));
      else if (qual == "mc.seed") c.seed = parse_u64(qual, val);
      else if (qual == "mc.chunk")
        c.chunk = static_cast<Index>(parse_int(qual, val));
      else if (qual == "pde.nodes")
        c.pde_nodes = static_cast<Index>(parse_int(qual, val));
      else if (qual == "pde.width_mult")
        c.pde_width_mult = parse_real(qual, val);
      else if (qual == "pde.tolerance")
        c.pde_tolerance = parse_real(qual, val);
      else if (qual == "pde.cfl_safety")
        c.pde_cfl_safety = parse_real(qual, val);
      else if (qual == "pde.b_nodes")
        c.hjb_b_nodes = static_cast<Index>(parse_int(qual, val));
      else if (qual == "pde.q_nodes")
        c.hjb_q_nodes = static_cast<Index>(parse_int(qual, val));
      else if (qual == "pde.q_pad") c.hjb_q_pad = parse_real(qual, val);
      else if (qual == "pde.semigroup_cap")
        c.semigroup_cap = static_cast<int>(parse_int(qual, val));
      else if (qual == "run.jobs")
        c.jobs = static_cast<int>(parse_int(qual, val));
      else if (qual == "run.outdir") c.outdir = val;
      else if (qual == "lab.windows")
        c.windows = static_cast<int>(parse_int(qual, val));
      else if (qual == "lab.thm32_n") c.thm32_n = parse_int_list(qual, val);
      else if (qual == "lab.cor33_n") c.cor33_n = parse_int_list(qual, val);
      else if (qual == "lab.prop35_n")
        c.prop35_n = parse_int_list(qual, val);
      else if (qual == "lab.delta_n") c.delta_n = parse_int_list(qual, val);
      else if (qual == "lab.lemma42_c")
        c.lemma42_c = parse_real(qual, val);
      else if (qual == "lab.thm44_c") c.thm44_c = parse_real(qual, val);
      else if (qual == "lab.qv_c") c.qv_c = parse_real(qual, val);
      else if (qual == "lab.gnormal_ab") {
        c.gnormal_ab.clear();
        for (const auto& tok : split(val, ',')) {
          const auto col = tok.find(':');
          if (col == std::string::npos)
            throw ConfigError("gnormal_ab wants a:b pairs, got '" + tok +
                              "'");
          c.gnormal_ab.emplace_back(
              parse_real(qual, trim(tok.substr(0, col))),
              parse_real(qual, trim(tok.substr(col + 1))));
        }
        if (c.gnormal_ab.empty())
          throw ConfigError("empty list for " + qual);
      } else if (qual == "lab.gnormal_payoffs") {
        c.gnormal_payoffs = split(val, ',');
        if (c.gnormal_payoffs.empty())
          throw ConfigError("empty list for " + qual);
      } else {
        throw ConfigError("unknown config key '" + qual + "'");
      }
    }
    c.validate();
    return c;
  }

  std::string emit() const {
    using namespace cfgdetail;
    std::ostringstream os;
    os << "[spec]\n";
    os << "sigma_lo_sq = " << format_double(sigma_lo_sq) << "\n";
    os << "sigma_hi_sq = " << format_double(sigma_hi_sq) << "\n";
    os << "\n[grid]\n";
    os << "T = " << format_double(T) << "\n";
    os << "n_steps = " << n_steps << "\n";
    os << "\n[mc]\n";
    os << "n_paths = " << n_paths << "\n";
    os << "seed = " << seed << "\n";
    os << "chunk = " << chunk << "\n";
    os << "\n[pde]\n";
    os << "nodes = " << pde_nodes << "\n";
    os << "width_mult = " << format_double(pde_width_mult) << "\n";
    os << "tolerance = " << format_double(pde_tolerance) << "\n";
    os << "cfl_safety = " << format_double(pde_cfl_safety) << "\n";
    os << "b_nodes = " << hjb_b_nodes << "\n";
    os << "q_nodes = " << hjb_q_nodes << "\n";
    os << "q_pad = " << format_double(hjb_q_pad) << "\n";
    os << "semigroup_cap = " << semigroup_cap << "\n";
    os << "\n[run]\n";
    os << "jobs = " << jobs << "\n";
    os << "outdir = " << outdir << "\n";
    os << "\n[lab]\n";
    os << "windows = " << windows << "\n";
    std::function<std::string(const int&)> fi = [](const int& x) {
      return std::to_string(x);
    };
    os << "thm32_n = " << join(thm32_n, fi) << "\n";
    os << "cor33_n = " << join(cor33_n, fi) << "\n";
    os << "prop35_n = " << join(prop35_n, fi) << "\n";
    os << "delta_n = " << join(delta_n, fi) << "\n";
    os << "lemma42_c = " << format_double(lemma42_c) << "\n";
    os << "thm44_c = " << format_double(thm44_c) << "\n";
    os << "qv_c = " << format_double(qv_c) << "\n";
    std::function<std::string(const std::pair<double, double>&)> fp =
        [](const std::pair<double, double>& ab) {
          return format_double(ab.first) + ":" + format_double(ab.second);
        };
    os << "gnormal_ab = " << join(gnormal_ab, fp) << "\n";
    std::function<std::string(const std::string&)> fs =
        [](const std::string& x) { return x; };
    os << "gnormal_payoffs = " << join(gnormal_payoffs, fs) << "\n";
    return os.str();
  }
};

}  // namespace gx
