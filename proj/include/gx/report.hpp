#pragma once

#include <string>

#include <json.hpp>

#include "gx/bundle.hpp"
#include "gx/estimate.hpp"
#include "gx/labs.hpp"
#include "gx/pde.hpp"
#include "gx/step_function.hpp"

namespace gx {

// Report files must be byte-identical across reruns and worker counts:
// keys are emitted in fixed order and nothing time- or host-dependent is
// written (lab runtimes go to stderr, never into files).
using ojson = nlohmann::ordered_json;

inline ojson estimate_json(const UpperEstimate& e) {
  ojson j;
  j["schema_version"] = "1";
  j["functional"] = e.functional;
  j["value"] = e.value;
  j["std_err"] = e.se;
  j["winner"] = e.winner_control;
  ojson fam = ojson::array();
  for (std::size_t c = 0; c < e.controls.size(); ++c) {
    ojson row;
    row["control"] = e.controls[c];
    row["mean"] = e.means[c];
    row["se"] = e.ses[c];
    fam.push_back(row);
  }
  j["family"] = fam;
  j["n_paths"] = e.n_paths;
  j["seed"] = e.seed;
  return j;
}

inline std::string estimate_csv(const UpperEstimate& e) {
  std::string out = "control,mean,se\n";
  for (std::size_t c = 0; c < e.controls.size(); ++c) {
    out += e.controls[c] + "," + format_double(e.means[c]) + "," +
           format_double(e.ses[c]) + "\n";
  }
  return out;
}

inline ojson defect_json(const DefectReport& r) {
  ojson j;
  j["schema_version"] = "1";
  j["functional"] = r.up.functional;
  j["defect"] = r.defect;
  j["std_err"] = r.se;
  j["upper"] = estimate_json(r.up);
  j["upper_of_negation"] = estimate_json(r.up_neg);
  return j;
}

inline ojson eval_json(const LatticeSolution& sol) {
  ojson j;
  j["schema_version"] = "1";
  j["payoff"] = sol.payoff_name;
  j["value"] = sol.value();
  j["T"] = sol.T;
  ojson grid;
  grid["nodes"] = sol.nodes;
  grid["dx"] = sol.dx;
  grid["dt"] = sol.dt;
  grid["n_slices"] = sol.n_slices;
  j["grid"] = grid;
  j["cfl"] = sol.cfl;
  j["boundary_check"] = sol.boundary_check;
  ojson band;
  band["sigma_lo_sq"] = sol.spec.sigma_lo_sq;
  band["sigma_hi_sq"] = sol.spec.sigma_hi_sq;
  j["band"] = band;
  return j;
}

// Final time slice as (t, x, u) rows.
inline std::string lattice_csv(const LatticeSolution& sol) {
  std::string out = "t,x,u\n";
  const Index last = sol.u.rows() - 1;
  const std::string t = format_double(sol.T);
  for (Index jx = 0; jx < sol.nodes; ++jx) {
    out += t + "," + format_double(sol.x_at(jx)) + "," +
           format_double(sol.u(last, jx)) + "\n";
  }
  return out;
}

inline ojson verdict_json(const LabVerdict& v) {
  ojson j;
  j["schema_version"] = "1";
  j["lab"] = v.id;
  j["claim"] = v.claim;
  j["pass"] = v.pass;
  ojson checks = ojson::array();
  for (const auto& c : v.checks) {
    ojson row;
    row["name"] = c.name;
    row["measured"] = c.measured;
    row["se"] = c.se;
    row["bound"] = c.bound;
    row["stat_tol"] = c.stat_tol;
    row["disc_tol"] = c.disc_tol;
    row["pass"] = c.pass;
    if (!c.note.empty()) row["note"] = c.note;
    checks.push_back(row);
  }
  j["checks"] = checks;
  return j;
}

inline std::string verdict_csv(const LabVerdict& v) {
  std::string out;
  for (std::size_t i = 0; i < v.data_columns.size(); ++i) {
    if (i) out += ",";
    out += v.data_columns[i];
  }
  out += "\n";
  for (const auto& row : v.data_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += format_double(row[i]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace gx
