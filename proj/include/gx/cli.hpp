#pragma once

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gx/config.hpp"
#include "gx/control.hpp"
#include "gx/errors.hpp"
#include "gx/estimate.hpp"
#include "gx/io.hpp"
#include "gx/labs.hpp"
#include "gx/pde.hpp"
#include "gx/report.hpp"

namespace gx {

namespace clidetail {

inline VolControl parse_control(const std::string& desc,
                                const RunConfig& cfg) {
  const GSpec spec = cfg.spec();
  if (desc.rfind("const:", 0) == 0) {
    const std::string v = desc.substr(6);
    if (v == "sigma_hi") return VolControl::constant(spec.sigma_hi());
    if (v == "sigma_lo") return VolControl::constant(spec.sigma_lo());
    return VolControl::constant(cfgdetail::parse_real("control", v));
  }
  if (desc.rfind("alt:", 0) == 0) {
    return VolControl::alternating_blocks(
        static_cast<int>(cfgdetail::parse_int("control", desc.substr(4))));
  }
  if (desc == "random") return VolControl::random_adapted();
  if (desc.rfind("pw:", 0) == 0) {
    return VolControl::piecewise(
        StepFunction::from_csv(read_file(desc.substr(3))));
  }
  if (desc.rfind("feedback:", 0) == 0) {
    LatticeParams lp = cfg.lattice();
    lp.store_slices = true;
    auto sol = solve_g_heat_1d(Payoff::parse(desc.substr(9)), cfg.T,
                               cfg.spec(), lp);
    return VolControl::feedback(feedback_control_from_lattice(sol));
  }
  throw ConfigError("unknown control descriptor '" + desc + "'");
}

inline PathFunctional parse_functional(const std::string& desc) {
  if (desc.rfind("payoff:", 0) == 0)
    return terminal_payoff(Payoff::parse(desc.substr(7)));
  if (desc == "qv") return terminal_qv();
  if (desc == "b") return terminal_b();
  throw ConfigError("unknown functional '" + desc + "'");
}

inline std::filesystem::path run_dir(const RunConfig& cfg,
                                     const std::string& tag) {
  return std::filesystem::path(cfg.outdir) / tag / std::to_string(cfg.seed);
}

inline void write_run_files(const RunConfig& cfg, const std::string& tag,
                            const std::string& report_name,
                            const std::string& report_body,
                            const std::string& data_body) {
  const auto dir = run_dir(cfg, tag);
  write_file((dir / report_name).string(), report_body);
  write_file((dir / "data.csv").string(), data_body);
  write_file((dir / "config.effective").string(), cfg.emit());
}

}  // namespace clidetail

// Front door used by both the binary and the tests.  Exit codes: 0 ok,
// 2 config/usage error, 3 numerical guard tripped, 4 lab verdict failed.
inline int run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"numerical laboratory for sublinear expectations"};
  app.require_subcommand(0, 1);

  std::string config_path, outdir, control_desc = "const:sigma_hi";
  std::string payoff_name = "x2", functional_desc = "payoff:x2";
  std::string side = "upper", lab_id, n_csv;
  double T = 0.0, c_knob = 0.0;
  std::uint64_t seed = 0;
  long long paths = 0, steps = 0;
  int jobs = 0;
  bool emit_config = false, binary = false, with_feedback = false;

  auto* opt_config = app.add_option("--config", config_path,
                                    "config file (sectioned key = value)");
  auto* opt_outdir = app.add_option("--outdir", outdir, "output directory");
  auto* opt_seed = app.add_option("--seed", seed, "master seed");
  auto* opt_paths = app.add_option("--paths", paths, "Monte Carlo paths");
  auto* opt_steps = app.add_option("--steps", steps, "time steps");
  auto* opt_T = app.add_option("--T", T, "horizon");
  auto* opt_jobs = app.add_option("--jobs", jobs, "worker threads");
  app.add_flag("--emit-config", emit_config,
               "print the effective config and exit");

  auto* cmd_eval = app.add_subcommand("eval", "lattice value of a payoff");
  cmd_eval->fallthrough();
  cmd_eval->add_option("--payoff", payoff_name, "payoff descriptor");

  auto* cmd_sim = app.add_subcommand("simulate", "emit a path bundle");
  cmd_sim->fallthrough();
  cmd_sim->add_option("--control", control_desc,
                      "const:<v>|const:sigma_hi|const:sigma_lo|alt:<n>|"
                      "random|pw:<csv>|feedback:<payoff>");
  cmd_sim->add_flag("--binary", binary, "also write bundle.bin");

  auto* cmd_est = app.add_subcommand("estimate", "Monte Carlo expectation");
  cmd_est->fallthrough();
  cmd_est->add_option("--functional", functional_desc,
                      "payoff:<name>|qv|b");
  cmd_est->add_option("--side", side, "upper|lower|defect");
  cmd_est->add_flag("--with-feedback", with_feedback,
                    "add the lattice feedback policy to the family");

  auto* cmd_lab = app.add_subcommand("lab", "run a verdict lab");
  cmd_lab->fallthrough();
  cmd_lab->add_option("id", lab_id, "lab id or 'all'")->required();
  cmd_lab->add_option("--n", n_csv, "override the lab's n list");
  auto* opt_c = cmd_lab->add_option("--c", c_knob, "override the lab's c");

  try {
    std::vector<const char*> argv;
    argv.push_back("gx");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (opt_config->count()) cfg = RunConfig::parse(read_file(config_path));
    if (opt_outdir->count()) cfg.outdir = outdir;
    if (opt_seed->count()) cfg.seed = seed;
    if (opt_paths->count()) cfg.n_paths = static_cast<Index>(paths);
    if (opt_steps->count()) cfg.n_steps = static_cast<Index>(steps);
    if (opt_T->count()) cfg.T = T;
    if (opt_jobs->count()) cfg.jobs = jobs;
    cfg.validate();

    if (emit_config) {
      out << cfg.emit();
      return 0;
    }
    if (app.get_subcommands().empty()) {
      err << "nothing to do: give a subcommand or --emit-config\n";
      return 2;
    }

    if (cmd_eval->parsed()) {
      LatticeParams lp = cfg.lattice();
      auto sol = solve_g_heat_1d(Payoff::parse(payoff_name), cfg.T,
                                 cfg.spec(), lp);
      clidetail::write_run_files(cfg, "eval", "report.json",
                                 eval_json(sol).dump(2) + "\n",
                                 lattice_csv(sol));
      out << "value = " << format_double(sol.value()) << "\n";
      return 0;
    }

    if (cmd_sim->parsed()) {
      const VolControl control =
          clidetail::parse_control(control_desc, cfg);
      const PathBundle bundle = simulate_bundle(
          control, cfg.grid(), cfg.n_paths, cfg.seed, cfg.spec(), cfg.jobs);
      const auto dir = clidetail::run_dir(cfg, "simulate");
      write_file((dir / "bundle.csv").string(), bundle_to_csv(bundle));
      if (binary) bundle_write_binary(bundle, dir / "bundle.bin");
      write_file((dir / "config.effective").string(), cfg.emit());
      out << "paths = " << bundle.n_paths()
          << ", control = " << bundle.control << "\n";
      return 0;
    }

    if (cmd_est->parsed()) {
      const PathFunctional f = clidetail::parse_functional(functional_desc);
      auto family = default_family(cfg.spec());
      if (with_feedback) {
        if (functional_desc.rfind("payoff:", 0) != 0)
          throw ConfigError("--with-feedback needs a payoff functional");
        LatticeParams lp = cfg.lattice();
        lp.store_slices = true;
        auto sol = solve_g_heat_1d(Payoff::parse(functional_desc.substr(7)),
                                   cfg.T, cfg.spec(), lp);
        family.push_back(
            VolControl::feedback(feedback_control_from_lattice(sol)));
      }
      const EstimateParams ep{cfg.chunk, cfg.jobs};
      if (side == "defect") {
        auto rep = symmetry_defect(f, family, cfg.grid(), cfg.n_paths,
                                   cfg.seed, cfg.spec(), ep);
        clidetail::write_run_files(cfg, "estimate", "report.json",
                                   defect_json(rep).dump(2) + "\n",
                                   estimate_csv(rep.up));
        out << "defect = " << format_double(rep.defect) << " (se "
            << format_double(rep.se) << ")\n";
        return 0;
      }
      UpperEstimate e;
      if (side == "upper") {
        e = estimate_upper(f, family, cfg.grid(), cfg.n_paths, cfg.seed,
                           cfg.spec(), ep);
      } else if (side == "lower") {
        e = estimate_lower(f, family, cfg.grid(), cfg.n_paths, cfg.seed,
                           cfg.spec(), ep);
      } else {
        throw ConfigError("unknown side '" + side + "'");
      }
      clidetail::write_run_files(cfg, "estimate", "report.json",
                                 estimate_json(e).dump(2) + "\n",
                                 estimate_csv(e));
      out << side << " = " << format_double(e.value) << " (se "
          << format_double(e.se) << "), winner " << e.winner_control
          << "\n";
      return 0;
    }

    if (cmd_lab->parsed()) {
      LabSettings settings = cfg.lab_settings();
      std::vector<std::string> ids;
      if (lab_id == "all") ids = lab_ids();
      else ids.push_back(lab_id);
      if (!n_csv.empty()) {
        const auto ns = cfgdetail::parse_int_list("--n", n_csv);
        settings.thm32_n = ns;
        settings.cor33_n = ns;
        settings.prop35_n = ns;
        settings.delta_n = ns;
      }
      if (opt_c->count()) {
        settings.lemma42_c = c_knob;
        settings.thm44_c = c_knob;
        settings.qv_c = c_knob;
      }
      bool all_pass = true;
      for (const auto& id : ids) {
        const LabVerdict v = run_lab(id, settings);
        all_pass = all_pass && v.pass;
        clidetail::write_run_files(cfg, v.id, "verdict.json",
                                   verdict_json(v).dump(2) + "\n",
                                   verdict_csv(v));
        out << (v.pass ? "[PASS] " : "[FAIL] ") << v.id;
        for (const auto& c : v.checks)
          if (!c.pass) out << "  !" << c.name;
        out << "\n";
        err << v.id << ": " << v.runtime_seconds << " s\n";
      }
      return all_pass ? 0 : 4;
    }

    err << "nothing to do\n";
    return 2;
  } catch (const GuardError& e) {
    err << "guard: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    err << "config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gx
