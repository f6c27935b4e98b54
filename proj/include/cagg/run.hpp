#pragma once

// Studies behind the `cagg` subcommands. Each writes into cfg.out_dir:
//   config.toml      the configuration file, byte for byte
//   run.txt          study, git blob id of config.toml, thread cap, seed
//   timeseries.csv   see dump_schema()
//   <study>.csv      study-specific table
//   fields/*.field   CAGG-FIELD v1 dumps
// config.toml and run.txt are written before any computation starts.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cagg/config.hpp"
#include "cagg/error.hpp"
#include "cagg/field_io.hpp"
#include "cagg/grid.hpp"
#include "cagg/heleshaw.hpp"
#include "cagg/jko.hpp"
#include "cagg/newtonian.hpp"
#include "cagg/pme.hpp"
#include "cagg/shape.hpp"
#include "cagg/sinkhorn.hpp"
#include "cagg/timeseries.hpp"

namespace cagg {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitSolver = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitVerify = 3;

/// CAGG_THREADS: unset means 1; otherwise a positive integer. Everything runs on
/// one thread, so the value only caps and is recorded.
inline int thread_cap() {
  const char* s = std::getenv("CAGG_THREADS");
  if (!s || !*s) return 1;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096)
    throw config_error(std::string("CAGG_THREADS must be a positive integer, got '") + s + "'");
  return static_cast<int>(v);
}

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
  if (!os) throw std::runtime_error("cannot write " + p.string());
}

inline fs::path prepare_run_dir(const RunConfig& cfg, Study study, int threads) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir / "fields");
  write_text(dir / "config.toml", cfg.text);
  write_text(dir / "run.txt", std::string("study = ") + to_string(study) + "\nconfig_sha1 = " + config_hash(cfg) +
                                  "\nthreads = " + std::to_string(threads) + "\nseed = " + std::to_string(cfg.seed) +
                                  "\n");
  return dir;
}

inline std::string field_name(const std::string& stem, long k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06ld.field", stem.c_str(), k);
  return buf;
}

// ---------------------------------------------------------------------------
// Row builders.

inline double renyi_entropy(const ScalarField& rho, double m) {
  double s = 0.0;
  for (double v : rho.values()) s += v > 0.0 ? std::pow(v, m) : 0.0;
  return s * rho.grid().cell_area() / (m - 1.0);
}

/// mass, moments, energies, radius and excess mass of a density. E_inf is +inf
/// above height 1; e_m is written only when m is given.
inline TimeSeriesRow density_row(double t, const ScalarField& rho, std::optional<double> m = std::nullopt) {
  TimeSeriesRow r;
  r.t = t;
  r.mass = mass(rho);
  r.m2 = second_moment(rho);
  const auto c = center_of_mass(rho);
  r.com_x = c[0], r.com_y = c[1];
  const double w = interaction_energy(rho);
  r.e_inf = rho.max() > 1.0 + kHeightTol ? std::numeric_limits<double>::infinity() : w;
  if (m) r.e_m = w + renyi_entropy(rho, *m);
  r.support_radius = support_radius(rho, {0.0, 0.0}, kSupportThreshold * rho.max());
  r.excess_mass = excess_mass(rho);
  return r;
}

inline TimeSeriesRow patch_row(const HeleShawSolver& s) {
  const auto rec = s.record();
  const auto rho = s.mask().density();
  TimeSeriesRow r;
  r.t = rec.t;
  r.mass = rec.area;
  r.m2 = rec.m2;
  r.com_x = rec.com[0], r.com_y = rec.com[1];
  r.e_inf = interaction_energy(rho);
  r.asymmetry = fraenkel_asymmetry(s.mask()).asymmetry;
  r.f_value = rec.f_value;
  r.support_radius = support_radius(rho);
  r.excess_mass = excess_mass(rho);
  return r;
}

// ---------------------------------------------------------------------------

using Log = std::function<void(const std::string&)>;

/// Returns the final patch.
inline PatchMask heleshaw_study(const RunConfig& cfg, const fs::path& dir, const Log& log) {
  HeleShawSolver solver(initial_level_set(cfg));
  TimeSeriesWriter ts((dir / "timeseries.csv").string());
  CsvWriter diag((dir / "heleshaw.csv").string(),
                 {"t", "area", "max_speed", "pressure_integral", "energy_gap", "gap_bound"});
  CsvWriter snaps((dir / "snapshots.csv").string(), {"index", "t"});
  const double disk_energy = disk_interaction_energy(std::sqrt(solver.initial_area() / kPi));
  double next_snapshot = 0.0;
  long snapshot = 0;
  auto record = [&] {
    const auto row = patch_row(solver);
    ts.write(row);
    const auto rec = solver.record();
    const auto gap = energy_gap(solver.mask(), row.asymmetry);
    diag.write({rec.t, rec.area, rec.max_speed, rec.pressure_integral, row.e_inf - disk_energy, gap.bound});
    if (cfg.dump_every > 0 && solver.steps() % cfg.dump_every == 0)
      write_field((dir / "fields" / field_name("phi", solver.steps())).string(), solver.level_set().as_field());
    if (cfg.snapshot_dt > 0.0 && solver.time() >= next_snapshot - 1e-12) {
      write_field((dir / "fields" / field_name("snapshot", snapshot)).string(), solver.level_set().as_field());
      snaps.write({static_cast<double>(snapshot++), solver.time()});
      next_snapshot += cfg.snapshot_dt;
    }
  };
  record();
  double next_log = 0.0;
  while (solver.time() < cfg.t_end - 1e-12) {
    double limit = cfg.t_end - solver.time();
    if (cfg.snapshot_dt > 0.0) limit = std::min(limit, std::max(next_snapshot - solver.time(), 1e-9));
    solver.step(limit);
    record();
    if (solver.time() >= next_log) {
      log("t = " + std::to_string(solver.time()) + "  steps = " + std::to_string(solver.steps()));
      next_log += cfg.t_end / 10.0;
    }
  }
  write_field((dir / "fields" / "final.field").string(), solver.level_set().as_field());
  return solver.mask();
}

inline ScalarField pme_initial_density(const RunConfig& cfg, double m) {
  const auto mask = patch_mask(initial_level_set(cfg));
  if (cfg.initial == "patch") return mask.density();
  const auto kind = cfg.initial == "lemma" ? PressureInitialData::lemma : PressureInitialData::consistent;
  return initial_density(initial_pressure(mask).p, m, kind);
}

inline DriftSource pme_drift(const RunConfig& cfg) {
  if (cfg.drift == "zero") return zero_drift(cfg.grid);
  if (cfg.drift == "self_consistent") return self_consistent_drift();
  throw config_error("solver.drift: pme needs self_consistent or zero", detail::locate(cfg.text, "solver", "drift"));
}

struct PMESummary {
  ScalarField final_density;
  double max_height = 0.0;
  double max_excess = 0.0;
  double max_radius_excess = -std::numeric_limits<double>::infinity();  // max of radius - R(t)
  long steps = 0;
};

/// PME run with per-step height, excess mass and barrier tracking; rows every record_dt.
inline PMESummary pme_run(const RunConfig& cfg, double m, const ScalarField& rho0, TimeSeriesWriter* ts,
                          CsvWriter* diag, const fs::path& field_dir, double record_dt) {
  PMEConfig pc;
  pc.m = m;
  pc.t_end = cfg.t_end;
  pc.drift_mode = cfg.drift == "zero" ? DriftMode::external : DriftMode::self_consistent;
  PMESummary out;
  const double r0 = barrier_initial_radius(support_radius(rho0, {0.0, 0.0}, kSupportThreshold * rho0.max()),
                                          pressure(rho0, m).p.max());
  long recorded = 0;
  auto track = [&](const PMESolver& s) {
    const auto& rho = s.density();
    const double mx = rho.max();
    const double radius = support_radius(rho, {0.0, 0.0}, kSupportThreshold * mx);
    const double barrier = support_barrier(s.time(), r0);
    out.max_height = std::max(out.max_height, mx);
    out.max_excess = std::max(out.max_excess, excess_mass(rho));
    out.max_radius_excess = std::max(out.max_radius_excess, radius - barrier);
    return std::pair{radius, barrier};
  };
  auto recorder = [&](const PMESolver& s) {
    const auto [radius, barrier] = track(s);
    if (ts) ts->write(density_row(s.time(), s.density(), m));
    if (diag)
      diag->write({s.time(), s.density().max(), height_bound(m), radius, barrier, excess_mass(s.density()),
                   excess_mass_bound(m)});
    if (!field_dir.empty() && cfg.dump_every > 0 && recorded % cfg.dump_every == 0)
      write_field((field_dir / field_name("rho", recorded)).string(), s.density());
    ++recorded;
  };
  PMESolver solver(rho0, pc, pme_drift(cfg));
  recorder(solver);
  double next = record_dt;
  while (solver.time() < cfg.t_end - 1e-14 * std::max(1.0, cfg.t_end)) {
    solver.advance(std::min(next, cfg.t_end));
    const bool at_end = solver.time() >= cfg.t_end - 1e-14 * std::max(1.0, cfg.t_end);
    if (solver.time() >= next - 1e-14 || at_end) {
      recorder(solver);
      while (next <= solver.time() + 1e-14) next += record_dt;
    } else {
      track(solver);
    }
  }
  out.final_density = solver.density();
  out.steps = solver.steps();
  return out;
}

inline double default_record_dt(const RunConfig& cfg) {
  return cfg.snapshot_dt > 0.0 ? cfg.snapshot_dt : cfg.t_end / 100.0;
}

inline void pme_study(const RunConfig& cfg, const fs::path& dir, const Log& log) {
  TimeSeriesWriter ts((dir / "timeseries.csv").string());
  CsvWriter diag((dir / "pme.csv").string(),
                 {"t", "max_rho", "height_bound", "support_radius", "barrier", "excess_mass", "excess_bound"});
  const auto rho0 = pme_initial_density(cfg, cfg.m);
  const auto s = pme_run(cfg, cfg.m, rho0, &ts, &diag, dir / "fields", default_record_dt(cfg));
  write_field((dir / "fields" / "final.field").string(), s.final_density);
  log("pme m = " + detail::format_double(cfg.m) + " done in " + std::to_string(s.steps) + " steps");
}

/// Study-specific config checks that need no computation; run before any artifact is written.
inline void check_study_config(Study study, const RunConfig& cfg) {
  if (study == Study::jko) {
    if (cfg.drift != "constrained" && cfg.drift != "self_consistent" && cfg.drift != "frozen" && cfg.drift != "power")
      throw config_error("solver.drift: jko needs constrained, frozen or power", detail::locate(cfg.text, "solver", "drift"));
    if (std::lround(cfg.t_end / cfg.tau) < 1)
      throw config_error("solver.t_end: shorter than one step", detail::locate(cfg.text, "solver", "t_end"));
  }
  if ((study == Study::pme || study == Study::msweep) && cfg.drift != "self_consistent" && cfg.drift != "zero")
    throw config_error("solver.drift: pme needs self_consistent or zero", detail::locate(cfg.text, "solver", "drift"));
}

inline void jko_study(const RunConfig& cfg, const fs::path& dir, const Log& log) {
  check_study_config(Study::jko, cfg);
  const auto rho0 = patch_mask(initial_level_set(cfg)).density();
  FlowSchedule sched;
  std::optional<double> m;
  if (cfg.drift == "constrained" || cfg.drift == "self_consistent") {
    sched.mode = FlowMode::constrained_interaction;
  } else if (cfg.drift == "frozen") {
    sched.mode = FlowMode::frozen_potential;
    sched.frozen_mu = rho0;
  } else if (cfg.drift == "power") {
    sched.mode = FlowMode::power_entropy_time_varying;
    sched.m = cfg.m;
    m = cfg.m;
  }
  const int n = static_cast<int>(std::lround(cfg.t_end / cfg.tau));
  JKOOptions opt;
  opt.eps_cells = cfg.eps;

  TimeSeriesWriter ts((dir / "timeseries.csv").string());
  CsvWriter steps((dir / "jko.csv").string(), {"step", "t", "objective", "energy_in", "energy_out", "transport_cost",
                                               "slack", "violation", "iterations", "outer_iterations"});
  ts.write(density_row(0.0, rho0, m));
  ScalarField prev = rho0;
  run_flow(rho0, cfg.tau, n, sched, opt, [&](int i, const ScalarField& rho, const JKOStep& s) {
    auto row = density_row(i * cfg.tau, rho, m);
    row.w2_to_prev = w2_estimate_mass(prev, rho);
    ts.write(row);
    steps.write({double(i), i * cfg.tau, s.objective, s.energy_in, s.energy_out, s.transport_cost, s.slack,
                 s.violation, double(s.iterations), double(s.outer_iterations)});
    if (cfg.dump_every > 0 && i % cfg.dump_every == 0)
      write_field((dir / "fields" / field_name("rho", i)).string(), rho);
    log("step " + std::to_string(i) + "/" + std::to_string(n) + "  objective " + detail::format_double(s.objective));
    prev = rho;
  });
  write_field((dir / "fields" / "final.field").string(), prev);
}

/// PME at each m against one Hele-Shaw reference at t_end.
inline void msweep_study(const RunConfig& cfg, const std::vector<double>& ms, const fs::path& dir, const Log& log) {
  const auto ref = heleshaw_study(cfg, dir, log);
  const auto chi = ref.density();
  write_field((dir / "fields" / "reference.field").string(), chi);
  CsvWriter table((dir / "msweep.csv").string(), {"m", "l1_gap", "max_height", "height_bound", "max_excess_mass",
                                                  "excess_bound", "max_radius_excess", "steps"});
  for (double m : ms) {
    const auto rho0 = pme_initial_density(cfg, m);
    const auto s = pme_run(cfg, m, rho0, nullptr, nullptr, {}, default_record_dt(cfg));
    const double gap = lp_distance(s.final_density, chi, 1.0);
    table.write({m, gap, s.max_height, height_bound(m), s.max_excess, excess_mass_bound(m), s.max_radius_excess,
                 double(s.steps)});
    write_field((dir / "fields" / ("rho_m" + std::to_string(std::lround(m)) + ".field")).string(), s.final_density);
    log("m = " + detail::format_double(m) + "  L1 gap " + detail::format_double(gap));
  }
}

inline void diag_study(const RunConfig& cfg, const fs::path& dir, const Log& log) {
  const auto ls = initial_level_set(cfg);
  const auto mask = patch_mask(ls);
  const auto p = solve_pressure(ls).p;
  const auto rep = shape_report(ls, p);
  const auto iso = quantitative_isoperimetric_check(mask);
  const auto gap = energy_gap(mask, rep.asymmetry);
  const auto tal = talenti_profile(ls, p);
  TimeSeriesWriter ts((dir / "timeseries.csv").string());
  auto row = density_row(0.0, mask.density());
  row.asymmetry = rep.asymmetry;
  row.f_value = rep.f_value;
  ts.write(row);
  CsvWriter out((dir / "diag.csv").string(),
                {"area", "perimeter", "asymmetry", "f_value", "m2", "energy_gap", "gap_bound", "isoperimetric_ratio",
                 "implied_c", "pressure_integral", "disk_pressure_integral", "max_bulk_slope"});
  out.write({rep.area, rep.perimeter, rep.asymmetry, rep.f_value, rep.m2, gap.gap, gap.bound, iso.ratio, iso.implied_c,
             mass(p), rep.area * rep.area / (8.0 * kPi), tal.max_bulk_slope});
  write_field((dir / "fields" / "pressure.field").string(), p);
  log("F = " + detail::format_double(rep.f_value) + "  A = " + detail::format_double(rep.asymmetry));
}

inline void run_study(Study study, const RunConfig& cfg, const fs::path& dir, const Log& log,
                      const std::vector<double>& m_override = {}) {
  switch (study) {
    case Study::heleshaw:
    case Study::longtime: heleshaw_study(cfg, dir, log); break;
    case Study::pme: pme_study(cfg, dir, log); break;
    case Study::jko: jko_study(cfg, dir, log); break;
    case Study::msweep: msweep_study(cfg, m_override.empty() ? cfg.m_list : m_override, dir, log); break;
    case Study::diag: diag_study(cfg, dir, log); break;
  }
}

}  // namespace cagg
