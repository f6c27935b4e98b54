#pragma once

// Re-reads a run directory and checks the invariant battery.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cagg/calibration.hpp"
#include "cagg/config.hpp"
#include "cagg/field_io.hpp"
#include "cagg/pme.hpp"
#include "cagg/shape.hpp"
#include "cagg/timeseries.hpp"

namespace cagg {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::string study;
  std::vector<Check> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

/// Artifact missing or unreadable.
class artifact_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::filesystem::path need(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw artifact_error("missing artifact: " + p.string());
  return p;
}

inline std::map<std::string, std::string> read_keyvalues(const std::filesystem::path& p) {
  std::ifstream is(need(p));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

/// Trapezoid rule on a sampled series.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& v, double t_max) {
  double s = 0.0;
  for (std::size_t k = 1; k < t.size() && t[k] <= t_max + 1e-12; ++k) s += 0.5 * (v[k] + v[k - 1]) * (t[k] - t[k - 1]);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Individual checks on time series; usable without a run directory.

inline Check check_time_increasing(const std::vector<TimeSeriesRow>& rows) {
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (!(rows[k].t > rows[k - 1].t)) return {"time increasing", false, "row " + std::to_string(k + 1)};
  return {"time increasing", !rows.empty(), std::to_string(rows.size()) + " rows"};
}

inline Check check_mass(const std::vector<TimeSeriesRow>& rows, double rel_tol = 1e-8) {
  double worst = 0.0;
  std::size_t at = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double d = std::fabs(rows[k].mass - rows[0].mass) / std::fabs(rows[0].mass);
    if (!(d <= worst)) worst = d, at = k;
  }
  const bool ok = rows.size() > 0 && worst <= rel_tol;
  return {"mass conservation", ok, "max relative drift " + detail::fmt(worst) + (ok ? "" : " at t = " + detail::fmt(rows[at].t))};
}

/// M2 may rise by at most rel_tol of its value per step.
inline Check check_m2_nonincreasing(const std::vector<TimeSeriesRow>& rows, double rel_tol = 1e-3) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < rows.size(); ++k) worst = std::max(worst, (rows[k].m2 - rows[k - 1].m2) / rows[k - 1].m2);
  return {"M2 non-increasing", worst <= rel_tol, "max relative step increase " + detail::fmt(worst)};
}

inline Check check_f_nonpositive(const std::vector<TimeSeriesRow>& rows, double rel_tol = 1e-3) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows)
    if (!std::isnan(r.f_value)) worst = std::max(worst, r.f_value / (r.mass * r.mass));
  return {"F <= 0", worst <= rel_tol, "max F/|Omega|^2 " + detail::fmt(worst)};
}

/// Support radius about the origin against R(t); R0 defaults to the smallest
/// radius admitted for a patch (height 1, zero pressure bound).
inline Check check_barrier(const std::vector<TimeSeriesRow>& rows, double h, std::optional<double> r0 = std::nullopt) {
  const double R0 = r0 ? *r0 : barrier_initial_radius(rows.front().support_radius, 0.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) worst = std::max(worst, r.support_radius - support_barrier(r.t, R0));
  return {"support inside R(t)", worst <= std::sqrt(2.0) * h, "max radius - R(t) " + detail::fmt(worst)};
}

/// M2(T) - M2(0) <= int_0^T F dt, the right side relaxed by `slack` of its magnitude.
inline Check check_m2_identity(const std::vector<TimeSeriesRow>& rows, double slack = 0.05) {
  std::vector<double> t, f;
  for (const auto& r : rows) t.push_back(r.t), f.push_back(r.f_value);
  const double rhs = detail::trapezoid(t, f, t.back());
  const double lhs = rows.back().m2 - rows.front().m2;
  return {"M2 dissipation identity", lhs <= rhs + slack * std::fabs(rhs),
          "dM2 " + detail::fmt(lhs) + " vs int F " + detail::fmt(rhs)};
}

inline Check check_m2_refined(const std::vector<TimeSeriesRow>& rows, double c0 = calibration::kC0) {
  std::vector<double> t, a3;
  for (const auto& r : rows) t.push_back(r.t), a3.push_back(std::pow(r.asymmetry, 3));
  const double area = rows.front().mass;
  const double rhs = -c0 * area * area * detail::trapezoid(t, a3, t.back());
  const double lhs = rows.back().m2 - rows.front().m2;
  return {"M2 decrease >= c0 |Omega|^2 int A^3", lhs <= rhs, "dM2 " + detail::fmt(lhs) + " vs " + detail::fmt(rhs)};
}

/// For each T: some t0 in (0, T) has A(t0) <= C(Omega0) T^(-1/3).
inline Check check_excursion(const std::vector<TimeSeriesRow>& rows, const std::vector<double>& horizons,
                             double c0 = calibration::kC0) {
  const double c = excursion_constant(rows.front().mass, rows.front().m2, c0);
  std::string text;
  bool ok = true;
  int tested = 0;
  for (double T : horizons) {
    if (T > rows.back().t + 1e-9) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : rows)
      if (r.t > 0.0 && r.t < T) best = std::min(best, r.asymmetry);
    const double bound = c * std::pow(T, -1.0 / 3.0);
    ok = ok && best <= bound;
    ++tested;
    text += "T=" + detail::fmt(T) + ": " + detail::fmt(best) + " <= " + detail::fmt(bound) + "  ";
  }
  return {"asymmetry excursion bound", ok && tested > 0, text.empty() ? "no horizon within the run" : text};
}

/// gap(t) <= C1 t^(-1/6) on [t_min, end], gap = E(chi_Omega) - E(chi_B).
inline Check check_gap_rate(const std::vector<double>& t, const std::vector<double>& gap, double area0, double m2_0,
                            double t_min = 1.0) {
  const double c1 = rate_constant(area0, m2_0);
  double worst = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= t_min) worst = std::max(worst, gap[k] * std::pow(t[k], 1.0 / 6.0) / c1);
  return {"energy gap <= C1 t^(-1/6)", worst <= 1.0, "max gap t^(1/6) / C1 " + detail::fmt(worst)};
}

inline Check check_strictly_decreasing(const std::string& name, const std::vector<double>& v) {
  std::string s;
  bool ok = v.size() >= 2;
  for (std::size_t k = 0; k < v.size(); ++k) {
    s += (k ? " > " : "") + detail::fmt(v[k]);
    if (k && !(v[k] < v[k - 1])) ok = false;
  }
  return {name, ok, s};
}

// ---------------------------------------------------------------------------

inline VerifyReport verify_run(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw artifact_error("not a directory: " + dir.string());
  const auto run = detail::read_keyvalues(dir / "run.txt");
  const auto cfg = load_config(detail::need(dir / "config.toml").string());
  VerifyReport rep;
  rep.study = run.count("study") ? run.at("study") : "";
  const auto study = parse_study(rep.study);
  if (!study) throw artifact_error("run.txt: unknown study '" + rep.study + "'");
  auto& out = rep.checks;

  out.push_back({"config hash", run.count("config_sha1") && run.at("config_sha1") == config_hash(cfg),
                 "config.toml against run.txt"});

  const auto rows = read_timeseries(detail::need(dir / "timeseries.csv").string());
  out.push_back(check_time_increasing(rows));
  if (rows.empty()) return rep;
  out.push_back(check_mass(rows));

  const bool patch = *study == Study::heleshaw || *study == Study::longtime || *study == Study::diag;
  const bool e_inf_flow = patch || (*study == Study::jko && (cfg.drift == "constrained" || cfg.drift == "self_consistent"));
  if (e_inf_flow) out.push_back(check_m2_nonincreasing(rows));
  if (patch) out.push_back(check_f_nonpositive(rows));
  if (*study != Study::diag && *study != Study::pme) out.push_back(check_barrier(rows, cfg.h));

  if (*study == Study::heleshaw || *study == Study::longtime || *study == Study::msweep) {
    const auto hs = read_table(detail::need(dir / "heleshaw.csv").string());
    if (*study == Study::heleshaw && cfg.shape_kind == "disk") {
      const auto v = hs.values("max_speed");
      const double vmax = *std::max_element(v.begin(), v.end());
      out.push_back({"disk boundary speed < 5h", vmax < 5.0 * cfg.h, "max |V| " + detail::fmt(vmax)});
      double amax = 0.0;
      for (const auto& r : rows) amax = std::max(amax, r.asymmetry);
      out.push_back({"disk asymmetry < 0.02", amax < 0.02, "max A " + detail::fmt(amax)});
    }
    if (*study == Study::longtime) {
      out.push_back(check_m2_identity(rows));
      out.push_back(check_m2_refined(rows));
      out.push_back(check_excursion(rows, {2.0, 5.0, 10.0}));
      if (rows.back().t >= 1.0) out.push_back(check_gap_rate(hs.values("t"), hs.values("energy_gap"), rows[0].mass, rows[0].m2));
    }
  }
  if (*study == Study::msweep) {
    const auto t = read_table(detail::need(dir / "msweep.csv").string());
    out.push_back(check_strictly_decreasing("L1 gap decreasing in m", t.values("l1_gap")));
    const auto hmax = t.values("max_height"), hb = t.values("height_bound");
    const auto ex = t.values("max_excess_mass"), eb = t.values("excess_bound");
    const auto rx = t.values("max_radius_excess");
    bool h_ok = true, e_ok = true, r_ok = true;
    for (std::size_t k = 0; k < hmax.size(); ++k) {
      h_ok = h_ok && hmax[k] <= hb[k];
      e_ok = e_ok && ex[k] <= 2.0 * eb[k];
      r_ok = r_ok && rx[k] <= std::sqrt(2.0) * cfg.h;
    }
    out.push_back({"height <= 1 + 5/(m-1)", h_ok, "every m"});
    out.push_back({"excess mass <= 2 sqrt((2 + C_d^2)/m)", e_ok, "every m"});
    out.push_back({"pme support inside R(t)", r_ok, "every m, every step"});
  }
  if (*study == Study::pme) {
    const auto t = read_table(detail::need(dir / "pme.csv").string());
    const auto mx = t.values("max_rho"), hb = t.values("height_bound");
    const auto rad = t.values("support_radius"), bar = t.values("barrier");
    bool ok = true;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < mx.size(); ++k) {
      ok = ok && mx[k] <= hb[k];
      worst = std::max(worst, rad[k] - bar[k]);
    }
    out.push_back({"support inside R(t)", worst <= std::sqrt(2.0) * cfg.h, "max radius - R(t) " + detail::fmt(worst)});
    if (cfg.drift != "zero") out.push_back({"height <= 1 + 5/(m-1)", ok, "max rho " + detail::fmt(*std::max_element(mx.begin(), mx.end()))});
  }
  if (*study == Study::jko) {
    const auto t = read_table(detail::need(dir / "jko.csv").string());
    const auto obj = t.values("objective"), ein = t.values("energy_in"), sl = t.values("slack");
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < obj.size(); ++k) worst = std::max(worst, obj[k] - ein[k] - sl[k]);
    out.push_back({"objective <= E(rho_in) + slack", worst <= 1e-9, "max excess " + detail::fmt(worst)});
  }

  {
    const auto p = dir / "fields" / (*study == Study::diag ? "pressure.field" : "final.field");
    std::ifstream is(detail::need(p), std::ios::binary);
    const auto f = read_field(is);
    out.push_back({"field dump readable", f.all_finite(), p.filename().string()});
  }
  return rep;
}

inline std::string format_report(const VerifyReport& rep) {
  std::string s;
  for (const auto& c : rep.checks) s += std::string(c.pass ? "PASS " : "FAIL ") + c.name + ": " + c.detail + "\n";
  return s;
}

}  // namespace cagg
