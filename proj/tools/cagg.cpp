// cagg: config-driven runner for the patch, porous-medium and JKO studies.
//
//   cagg <study> --config FILE [--out DIR] [--m 8,16,32,64] [--quiet]
//   cagg verify DIR
//   cagg schema
//
// Exit codes: 0 ok, 1 solver failure, 2 config error, 3 verification failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cagg/config.hpp"
#include "cagg/run.hpp"
#include "cagg/timeseries.hpp"
#include "cagg/verify.hpp"

namespace {

int run_study(cagg::Study study, const std::string& config_path, const std::string& out_override,
              const std::vector<double>& ms, bool quiet) {
  cagg::RunConfig cfg;
  int threads = 1;
  try {
    threads = cagg::thread_cap();
    cfg = cagg::load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    for (double m : ms)
      if (!(m > 1.0)) throw cagg::config_error("--m: every m must exceed 1");
    cagg::check_study_config(study, cfg);
    if (cfg.shape_kind == "level_set_file") cagg::initial_level_set(cfg);
  } catch (const cagg::config_error& e) {
    std::fprintf(stderr, "%s: %s\n", config_path.c_str(), e.what());
    return cagg::kExitConfig;
  } catch (const cagg::domain_error& e) {
    std::fprintf(stderr, "%s: %s\n", config_path.c_str(), e.what());
    return cagg::kExitConfig;
  }

  const auto dir = cagg::prepare_run_dir(cfg, study, threads);
  const cagg::Log log = [&](const std::string& s) {
    if (!quiet) std::fprintf(stderr, "[%s] %s\n", cagg::to_string(study), s.c_str());
  };
  try {
    cagg::run_study(study, cfg, dir, log, ms);
  } catch (const cagg::config_error& e) {
    std::fprintf(stderr, "%s: %s\n", config_path.c_str(), e.what());
    return cagg::kExitConfig;
  } catch (const cagg::solver_error& e) {
    std::fprintf(stderr, "%s failed: %s (residual %g)\n", cagg::to_string(study), e.what(), e.residual());
    return cagg::kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s failed: %s\n", cagg::to_string(study), e.what());
    return cagg::kExitSolver;
  }
  std::printf("%s\n", dir.string().c_str());
  return cagg::kExitOk;
}

int run_verify(const std::string& dir) {
  try {
    const auto rep = cagg::verify_run(dir);
    std::fputs(cagg::format_report(rep).c_str(), stdout);
    return rep.ok() ? cagg::kExitOk : cagg::kExitVerify;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "verify %s: %s\n", dir.c_str(), e.what());
    return cagg::kExitVerify;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregation-diffusion and Hele-Shaw patch studies"};
  app.require_subcommand(1);

  std::string config, out;
  std::vector<double> ms;
  bool quiet = false;
  std::vector<std::pair<cagg::Study, CLI::App*>> studies;
  for (auto s : {cagg::Study::pme, cagg::Study::jko, cagg::Study::heleshaw, cagg::Study::msweep, cagg::Study::longtime,
                 cagg::Study::diag}) {
    auto* sub = app.add_subcommand(cagg::to_string(s), std::string("run the ") + cagg::to_string(s) + " study");
    sub->add_option("--config", config, "run configuration")->required();
    sub->add_option("--out", out, "output directory (overrides run.out_dir)");
    sub->add_flag("--quiet", quiet, "no progress on stderr");
    if (s == cagg::Study::msweep) sub->add_option("--m", ms, "exponents (overrides solver.m_list)")->delimiter(',');
    studies.emplace_back(s, sub);
  }
  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "check the invariants of a finished run");
  verify->add_option("dir", verify_dir, "run directory")->required();
  auto* schema = app.add_subcommand("schema", "print the CSV header and field dump format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cagg::kExitConfig;
  }

  if (*schema) {
    std::fputs(cagg::dump_schema().c_str(), stdout);
    return cagg::kExitOk;
  }
  if (*verify) return run_verify(verify_dir);
  for (auto& [s, sub] : studies)
    if (*sub) return run_study(s, config, out, ms, quiet);
  return cagg::kExitConfig;
}
