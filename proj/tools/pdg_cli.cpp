#include "pdg/certify.hpp"
#include "pdg/config.hpp"
#include "pdg/report.hpp"
#include "pdg/scp.hpp"
#include "pdg/selftest.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>

namespace {

using namespace pdg;
using Clock = std::chrono::steady_clock;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitFailed = 2;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void print_cert(const CertReport& c) {
  fmt::print("certification: {} (tol {:.0e}, {} samples)\n", c.Passed() ? "PASS" : "FAIL", c.tol, c.samples);
  auto row = [&](const char* group, const ChannelReport& ch) {
    fmt::print("  {:4} {:22} {:10.3e}{}\n", group, ch.name, ch.max_scaled, ch.max_scaled > c.tol ? "  *" : "");
  };
  for (const auto& ch : c.gx) row("g_x", ch);
  for (const auto& ch : c.gu) row("g_u", ch);
  for (const auto& ch : c.stc) row("stc", ch);
  for (const auto& k : c.consequents)
    fmt::print("  cons {:22} {:10.3e}  active {}{}\n", k.name, k.max_scaled, k.active_samples,
               k.max_scaled > c.tol ? "  *" : "");
  auto times = [](const std::vector<double>& v) { return v.empty() ? std::string("none") : fmt::format("{:.3f}", fmt::join(v, ", ")); };
  fmt::print("  crossings: speed/tilt {} | altitude h2 {} | altitude h1 {}\n", times(c.crossings.speed_tilt),
             times(c.crossings.trig[1]), times(c.crossings.trig[0]));
  fmt::print("  endpoint error {:.2e}, final time {:.4f} s\n", c.endpoint_error, c.final_time);
}

std::string failed_channels(const CertReport& c) {
  std::vector<std::string> bad;
  for (const auto* g : {&c.gx, &c.gu, &c.stc})
    for (const auto& ch : *g)
      if (ch.max_scaled > c.tol) bad.push_back(ch.name);
  for (const auto& k : c.consequents)
    if (k.max_scaled > c.tol) bad.push_back("consequent:" + k.name);
  return fmt::format("{}", fmt::join(bad, ","));
}

// Re-certifies a stored report; returns the exit code.
int recertify(const std::string& path) {
  const nlohmann::json report = read_json_file(path);
  const StoredSolution s = stored_solution(report);
  const ProblemParams p = s.config.Problem();
  const CertReport cert = certify_solution(s.z, s.grid, p, s.scaling, s.config.cert_samples_per_segment);
  print_cert(cert);
  if (s.certification) {
    const std::string diff = cert_mismatch(cert_to_json(cert), *s.certification);
    if (!diff.empty()) {
      spdlog::error("recomputed certification differs from the stored one:\n{}", diff);
      return kExitError;
    }
    fmt::print("stored certification reproduced\n");
  }
  const bool converged = report.value("status", std::string()) == "converged";
  return converged && cert.Passed() ? kExitOk : kExitFailed;
}

int run_solve(const std::string& config_path, const std::optional<std::string>& out_dir, bool check_only) {
  ProblemConfig cfg = load_config(config_path);
  if (out_dir) cfg.output_dir = *out_dir;
  if (check_only) return recertify((std::filesystem::path(cfg.output_dir) / "report.json").string());

  const ProblemParams p = cfg.Problem();
  RunTiming timing;
  ScpResult res;
  std::string failure;
  std::optional<CertReport> cert;
  std::optional<DenseTrajectory> traj;
  int code = kExitOk;

  auto t0 = Clock::now();
  try {
    res = solve(p, cfg.scp);
  } catch (const std::exception& e) {
    failure = fmt::format("error: {}", e.what());
    code = kExitError;
  }
  timing.solve_s = seconds_since(t0);

  if (code == kExitOk) {
    t0 = Clock::now();
    try {
      traj = dense_propagate(res.z, res.grid, p);
      CertReport c = check_constraints(*traj, p, cfg.cert_samples_per_segment);
      c.crossings = locate_trigger_crossings(*traj, p, 1e-4, cfg.cert_samples_per_segment);
      c.endpoint_error = (traj->State(traj->tf()) - res.z.x.back().head<kNx>())
                             .cwiseQuotient(res.scaling.x_scale.head<kNx>())
                             .lpNorm<Eigen::Infinity>();
      cert = c;
    } catch (const std::exception& e) {
      failure = fmt::format("certification error: {}", e.what());
      code = kExitFailed;
    }
    timing.certify_s = seconds_since(t0);
  }
  if (code == kExitOk && res.status != ScpStatus::Converged) {
    failure = fmt::format("not converged: {} (max defect {:.2e})", res.message,
                          res.segments.empty() ? 0.0 : max_defect(res.z, res.segments, res.scaling));
    code = kExitFailed;
  } else if (code == kExitOk && !cert->Passed()) {
    failure = fmt::format("certification failed: {}", failed_channels(*cert));
    code = kExitFailed;
  }

  const nlohmann::json report =
      make_report(cfg, res, cert ? &*cert : nullptr, traj ? &*traj : nullptr, timing, failure);
  std::vector<std::vector<double>> rows;
  if (traj) rows = dense_rows(*traj, p, cfg.report_samples_per_segment);
  write_outputs(cfg.output_dir, report, rows, p);

  fmt::print("status: {} after {} iterations ({} accepted), {:.1f} s\n", to_string(res.status), res.history.size(),
             res.accepted, timing.solve_s);
  if (cert) print_cert(*cert);
  if (!failure.empty()) fmt::print("failure: {}\n", failure);
  fmt::print("wrote {}\n", cfg.output_dir);
  return code;
}

int run_selftest(std::uint64_t seed, const std::string& fault) {
  SelftestOptions o;
  o.seed = seed;
  if (!fault.empty()) {
    int r = 0, c = 0;
    if (std::sscanf(fault.c_str(), "%d,%d", &r, &c) != 2) throw std::invalid_argument("--perturb-jacobian expects ROW,COL");
    debug::set_jacobian_fault(r, c, 1e-3 * (1.0 + r + c));
  }
  const std::vector<SuiteResult> suites = pdg::run_selftest(o);
  debug::clear_jacobian_fault();
  bool ok = true;
  fmt::print("{:12} {:>8} {:>9} {:>11}  {}\n", "suite", "cases", "failures", "worst", "result");
  for (const SuiteResult& s : suites) {
    fmt::print("{:12} {:8} {:9} {:11.3e}  {}\n", s.name, s.cases, s.failures, s.worst, s.Passed() ? "PASS" : "FAIL");
    for (const std::string& f : s.failed) fmt::print("    {}\n", f);
    ok = ok && s.Passed();
  }
  fmt::print("seed {}\n", seed);
  return ok ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("pdg"));
  const char* lvl = std::getenv("PDG_LOG_LEVEL");
  spdlog::set_level(lvl ? spdlog::level::from_str(lvl) : spdlog::level::info);

  CLI::App app{"Powered-descent guidance with state-triggered constraints"};
  app.require_subcommand(1);

  std::string config_path, report_path, fault;
  std::optional<std::string> out_dir;
  bool check_only = false;
  std::uint64_t seed = 1;

  auto* solve_cmd = app.add_subcommand("solve", "solve a scenario and certify the result");
  solve_cmd->add_option("config", config_path, "scenario JSON")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--out", out_dir, "output directory (overrides output_dir)");
  solve_cmd->add_flag("--check-only", check_only, "re-certify the existing report in the output directory");

  auto* cert_cmd = app.add_subcommand("certify", "re-certify the trajectory stored in a report");
  cert_cmd->add_option("report", report_path, "report.json")->required()->check(CLI::ExistingFile);

  auto* self_cmd = app.add_subcommand("selftest", "run the gradient, D-GMSR and QP property suites");
  self_cmd->add_option("--seed", seed, "master seed");
  self_cmd->add_option("--perturb-jacobian", fault, "debug: corrupt dynamics Jacobian entry ROW,COL");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve_cmd) return run_solve(config_path, out_dir, check_only);
    if (*cert_cmd) return recertify(report_path);
    if (*self_cmd) return run_selftest(seed, fault);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
  return kExitError;
}
