#include "pdg/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pdg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v, double k = 1.0) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i] * k);
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> json_vec(const json& a, double k = 1.0) {
  if (!a.is_array() || int(a.size()) != N) throw std::runtime_error(fmt::format("report: expected array of {}", N));
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = a[i].get<double>() * k;
  return v;
}

json channel_json(const ChannelReport& c) {
  return {{"name", c.name}, {"max_scaled", c.max_scaled}, {"max_raw", c.max_raw},
          {"first_violation", c.first_violation < 0.0 ? json(nullptr) : json(c.first_violation)}};
}

ChannelReport channel_from(const json& j) {
  ChannelReport c;
  c.name = j.at("name").get<std::string>();
  c.max_scaled = j.at("max_scaled").get<double>();
  c.max_raw = j.at("max_raw").get<double>();
  c.first_violation = j.at("first_violation").is_null() ? -1.0 : j.at("first_violation").get<double>();
  return c;
}

json node_json(const VecXa& x, const VecUa& u) {
  return {{"t", x[ix::t]},
          {"m", x[ix::m]},
          {"r", vec_json(x.segment<3>(ix::r))},
          {"v", vec_json(x.segment<3>(ix::v))},
          {"q", vec_json(x.segment<4>(ix::q))},
          {"omega_deg", vec_json(x.segment<3>(ix::w), 1.0 / kDeg)},
          {"y", x[ix::y]},
          {"thrust", u[iu::T]},
          {"delta_e_deg", u[iu::de] / kDeg},
          {"phi_e_deg", u[iu::pe] / kDeg},
          {"delta_b_deg", u[iu::db] / kDeg},
          {"phi_b_deg", u[iu::pb] / kDeg},
          {"s", u[iu::s]}};
}

void node_from(const json& j, VecXa& x, VecUa& u) {
  x[ix::t] = j.at("t").get<double>();
  x[ix::m] = j.at("m").get<double>();
  x.segment<3>(ix::r) = json_vec<3>(j.at("r"));
  x.segment<3>(ix::v) = json_vec<3>(j.at("v"));
  x.segment<4>(ix::q) = json_vec<4>(j.at("q"));
  x.segment<3>(ix::w) = json_vec<3>(j.at("omega_deg"), kDeg);
  x[ix::y] = j.at("y").get<double>();
  u[iu::T] = j.at("thrust").get<double>();
  u[iu::de] = j.at("delta_e_deg").get<double>() * kDeg;
  u[iu::pe] = j.at("phi_e_deg").get<double>() * kDeg;
  u[iu::db] = j.at("delta_b_deg").get<double>() * kDeg;
  u[iu::pb] = j.at("phi_b_deg").get<double>() * kDeg;
  u[iu::s] = j.at("s").get<double>();
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << fmt::format("{:.17g}", r[i]);
    out << '\n';
  }
}

bool close(double a, double b, double rel, double abs) {
  return std::abs(a - b) <= abs + rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace

json cert_to_json(const CertReport& r) {
  json j;
  auto group = [](const std::array<ChannelReport, 4>& g) {
    json a = json::array();
    for (const auto& c : g) a.push_back(channel_json(c));
    return a;
  };
  j["gx"] = group(r.gx);
  j["gu"] = group(r.gu);
  j["stc"] = group(r.stc);
  json cons = json::array();
  for (const auto& c : r.consequents)
    cons.push_back({{"name", c.name}, {"group", c.group}, {"max_scaled", c.max_scaled}, {"max_raw", c.max_raw},
                    {"active_samples", c.active_samples}, {"vacuous_samples", c.vacuous_samples},
                    {"first_violation", c.first_violation < 0.0 ? json(nullptr) : json(c.first_violation)}});
  j["consequents"] = cons;
  json tr = json::array();
  for (const auto& v : r.crossings.trig) tr.push_back(v);
  j["crossings"] = {{"trig", tr}, {"speed_tilt", r.crossings.speed_tilt}};
  j["samples"] = r.samples;
  j["tol"] = r.tol;
  j["delta"] = r.delta;
  j["endpoint_error"] = r.endpoint_error;
  j["quat_norm_drift"] = r.quat_norm_drift;
  j["final_time"] = r.final_time;
  j["channels_pass"] = r.ChannelsPass();
  j["consequents_pass"] = r.ConsequentsPass();
  j["passed"] = r.Passed();
  return j;
}

CertReport cert_from_json(const json& j) {
  CertReport r;
  for (int i = 0; i < 4; ++i) {
    r.gx[i] = channel_from(j.at("gx").at(i));
    r.gu[i] = channel_from(j.at("gu").at(i));
    r.stc[i] = channel_from(j.at("stc").at(i));
  }
  for (int i = 0; i < 10; ++i) {
    const json& c = j.at("consequents").at(i);
    ConsequentReport& cr = r.consequents[i];
    cr.name = c.at("name").get<std::string>();
    cr.group = c.at("group").get<int>();
    cr.max_scaled = c.at("max_scaled").get<double>();
    cr.max_raw = c.at("max_raw").get<double>();
    cr.active_samples = c.at("active_samples").get<int>();
    cr.vacuous_samples = c.at("vacuous_samples").get<int>();
    cr.first_violation = c.at("first_violation").is_null() ? -1.0 : c.at("first_violation").get<double>();
  }
  for (int i = 0; i < 4; ++i) r.crossings.trig[i] = j.at("crossings").at("trig").at(i).get<std::vector<double>>();
  r.crossings.speed_tilt = j.at("crossings").at("speed_tilt").get<std::vector<double>>();
  r.samples = j.at("samples").get<int>();
  r.tol = j.at("tol").get<double>();
  r.delta = j.at("delta").get<double>();
  r.endpoint_error = j.at("endpoint_error").get<double>();
  r.quat_norm_drift = j.at("quat_norm_drift").get<double>();
  r.final_time = j.at("final_time").get<double>();
  return r;
}

std::string cert_mismatch(const json& a, const json& b, double rel_tol, double abs_tol) {
  std::string out;
  auto walk = [&](auto&& self, const json& x, const json& y, const std::string& path) -> void {
    if (x.type() != y.type() && !(x.is_number() && y.is_number())) {
      out += fmt::format("{}: type differs\n", path);
      return;
    }
    if (x.is_object()) {
      for (const auto& [k, v] : x.items()) {
        if (!y.contains(k)) out += fmt::format("{}.{}: missing\n", path, k);
        else self(self, v, y.at(k), path + "." + k);
      }
    } else if (x.is_array()) {
      if (x.size() != y.size()) {
        out += fmt::format("{}: length {} vs {}\n", path, x.size(), y.size());
        return;
      }
      for (size_t i = 0; i < x.size(); ++i) {
        // Named entries are easier to find by name than by position.
        const bool named = x[i].is_object() && x[i].contains("name") && x[i]["name"].is_string();
        const std::string at = named ? x[i]["name"].get<std::string>() : std::to_string(i);
        self(self, x[i], y[i], fmt::format("{}[{}]", path, at));
      }
    } else if (x.is_number()) {
      // Crossing times are bisected to 1e-4 s, so allow one bracket of slack there.
      const double slack = path.find("crossings") != std::string::npos ? 2e-4 : abs_tol;
      if (!close(x.get<double>(), y.get<double>(), rel_tol, slack))
        out += fmt::format("{}: {:.17g} vs {:.17g}\n", path, x.get<double>(), y.get<double>());
    } else if (x != y) {
      out += fmt::format("{}: {} vs {}\n", path, x.dump(), y.dump());
    }
  };
  walk(walk, a, b, "certification");
  return out;
}

const std::vector<std::string>& dense_columns() {
  static const std::vector<std::string> c = {
      "t", "m", "rx", "ry", "rz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx_deg", "wy_deg", "wz_deg",
      "thrust", "delta_e_deg", "phi_e_deg", "delta_b_deg", "phi_b_deg", "s", "y"};
  return c;
}

std::vector<std::vector<double>> dense_rows(const DenseTrajectory& traj, const ProblemParams& p, int per_segment) {
  std::vector<double> ts;
  for (int k = 0; k < traj.segments(); ++k) {
    const double a = traj.node_time(k), b = traj.node_time(k + 1);
    for (int j = 0; j < per_segment; ++j) ts.push_back(a + (b - a) * j / per_segment);
  }
  ts.push_back(traj.tf());

  std::vector<std::vector<double>> rows;
  double y = 0.0, rate_prev = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    const VecX x = traj.State(t);
    const VecU u = traj.Control(t);
    // Accumulator in tau units: dy/dt = penalty rate.
    const double rate = penalty_terms(x, u, p).Total();
    if (i > 0) y += 0.5 * (rate + rate_prev) * (t - ts[i - 1]);
    rate_prev = rate;
    std::vector<double> r;
    r.reserve(dense_columns().size());
    r.push_back(t);
    for (int j = 0; j < 11; ++j) r.push_back(x[j]);
    for (int j = 0; j < 3; ++j) r.push_back(x[ix::w + j] / kDeg);
    r.push_back(u[iu::T]);
    for (int j = 1; j < 5; ++j) r.push_back(u[j] / kDeg);
    r.push_back(traj.Dilation(t));
    r.push_back(y);
    rows.push_back(std::move(r));
  }
  return rows;
}

json make_report(const ProblemConfig& cfg, const ScpResult& res, const CertReport* cert,
                 const DenseTrajectory* traj, const RunTiming& timing, const std::string& failure_reason) {
  json j;
  j["status"] = to_string(res.status);
  j["message"] = res.message;
  j["failure_reason"] = failure_reason.empty() ? json(nullptr) : json(failure_reason);
  j["accepted_iterations"] = res.accepted;
  j["total_iterations"] = res.history.size();
  j["final_time"] = res.z.x.empty() ? 0.0 : res.final_time();
  j["config"] = config_to_json(cfg);
  j["grid"] = {{"tau", res.grid.tau}, {"substeps", res.grid.substeps}};
  j["scaling"] = {{"x_offset", vec_json(res.scaling.x_offset)}, {"x_scale", vec_json(res.scaling.x_scale)},
                  {"u_offset", vec_json(res.scaling.u_offset)}, {"u_scale", vec_json(res.scaling.u_scale)}};

  json scaled = json::array(), unscaled = json::array();
  for (int k = 0; k < res.z.K(); ++k) {
    scaled.push_back({{"x", vec_json(res.scaling.ScaleX(res.z.x[k]))}, {"u", vec_json(res.scaling.ScaleU(res.z.u[k]))}});
    unscaled.push_back(node_json(res.z.x[k], res.z.u[k]));
  }
  j["nodes"] = {{"scaled", scaled}, {"unscaled", unscaled}};

  json defects = json::array();
  for (size_t k = 0; k < res.segments.size(); ++k)
    defects.push_back((res.z.x[k + 1] - res.segments[k].x_end).cwiseQuotient(res.scaling.x_scale).lpNorm<Eigen::Infinity>());
  j["defect_summary"] = {{"per_segment_scaled", defects},
                         {"max_scaled", res.segments.empty() ? 0.0 : max_defect(res.z, res.segments, res.scaling)},
                         {"max_y_growth", res.segments.empty() ? 0.0 : max_y_growth(res.z, res.segments)}};

  json hist = json::array();
  for (const IterationRecord& r : res.history)
    hist.push_back({{"index", r.index}, {"J_nl_before", r.J_nl_before}, {"J_nl_after", r.J_nl_after},
                    {"J_lin", r.J_lin}, {"ratio", r.ratio}, {"accepted", r.accepted}, {"w_prox", r.w_prox},
                    {"max_defect", r.max_defect}, {"max_y_growth", r.max_y_growth}, {"final_time", r.final_time},
                    {"qp_iterations", r.qp_iterations}, {"qp_status", r.qp_status}});
  j["history"] = hist;

  j["certification"] = cert ? cert_to_json(*cert) : json(nullptr);
  if (traj) {
    const ProblemParams p = cfg.Problem();
    j["dense"] = {{"samples_per_segment", cfg.report_samples_per_segment},
                  {"columns", dense_columns()},
                  {"rows", dense_rows(*traj, p, cfg.report_samples_per_segment)}};
  } else {
    j["dense"] = nullptr;
  }
  j["timing"] = {{"solve_s", timing.solve_s}, {"certify_s", timing.certify_s}};
  return j;
}

void write_outputs(const std::string& dir, const json& report, const std::vector<std::vector<double>>& rows,
                   const ProblemParams& p) {
  const fs::path root(dir);
  fs::create_directories(root / "series");
  {
    std::ofstream out(root / "report.json");
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", (root / "report.json").string()));
    out << report.dump(1) << '\n';
  }
  if (rows.empty()) return;
  write_csv(root / "trajectory.csv", dense_columns(), rows);

  std::vector<std::vector<double>> ground, thrust, tilt, speed, rate, gimbal, trig;
  for (const auto& r : rows) {
    const double t = r[0];
    VecX x;
    for (int j = 0; j < 11; ++j) x[j] = r[1 + j];
    for (int j = 0; j < 3; ++j) x[11 + j] = r[12 + j] * kDeg;
    VecU u;
    u[iu::T] = r[15];
    for (int j = 1; j < 5; ++j) u[j] = r[15 + j] * kDeg;
    const Vec3 pos = x.segment<3>(1);
    const Vec4 q = x.segment<4>(7).normalized();
    const double cos_tilt = std::clamp(1.0 - 2.0 * (q[1] * q[1] + q[2] * q[2]), -1.0, 1.0);
    const Vec4 g = constraint_values(x, u, p.vehicle).trig;
    ground.push_back({t, pos.head<2>().norm(), pos[2], pos[0], pos[1]});
    thrust.push_back({t, u[iu::T], p.vehicle.t1_min, p.vehicle.t1_max, p.vehicle.t2_min, p.vehicle.t2_max});
    tilt.push_back({t, std::acos(cos_tilt) / kDeg});
    speed.push_back({t, x.segment<3>(4).norm()});
    rate.push_back({t, x.segment<3>(11).norm() / kDeg});
    gimbal.push_back({t, r[16], r[17], r[18], r[19]});
    trig.push_back({t, g[0], g[1], g[2], g[3]});
  }
  write_csv(root / "series" / "altitude_ground_track.csv", {"t", "ground_range", "altitude", "rx", "ry"}, ground);
  write_csv(root / "series" / "thrust.csv", {"t", "thrust", "t1_min", "t1_max", "t2_min", "t2_max"}, thrust);
  write_csv(root / "series" / "tilt.csv", {"t", "tilt_deg"}, tilt);
  write_csv(root / "series" / "speed.csv", {"t", "speed"}, speed);
  write_csv(root / "series" / "angular_rate.csv", {"t", "omega_norm_deg"}, rate);
  write_csv(root / "series" / "gimbal.csv", {"t", "delta_e_deg", "phi_e_deg", "delta_b_deg", "phi_b_deg"}, gimbal);
  write_csv(root / "series" / "triggers.csv", {"t", "altitude_h1", "altitude_h2", "speed", "tilt"}, trig);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(fmt::format("{}: {}", path, e.what()));
  }
}

StoredSolution stored_solution(const json& report) {
  StoredSolution s;
  s.config = config_from_json(report.at("config"));
  s.grid.tau = report.at("grid").at("tau").get<std::vector<double>>();
  s.grid.substeps = report.at("grid").at("substeps").get<int>();
  const json& sc = report.at("scaling");
  s.scaling.x_offset = json_vec<kNxa>(sc.at("x_offset"));
  s.scaling.x_scale = json_vec<kNxa>(sc.at("x_scale"));
  s.scaling.u_offset = json_vec<kNua>(sc.at("u_offset"));
  s.scaling.u_scale = json_vec<kNua>(sc.at("u_scale"));
  const json& nodes = report.at("nodes").at("unscaled");
  s.z.x.resize(nodes.size());
  s.z.u.resize(nodes.size());
  for (size_t k = 0; k < nodes.size(); ++k) node_from(nodes[k], s.z.x[k], s.z.u[k]);
  if (s.z.K() != s.grid.K()) throw std::runtime_error("report: node count does not match grid");
  if (report.contains("certification") && !report.at("certification").is_null())
    s.certification = report.at("certification");
  return s;
}

std::vector<std::vector<double>> read_csv(const std::string& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  std::string line;
  std::vector<std::vector<double>> rows;
  if (std::getline(in, line) && header) {
    header->clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header->push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace pdg
