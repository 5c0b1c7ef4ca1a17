#include "pdg/config.hpp"

#include <spdlog/spdlog.h>

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

namespace pdg {

namespace {

using nlohmann::json;

enum class Kind { Real, Degrees, Vec3, Vec3Degrees, Quat, Int, Text };

struct Field {
  const char* key;
  Kind kind;
  std::function<void*(ProblemConfig&)> ref;
};

#define PDG_FIELD(name, kind, expr) \
  Field { name, kind, [](ProblemConfig& c) -> void* { return &(expr); } }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      PDG_FIELD("isp", Kind::Real, c.vehicle.isp),
      PDG_FIELD("g0", Kind::Real, c.vehicle.g0),
      PDG_FIELD("rho", Kind::Real, c.vehicle.rho),
      PDG_FIELD("s_a", Kind::Real, c.vehicle.s_a),
      PDG_FIELD("c_a", Kind::Vec3, c.vehicle.c_a),
      PDG_FIELD("j_b", Kind::Vec3, c.vehicle.j_b),
      PDG_FIELD("r_cm", Kind::Vec3, c.vehicle.r_cm),
      PDG_FIELD("r_cp", Kind::Vec3, c.vehicle.r_cp),
      PDG_FIELD("omega_max", Kind::Degrees, c.vehicle.omega_max),
      PDG_FIELD("theta_max", Kind::Degrees, c.vehicle.theta_max),
      PDG_FIELD("gamma_max", Kind::Degrees, c.vehicle.gamma_max),
      PDG_FIELD("delta_e_max", Kind::Degrees, c.vehicle.delta_e_max),
      PDG_FIELD("phi_e_max", Kind::Degrees, c.vehicle.phi_e_max),
      PDG_FIELD("delta_b_max", Kind::Degrees, c.vehicle.delta_b_max),
      PDG_FIELD("phi_b_max", Kind::Degrees, c.vehicle.phi_b_max),
      PDG_FIELD("h1_trig", Kind::Real, c.vehicle.h1_trig),
      PDG_FIELD("h2_trig", Kind::Real, c.vehicle.h2_trig),
      PDG_FIELD("v_trig", Kind::Real, c.vehicle.v_trig),
      PDG_FIELD("theta_trig", Kind::Degrees, c.vehicle.theta_trig),
      PDG_FIELD("v_stc", Kind::Real, c.vehicle.v_stc),
      PDG_FIELD("omega_stc", Kind::Degrees, c.vehicle.omega_stc),
      PDG_FIELD("theta_stc", Kind::Degrees, c.vehicle.theta_stc),
      PDG_FIELD("gamma_stc", Kind::Degrees, c.vehicle.gamma_stc),
      PDG_FIELD("psi_stc", Kind::Degrees, c.vehicle.psi_stc),
      PDG_FIELD("delta_stc", Kind::Degrees, c.vehicle.delta_stc),
      PDG_FIELD("t1_min", Kind::Real, c.vehicle.t1_min),
      PDG_FIELD("t1_max", Kind::Real, c.vehicle.t1_max),
      PDG_FIELD("t2_min", Kind::Real, c.vehicle.t2_min),
      PDG_FIELD("t2_max", Kind::Real, c.vehicle.t2_max),
      PDG_FIELD("m_i", Kind::Real, c.boundary.m_i),
      PDG_FIELD("m_dry", Kind::Real, c.boundary.m_dry),
      PDG_FIELD("r_i", Kind::Vec3, c.boundary.r_i),
      PDG_FIELD("r_f", Kind::Vec3, c.boundary.r_f),
      PDG_FIELD("v_i", Kind::Vec3, c.boundary.v_i),
      PDG_FIELD("v_f", Kind::Vec3, c.boundary.v_f),
      PDG_FIELD("q_i", Kind::Quat, c.boundary.q_i),
      PDG_FIELD("q_f", Kind::Quat, c.boundary.q_f),
      PDG_FIELD("omega_i", Kind::Vec3Degrees, c.boundary.w_i),
      PDG_FIELD("omega_f", Kind::Vec3Degrees, c.boundary.w_f),
      PDG_FIELD("K", Kind::Int, c.scp.K),
      PDG_FIELD("w_eq", Kind::Real, c.scp.w_eq_dyn),
      PDG_FIELD("w_prox_init", Kind::Real, c.scp.w_prox_init),
      PDG_FIELD("beta1", Kind::Real, c.scp.beta1),
      PDG_FIELD("beta2", Kind::Real, c.scp.beta2),
      PDG_FIELD("sigma1", Kind::Real, c.scp.sigma1),
      PDG_FIELD("sigma2", Kind::Real, c.scp.sigma2),
      PDG_FIELD("sigma3", Kind::Real, c.scp.sigma3),
      PDG_FIELD("eps_licq", Kind::Real, c.scp.eps_licq),
      PDG_FIELD("delta_licq", Kind::Real, c.scp.delta_licq),
      PDG_FIELD("s_min", Kind::Real, c.scp.s_min),
      PDG_FIELD("eps_opt", Kind::Real, c.scp.eps_opt),
      PDG_FIELD("eps_feas", Kind::Real, c.scp.eps_feas),
      PDG_FIELD("max_iter", Kind::Int, c.scp.max_iter),
      PDG_FIELD("substeps", Kind::Int, c.scp.substeps),
      PDG_FIELD("tf_guess", Kind::Real, c.scp.tf_guess),
      PDG_FIELD("y_range", Kind::Real, c.scp.y_range),
      PDG_FIELD("w_prox_max", Kind::Real, c.scp.w_prox_max),
      PDG_FIELD("output_dir", Kind::Text, c.output_dir),
      PDG_FIELD("report_samples_per_segment", Kind::Int, c.report_samples_per_segment),
      PDG_FIELD("cert_samples_per_segment", Kind::Int, c.cert_samples_per_segment),
  };
  return f;
}

#undef PDG_FIELD

double number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(fmt::format("config key '{}': expected a number", key));
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(fmt::format("config key '{}': value must be finite", key));
  return d;
}

template <int N>
Eigen::Matrix<double, N, 1> vector(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != N)
    throw ConfigError(fmt::format("config key '{}': expected an array of {} numbers", key, N));
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = number(v[i], key);
  return out;
}

std::string nearest_key(const std::string& key) {
  std::string best;
  size_t best_d = std::string::npos;
  for (const Field& f : fields()) {
    const size_t d = edit_distance(key, f.key);
    if (d < best_d) {
      best_d = d;
      best = f.key;
    }
  }
  return best;
}

void need(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void validate(const ProblemConfig& c) {
  const VehicleParams& v = c.vehicle;
  const BoundarySet& b = c.boundary;
  need(b.m_dry > 0.0, "config key 'm_dry': must be positive");
  need(b.m_i > b.m_dry, "config keys 'm_dry' and 'm_i': need m_dry < m_i");
  need(v.isp > 0.0, "config key 'isp': must be positive");
  need(v.g0 > 0.0, "config key 'g0': must be positive");
  need(v.rho >= 0.0, "config key 'rho': must be nonnegative");
  need(v.s_a > 0.0, "config key 's_a': must be positive");
  need((v.c_a.array() >= 0.0).all(), "config key 'c_a': entries must be nonnegative");
  need((v.j_b.array() > 0.0).all(), "config key 'j_b': entries must be positive");
  need(v.t1_min > 0.0, "config key 't1_min': must be positive");
  need(v.t1_min < v.t1_max, "config keys 't1_min' and 't1_max': need t1_min < t1_max");
  need(v.t1_max <= v.t2_min, "config keys 't1_max' and 't2_min': need t1_max <= t2_min");
  need(v.t2_min < v.t2_max, "config keys 't2_min' and 't2_max': need t2_min < t2_max");
  need(v.h1_trig < v.h2_trig, "config keys 'h1_trig' and 'h2_trig': need h1_trig < h2_trig");
  const std::pair<const char*, double> positive[] = {
      {"omega_max", v.omega_max}, {"delta_e_max", v.delta_e_max}, {"phi_e_max", v.phi_e_max},
      {"delta_b_max", v.delta_b_max}, {"phi_b_max", v.phi_b_max}, {"theta_max", v.theta_max},
      {"gamma_max", v.gamma_max}, {"v_trig", v.v_trig}, {"v_stc", v.v_stc}, {"omega_stc", v.omega_stc},
      {"theta_stc", v.theta_stc}, {"gamma_stc", v.gamma_stc}, {"psi_stc", v.psi_stc},
      {"delta_stc", v.delta_stc}, {"h1_trig", v.h1_trig}};
  for (const auto& [k, x] : positive) need(x > 0.0, fmt::format("config key '{}': must be positive", k));
  need(v.gamma_max < 90.0 * kDeg, "config key 'gamma_max': must be below 90 degrees");
  need(v.delta_e_max < 90.0 * kDeg, "config key 'delta_e_max': must be below 90 degrees");

  const ScpConfig& s = c.scp;
  need(s.K >= 2, "config key 'K': must be at least 2");
  need(s.w_eq_dyn > 0.0, "config key 'w_eq': must be positive");
  need(s.w_prox_init > 0.0, "config key 'w_prox_init': must be positive");
  need(0.0 < s.beta1 && s.beta1 < s.beta2 && s.beta2 < 1.0,
       "config keys 'beta1' and 'beta2': need 0 < beta1 < beta2 < 1");
  need(0.0 < s.sigma3 && s.sigma3 < 1.0, "config key 'sigma3': need 0 < sigma3 < 1");
  need(1.0 < s.sigma2 && s.sigma2 < s.sigma1, "config keys 'sigma2' and 'sigma1': need 1 < sigma2 < sigma1");
  need(s.eps_licq > 0.0, "config key 'eps_licq': must be positive");
  need(s.delta_licq >= 0.0, "config key 'delta_licq': must be nonnegative");
  need(s.s_min > 0.0, "config key 's_min': must be positive");
  need(s.eps_opt > 0.0, "config key 'eps_opt': must be positive");
  need(s.eps_feas > 0.0, "config key 'eps_feas': must be positive");
  need(s.max_iter > 0, "config key 'max_iter': must be positive");
  need(s.substeps > 0, "config key 'substeps': must be positive");
  need(s.tf_guess > 0.0, "config key 'tf_guess': must be positive");
  need(s.y_range > 0.0, "config key 'y_range': must be positive");
  need(s.w_prox_max > s.w_prox_init, "config key 'w_prox_max': must exceed w_prox_init");
  need(c.report_samples_per_segment >= 1, "config key 'report_samples_per_segment': must be at least 1");
  need(c.cert_samples_per_segment >= 10, "config key 'cert_samples_per_segment': must be at least 10");
  need(!c.output_dir.empty(), "config key 'output_dir': must not be empty");
}

}  // namespace

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> row(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    size_t diag = row[0];
    row[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

ProblemConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  ProblemConfig c;
  for (const auto& [key, val] : j.items()) {
    auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; });
    if (it == fields().end())
      throw ConfigError(fmt::format("config: unknown key '{}' (did you mean '{}'?)", key, nearest_key(key)));
    void* dst = it->ref(c);
    switch (it->kind) {
      case Kind::Real: *static_cast<double*>(dst) = number(val, key); break;
      case Kind::Degrees: *static_cast<double*>(dst) = number(val, key) * kDeg; break;
      case Kind::Vec3: *static_cast<Vec3*>(dst) = vector<3>(val, key); break;
      case Kind::Vec3Degrees: *static_cast<Vec3*>(dst) = vector<3>(val, key) * kDeg; break;
      case Kind::Quat: {
        Vec4 q = vector<4>(val, key);
        const double n = q.norm();
        if (!(n > 1e-12)) throw ConfigError(fmt::format("config key '{}': quaternion has zero norm", key));
        if (std::abs(n - 1.0) > 1e-6) {
          c.warnings.push_back(fmt::format("config key '{}': quaternion norm {:.6g} normalized to 1", key, n));
          q /= n;
        }
        *static_cast<Vec4*>(dst) = q;
        break;
      }
      case Kind::Int: {
        if (!val.is_number_integer()) throw ConfigError(fmt::format("config key '{}': expected an integer", key));
        *static_cast<int*>(dst) = val.get<int>();
        break;
      }
      case Kind::Text: {
        if (!val.is_string()) throw ConfigError(fmt::format("config key '{}': expected a string", key));
        *static_cast<std::string*>(dst) = val.get<std::string>();
        break;
      }
    }
  }
  validate(c);
  return c;
}

ProblemConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1, col = 1;
    const size_t end = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(fmt::format("{}:{}:{}: JSON parse error: {}", origin, line, col, e.what()));
  }
  ProblemConfig c = config_from_json(j);
  for (const std::string& w : c.warnings) spdlog::warn("{}: {}", origin, w);
  return c;
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config: cannot open '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

json config_to_json(const ProblemConfig& cin) {
  ProblemConfig c = cin;
  json j = json::object();
  for (const Field& f : fields()) {
    void* src = f.ref(c);
    auto arr = [](const auto& v, double k) {
      json a = json::array();
      for (int i = 0; i < v.size(); ++i) a.push_back(v[i] * k);
      return a;
    };
    switch (f.kind) {
      case Kind::Real: j[f.key] = *static_cast<double*>(src); break;
      case Kind::Degrees: j[f.key] = *static_cast<double*>(src) / kDeg; break;
      case Kind::Vec3: j[f.key] = arr(*static_cast<Vec3*>(src), 1.0); break;
      case Kind::Vec3Degrees: j[f.key] = arr(*static_cast<Vec3*>(src), 1.0 / kDeg); break;
      case Kind::Quat: j[f.key] = arr(*static_cast<Vec4*>(src), 1.0); break;
      case Kind::Int: j[f.key] = *static_cast<int*>(src); break;
      case Kind::Text: j[f.key] = *static_cast<std::string*>(src); break;
    }
  }
  return j;
}

}  // namespace pdg
