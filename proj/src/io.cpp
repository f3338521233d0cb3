#include "relayopt/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#ifndef RELAYOPT_GIT_DESCRIBE
#define RELAYOPT_GIT_DESCRIBE "unknown"
#endif

namespace relayopt {

using nlohmann::json;

namespace {

json matrix_to_json_obj(const CMat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) {
      row.push_back({m(i, j).real(), m(i, j).imag()});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

CMat matrix_from_json_obj(const json& rows) {
  if (!rows.is_array() || rows.empty()) {
    throw InvalidInputError("matrix json: expected non-empty array of rows");
  }
  const int nr = static_cast<int>(rows.size());
  const int nc = static_cast<int>(rows[0].size());
  CMat m(nr, nc);
  for (int i = 0; i < nr; ++i) {
    if (static_cast<int>(rows[i].size()) != nc) {
      throw InvalidInputError("matrix json: ragged rows");
    }
    for (int j = 0; j < nc; ++j) {
      const json& e = rows[i][j];
      if (!e.is_array() || e.size() != 2) {
        throw InvalidInputError("matrix json: entries must be [re, im]");
      }
      m(i, j) = Cx(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::string fixed_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

std::string matrix_to_json(const CMat& m) { return matrix_to_json_obj(m).dump(); }

CMat matrix_from_json(const std::string& text) {
  return matrix_from_json_obj(json::parse(text));
}

SimConfig sim_config_from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) throw InvalidInputError("config: expected a JSON object");

  static const std::set<std::string> known = {
      "scenario", "n_s", "n_r", "k", "l", "q", "objective", "eta",
      "eta_sweep", "qam_order", "snr_sr_db", "snr_rd_db", "trials", "seed",
      "output", "rho_db", "eps", "resolution"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw InvalidInputError("config: unknown field '" + it.key() + "'");
    }
  }

  SimConfig cfg;
  cfg.scenario = j.at("scenario").get<std::string>();
  cfg.n_s = j.at("n_s").get<int>();
  cfg.n_r = j.at("n_r").get<int>();
  cfg.k = j.at("k").get<int>();
  if (j.contains("l")) cfg.l = j["l"].get<int>();
  if (j.contains("q")) cfg.q = j["q"].get<int>();
  if (j.contains("objective")) {
    if (j["objective"].is_string()) {
      cfg.designs = {j["objective"].get<std::string>()};
    } else if (j["objective"].is_array()) {
      for (const auto& e : j["objective"]) {
        cfg.designs.push_back(e.get<std::string>());
      }
    } else {
      throw InvalidInputError("config: objective must be a string or array");
    }
  }
  if (j.contains("eta")) {
    const auto& e = j["eta"];
    cfg.eta = Vec(e.size());
    for (size_t i = 0; i < e.size(); ++i) cfg.eta(i) = e[i].get<double>();
  }
  if (j.contains("eta_sweep")) {
    for (const auto& e : j["eta_sweep"]) cfg.eta_sweep.push_back(e.get<double>());
  }
  if (j.contains("qam_order")) cfg.qam_order = j["qam_order"].get<int>();
  if (j.contains("snr_sr_db")) {
    if (j["snr_sr_db"].is_number()) {
      cfg.snr_sr_db = {j["snr_sr_db"].get<double>()};
    } else {
      cfg.snr_sr_db.clear();
      for (const auto& e : j["snr_sr_db"]) cfg.snr_sr_db.push_back(e.get<double>());
    }
  }
  if (j.contains("snr_rd_db")) {
    if (j["snr_rd_db"].is_number()) {
      cfg.snr_rd_db = {j["snr_rd_db"].get<double>()};
    } else {
      cfg.snr_rd_db.clear();
      for (const auto& e : j["snr_rd_db"]) cfg.snr_rd_db.push_back(e.get<double>());
    }
  }
  if (j.contains("trials")) cfg.trials = j["trials"].get<long>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output")) cfg.output = j["output"].get<std::string>();
  if (j.contains("rho_db")) cfg.rho_db = j["rho_db"].get<double>();
  if (j.contains("eps")) cfg.eps = j["eps"].get<double>();
  if (j.contains("resolution")) cfg.resolution = j["resolution"].get<int>();

  if (cfg.trials < 1) throw InvalidInputError("config: trials must be >= 1");
  if (cfg.qam_order != 4 && cfg.qam_order != 16 && cfg.qam_order != 64) {
    throw InvalidInputError("config: qam_order must be 4, 16, or 64");
  }
  return cfg;
}

SimConfig sim_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return sim_config_from_json(ss.str());
}

std::string sim_config_to_json(const SimConfig& cfg) {
  json j;
  j["scenario"] = cfg.scenario;
  j["n_s"] = cfg.n_s;
  j["n_r"] = cfg.n_r;
  j["k"] = cfg.k;
  if (cfg.l > 0) j["l"] = cfg.l;
  if (cfg.q > 0) j["q"] = cfg.q;
  if (!cfg.designs.empty()) j["objective"] = cfg.designs;
  if (cfg.eta.size() > 0) j["eta"] = vec_to_json(cfg.eta);
  if (!cfg.eta_sweep.empty()) j["eta_sweep"] = cfg.eta_sweep;
  j["qam_order"] = cfg.qam_order;
  j["snr_sr_db"] = cfg.snr_sr_db;
  j["snr_rd_db"] = cfg.snr_rd_db;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  if (!cfg.output.empty()) j["output"] = cfg.output;
  j["rho_db"] = cfg.rho_db;
  j["eps"] = cfg.eps;
  j["resolution"] = cfg.resolution;
  return j.dump(2);
}

std::string config_hash(const SimConfig& cfg) {
  // FNV-1a over the canonical serialization; stable across runs and builds.
  const std::string s = sim_config_to_json(cfg);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string design_to_json(const TransceiverDesign& d) {
  json j;
  j["u"] = matrix_to_json_obj(d.u);
  j["f"] = matrix_to_json_obj(d.f);
  j["g"] = matrix_to_json_obj(d.g);
  if (d.s_rotation) j["s_rotation"] = matrix_to_json_obj(*d.s_rotation);
  if (d.backward) j["backward"] = matrix_to_json_obj(*d.backward);
  return j.dump(2);
}

std::string allocation_to_json(const PowerAllocation& a) {
  json j;
  j["a"] = vec_to_json(a.a);
  j["b"] = vec_to_json(a.b);
  j["p_s"] = a.p_s;
  j["p_r"] = a.p_r;
  return j.dump(2);
}

std::string p1_solution_to_json(const P1Solution& sol) {
  json j;
  j["design"] = json::parse(design_to_json(sol.design));
  j["allocation"] = json::parse(allocation_to_json(sol.allocation));
  j["objective_value"] = sol.objective_value;
  j["converged"] = sol.converged;
  j["iterations"] = sol.iterations;
  return j.dump(2);
}

std::string p2_solution_to_json(const P2Solution& sol) {
  json j;
  j["design"] = json::parse(design_to_json(sol.design));
  j["allocation"] = json::parse(allocation_to_json(sol.allocation));
  j["total_power"] = sol.total_power;
  j["achieved_mses"] = vec_to_json(sol.achieved_mses);
  return j.dump(2);
}

std::string ber_curves_to_csv(const std::vector<BerCurve>& curves) {
  std::ostringstream os;
  os << "snr_db,design,ber,ci95,trials,bit_errors\n";
  if (curves.empty()) return os.str();
  const size_t npoints = curves[0].points.size();
  for (size_t p = 0; p < npoints; ++p) {
    for (const BerCurve& c : curves) {
      const BerPoint& pt = c.points[p];
      os << fixed_double(pt.snr_db) << ',' << c.design << ','
         << fixed_double(pt.ber) << ',' << fixed_double(pt.ci95) << ','
         << pt.trials << ',' << pt.bit_errors << '\n';
    }
  }
  return os.str();
}

std::string power_rows_to_csv(const std::vector<PowerRow>& rows) {
  std::ostringstream os;
  os << "eta,design,avg_power_db,draws,infeasible\n";
  for (const PowerRow& r : rows) {
    os << fixed_double(r.eta) << ',' << r.design << ','
       << fixed_double(r.avg_power_db) << ',' << r.draws << ','
       << r.infeasible << '\n';
  }
  return os.str();
}

std::string git_describe_string() { return RELAYOPT_GIT_DESCRIBE; }

void write_run_outputs(const std::string& csv, const SimConfig& cfg,
                       const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write " + path);
    out << csv;
  }
  json side;
  side["config"] = json::parse(sim_config_to_json(cfg));
  side["seed"] = cfg.seed;
  side["config_hash"] = config_hash(cfg);
  side["git_describe"] = git_describe_string();
  std::ofstream out(path + ".json", std::ios::binary);
  out << side.dump(2) << '\n';
}

}  // namespace relayopt
