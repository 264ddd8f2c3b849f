#include "wlab/report.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace wlab {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

nlohmann::json row_json(const CheckRow& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["anchor"] = r.anchor;
  j["residual"] = format_double(r.residual);
  j["threshold"] = format_double(r.threshold);
  j["pass"] = r.pass;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

}  // namespace

void write_summary_json(const std::string& path, const std::string& resolved_config_json,
                        const Report& report) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["resolved_config"] = nlohmann::json::parse(resolved_config_json);
  j["checks"] = nlohmann::json::array();
  for (const auto& r : report.checks) j["checks"].push_back(row_json(r));
  j["pass"] = report.all_pass();
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_crit_csv(const std::string& path, const Scene& scene,
                    const std::vector<CritRecord>& records) {
  std::ofstream out(path);
  out << "chart";
  for (int k = 0; k < scene.dim_real(); ++k) out << ",c" << k;
  out << ",eps,value,grad_norm,index,nullity,morse_bott,origin";
  for (int k = 0; k < scene.dim_real(); ++k) out << ",eig" << k;
  out << "\n";
  for (const auto& r : records) {
    out << r.point.chart;
    for (double c : r.point.coords) out << "," << format_double(c);
    out << "," << format_double(r.eps) << "," << format_double(r.value) << ","
        << format_double(r.grad_norm) << "," << r.index << "," << r.nullity << ","
        << (r.morse_bott ? 1 : 0) << ",";
    switch (r.origin_tag) {
      case OriginTag::NearCritPhi0: out << "near_crit_phi0"; break;
      case OriginTag::NearStratum: out << "near_stratum"; break;
      case OriginTag::Unresolved: out << "unresolved"; break;
    }
    for (double e : r.spectrum) out << "," << format_double(e);
    out << "\n";
  }
}

namespace {

nlohmann::json record_json(const CritRecord& r) {
  nlohmann::json j;
  j["chart"] = r.point.chart;
  j["coords"] = nlohmann::json::array();
  for (double c : r.point.coords) j["coords"].push_back(format_double(c));
  j["eps"] = format_double(r.eps);
  j["value"] = format_double(r.value);
  j["grad_norm"] = format_double(r.grad_norm);
  j["index"] = r.index;
  j["nullity"] = r.nullity;
  j["morse_bott"] = r.morse_bott;
  j["spectrum"] = nlohmann::json::array();
  for (double e : r.spectrum) j["spectrum"].push_back(format_double(e));
  switch (r.origin_tag) {
    case OriginTag::NearCritPhi0: j["origin"] = "near_crit_phi0"; break;
    case OriginTag::NearStratum: j["origin"] = "near_stratum"; break;
    case OriginTag::Unresolved: j["origin"] = "unresolved"; break;
  }
  return j;
}

}  // namespace

void write_crit_json(const std::string& path, const Scene& scene,
                     const std::vector<CritRecord>& records) {
  nlohmann::json j;
  j["scene"] = scene.name;
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) j["records"].push_back(record_json(r));
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_tracks_json(const std::string& path, const std::vector<Track>& tracks) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : tracks) {
    nlohmann::json tj;
    switch (t.limit_class) {
      case LimitClass::ToCritPhi0: tj["limit_class"] = "to_crit_phi0"; break;
      case LimitClass::ToStratum: tj["limit_class"] = "to_stratum"; break;
      case LimitClass::ToBoundaryUnresolved: tj["limit_class"] = "to_boundary_unresolved"; break;
    }
    tj["lost"] = t.lost;
    tj["split"] = t.split;
    tj["index_changed_mid_ladder"] = t.index_changed_mid_ladder;
    tj["threshold_rung"] = t.threshold_rung;
    tj["threshold_eps"] =
        t.ladder.empty() ? "" : format_double(t.ladder[static_cast<size_t>(t.threshold_rung)]);
    tj["max_step"] = format_double(t.max_step);
    tj["rungs"] = nlohmann::json::array();
    for (size_t r = 0; r < t.records.size(); ++r) {
      nlohmann::json rj = record_json(t.records[r]);
      rj["rung_eps"] = format_double(t.ladder[r]);
      tj["rungs"].push_back(rj);
    }
    tj["slope_fits"] = nlohmann::json::array();
    for (const auto& f : t.slope_fits)
      tj["slope_fits"].push_back({{"position", f.position},
                                  {"slope", format_double(f.slope)},
                                  {"residual", format_double(f.residual)},
                                  {"diverging", f.diverging},
                                  {"sign", f.sign}});
    j.push_back(std::move(tj));
  }
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_tracks_csv(const std::string& path, const std::vector<Track>& tracks) {
  std::ofstream out(path);
  out << "track,rung,eps,chart,coords,value,index,nullity,spectrum\n";
  for (size_t t = 0; t < tracks.size(); ++t) {
    const auto& tr = tracks[t];
    for (size_t r = 0; r < tr.records.size(); ++r) {
      const auto& rec = tr.records[r];
      out << t << "," << r << "," << format_double(tr.ladder[r]) << "," << rec.point.chart << ",\"";
      for (size_t k = 0; k < rec.point.coords.size(); ++k)
        out << (k ? " " : "") << format_double(rec.point.coords[k]);
      out << "\"," << format_double(rec.value) << "," << rec.index << "," << rec.nullity << ",\"";
      for (size_t k = 0; k < rec.spectrum.size(); ++k)
        out << (k ? " " : "") << format_double(rec.spectrum[k]);
      out << "\"\n";
    }
  }
}

void write_mesh_csv(const std::string& path, const ThimbleMesh& mesh) {
  std::ofstream out(path);
  out << "base_t,transverse";
  if (!mesh.points.empty() && !mesh.points.front().empty())
    for (size_t k = 0; k < mesh.points.front().front().coords.size(); ++k) out << ",c" << k;
  out << ",lagrangian_residual,omega_scale\n";
  for (size_t j = 0; j < mesh.points.size(); ++j)
    for (int k = 0; k < mesh.transverse_count; ++k) {
      if (!mesh.line_ok[k]) continue;
      out << format_double(mesh.base_grid[j]) << "," << k;
      for (double c : mesh.points[j][k].coords) out << "," << format_double(c);
      bool has_cell = j + 1 < mesh.points.size();
      out << "," << format_double(has_cell ? mesh.lagrangian_residual(static_cast<int>(j), k) : 0.0)
          << "," << format_double(has_cell ? mesh.omega_scale(static_cast<int>(j), k) : 0.0) << "\n";
    }
}

}  // namespace wlab
