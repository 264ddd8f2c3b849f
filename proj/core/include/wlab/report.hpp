#pragma once

// Check rows and report writers. Every row carries a stable anchor id (the
// registry lives in the README) so reports stay mechanically traceable.
// Reports are bit-identical for identical (config, seed, platform): no
// timestamps, fixed float formatting.

#include <string>
#include <vector>

#include "wlab/continuation.hpp"
#include "wlab/critfind.hpp"
#include "wlab/fibration.hpp"

namespace wlab {

struct CheckRow {
  std::string name;
  std::string anchor;
  double residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
};

struct Report {
  std::vector<CheckRow> checks;

  void add(std::string name, std::string anchor, double residual, double threshold,
           std::string detail = "") {
    CheckRow r;
    r.name = std::move(name);
    r.anchor = std::move(anchor);
    r.residual = residual;
    r.threshold = threshold;
    r.pass = residual <= threshold;
    r.detail = std::move(detail);
    checks.push_back(std::move(r));
  }

  void add_flag(std::string name, std::string anchor, bool pass, std::string detail = "") {
    CheckRow r;
    r.name = std::move(name);
    r.anchor = std::move(anchor);
    r.residual = pass ? 0.0 : 1.0;
    r.threshold = 0.5;
    r.pass = pass;
    r.detail = std::move(detail);
    checks.push_back(std::move(r));
  }

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// canonical float formatting used across all report files
std::string format_double(double x);

// summary.json: {schema_version, resolved_config, checks: [...], pass}
void write_summary_json(const std::string& path, const std::string& resolved_config_json,
                        const Report& report);

void write_crit_csv(const std::string& path, const Scene& scene,
                    const std::vector<CritRecord>& records);

void write_crit_json(const std::string& path, const Scene& scene,
                     const std::vector<CritRecord>& records);

void write_tracks_csv(const std::string& path, const std::vector<Track>& tracks);

// per-track slope fits, limit classes, and threshold rungs
void write_tracks_json(const std::string& path, const std::vector<Track>& tracks);

void write_mesh_csv(const std::string& path, const ThimbleMesh& mesh);

}  // namespace wlab
