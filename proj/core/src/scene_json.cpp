#include <complex>
#include <string>

#include <json.hpp>

#include "wlab/scene.hpp"

// JSON scene descriptions: either {"builtin": <name>, ...params} or
// {"custom": {...}} assembling an affine scene from expression primitives.
// Parsing is strict: unknown keys are rejected.

namespace wlab {

namespace {

using nlohmann::json;

void ensure_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw Error(Errc::ConfigError, "unknown key '" + it.key() + "' in " + where);
  }
}

std::complex<double> parse_complex(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw Error(Errc::ConfigError, "expected number or [re, im] in " + where);
}

Poly parse_poly(const json& j, int nvars, const std::string& where) {
  if (!j.is_array()) throw Error(Errc::ConfigError, where + ": polynomial must be a monomial list");
  Poly p;
  for (const auto& mj : j) {
    ensure_keys(mj, {"c", "powers"}, where);
    Monomial m;
    m.coeff = parse_complex(mj.at("c"), where);
    m.powers.assign(nvars, 0);
    const auto& pw = mj.at("powers");
    if (!pw.is_array() || static_cast<int>(pw.size()) != nvars)
      throw Error(Errc::ConfigError, where + ": powers must list one exponent per complex variable");
    for (int k = 0; k < nvars; ++k) {
      int e = pw[k].get<int>();
      if (e < 0) throw Error(Errc::ConfigError, where + ": negative exponent");
      m.powers[k] = e;
    }
    p.terms.push_back(std::move(m));
  }
  return p;
}

RealExpr parse_expr(const json& j, int nvars, const std::string& where) {
  if (j.is_number()) return RealExpr::constant(j.get<double>());
  if (!j.is_object() || j.size() != 1)
    throw Error(Errc::ConfigError, where + ": expression node must be a single-key object");
  const std::string key = j.begin().key();
  const json& v = j.begin().value();
  if (key == "const") return RealExpr::constant(v.get<double>());
  if (key == "coord") {
    int k = v.get<int>();
    if (k < 0 || k >= 2 * nvars) throw Error(Errc::ConfigError, where + ": coord index out of range");
    return RealExpr::coordinate(k);
  }
  if (key == "abs2") return RealExpr::abs2(parse_poly(v, nvars, where + ".abs2"));
  if (key == "log") return RealExpr::log_of(parse_expr(v, nvars, where + ".log"));
  if (key == "sum") {
    std::vector<RealExpr> parts;
    for (const auto& e : v) parts.push_back(parse_expr(e, nvars, where + ".sum"));
    return RealExpr::sum(std::move(parts));
  }
  if (key == "scale") {
    if (!v.is_array() || v.size() != 2) throw Error(Errc::ConfigError, where + ": scale needs [c, expr]");
    return RealExpr::scale(v[0].get<double>(), parse_expr(v[1], nvars, where + ".scale"));
  }
  if (key == "prod") {
    if (!v.is_array() || v.size() != 2) throw Error(Errc::ConfigError, where + ": prod needs [a, b]");
    return RealExpr::prod(parse_expr(v[0], nvars, where + ".prod"),
                          parse_expr(v[1], nvars, where + ".prod"));
  }
  throw Error(Errc::ConfigError, where + ": unknown expression node '" + key + "'");
}

AffineSubspace parse_subspace(const json& j, int dim, const std::string& where) {
  ensure_keys(j, {"chart", "base", "basis", "tag"}, where);
  AffineSubspace s;
  s.chart = j.value("chart", 0);
  const auto& base = j.at("base");
  if (static_cast<int>(base.size()) != dim)
    throw Error(Errc::ConfigError, where + ": base must have 2n entries");
  for (const auto& x : base) s.base.push_back(x.get<double>());
  if (j.contains("basis"))
    for (const auto& bj : j.at("basis")) {
      Vec b;
      for (const auto& x : bj) b.push_back(x.get<double>());
      if (static_cast<int>(b.size()) != dim)
        throw Error(Errc::ConfigError, where + ": basis vector must have 2n entries");
      s.basis.push_back(std::move(b));
    }
  s.basis = orthonormalize(s.basis);
  return s;
}

Scene parse_custom(const json& j) {
  ensure_keys(j, {"name", "n", "s0", "h", "g", "box_radius", "stratum", "branches"}, "custom scene");
  Scene sc;
  sc.atlas = AtlasKind::Affine;
  sc.name = j.value("name", std::string("custom"));
  sc.n = j.at("n").get<int>();
  if (sc.n < 1 || sc.n > 6) throw Error(Errc::BadParams, "custom scene needs 1 <= n <= 6");
  sc.box_radius = j.value("box_radius", 1.5);

  ChartData cd;
  cd.s0 = parse_poly(j.at("s0"), sc.n, "s0");
  cd.h = parse_poly(j.at("h"), sc.n, "h");
  cd.g = parse_expr(j.at("g"), sc.n, "g");
  sc.charts.push_back(std::move(cd));

  if (j.contains("stratum"))
    for (const auto& sj : j.at("stratum")) sc.stratum.push_back(parse_subspace(sj, 2 * sc.n, "stratum"));
  if (j.contains("branches"))
    for (const auto& bj : j.at("branches")) {
      sc.branches.push_back(parse_subspace(bj, 2 * sc.n, "branches"));
      sc.branch_tag.push_back(bj.value("tag", static_cast<int>(sc.branch_tag.size()) % 2));
    }
  return sc;
}

}  // namespace

Scene scene_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw Error(Errc::ConfigError, std::string("scene JSON parse error: ") + e.what());
  }

  Scene sc;
  if (j.contains("custom")) {
    ensure_keys(j, {"custom"}, "scene");
    sc = parse_custom(j.at("custom"));
  } else {
    ensure_keys(j, {"builtin", "n", "a", "psi"}, "scene");
    SceneParams params;
    if (j.contains("n")) params.n = j.at("n").get<int>();
    if (j.contains("a"))
      for (const auto& aj : j.at("a")) params.a.push_back(parse_complex(aj, "a"));
    if (j.contains("psi"))
      for (const auto& pj : j.at("psi")) params.psi.push_back(pj.get<double>());
    sc = builtin_scene(j.at("builtin").get<std::string>(), params);
    return sc;  // builtin_scene already calibrates
  }
  calibrate_dc_sign(sc);
  return sc;
}

}  // namespace wlab
