#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "porotr/biot_ops.hpp"
#include "porotr/error.hpp"
#include "porotr/forward.hpp"
#include "porotr/io.hpp"
#include "porotr/medium.hpp"
#include "porotr/phantom.hpp"
#include "porotr/reversal.hpp"

namespace porotr {

using json = nlohmann::ordered_json;

/// A coefficient given as a constant or as a path to a field file sampled on
/// the padded lattice.
using Coefficient = std::variant<double, std::string>;

struct PhantomConfig {
  std::string kind = "gaussian";
  std::vector<double> center;
  double width = 0.1;
  double amplitude = 1.0;
  std::string component = "fs0";
  bool operator==(const PhantomConfig&) const = default;
};

inline const std::vector<std::string> kSuiteNames = {
    "algebra", "self-adjoint", "energy", "finite-speed", "gauge", "extension",
    "contraction", "reconstruction", "delta-prime", "uc"};

struct Config {
  int dim = 2;
  std::vector<double> omega_min, omega_max;
  double h = 0.0;
  std::optional<int> pad_cells;
  std::array<Coefficient, 7> medium{};
  std::optional<double> T;  // empty: escape-time heuristic
  double cfl = 0.5;
  std::string bc_mode = "zero-dirichlet";
  double floor = 1e-6;
  double gradient_bound = 1e3;
  std::vector<PhantomConfig> phantoms;
  std::string source = "delta";
  int max_iter = 20;
  double tol = 1e-3;
  double extension_tol = 1e-10;
  std::string trace_path;
  std::string out_dir = "out";
  int snapshot_stride = 0;
  int energy_stride = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> suites = kSuiteNames;

  bool operator==(const Config&) const = default;
};

namespace detail {

inline int line_of(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    if (key.empty() || key[0] == '[') continue;
    const std::size_t p = text.find('"' + key + '"', pos);
    if (p == std::string::npos) break;
    pos = p;
  }
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string p;
    for (const auto& k : path) p += (k.empty() || k[0] == '[' || p.empty()) ? k : "." + k;
    throw ConfigError("config: " + (p.empty() ? std::string("<root>") : p) + ": " + msg + " (line " +
                      std::to_string(line_of(text_, path)) + ")");
  }

  void only(const json& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) {
        auto p = path;
        p.push_back(it.key());
        fail(p, "unknown key");
      }
  }

  double number(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  int integer(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
  }

  std::string string(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> vec(const json& v, const std::vector<std::string>& path, int n) const {
    if (!v.is_array() || static_cast<int>(v.size()) != n)
      fail(path, "expected an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto p = path;
      p.push_back("[" + std::to_string(i) + "]");
      out.push_back(number(v[i], p));
    }
    return out;
  }

 private:
  const std::string& text_;
};

}  // namespace detail

/// Strict parse of a JSON configuration; relative file paths are resolved
/// against base_dir and must exist.
inline Config parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  detail::ConfigReader R(text);
  R.only(j, {}, {"dim", "grid", "medium", "T", "cfl", "bc_mode", "hypotheses", "phantom", "source",
                 "reconstruction", "output", "seed", "verify"});
  Config c;
  auto resolve = [&](const std::string& p, const std::vector<std::string>& path) {
    std::filesystem::path fp(p);
    if (fp.is_relative() && !base_dir.empty()) fp = base_dir / fp;
    if (!std::filesystem::exists(fp)) R.fail(path, "file not found: " + fp.string());
    return fp.string();
  };

  if (j.contains("dim")) {
    c.dim = R.integer(j["dim"], {"dim"});
    if (c.dim != 2 && c.dim != 3) R.fail({"dim"}, "dim must be 2 or 3");
  }
  if (!j.contains("grid")) R.fail({"grid"}, "missing required key");
  {
    const json& g = j["grid"];
    R.only(g, {"grid"}, {"omega_min", "omega_max", "h", "pad_cells"});
    for (const char* k : {"omega_min", "omega_max", "h"})
      if (!g.contains(k)) R.fail({"grid", k}, "missing required key");
    c.omega_min = R.vec(g["omega_min"], {"grid", "omega_min"}, c.dim);
    c.omega_max = R.vec(g["omega_max"], {"grid", "omega_max"}, c.dim);
    c.h = R.number(g["h"], {"grid", "h"});
    if (!(c.h > 0.0)) R.fail({"grid", "h"}, "h must be positive");
    for (int a = 0; a < c.dim; ++a) {
      const double cells = (c.omega_max[a] - c.omega_min[a]) / c.h;
      if (!(cells > 0.0) || std::abs(cells - std::round(cells)) > 1e-9 * std::max(1.0, cells))
        R.fail({"grid", "h"}, "Omega extent must be a positive integer multiple of h");
    }
    if (g.contains("pad_cells")) {
      c.pad_cells = R.integer(g["pad_cells"], {"grid", "pad_cells"});
      if (*c.pad_cells < 0) R.fail({"grid", "pad_cells"}, "pad_cells must be non-negative");
    }
  }
  if (!j.contains("medium")) R.fail({"medium"}, "missing required key");
  {
    const json& m = j["medium"];
    R.only(m, {"medium"}, std::set<std::string>(kModuliNames.begin(), kModuliNames.end()));
    for (int k = 0; k < 7; ++k) {
      const std::string name = kModuliNames[k];
      if (!m.contains(name)) R.fail({"medium", name}, "missing required key");
      const json& v = m[name];
      if (v.is_number())
        c.medium[k] = v.get<double>();
      else if (v.is_string())
        c.medium[k] = resolve(v.get<std::string>(), {"medium", name});
      else
        R.fail({"medium", name}, "expected a number or a field-file path");
    }
    const bool from_file = std::any_of(c.medium.begin(), c.medium.end(),
                                       [](const Coefficient& x) { return std::holds_alternative<std::string>(x); });
    if (from_file && !c.pad_cells) R.fail({"grid", "pad_cells"}, "pad_cells is required when coefficients come from files");
  }
  if (!j.contains("T")) R.fail({"T"}, "missing required key");
  if (j["T"].is_string()) {
    if (j["T"].get<std::string>() != "escape") R.fail({"T"}, "T must be a number or \"escape\"");
  } else {
    c.T = R.number(j["T"], {"T"});
    if (!(*c.T > 0.0)) R.fail({"T"}, "T must be positive");
  }
  if (j.contains("cfl")) {
    c.cfl = R.number(j["cfl"], {"cfl"});
    if (!(c.cfl > 0.0 && c.cfl <= 1.0)) R.fail({"cfl"}, "cfl ∈ (0,1] required");
  }
  if (j.contains("bc_mode")) {
    c.bc_mode = R.string(j["bc_mode"], {"bc_mode"});
    try {
      parse_bc_mode(c.bc_mode);
    } catch (const InvalidInput& e) {
      R.fail({"bc_mode"}, e.what());
    }
  }
  if (j.contains("hypotheses")) {
    const json& h = j["hypotheses"];
    R.only(h, {"hypotheses"}, {"floor", "gradient_bound"});
    if (h.contains("floor")) c.floor = R.number(h["floor"], {"hypotheses", "floor"});
    if (h.contains("gradient_bound")) c.gradient_bound = R.number(h["gradient_bound"], {"hypotheses", "gradient_bound"});
    if (!(c.floor > 0.0)) R.fail({"hypotheses", "floor"}, "floor must be positive");
    if (!(c.gradient_bound > 0.0)) R.fail({"hypotheses", "gradient_bound"}, "gradient_bound must be positive");
  }
  if (j.contains("phantom")) {
    json list = j["phantom"];
    if (list.is_object()) list = json::array({list});
    if (!list.is_array()) R.fail({"phantom"}, "expected an object or an array of objects");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::vector<std::string> base{"phantom", "[" + std::to_string(i) + "]"};
      auto at = [&](const char* k) {
        auto p = base;
        p.push_back(k);
        return p;
      };
      const json& p = list[i];
      R.only(p, base, {"kind", "center", "width", "amplitude", "component"});
      PhantomConfig pc;
      if (p.contains("kind")) pc.kind = R.string(p["kind"], at("kind"));
      try {
        parse_phantom_kind(pc.kind);
      } catch (const InvalidInput& e) {
        R.fail(at("kind"), e.what());
      }
      if (!p.contains("center")) R.fail(at("center"), "missing required key");
      pc.center = R.vec(p["center"], at("center"), c.dim);
      if (p.contains("width")) pc.width = R.number(p["width"], at("width"));
      if (!(pc.width > 0.0)) R.fail(at("width"), "width must be positive");
      if (p.contains("amplitude")) pc.amplitude = R.number(p["amplitude"], at("amplitude"));
      pc.component = pc.kind == "divfree-gauge" ? "gauge" : "fs0";
      if (p.contains("component")) pc.component = R.string(p["component"], at("component"));
      try {
        PhantomTarget::parse(pc.component, c.dim);
      } catch (const InvalidInput& e) {
        R.fail(at("component"), e.what());
      }
      if ((pc.kind == "divfree-gauge") != (pc.component == "gauge"))
        R.fail(at("component"), "component 'gauge' goes with kind 'divfree-gauge' only");
      c.phantoms.push_back(pc);
    }
  }
  if (j.contains("source")) {
    c.source = R.string(j["source"], {"source"});
    if (c.source != "delta" && c.source != "delta-prime") R.fail({"source"}, "source must be delta or delta-prime");
  }
  if (j.contains("reconstruction")) {
    const json& r = j["reconstruction"];
    R.only(r, {"reconstruction"}, {"max_iter", "tol", "extension_tol", "trace"});
    if (r.contains("max_iter")) c.max_iter = R.integer(r["max_iter"], {"reconstruction", "max_iter"});
    if (c.max_iter < 1) R.fail({"reconstruction", "max_iter"}, "max_iter must be at least 1");
    if (r.contains("tol")) c.tol = R.number(r["tol"], {"reconstruction", "tol"});
    if (!(c.tol > 0.0)) R.fail({"reconstruction", "tol"}, "tol must be positive");
    if (r.contains("extension_tol")) c.extension_tol = R.number(r["extension_tol"], {"reconstruction", "extension_tol"});
    if (!(c.extension_tol > 0.0)) R.fail({"reconstruction", "extension_tol"}, "extension_tol must be positive");
    if (r.contains("trace")) c.trace_path = resolve(R.string(r["trace"], {"reconstruction", "trace"}), {"reconstruction", "trace"});
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    R.only(o, {"output"}, {"dir", "snapshot_stride", "energy_stride"});
    if (o.contains("dir")) c.out_dir = R.string(o["dir"], {"output", "dir"});
    if (o.contains("snapshot_stride")) c.snapshot_stride = R.integer(o["snapshot_stride"], {"output", "snapshot_stride"});
    if (o.contains("energy_stride")) c.energy_stride = R.integer(o["energy_stride"], {"output", "energy_stride"});
    if (c.snapshot_stride < 0) R.fail({"output", "snapshot_stride"}, "must be non-negative");
    if (c.energy_stride < 0) R.fail({"output", "energy_stride"}, "must be non-negative");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) R.fail({"seed"}, "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("verify")) {
    const json& v = j["verify"];
    R.only(v, {"verify"}, {"suites"});
    if (v.contains("suites")) {
      if (!v["suites"].is_array()) R.fail({"verify", "suites"}, "expected an array of suite names");
      c.suites.clear();
      for (std::size_t i = 0; i < v["suites"].size(); ++i) {
        const std::string s = R.string(v["suites"][i], {"verify", "suites", "[" + std::to_string(i) + "]"});
        if (std::find(kSuiteNames.begin(), kSuiteNames.end(), s) == kSuiteNames.end())
          R.fail({"verify", "suites", "[" + std::to_string(i) + "]"}, "unknown suite '" + s + "'");
        c.suites.push_back(s);
      }
    }
  }
  return c;
}

/// Fully resolved configuration as JSON; parse_config of its dump yields an
/// equal Config.
inline json to_json(const Config& c) {
  json j;
  j["dim"] = c.dim;
  j["grid"] = {{"omega_min", c.omega_min}, {"omega_max", c.omega_max}, {"h", c.h}};
  if (c.pad_cells) j["grid"]["pad_cells"] = *c.pad_cells;
  json m = json::object();
  for (int k = 0; k < 7; ++k)
    std::visit([&](const auto& v) { m[kModuliNames[k]] = v; }, c.medium[k]);
  j["medium"] = m;
  if (c.T)
    j["T"] = *c.T;
  else
    j["T"] = "escape";
  j["cfl"] = c.cfl;
  j["bc_mode"] = c.bc_mode;
  j["hypotheses"] = {{"floor", c.floor}, {"gradient_bound", c.gradient_bound}};
  json ph = json::array();
  for (const auto& p : c.phantoms)
    ph.push_back({{"kind", p.kind}, {"center", p.center}, {"width", p.width}, {"amplitude", p.amplitude},
                  {"component", p.component}});
  j["phantom"] = ph;
  j["source"] = c.source;
  j["reconstruction"] = {{"max_iter", c.max_iter}, {"tol", c.tol}, {"extension_tol", c.extension_tol}};
  if (!c.trace_path.empty()) j["reconstruction"]["trace"] = c.trace_path;
  j["output"] = {{"dir", c.out_dir}, {"snapshot_stride", c.snapshot_stride}, {"energy_stride", c.energy_stride}};
  j["seed"] = c.seed;
  j["verify"] = {{"suites", c.suites}};
  return j;
}

inline Config load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_all(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

// ---------------------------------------------------------------------------
// From Config to solver inputs

template <int D>
struct Problem {
  SimConfig<D> sim;
  std::vector<PhantomSpec<D>> phantoms;
  SourceKind source = SourceKind::delta;
  double c_max = 0.0;
  bool escape_T = false;
};

template <int D>
std::array<double, D> to_array(const std::vector<double>& v) {
  std::array<double, D> a{};
  for (int i = 0; i < D; ++i) a[i] = v[i];
  return a;
}

/// Samples the medium, validates H1-H3, fixes T and the padding.
template <int D>
Problem<D> build_problem(const Config& c) {
  if (c.dim != D) throw ConfigError("config: dim: dimension mismatch");
  Problem<D> p;
  GridSpec<D> g;
  g.omega_min = to_array<D>(c.omega_min);
  g.omega_max = to_array<D>(c.omega_max);
  g.h = c.h;
  g.pad_cells = c.pad_cells.value_or(0);

  auto constant_moduli = [&]() {
    Moduli mo;
    double* dst[7] = {&mo.rho11, &mo.rho12, &mo.rho22, &mo.mu, &mo.lambda, &mo.q, &mo.r};
    for (int k = 0; k < 7; ++k) *dst[k] = std::get<double>(c.medium[k]);
    return mo;
  };
  const bool all_constant = std::all_of(c.medium.begin(), c.medium.end(),
                                        [](const Coefficient& x) { return std::holds_alternative<double>(x); });
  if (all_constant) {
    // padding depends on T and c_max only
    const MediumParams probe = MediumParams::constant(1, constant_moduli());
    const ValidationReport vr = validate_hypotheses(constant_moduli(), c.floor);
    if (!vr.pass) throw HypothesisViolation("medium violates the hypotheses: " + vr.summary());
    p.c_max = wave_speed_matrix(probe).c_max;
    if (c.T) {
      p.sim.T = *c.T;
    } else {
      p.sim.T = escape_time(g, probe);
      p.escape_T = true;
    }
    if (!c.pad_cells) g.pad_cells = required_padding(g.h, p.c_max, p.sim.T);
    g.validate();
    p.sim.medium = MediumParams::constant(g.lattice().size(), constant_moduli());
  } else {
    g.validate();
    const Lattice<D> L = g.lattice();
    MediumParams m = MediumParams::constant(L.size(), Moduli{});
    auto fields = m.fields();
    for (int k = 0; k < 7; ++k) {
      if (std::holds_alternative<double>(c.medium[k])) {
        std::fill(fields[k]->begin(), fields[k]->end(), std::get<double>(c.medium[k]));
      } else {
        const NamedFields nf = read_fields(std::get<std::string>(c.medium[k]), L);
        if (nf.fields.size() != 1)
          throw ConfigError("config: medium." + std::string(kModuliNames[k]) + ": field file must hold one field");
        *fields[k] = nf.fields[0];
      }
    }
    const ValidationReport vr = validate_hypotheses(L, m, c.floor, c.gradient_bound);
    if (!vr.pass) throw HypothesisViolation("medium violates the hypotheses: " + vr.summary());
    p.c_max = wave_speed_matrix(m).c_max;
    if (c.T) {
      p.sim.T = *c.T;
    } else {
      p.sim.T = escape_time(g.omega(), restrict_medium(L, m, g.omega_box()));
      p.escape_T = true;
    }
    p.sim.medium = std::move(m);
  }
  p.sim.grid = g;
  p.sim.cfl = c.cfl;
  p.sim.bc = parse_bc_mode(c.bc_mode);
  p.sim.snapshot_stride = c.snapshot_stride;
  p.sim.energy_stride = c.energy_stride;
  p.source = c.source == "delta-prime" ? SourceKind::delta_prime : SourceKind::delta;
  for (const auto& pc : c.phantoms) {
    PhantomSpec<D> s;
    s.kind = parse_phantom_kind(pc.kind);
    s.center = to_array<D>(pc.center);
    s.width = pc.width;
    s.amplitude = pc.amplitude;
    s.target = PhantomTarget::parse(pc.component, D);
    p.phantoms.push_back(s);
  }
  return p;
}

/// Sum of the configured phantoms on the padded lattice.
template <int D>
SourceSpec<D> build_source(const Problem<D>& p) {
  SourceSpec<D> src{Pair<D>::zeros(p.sim.grid.lattice().size()), p.source};
  for (const auto& s : p.phantoms) axpy(1.0, make_phantom(s, p.sim.grid, p.source).f, src.f);
  return src;
}

}  // namespace porotr
