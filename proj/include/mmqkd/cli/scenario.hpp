#pragma once

// Scenario files: a strict JSON schema with compiled-in presets for the KTP
// source rows and the Gobby 2004 detector. Every field has a default, so a
// scenario can be as small as {"source": "sigma-4nm"}.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmqkd/error.hpp"
#include "mmqkd/keyrate.hpp"
#include "mmqkd/pdc_source.hpp"

namespace mmqkd::cli {

using nlohmann::json;

/// Schmidt weights of a waveguided PPKTP source for pump widths of
/// 1, 2, 4 and 8 nm.
inline const std::map<std::string, std::vector<double>>& source_presets() {
  static const std::map<std::string, std::vector<double>> presets{
      {"sigma-1nm", {0.959, 0.194, 0.152, 0.098, 0.088, 0.033, 0.032, 0.014}},
      {"sigma-2nm", {0.871, 0.463, 0.140, 0.064, 0.054, 0.028, 0.001}},
      {"sigma-4nm",
       {0.690, 0.555, 0.383, 0.222, 0.107, 0.054, 0.050, 0.044, 0.023, 0.012, 0.004, 0.003, 0.001}},
      {"sigma-8nm", {0.511, 0.478, 0.427, 0.364, 0.296, 0.228, 0.167, 0.117, 0.078, 0.056,
                     0.047, 0.037, 0.023, 0.015, 0.014, 0.011, 0.006, 0.003, 0.001}},
      {"two-mode", {std::sqrt(0.75), std::sqrt(0.25)}},
      {"single-mode", {1.0}},
  };
  return presets;
}

struct Scenario {
  std::string name = "unnamed";
  std::string source_label = "custom";
  std::vector<double> lambdas;  // as given, before normalization
  DetectorParams detector = DetectorParams::gobby2004();
  ProtocolParams protocol;
  double mu_s = 0.6;  // signal mean for `bounds` and `dist`
  NumericOptions numerics;
  std::vector<double> alphas;

  ModeWeights weights() const { return ModeWeights(lambdas); }
  KeyRateScenario key_rate_scenario() const { return KeyRateScenario{weights(), detector, protocol, numerics}; }
};

namespace detail {

inline std::vector<double> default_alphas() {
  std::vector<double> a;
  for (int i = 0; i <= 60; ++i) a.push_back(i);
  return a;
}

class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail("", "expected an object");
    for (const auto& [key, value] : obj_.items()) {
      (void)value;
      seen_.insert(key);
    }
  }

  void number(const char* key, double& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(key, "must be finite");
  }

  void count(const char* key, std::size_t& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected a non-negative integer");
    out = v.get<std::size_t>();
  }

  void text(const char* key, std::string& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    out = v.get<std::string>();
  }

  void numbers(const char* key, std::vector<double>& out) {
    if (!take(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    out.clear();
    for (const auto& x : v) {
      if (!x.is_number()) fail(key, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
  }

  const json* child(const char* key) {
    if (!take(key)) return nullptr;
    return &obj_.at(key);
  }

  bool has(const char* key) const { return obj_.contains(key); }

  void finish() const {
    if (!seen_.empty()) fail(*seen_.begin(), "unknown key");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const std::string where = key.empty() ? path_ : path_ + "." + key;
    throw ArgumentError(where + ": " + what);
  }

  std::string path(const char* key) const { return path_ + "." + key; }

 private:
  bool take(const char* key) {
    if (!obj_.contains(key)) return false;
    seen_.erase(key);
    return true;
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_source(const json& node, const std::string& path, Scenario& sc) {
  std::string preset;
  if (node.is_string()) {
    preset = node.get<std::string>();
  } else {
    ObjectReader r(node, path);
    r.text("preset", preset);
    if (preset.empty()) {
      if (!r.has("lambdas")) r.fail("lambdas", "required when no preset is given");
      r.numbers("lambdas", sc.lambdas);
      sc.source_label = "custom";
    }
    r.finish();
  }
  if (!preset.empty()) {
    const auto it = source_presets().find(preset);
    if (it == source_presets().end()) throw ArgumentError(path + ": unknown source preset '" + preset + "'");
    sc.lambdas = it->second;
    sc.source_label = preset;
  }
  try {
    (void)ModeWeights(sc.lambdas);
  } catch (const ArgumentError& e) {
    throw ArgumentError(path + ".lambdas: " + e.what());
  }
}

inline void read_detector(const json& node, const std::string& path, Scenario& sc) {
  if (node.is_string()) {
    if (node.get<std::string>() != "gobby2004") {
      throw ArgumentError(path + ": unknown detector preset '" + node.get<std::string>() + "'");
    }
    sc.detector = DetectorParams::gobby2004();
    return;
  }
  ObjectReader r(node, path);
  std::string preset;
  r.text("preset", preset);
  if (!preset.empty() && preset != "gobby2004") r.fail("preset", "unknown detector preset '" + preset + "'");
  // Explicit fields override the preset (or the default detector).
  r.number("p_dark", sc.detector.p_dark);
  r.number("e_det", sc.detector.e_det);
  r.number("eta_det", sc.detector.eta_det);
  r.number("e0", sc.detector.e0);
  r.finish();
  try {
    sc.detector.validate();
  } catch (const ArgumentError& e) {
    throw ArgumentError(path + ": " + e.what());
  }
}

inline void read_protocol(const json& node, const std::string& path, Scenario& sc) {
  ObjectReader r(node, path);
  r.number("q", sc.protocol.q);
  r.number("f", sc.protocol.f);
  r.number("mu_d", sc.protocol.mu_d);
  r.number("mu_s", sc.mu_s);
  r.number("mu_s_min", sc.protocol.mu_min);
  r.number("mu_s_max", sc.protocol.mu_max);
  r.number("mu_s_step", sc.protocol.mu_step);
  r.number("refine_tol", sc.protocol.refine_tol);
  r.finish();
}

inline void read_numerics(const json& node, const std::string& path, Scenario& sc) {
  ObjectReader r(node, path);
  r.number("eps_dist", sc.numerics.dist.eps);
  r.count("n_cap", sc.numerics.dist.n_cap);
  r.number("eps_enum", sc.numerics.eps_enum);
  r.count("event_budget", sc.numerics.event_budget);
  r.number("iter_tol", sc.numerics.iter.tol);
  r.count("max_iter", sc.numerics.iter.max_iter);
  r.finish();
}

inline void read_sweep(const json& node, const std::string& path, Scenario& sc) {
  ObjectReader r(node, path);
  if (r.has("alphas")) {
    if (r.has("alpha_min") || r.has("alpha_max") || r.has("alpha_step")) {
      r.fail("alphas", "give either an explicit list or a min/max/step range");
    }
    r.numbers("alphas", sc.alphas);
  } else {
    double lo = 0.0, hi = 60.0, step = 1.0;
    r.number("alpha_min", lo);
    r.number("alpha_max", hi);
    r.number("alpha_step", step);
    if (!(step > 0.0) || hi < lo) r.fail("alpha_step", "range needs alpha_min <= alpha_max and a positive step");
    sc.alphas.clear();
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) sc.alphas.push_back(lo + static_cast<double>(i) * step);
  }
  r.finish();
}

inline void validate(const Scenario& sc) {
  const auto wrap = [](const char* field, auto&& fn) {
    try {
      fn();
    } catch (const ArgumentError& e) {
      throw ArgumentError(std::string("scenario.") + field + ": " + e.what());
    }
  };
  wrap("protocol", [&] { sc.protocol.validate(); });
  wrap("protocol.mu_s", [&] {
    mmqkd::detail::require(std::isfinite(sc.mu_s) && sc.mu_s >= 0.0, "must be >= 0");
  });
  wrap("numerics", [&] {
    mmqkd::detail::require(sc.numerics.dist.eps > 0.0 && sc.numerics.dist.n_cap >= 2, "eps_dist > 0, n_cap >= 2");
    mmqkd::detail::require(sc.numerics.eps_enum > 0.0 && sc.numerics.event_budget > 0,
                           "eps_enum and event_budget must be positive");
    mmqkd::detail::require(sc.numerics.iter.tol > 0.0 && sc.numerics.iter.max_iter > 0,
                           "iter_tol and max_iter must be positive");
  });
  wrap("sweep.alphas", [&] {
    for (double a : sc.alphas) mmqkd::detail::require(std::isfinite(a) && a >= 0.0, "attenuations must be >= 0");
    mmqkd::detail::require(std::is_sorted(sc.alphas.begin(), sc.alphas.end()), "attenuations must be ascending");
  });
}

}  // namespace detail

/// Built-in scenario for a preset id, with all defaults applied.
inline Scenario preset_scenario(const std::string& id) {
  const auto it = source_presets().find(id);
  if (it == source_presets().end()) throw ArgumentError("unknown scenario preset '" + id + "'");
  Scenario sc;
  sc.name = id;
  sc.source_label = id;
  sc.lambdas = it->second;
  sc.alphas = detail::default_alphas();
  if (id == "two-mode") {
    // Intensities at which single photons occupy the modes 70:30 (decoy)
    // and 60:40 (signal).
    const ModeWeights w(sc.lambdas);
    sc.protocol.mu_d = mean_for_leading_occupation(w, 0.7);
    sc.mu_s = mean_for_leading_occupation(w, 0.6);
  }
  return sc;
}

inline Scenario parse_scenario(const json& doc) {
  Scenario sc;
  sc.alphas = detail::default_alphas();
  detail::ObjectReader r(doc, "scenario");
  r.text("name", sc.name);
  const json* source = r.child("source");
  if (source == nullptr) r.fail("source", "required");
  detail::read_source(*source, r.path("source"), sc);
  if (const json* n = r.child("detector")) detail::read_detector(*n, r.path("detector"), sc);
  if (const json* n = r.child("protocol")) detail::read_protocol(*n, r.path("protocol"), sc);
  if (const json* n = r.child("numerics")) detail::read_numerics(*n, r.path("numerics"), sc);
  if (const json* n = r.child("sweep")) detail::read_sweep(*n, r.path("sweep"), sc);
  r.finish();
  detail::validate(sc);
  return sc;
}

/// Loads a preset id or a JSON scenario file.
inline Scenario load_scenario(const std::string& path_or_preset) {
  if (source_presets().count(path_or_preset) != 0) return preset_scenario(path_or_preset);
  std::ifstream in(path_or_preset);
  if (!in) throw ArgumentError("scenario: cannot open '" + path_or_preset + "' (and it is not a preset id)");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("scenario: parse error: ") + e.what());
  }
  return parse_scenario(doc);
}

/// Fully resolved scenario; parse_scenario(to_json(sc)) reproduces `sc`.
inline json to_json(const Scenario& sc) {
  json doc;
  doc["name"] = sc.name;
  doc["source"] = {{"lambdas", sc.lambdas}};
  doc["detector"] = {{"p_dark", sc.detector.p_dark},
                     {"e_det", sc.detector.e_det},
                     {"eta_det", sc.detector.eta_det},
                     {"e0", sc.detector.e0}};
  doc["protocol"] = {{"q", sc.protocol.q},
                     {"f", sc.protocol.f},
                     {"mu_d", sc.protocol.mu_d},
                     {"mu_s", sc.mu_s},
                     {"mu_s_min", sc.protocol.mu_min},
                     {"mu_s_max", sc.protocol.mu_max},
                     {"mu_s_step", sc.protocol.mu_step},
                     {"refine_tol", sc.protocol.refine_tol}};
  doc["numerics"] = {{"eps_dist", sc.numerics.dist.eps},
                     {"n_cap", sc.numerics.dist.n_cap},
                     {"eps_enum", sc.numerics.eps_enum},
                     {"event_budget", sc.numerics.event_budget},
                     {"iter_tol", sc.numerics.iter.tol},
                     {"max_iter", sc.numerics.iter.max_iter}};
  doc["sweep"] = {{"alphas", sc.alphas}};
  return doc;
}

using EnvLookup = std::function<const char*(const char*)>;

/// Numeric tolerance overrides from MMQKD_EPS_DIST, MMQKD_EPS_ENUM,
/// MMQKD_EVENT_BUDGET, MMQKD_ITER_TOL and MMQKD_MAX_ITER.
inline void apply_env_overrides(Scenario& sc, const EnvLookup& lookup = [](const char* k) { return std::getenv(k); }) {
  const auto parse = [&](const char* var, auto& field) {
    const char* raw = lookup(var);
    if (raw == nullptr || *raw == '\0') return;
    std::istringstream is(raw);
    std::remove_reference_t<decltype(field)> value{};
    if (!(is >> value) || !is.eof()) throw ArgumentError(std::string(var) + ": cannot parse '" + raw + "'");
    field = value;
  };
  parse("MMQKD_EPS_DIST", sc.numerics.dist.eps);
  parse("MMQKD_EPS_ENUM", sc.numerics.eps_enum);
  parse("MMQKD_EVENT_BUDGET", sc.numerics.event_budget);
  parse("MMQKD_ITER_TOL", sc.numerics.iter.tol);
  parse("MMQKD_MAX_ITER", sc.numerics.iter.max_iter);
  detail::validate(sc);
}

}  // namespace mmqkd::cli
