#pragma once

// Run configuration: a four-section TOML document ([model], [numerics], [noise],
// [experiment]). The parser accepts the TOML subset the configs use: tables, bare keys,
// numbers, booleans, basic strings and single-line arrays of numbers, with # comments.
// The canonical serialization is what gets hashed and persisted in manifests.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pmred/errors.hpp"
#include "pmred/io.hpp"
#include "pmred/model.hpp"
#include "pmred/reduced.hpp"
#include "pmred/spde.hpp"

namespace pmred {

// ---------------------------------------------------------------------------------------
// TOML subset

using TomlValue = std::variant<double, bool, std::string, std::vector<double>>;
using TomlTable = std::map<std::string, TomlValue>;  // keys are "section.key"

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] == '"' && (j == 0 || s[j - 1] != '\\')) in_string = !in_string;
    if (s[j] == '#' && !in_string) return s.substr(0, j);
  }
  return s;
}

inline std::optional<double> parse_number(std::string_view s) {
  std::string clean;
  for (char c : s)
    if (c != '_') clean.push_back(c);
  if (!clean.empty() && clean[0] == '+') clean.erase(0, 1);
  if (clean == "inf" || clean == "nan" || clean == "-inf") return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(clean.data(), clean.data() + clean.size(), v);
  if (res.ec != std::errc() || res.ptr != clean.data() + clean.size()) return std::nullopt;
  return v;
}

inline bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

}  // namespace detail

inline TomlTable parse_toml(std::string_view text) {
  TomlTable table;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  const auto fail = [&](const std::string& why) -> ConfigInvalid {
    return ConfigInvalid("config", "line " + std::to_string(line_no) + ": " + why);
  };
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated table header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (!detail::valid_key(section)) throw fail("bad table name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto val = detail::trim(line.substr(eq + 1));
    if (!detail::valid_key(key)) throw fail("bad key '" + std::string(key) + "'");
    if (section.empty()) throw fail("key '" + std::string(key) + "' outside any table");
    const std::string full = section + "." + std::string(key);
    if (table.contains(full)) throw fail("duplicate key '" + full + "'");
    if (val.empty()) throw fail("missing value for '" + full + "'");

    if (val.front() == '"') {
      if (val.size() < 2 || val.back() != '"') throw fail("unterminated string");
      std::string s;
      for (std::size_t j = 1; j + 1 < val.size(); ++j) {
        if (val[j] == '\\' && j + 2 < val.size()) {
          const char c = val[++j];
          s.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c);
        } else {
          s.push_back(val[j]);
        }
      }
      table[full] = s;
    } else if (val == "true" || val == "false") {
      table[full] = val == "true";
    } else if (val.front() == '[') {
      if (val.back() != ']') throw fail("arrays must be written on one line");
      std::vector<double> xs;
      auto body = detail::trim(val.substr(1, val.size() - 2));
      while (!body.empty()) {
        const auto comma = body.find(',');
        const auto item = detail::trim(body.substr(0, comma));
        if (!item.empty()) {
          const auto v = detail::parse_number(item);
          if (!v) throw fail("array items must be numbers in '" + full + "'");
          xs.push_back(*v);
        }
        if (comma == std::string_view::npos) break;
        body = body.substr(comma + 1);
      }
      table[full] = xs;
    } else {
      const auto v = detail::parse_number(val);
      if (!v) throw fail("cannot parse value of '" + full + "'");
      table[full] = *v;
    }
  }
  return table;
}

// ---------------------------------------------------------------------------------------
// RunConfig

struct RunConfig {
  struct ModelSection {
    double nu = 2.0;
    std::optional<double> lambda;
    std::optional<double> lambda_ratio;  // lambda / lambda_c
    double gamma = 0.5;
    std::optional<double> length;
    std::optional<double> length_over_pi;
    int m = 2;
    int n_noise = 10;
    int n_galerkin = 32;
    std::vector<double> sigma{3.0};  // one value broadcasts to all forced modes
    std::vector<double> u0;          // initial modal coefficients, zero-padded
  } model;

  struct NumericsSection {
    double dt = 0.01;
    double t_end = 1000.0;
    double pullback_time = 2.0;  // T
    double t_past = 0.0;         // analytic quadrature horizon; 0 selects max(T, 10 / min gap)
    double alpha = 0.0;
    int stride = 10;             // defect sampling stride in steps
    double t1 = 400.0;
    double t2 = 1000.0;
    int pdf_bins = 40;
    int field_points = 129;
    int field_stride = 100;     // frames between rows of field CSVs
    int output_stride = 1;       // frames between rows of trajectory CSVs
  } numerics;

  struct NoiseSection {
    std::uint64_t seed = 1;
  } noise;

  struct ExperimentSection {
    Variant variant = Variant::kNonMarkovian;
    std::string output_dir = "out";
    std::vector<double> sweep_lambda_ratios{1.1, 1.4, 1.7};
    std::vector<double> sweep_sigmas{1.0, 2.0, 3.0};
    double pm_xi_min = -2.0;
    double pm_xi_max = 2.0;
    int pm_points = 5;
    double prominence = 0.1;
    double dwell = 1.0;
  } experiment;

  double resolved_length() const {
    if (model.length) return *model.length;
    return (model.length_over_pi ? *model.length_over_pi : 7.0) * std::numbers::pi;
  }

  ModelParams params() const {
    ModelParams p;
    p.nu = model.nu;
    p.gamma = model.gamma;
    p.length = resolved_length();
    p.m = model.m;
    p.n_noise = model.n_noise;
    p.n_galerkin = model.n_galerkin;
    if (model.sigma.size() == 1)
      p.sigma.assign(static_cast<std::size_t>(std::max(0, model.n_noise)), model.sigma[0]);
    else
      p.sigma = model.sigma;
    p.lambda = model.lambda ? *model.lambda : model.lambda_ratio.value_or(0.0) * p.lambda_c();
    return p;
  }

  /// SPDE initial datum u0 over all Galerkin modes.
  ModalVector initial_state() const {
    ModalVector u(static_cast<std::size_t>(model.n_galerkin), 0.0);
    std::copy(model.u0.begin(), model.u0.end(), u.begin());
    return u;
  }

  /// Reduced initial datum phi = P_c u0.
  ModalVector initial_resolved() const {
    const auto u = initial_state();
    return {u.begin(), u.begin() + model.m};
  }

  std::int64_t n_steps() const { return steps_for(numerics.t_end, numerics.dt, "numerics.t_end"); }
  std::int64_t window_steps() const { return steps_for(numerics.pullback_time, numerics.dt, "numerics.pullback_time"); }

  void validate() const {
    if (model.lambda.has_value() == model.lambda_ratio.has_value())
      throw ConfigInvalid("model.lambda", "give exactly one of model.lambda and model.lambda_ratio");
    if (model.length && model.length_over_pi)
      throw ConfigInvalid("model.length", "give at most one of model.length and model.length_over_pi");
    if (model.sigma.empty()) throw ConfigInvalid("model.sigma", "must not be empty");
    if (model.sigma.size() != 1 && static_cast<int>(model.sigma.size()) != model.n_noise)
      throw ConfigInvalid("model.sigma", "expected a scalar or " + std::to_string(model.n_noise) + " amplitudes");
    if (static_cast<int>(model.u0.size()) > model.n_galerkin)
      throw ConfigInvalid("model.u0", "has more entries than model.n_galerkin");
    for (double v : model.u0)
      if (!std::isfinite(v)) throw ConfigInvalid("model.u0", "entries must be finite");
    params().validate();

    const auto& n = numerics;
    if (!(n.dt > 0.0) || !std::isfinite(n.dt)) throw ConfigInvalid("numerics.dt", "must be > 0");
    if (!(n.t_end > 0.0)) throw ConfigInvalid("numerics.t_end", "must be > 0");
    steps_for(n.t_end, n.dt, "numerics.t_end");
    if (!(n.pullback_time > 0.0)) throw ConfigInvalid("numerics.pullback_time", "must be > 0");
    steps_for(n.pullback_time, n.dt, "numerics.pullback_time");
    if (n.t_past < 0.0) throw ConfigInvalid("numerics.t_past", "must be >= 0");
    if (n.t_past > 0.0) steps_for(n.t_past, n.dt, "numerics.t_past");
    if (!std::isfinite(n.alpha)) throw ConfigInvalid("numerics.alpha", "must be finite");
    if (n.stride < 1) throw ConfigInvalid("numerics.stride", "must be >= 1");
    if (!(n.t1 >= 0.0 && n.t2 > n.t1)) throw ConfigInvalid("numerics.t2", "need 0 <= t1 < t2");
    if (n.pdf_bins < 1) throw ConfigInvalid("numerics.pdf_bins", "must be >= 1");
    if (n.field_points < 2) throw ConfigInvalid("numerics.field_points", "must be >= 2");
    if (n.field_stride < 1) throw ConfigInvalid("numerics.field_stride", "must be >= 1");
    if (n.output_stride < 1) throw ConfigInvalid("numerics.output_stride", "must be >= 1");

    const auto& e = experiment;
    if (e.output_dir.empty()) throw ConfigInvalid("experiment.output_dir", "must not be empty");
    if (e.sweep_lambda_ratios.empty()) throw ConfigInvalid("experiment.sweep_lambda_ratios", "must not be empty");
    if (e.sweep_sigmas.empty()) throw ConfigInvalid("experiment.sweep_sigmas", "must not be empty");
    for (double s : e.sweep_sigmas)
      if (!(s >= 0.0)) throw ConfigInvalid("experiment.sweep_sigmas", "amplitudes must be >= 0");
    if (!(e.pm_xi_max >= e.pm_xi_min)) throw ConfigInvalid("experiment.pm_xi_max", "must be >= pm_xi_min");
    if (e.pm_points < 1) throw ConfigInvalid("experiment.pm_points", "must be >= 1");
    if (!(e.prominence >= 0.0 && e.prominence < 1.0)) throw ConfigInvalid("experiment.prominence", "must be in [0, 1)");
    if (!(e.dwell >= 0.0)) throw ConfigInvalid("experiment.dwell", "must be >= 0");
  }
};

namespace detail {

inline double get_number(const TomlValue& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ConfigInvalid(key, "expected a number");
}

inline int get_int(const TomlValue& v, const std::string& key) {
  const double d = get_number(v, key);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigInvalid(key, "expected an integer");
  return static_cast<int>(d);
}

inline std::vector<double> get_list(const TomlValue& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return {*d};
  if (const auto* xs = std::get_if<std::vector<double>>(&v)) return *xs;
  throw ConfigInvalid(key, "expected a number or an array of numbers");
}

inline std::string get_string(const TomlValue& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigInvalid(key, "expected a string");
}

}  // namespace detail

/// Overlay the keys of `table` on `base`. Unknown keys are rejected.
inline RunConfig apply_toml(RunConfig cfg, const TomlTable& table) {
  using namespace detail;
  if (table.contains("model.lambda") && table.contains("model.lambda_ratio"))
    throw ConfigInvalid("model.lambda", "give exactly one of model.lambda and model.lambda_ratio");
  if (table.contains("model.length") && table.contains("model.length_over_pi"))
    throw ConfigInvalid("model.length", "give at most one of model.length and model.length_over_pi");
  for (const auto& [key, v] : table) {
    auto& M = cfg.model;
    auto& N = cfg.numerics;
    auto& E = cfg.experiment;
    if (key == "model.nu") M.nu = get_number(v, key);
    else if (key == "model.lambda") { M.lambda = get_number(v, key); M.lambda_ratio.reset(); }
    else if (key == "model.lambda_ratio") { M.lambda_ratio = get_number(v, key); M.lambda.reset(); }
    else if (key == "model.gamma") M.gamma = get_number(v, key);
    else if (key == "model.length") { M.length = get_number(v, key); M.length_over_pi.reset(); }
    else if (key == "model.length_over_pi") { M.length_over_pi = get_number(v, key); M.length.reset(); }
    else if (key == "model.m") M.m = get_int(v, key);
    else if (key == "model.n_noise") M.n_noise = get_int(v, key);
    else if (key == "model.n_galerkin") M.n_galerkin = get_int(v, key);
    else if (key == "model.sigma") M.sigma = get_list(v, key);
    else if (key == "model.u0") M.u0 = get_list(v, key);
    else if (key == "numerics.dt") N.dt = get_number(v, key);
    else if (key == "numerics.t_end") N.t_end = get_number(v, key);
    else if (key == "numerics.pullback_time") N.pullback_time = get_number(v, key);
    else if (key == "numerics.t_past") N.t_past = get_number(v, key);
    else if (key == "numerics.alpha") N.alpha = get_number(v, key);
    else if (key == "numerics.stride") N.stride = get_int(v, key);
    else if (key == "numerics.t1") N.t1 = get_number(v, key);
    else if (key == "numerics.t2") N.t2 = get_number(v, key);
    else if (key == "numerics.pdf_bins") N.pdf_bins = get_int(v, key);
    else if (key == "numerics.field_points") N.field_points = get_int(v, key);
    else if (key == "numerics.field_stride") N.field_stride = get_int(v, key);
    else if (key == "numerics.output_stride") N.output_stride = get_int(v, key);
    else if (key == "noise.seed") {
      const double d = get_number(v, key);
      if (d < 0 || d != std::floor(d) || d > 9.007199254740992e15)
        throw ConfigInvalid(key, "expected a non-negative integer below 2^53");
      cfg.noise.seed = static_cast<std::uint64_t>(d);
    }
    else if (key == "experiment.variant") E.variant = parse_variant(get_string(v, key));
    else if (key == "experiment.output_dir") E.output_dir = get_string(v, key);
    else if (key == "experiment.sweep_lambda_ratios") E.sweep_lambda_ratios = get_list(v, key);
    else if (key == "experiment.sweep_sigmas") E.sweep_sigmas = get_list(v, key);
    else if (key == "experiment.pm_xi_min") E.pm_xi_min = get_number(v, key);
    else if (key == "experiment.pm_xi_max") E.pm_xi_max = get_number(v, key);
    else if (key == "experiment.pm_points") E.pm_points = get_int(v, key);
    else if (key == "experiment.prominence") E.prominence = get_number(v, key);
    else if (key == "experiment.dwell") E.dwell = get_number(v, key);
    else throw ConfigInvalid(key, "unknown key");
  }
  return cfg;
}

inline RunConfig parse_config(std::string_view text, const RunConfig& base = {}) {
  return apply_toml(base, parse_toml(text));
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigInvalid("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------------------
// Canonical serialization

namespace detail {

inline std::string toml_list(const std::vector<double>& xs) {
  std::string s = "[";
  for (std::size_t j = 0; j < xs.size(); ++j) s += (j ? ", " : "") + format_double(xs[j]);
  return s + "]";
}

inline std::string toml_string(std::string_view v) {
  std::string s = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') s.push_back('\\');
    if (c == '\n') { s += "\\n"; continue; }
    s.push_back(c);
  }
  return s + "\"";
}

}  // namespace detail

/// Canonical TOML text. parse_config(to_toml(c)) reproduces c exactly.
inline std::string to_toml(const RunConfig& c) {
  using detail::toml_list;
  const auto num = [](double v) { return format_double(v); };
  std::ostringstream o;
  const auto& M = c.model;
  o << "[model]\n";
  o << "nu = " << num(M.nu) << "\n";
  if (M.lambda) o << "lambda = " << num(*M.lambda) << "\n";
  if (M.lambda_ratio) o << "lambda_ratio = " << num(*M.lambda_ratio) << "\n";
  o << "gamma = " << num(M.gamma) << "\n";
  if (M.length) o << "length = " << num(*M.length) << "\n";
  if (M.length_over_pi) o << "length_over_pi = " << num(*M.length_over_pi) << "\n";
  o << "m = " << M.m << "\n";
  o << "n_noise = " << M.n_noise << "\n";
  o << "n_galerkin = " << M.n_galerkin << "\n";
  o << "sigma = " << (M.sigma.size() == 1 ? num(M.sigma[0]) : toml_list(M.sigma)) << "\n";
  if (!M.u0.empty()) o << "u0 = " << toml_list(M.u0) << "\n";
  const auto& N = c.numerics;
  o << "\n[numerics]\n";
  o << "dt = " << num(N.dt) << "\n";
  o << "t_end = " << num(N.t_end) << "\n";
  o << "pullback_time = " << num(N.pullback_time) << "\n";
  o << "t_past = " << num(N.t_past) << "\n";
  o << "alpha = " << num(N.alpha) << "\n";
  o << "stride = " << N.stride << "\n";
  o << "t1 = " << num(N.t1) << "\n";
  o << "t2 = " << num(N.t2) << "\n";
  o << "pdf_bins = " << N.pdf_bins << "\n";
  o << "field_points = " << N.field_points << "\n";
  o << "field_stride = " << N.field_stride << "\n";
  o << "output_stride = " << N.output_stride << "\n";
  o << "\n[noise]\n";
  o << "seed = " << c.noise.seed << "\n";
  const auto& E = c.experiment;
  o << "\n[experiment]\n";
  o << "variant = " << detail::toml_string(to_string(E.variant)) << "\n";
  o << "output_dir = " << detail::toml_string(E.output_dir) << "\n";
  o << "sweep_lambda_ratios = " << toml_list(E.sweep_lambda_ratios) << "\n";
  o << "sweep_sigmas = " << toml_list(E.sweep_sigmas) << "\n";
  o << "pm_xi_min = " << num(E.pm_xi_min) << "\n";
  o << "pm_xi_max = " << num(E.pm_xi_max) << "\n";
  o << "pm_points = " << E.pm_points << "\n";
  o << "prominence = " << num(E.prominence) << "\n";
  o << "dwell = " << num(E.dwell) << "\n";
  return o.str();
}

/// Hash of the canonical text. The output directory does not affect results and is excluded.
inline std::string config_hash(const RunConfig& c) {
  RunConfig copy = c;
  copy.experiment.output_dir = "-";
  return hex64(fnv1a(to_toml(copy)));
}

// ---------------------------------------------------------------------------------------
// Presets

inline constexpr std::string_view kPresetFig1 = R"(# fig1 regime: l = 7 pi, sigma = 3
[model]
nu = 2
lambda_ratio = 1.7
gamma = 0.5
length_over_pi = 7
m = 2
n_noise = 10
n_galerkin = 32
sigma = 3

[numerics]
dt = 0.01
t_end = 1000
pullback_time = 2
t1 = 400
t2 = 1000
stride = 10
output_stride = 10

[noise]
seed = 1

[experiment]
variant = "nonmarkov"
output_dir = "out/fig1"
)";

inline constexpr std::string_view kPresetFig2 = R"(# fig2 regime: l = 3.5 pi, sigma = 1.5
[model]
nu = 2
lambda_ratio = 1.7
gamma = 0.5
length_over_pi = 3.5
m = 2
n_noise = 10
n_galerkin = 32
sigma = 1.5

[numerics]
dt = 0.01
t_end = 1000
pullback_time = 2
t1 = 400
t2 = 1000
stride = 10
output_stride = 10

[noise]
seed = 1

[experiment]
variant = "nonmarkov"
output_dir = "out/fig2"
)";

inline constexpr std::string_view kPresetFig3 = R"(# fig3 regime: l = 3.5 pi, sigma = 1.5, long run for bimodality
[model]
nu = 2
lambda_ratio = 1.7
gamma = 0.5
length_over_pi = 3.5
m = 2
n_noise = 10
n_galerkin = 32
sigma = 1.5

[numerics]
dt = 0.01
t_end = 2000
pullback_time = 2
t1 = 400
t2 = 1000
stride = 10
output_stride = 10

[noise]
seed = 1

[experiment]
variant = "nonmarkov"
output_dir = "out/fig3"
)";

inline RunConfig preset(std::string_view name) {
  if (name == "fig1") return parse_config(kPresetFig1);
  if (name == "fig2") return parse_config(kPresetFig2);
  if (name == "fig3") return parse_config(kPresetFig3);
  throw ConfigInvalid("preset", "unknown preset '" + std::string(name) + "' (expected fig1, fig2 or fig3)");
}

inline std::vector<std::string> preset_names() { return {"fig1", "fig2", "fig3"}; }

inline std::string_view preset_text(std::string_view name) {
  if (name == "fig1") return kPresetFig1;
  if (name == "fig2") return kPresetFig2;
  if (name == "fig3") return kPresetFig3;
  throw ConfigInvalid("preset", "unknown preset '" + std::string(name) + "'");
}

}  // namespace pmred
