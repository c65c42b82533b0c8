#pragma once

// CSV and JSON persistence. Floats are written with 17 significant digits so that every
// value round-trips exactly.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "pmred/errors.hpp"
#include "pmred/model.hpp"
#include "pmred/reduced.hpp"
#include "pmred/spde.hpp"

namespace pmred {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    for (std::size_t j = 0; j < header.size(); ++j) out_ << (j ? "," : "") << header[j];
    out_ << '\n';
  }

  void row(std::span<const double> values) {
    for (std::size_t j = 0; j < values.size(); ++j) out_ << (j ? "," : "") << format_double(values[j]);
    out_ << '\n';
  }

  /// Row with leading text cells followed by numbers.
  void row(const std::vector<std::string>& text, std::span<const double> values) {
    for (std::size_t j = 0; j < text.size(); ++j) out_ << (j ? "," : "") << text[j];
    bool first = text.empty();
    for (double v : values) {
      out_ << (first ? "" : ",") << format_double(v);
      first = false;
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline nlohmann::json to_json(const ModelParams& p) {
  return {{"nu", p.nu},       {"lambda", p.lambda},         {"gamma", p.gamma},     {"length", p.length},
          {"m", p.m},         {"n_noise", p.n_noise},       {"n_galerkin", p.n_galerkin},
          {"sigma", p.sigma}, {"lambda_c", p.lambda_c()}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

inline std::vector<std::string> numbered(std::string_view prefix, int from, int to) {
  std::vector<std::string> v;
  for (int i = from; i <= to; ++i) v.push_back(std::string(prefix) + std::to_string(i));
  return v;
}

/// `t,u1,...,uNg` every `stride` frames, plus a JSON sidecar.
inline void write_trajectory(const std::filesystem::path& csv, const ModeTrajectory& traj, std::size_t stride = 1) {
  auto header = numbered("u", 1, traj.n_modes());
  header.insert(header.begin(), "t");
  CsvWriter w(csv, header);
  std::vector<double> row(static_cast<std::size_t>(traj.n_modes()) + 1);
  for (std::size_t k = 0; k < traj.size(); k += stride) {
    row[0] = traj.time(k);
    const auto f = traj.frame(k);
    std::copy(f.begin(), f.end(), row.begin() + 1);
    w.row(row);
  }
  auto sidecar = csv;
  sidecar.replace_extension(".json");
  write_json(sidecar, {{"kind", "spde"},
                       {"solver", traj.solver},
                       {"dt", traj.dt()},
                       {"frames", traj.size()},
                       {"output_stride", stride},
                       {"seed", traj.seed},
                       {"params", to_json(traj.params)}});
}

/// `t,xi1,...,xim,y{m+1},...,yN` every `stride` frames, plus a JSON sidecar.
inline void write_trajectory(const std::filesystem::path& csv, const ReducedTrajectory& traj, std::size_t stride = 1) {
  auto header = numbered("xi", 1, traj.m());
  header.insert(header.begin(), "t");
  for (auto& h : numbered("y", traj.m() + 1, traj.m() + traj.n_high())) header.push_back(h);
  CsvWriter w(csv, header);
  std::vector<double> row(static_cast<std::size_t>(traj.m() + traj.n_high()) + 1);
  for (std::size_t k = 0; k < traj.size(); k += stride) {
    row[0] = traj.time(k);
    const auto xi = traj.xi(k);
    const auto hi = traj.high(k);
    std::copy(xi.begin(), xi.end(), row.begin() + 1);
    std::copy(hi.begin(), hi.end(), row.begin() + 1 + traj.m());
    w.row(row);
  }
  auto sidecar = csv;
  sidecar.replace_extension(".json");
  write_json(sidecar, {{"kind", "reduced"},
                       {"variant", to_string(traj.variant)},
                       {"dt", traj.dt()},
                       {"pullback_time", static_cast<double>(traj.window_steps) * traj.dt()},
                       {"frames", traj.size()},
                       {"output_stride", stride},
                       {"seed", traj.seed},
                       {"params", to_json(traj.params)}});
}

/// Long-format `t,x,u` dump of a space-time field.
inline void write_field(const std::filesystem::path& csv, const SpaceTimeField& f) {
  CsvWriter w(csv, {"t", "x", "u"});
  for (std::size_t k = 0; k < f.times.size(); ++k)
    for (std::size_t j = 0; j < f.xs.size(); ++j) {
      const double row[3] = {f.times[k], f.xs[j], f.at(k, j)};
      w.row(row);
    }
}

/// 64-bit FNV-1a, used for config hashes.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

}  // namespace pmred
