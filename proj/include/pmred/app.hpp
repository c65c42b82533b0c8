#pragma once

// Experiment orchestration behind the command-line tool. Each subcommand writes its
// artifacts plus a manifest.json from which the whole directory can be regenerated.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pmred/config.hpp"
#include "pmred/diagnostics.hpp"
#include "pmred/errors.hpp"
#include "pmred/io.hpp"
#include "pmred/model.hpp"
#include "pmred/noise.hpp"
#include "pmred/pm.hpp"
#include "pmred/reduced.hpp"
#include "pmred/spde.hpp"
#include "pmred/version.hpp"

namespace pmred {

/// Half-open increment index range [lo, hi) to dump to CSV.
struct NoiseDump {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct RunOptions {
  std::filesystem::path out;
  int threads = 1;
  std::optional<NoiseDump> dump_noise;
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"check-nr", "simulate-spde", "simulate-reduced", "defect",
                                              "defect-sweep", "pdf", "reconstruct", "compare", "pm-table"};
  return names;
}

/// Run fn(0..count-1) on up to `threads` workers. The first exception is rethrown.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(count, 1))));
  if (workers <= 1) {
    for (std::size_t j = 0; j < count; ++j) fn(j);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < count; j = next++) {
          try {
            fn(j);
          } catch (...) {
            errors[j] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

class Recorder {
 public:
  Recorder(const std::filesystem::path& dir, std::ostream& log) : dir_(dir), log_(log) {
    std::filesystem::create_directories(dir);
  }

  std::filesystem::path path(const std::string& name) {
    artifacts_.push_back(name);
    return dir_ / name;
  }

  std::ostream& log() { return log_; }
  const std::vector<std::string>& artifacts() const { return artifacts_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::ostream& log_;
  std::vector<std::string> artifacts_;
};

inline std::string fixed(double v, int digits = 6) {
  std::ostringstream o;
  o << std::setprecision(digits) << v;
  return o.str();
}

inline nlohmann::json nr_json(const NRReport& r) {
  nlohmann::json gaps = nlohmann::json::array();
  for (const auto& g : r.gaps) gaps.push_back({{"i1", g.i1}, {"i2", g.i2}, {"n", g.n}, {"kind", to_string(g.kind)}, {"gap", g.value}});
  return {{"satisfied", r.satisfied},
          {"min_gap", r.min_gap},
          {"min_sum_gap", r.min_of(GapKind::kSum)},
          {"min_second_gap", r.min_of(GapKind::kSecond)},
          {"min_first_gap", r.min_of(GapKind::kFirst)},
          {"gaps", gaps}};
}

inline nlohmann::json pdf_json(const PdfEstimate& p) {
  return {{"bins", p.bins()}, {"count", p.count}, {"lo", p.edges.front()}, {"hi", p.edges.back()}};
}

inline void write_pdf(const std::filesystem::path& csv, const PdfEstimate& p) {
  CsvWriter w(csv, {"bin_center", "density"});
  for (std::size_t j = 0; j < p.bins(); ++j) {
    const double row[2] = {p.center(j), p.density[j]};
    w.row(row);
  }
}

inline nlohmann::json bimodality_json(const BimodalityReport& r) {
  return {{"modes", r.modes}, {"peaks", r.peaks}, {"transitions", r.transitions}};
}

inline BimodalityOptions bimodality_options(const RunConfig& cfg) {
  BimodalityOptions o;
  o.prominence = cfg.experiment.prominence;
  o.dwell = cfg.experiment.dwell;
  return o;
}

inline DefectOptions defect_options(const RunConfig& cfg) {
  DefectOptions o;
  o.stride = cfg.numerics.stride;
  o.alpha = cfg.numerics.alpha;
  o.t1 = cfg.numerics.t1;
  o.t2 = cfg.numerics.t2;
  return o;
}

inline void require_defect_window(const RunConfig& cfg) {
  if (cfg.numerics.t2 > cfg.numerics.t_end + 1e-9)
    throw ConfigInvalid("numerics.t2", "averaging window must end by numerics.t_end");
}

inline ModeTrajectory run_spde(const RunConfig& cfg, const Model& model, const WienerPath& path) {
  return simulate_spde(model, cfg.initial_state(), cfg.numerics.t_end, path);
}

inline ReducedTrajectory run_reduced(const RunConfig& cfg, const Model& model, const WienerPath& path, Variant v) {
  return simulate_reduced(model, cfg.initial_resolved(), cfg.numerics.t_end, cfg.numerics.pullback_time, path, v);
}

// ---------------------------------------------------------------------------------------
// Subcommands

inline int cmd_check_nr(const RunConfig& cfg, Recorder& rec) {
  const Model model(cfg.params());
  const auto report = check_non_resonance(model);
  {
    CsvWriter w(rec.path("nr_gaps.csv"), {"i1", "i2", "n", "kind", "gap"});
    for (const auto& g : report.gaps) {
      const double v[1] = {g.value};
      w.row({std::to_string(g.i1), std::to_string(g.i2), std::to_string(g.n), to_string(g.kind)}, v);
    }
  }
  auto j = nr_json(report);
  std::vector<double> betas(model.betas().begin(), model.betas().end());
  j["betas"] = betas;
  j["lambda_c"] = model.params().lambda_c();
  write_json(rec.path("nr.json"), j);

  auto& log = rec.log();
  log << "non-resonance: " << (report.satisfied ? "satisfied" : "violated") << "\n";
  for (const auto kind : {GapKind::kSum, GapKind::kSecond, GapKind::kFirst}) {
    const double g = report.min_of(kind);
    if (std::isfinite(g)) log << "  min " << to_string(kind) << " gap: " << fixed(g) << "\n";
  }
  for (const auto& g : report.gaps)
    log << "  (" << g.i1 << "," << g.i2 << ")->" << g.n << " " << to_string(g.kind) << " " << fixed(g.value) << "\n";
  return report.satisfied ? 0 : 3;
}

inline int cmd_simulate_spde(const RunConfig& cfg, Recorder& rec) {
  const Model model(cfg.params());
  const WienerPath path(cfg.noise.seed, model.n_noise(), cfg.numerics.dt);
  const auto traj = run_spde(cfg, model, path);
  write_trajectory(rec.path("spde.csv"), traj, static_cast<std::size_t>(cfg.numerics.output_stride));
  rec.path("spde.json");
  rec.log() << "simulate-spde: " << traj.size() << " frames, seed " << cfg.noise.seed << "\n";
  return 0;
}

inline int cmd_simulate_reduced(const RunConfig& cfg, Recorder& rec) {
  const Model model(cfg.params());
  const WienerPath path(cfg.noise.seed, model.n_noise(), cfg.numerics.dt);
  const auto v = cfg.experiment.variant;
  const auto traj = run_reduced(cfg, model, path, v);
  const std::string stem = std::string("reduced_") + to_string(v);
  write_trajectory(rec.path(stem + ".csv"), traj, static_cast<std::size_t>(cfg.numerics.output_stride));
  rec.path(stem + ".json");
  rec.log() << "simulate-reduced (" << to_string(v) << "): " << traj.size() << " frames, seed " << cfg.noise.seed << "\n";
  return 0;
}

inline int cmd_defect(const RunConfig& cfg, Recorder& rec) {
  require_defect_window(cfg);
  const Model model(cfg.params());
  const WienerPath path(cfg.noise.seed, model.n_noise(), cfg.numerics.dt);
  const auto full = run_spde(cfg, model, path);
  const auto report = parameterization_defect(model, full, cfg.numerics.pullback_time, path, defect_options(cfg));
  {
    CsvWriter w(rec.path("defect.csv"), {"T", "Q"});
    for (std::size_t j = 0; j < report.times.size(); ++j) {
      const double row[2] = {report.times[j], report.q[j]};
      w.row(row);
    }
  }
  write_json(rec.path("defect.json"), {{"Qbar", report.mean},
                                       {"t1", report.t1},
                                       {"t2", report.t2},
                                       {"alpha", report.alpha},
                                       {"stride", cfg.numerics.stride},
                                       {"pullback_time", cfg.numerics.pullback_time},
                                       {"seed", report.seed},
                                       {"params", to_json(report.params)}});
  rec.log() << "defect: Qbar over [" << report.t1 << ", " << report.t2 << "] = " << fixed(report.mean) << "\n";
  return 0;
}

/// Seed of sweep cell j; each cell owns an independent path.
inline std::uint64_t sweep_seed(std::uint64_t base, std::size_t cell) { return base + cell; }

inline int cmd_defect_sweep(const RunConfig& cfg, Recorder& rec, int threads) {
  require_defect_window(cfg);
  const auto& ratios = cfg.experiment.sweep_lambda_ratios;
  const auto& sigmas = cfg.experiment.sweep_sigmas;
  struct Cell {
    double lambda = 0.0, ratio = 0.0, sigma = 0.0, qbar = NAN;
    std::uint64_t seed = 0;
    std::string status = "ok";
  };
  std::vector<Cell> cells;
  for (double r : ratios)
    for (double s : sigmas) cells.push_back({0.0, r, s});

  parallel_for(cells.size(), threads, [&](std::size_t j) {
    auto& c = cells[j];
    RunConfig local = cfg;
    local.model.lambda_ratio = c.ratio;
    local.model.lambda.reset();
    local.model.sigma = {c.sigma};
    const Model model(local.params());
    c.lambda = model.params().lambda;
    c.seed = sweep_seed(cfg.noise.seed, j);
    try {
      const auto nr = check_non_resonance(model);
      if (!nr.satisfied) throw NRViolation("non-resonance conditions fail");
      const WienerPath path(c.seed, model.n_noise(), local.numerics.dt);
      const auto full = run_spde(local, model, path);
      c.qbar = parameterization_defect(model, full, local.numerics.pullback_time, path, defect_options(local)).mean;
    } catch (const NRViolation& e) {
      c.status = std::string("skipped: ") + e.what();
    } catch (const StabilityViolation& e) {
      c.status = std::string("skipped: ") + e.what();
    }
  });

  nlohmann::json cj = nlohmann::json::array();
  {
    CsvWriter w(rec.path("sweep.csv"), {"lambda", "sigma", "Qbar"});
    for (const auto& c : cells) {
      cj.push_back({{"lambda", c.lambda}, {"lambda_ratio", c.ratio}, {"sigma", c.sigma}, {"seed", c.seed},
                    {"status", c.status}, {"Qbar", c.status == "ok" ? nlohmann::json(c.qbar) : nlohmann::json()}});
      if (c.status != "ok") continue;
      const double row[3] = {c.lambda, c.sigma, c.qbar};
      w.row(row);
    }
  }
  write_json(rec.path("sweep.json"), {{"cells", cj}, {"t1", cfg.numerics.t1}, {"t2", cfg.numerics.t2}});
  for (const auto& c : cells)
    rec.log() << "  lambda/lambda_c=" << c.ratio << " sigma=" << c.sigma << "  "
              << (c.status == "ok" ? "Qbar=" + fixed(c.qbar) : c.status) << "\n";
  return 0;
}

inline int cmd_pdf(const RunConfig& cfg, Recorder& rec) {
  const Model model(cfg.params());
  const WienerPath path(cfg.noise.seed, model.n_noise(), cfg.numerics.dt);
  const auto full = run_spde(cfg, model, path);
  const auto bins = static_cast<std::size_t>(cfg.numerics.pdf_bins);
  nlohmann::json modes = nlohmann::json::array();
  for (int i = 1; i <= model.m(); ++i) {
    const auto s = full.mode_series(i);
    const auto hist = estimate_pdf(s, bins);
    const auto kde = smoothed_pdf(s, bins);
    write_pdf(rec.path("pdf_spde_mode" + std::to_string(i) + ".csv"), hist);
    write_pdf(rec.path("pdf_spde_mode" + std::to_string(i) + "_kde.csv"), kde);
    nlohmann::json mj{{"mode", i}, {"histogram", pdf_json(hist)}, {"bandwidth", silverman_bandwidth(s)}};
    if (s.size() >= 1000) mj["bimodality"] = bimodality_json(detect_bimodality(s, full.dt(), bimodality_options(cfg)));
    modes.push_back(mj);
  }
  write_json(rec.path("pdf.json"), {{"source", "spde"}, {"samples", full.size()}, {"modes", modes}});
  rec.log() << "pdf: " << model.m() << " modes, " << full.size() << " samples each\n";
  return 0;
}

inline int cmd_reconstruct(const RunConfig& cfg, Recorder& rec, int threads) {
  const Model model(cfg.params());
  const WienerPath path(cfg.noise.seed, model.n_noise(), cfg.numerics.dt);
  ModeTrajectory full;
  ReducedTrajectory red;
  parallel_for(2, threads, [&](std::size_t j) {
    if (j == 0)
      full = run_spde(cfg, model, path);
    else
      red = run_reduced(cfg, model, path, cfg.experiment.variant);
  });
  const auto xs = uniform_grid(model.params(), cfg.numerics.field_points);
  const auto stride = static_cast<std::size_t>(cfg.numerics.field_stride);
  const auto f_red = reconstruct_field(model.params(), red, xs, stride);
  const auto f_spde = spde_field(model.params(), full, xs, stride);
  write_field(rec.path("field_reduced.csv"), f_red);
  write_field(rec.path("field_spde.csv"), f_spde);
  const double err = relative_l2_error(f_red, f_spde);

  const bool fraction_defined = model.n_galerkin() >= 10 && model.m() < 5;
  nlohmann::json fj = nullptr;
  if (fraction_defined) {
    CsvWriter w(rec.path("variance_fraction.csv"), {"T", "f_5_10"});
    const double step = std::max(full.dt(), cfg.numerics.t_end / 20.0);
    for (double T = step; T <= cfg.numerics.t_end + 1e-9; T += step) {
      const double row[2] = {T, variance_fraction(full, model.m(), 5, 10, T, cfg.numerics.alpha)};
      w.row(row);
    }
    fj = variance_fraction(full, model.m(), 5, 10, cfg.numerics.t_end, cfg.numerics.alpha);
  }
  write_json(rec.path("reconstruct.json"), {{"relative_l2_error", err},
                                            {"variant", to_string(cfg.experiment.variant)},
                                            {"field_points", cfg.numerics.field_points},
                                            {"field_stride", cfg.numerics.field_stride},
                                            {"variance_fraction_5_10", fj}});
  rec.log() << "reconstruct: relative L2 error " << fixed(err) << " (zero predictor: 1)\n";
  if (fraction_defined) rec.log() << "  f_5^10 = " << fixed(fj.get<double>()) << "\n";
  return 0;
}

inline int cmd_compare(const RunConfig& cfg, Recorder& rec, int threads) {
  const Model model(cfg.params());
  const WienerPath path(cfg.noise.seed, model.n_noise(), cfg.numerics.dt);
  ModeTrajectory full;
  ReducedTrajectory nm, av;
  parallel_for(3, threads, [&](std::size_t j) {
    if (j == 0) full = run_spde(cfg, model, path);
    if (j == 1) nm = run_reduced(cfg, model, path, Variant::kNonMarkovian);
    if (j == 2) av = run_reduced(cfg, model, path, Variant::kAveraged);
  });
  const auto stride = static_cast<std::size_t>(cfg.numerics.output_stride);
  write_trajectory(rec.path("spde.csv"), full, stride);
  rec.path("spde.json");
  write_trajectory(rec.path("reduced_nonmarkov.csv"), nm, stride);
  rec.path("reduced_nonmarkov.json");
  write_trajectory(rec.path("reduced_averaged.csv"), av, stride);
  rec.path("reduced_averaged.json");

  const auto bins = static_cast<std::size_t>(cfg.numerics.pdf_bins);
  const auto bopt = bimodality_options(cfg);
  nlohmann::json modes = nlohmann::json::array();
  auto& log = rec.log();
  log << "compare: seed " << cfg.noise.seed << ", " << full.size() << " frames\n";
  for (int i = 1; i <= model.m(); ++i) {
    const auto s = full.mode_series(i);
    const auto a = nm.xi_series(i);
    const auto b = av.xi_series(i);
    auto [lo, hi] = sample_range(s);
    for (const auto* v : {&a, &b}) {
      const auto [l2, h2] = sample_range(*v);
      lo = std::min(lo, l2);
      hi = std::max(hi, h2);
    }
    const std::pair<double, double> range{lo, hi};
    const auto ps = estimate_pdf(s, bins, range);
    const auto pa = estimate_pdf(a, bins, range);
    const auto pb = estimate_pdf(b, bins, range);
    const std::string tag = "_mode" + std::to_string(i) + ".csv";
    write_pdf(rec.path("pdf_spde" + tag), ps);
    write_pdf(rec.path("pdf_nonmarkov" + tag), pa);
    write_pdf(rec.path("pdf_averaged" + tag), pb);
    const auto da = compare_distributions(pa, ps);
    const auto db = compare_distributions(pb, ps);
    nlohmann::json mj{{"mode", i},
                      {"nonmarkov", {{"l1", da.l1}, {"ks", da.ks}, {"ks_samples", ks_statistic(a, s)}}},
                      {"averaged", {{"l1", db.l1}, {"ks", db.ks}, {"ks_samples", ks_statistic(b, s)}}}};
    if (s.size() >= 1000) {
      mj["bimodality"] = {{"spde", bimodality_json(detect_bimodality(s, full.dt(), bopt))},
                          {"nonmarkov", bimodality_json(detect_bimodality(a, nm.dt(), bopt))},
                          {"averaged", bimodality_json(detect_bimodality(b, av.dt(), bopt))}};
    }
    modes.push_back(mj);
    log << "  xi" << i << ": L1 nonmarkov " << fixed(da.l1) << ", averaged " << fixed(db.l1) << "; KS nonmarkov "
        << fixed(da.ks) << ", averaged " << fixed(db.ks) << "\n";
  }
  write_json(rec.path("compare.json"), {{"seed", cfg.noise.seed}, {"pdf_bins", bins}, {"modes", modes}});
  return 0;
}

inline int cmd_pm_table(const RunConfig& cfg, Recorder& rec) {
  const Model model(cfg.params());
  const WienerPath path(cfg.noise.seed, model.n_noise(), cfg.numerics.dt);
  const auto k_win = cfg.window_steps();
  const double t_past = cfg.numerics.t_past > 0.0 ? cfg.numerics.t_past : default_t_past(model, cfg.numerics.pullback_time);
  const auto j_past = static_cast<std::int64_t>(std::ceil(t_past / cfg.numerics.dt - 1e-9));
  const auto k_max = k_win * 8;  // longest window used by the convergence report
  const PathWindow cached(path, -std::max(j_past, k_max), 1);
  const auto coeffs = analytic_coefficients(model, cached, j_past);
  const AveragedManifold avg(model);
  const int m = model.m();

  // Grid over [pm_xi_min, pm_xi_max]^m.
  const int pts = cfg.experiment.pm_points;
  std::vector<ModalVector> grid;
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  const auto coord = [&](int j) {
    return pts == 1 ? cfg.experiment.pm_xi_min
                    : cfg.experiment.pm_xi_min + (cfg.experiment.pm_xi_max - cfg.experiment.pm_xi_min) * j / (pts - 1);
  };
  for (;;) {
    ModalVector xi(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) xi[i] = coord(idx[i]);
    grid.push_back(xi);
    int i = 0;
    while (i < m && ++idx[i] == pts) idx[i++] = 0;
    if (i == m) break;
  }

  PullbackIntegrator integ(model, cfg.numerics.dt, k_win);
  {
    auto header = numbered("xi", 1, m);
    for (const char* c : {"n", "pullback", "analytic", "averaged"}) header.emplace_back(c);
    CsvWriter w(rec.path("pm_table.csv"), header);
    for (const auto& xi : grid) {
      const auto hp = integ.evaluate(xi, 0, cached);
      const auto ha = coeffs.evaluate(xi);
      const auto hv = avg.evaluate(xi);
      for (int n = m + 1; n <= model.n_noise(); ++n) {
        std::vector<double> row(xi);
        row.push_back(n);
        row.push_back(hp[n - m - 1]);
        row.push_back(ha[n - m - 1]);
        row.push_back(hv[n - m - 1]);
        w.row(row);
      }
    }
  }

  // Convergence in T: mean relative change of the pullback value when T doubles.
  const auto norm = [](const ModalVector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  nlohmann::json conv = nlohmann::json::array();
  {
    CsvWriter w(rec.path("pm_convergence.csv"), {"T", "relative_change"});
    for (std::int64_t k = k_win; k * 2 <= k_max; k *= 2) {
      PullbackIntegrator a(model, cfg.numerics.dt, k), b(model, cfg.numerics.dt, 2 * k);
      double acc = 0.0;
      int used = 0;
      for (const auto& xi : grid) {
        const auto ha = a.evaluate(xi, 0, cached);
        const auto hb = b.evaluate(xi, 0, cached);
        const double den = norm(hb);
        if (!(den > 0.0)) continue;
        ModalVector diff(ha.size());
        for (std::size_t q = 0; q < ha.size(); ++q) diff[q] = ha[q] - hb[q];
        acc += norm(diff) / den;
        ++used;
      }
      const double T = static_cast<double>(k) * cfg.numerics.dt;
      const double rel = used ? acc / used : 0.0;
      const double row[2] = {T, rel};
      w.row(row);
      conv.push_back({{"T", T}, {"relative_change", rel}});
    }
  }
  write_json(rec.path("pm_table.json"), {{"pullback_time", cfg.numerics.pullback_time},
                                         {"t_past", static_cast<double>(j_past) * cfg.numerics.dt},
                                         {"grid_points", grid.size()},
                                         {"seed", cfg.noise.seed},
                                         {"convergence", conv}});
  rec.log() << "pm-table: " << grid.size() << " grid points, T_past = " << fixed(static_cast<double>(j_past) * cfg.numerics.dt) << "\n";
  return 0;
}

inline void dump_noise(const RunConfig& cfg, const NoiseDump& d, Recorder& rec) {
  if (d.hi <= d.lo) throw ConfigInvalid("dump-noise", "need lo < hi");
  const WienerPath path(cfg.noise.seed, cfg.model.n_noise, cfg.numerics.dt);
  auto header = numbered("dW", 1, cfg.model.n_noise);
  header.insert(header.begin(), "k");
  CsvWriter w(rec.path("noise_window.csv"), header);
  std::vector<double> row(static_cast<std::size_t>(cfg.model.n_noise) + 1);
  for (std::int64_t k = d.lo; k < d.hi; ++k) {
    row[0] = static_cast<double>(k);
    for (int i = 1; i <= cfg.model.n_noise; ++i) row[i] = path.increment(i, k);
    w.row(row);
  }
}

}  // namespace detail

/// Execute one subcommand, writing artifacts and manifest.json under opts.out.
/// Returns the process exit status.
inline int run(const std::string& subcommand, const RunConfig& cfg, const RunOptions& opts, std::ostream& log) {
  cfg.validate();
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
    throw ConfigInvalid("subcommand", "unknown subcommand '" + subcommand + "'");
  const auto out = opts.out.empty() ? std::filesystem::path(cfg.experiment.output_dir) : opts.out;
  detail::Recorder rec(out, log);

  int status = 0;
  if (subcommand == "check-nr") status = detail::cmd_check_nr(cfg, rec);
  else if (subcommand == "simulate-spde") status = detail::cmd_simulate_spde(cfg, rec);
  else if (subcommand == "simulate-reduced") status = detail::cmd_simulate_reduced(cfg, rec);
  else if (subcommand == "defect") status = detail::cmd_defect(cfg, rec);
  else if (subcommand == "defect-sweep") status = detail::cmd_defect_sweep(cfg, rec, opts.threads);
  else if (subcommand == "pdf") status = detail::cmd_pdf(cfg, rec);
  else if (subcommand == "reconstruct") status = detail::cmd_reconstruct(cfg, rec, opts.threads);
  else if (subcommand == "compare") status = detail::cmd_compare(cfg, rec, opts.threads);
  else if (subcommand == "pm-table") status = detail::cmd_pm_table(cfg, rec);
  if (opts.dump_noise) detail::dump_noise(cfg, *opts.dump_noise, rec);

  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& name : rec.artifacts()) {
    const auto text = read_text(out / name);
    artifacts.push_back({{"file", name}, {"fnv1a", hex64(fnv1a(text))}});
  }
  nlohmann::json manifest{{"tool", "pmred"},
                          {"version", kVersion},
                          {"subcommand", subcommand},
                          {"config_hash", config_hash(cfg)},
                          {"config", to_toml(cfg)},
                          {"exit_status", status},
                          {"artifacts", artifacts}};
  manifest["dump_noise"] = opts.dump_noise ? nlohmann::json{opts.dump_noise->lo, opts.dump_noise->hi} : nlohmann::json();
  write_json(out / "manifest.json", manifest);
  return status;
}

/// Subcommand, config and noise-dump request recorded in a manifest.
struct ManifestRecord {
  std::string subcommand;
  RunConfig config;
  std::optional<NoiseDump> dump_noise;
};

inline ManifestRecord read_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid("manifest", path.string() + ": " + e.what());
  }
  if (!j.contains("config") || !j["config"].is_string() || !j.contains("subcommand"))
    throw ConfigInvalid("manifest", path.string() + " lacks config or subcommand");
  ManifestRecord r;
  r.subcommand = j["subcommand"].get<std::string>();
  r.config = parse_config(j["config"].get<std::string>());
  if (j.contains("dump_noise") && j["dump_noise"].is_array())
    r.dump_noise = NoiseDump{j["dump_noise"][0].get<std::int64_t>(), j["dump_noise"][1].get<std::int64_t>()};
  return r;
}

}  // namespace pmred
