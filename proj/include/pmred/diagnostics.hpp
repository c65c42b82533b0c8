#pragma once

// Quantitative assessments of a parameterization and of reduced-model statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pmred/errors.hpp"
#include "pmred/model.hpp"
#include "pmred/noise.hpp"
#include "pmred/pm.hpp"
#include "pmred/reduced.hpp"
#include "pmred/spde.hpp"

namespace pmred {

// ---------------------------------------------------------------------------------------
// Parameterization defect

struct DefectOptions {
  std::int64_t stride = 10;  // integrand evaluated every `stride` steps
  double alpha = 0.0;
  double t1 = 400.0;
  double t2 = 1000.0;
};

struct DefectReport {
  std::vector<double> times;  // T values of the Q curve
  std::vector<double> q;      // Q(T)
  double alpha = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
  double mean = NAN;  // time average of Q over [t1, t2], NaN if the curve does not cover it
  std::uint64_t seed = 0;
  ModelParams params;
};

/// (1 / (t2 - t1)) * integral of Q over [t1, t2] by the trapezoid rule on the curve points.
inline double time_average(std::span<const double> times, std::span<const double> q, double t1, double t2) {
  if (!(t2 > t1)) throw std::invalid_argument("time_average: need t2 > t1");
  const double eps = 1e-9 * std::max(1.0, std::abs(t2));
  double acc = 0.0;
  double prev_t = NAN, prev_q = NAN;
  bool started = false;
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (times[j] < t1 - eps || times[j] > t2 + eps) continue;
    if (!started) {
      if (std::abs(times[j] - t1) > eps) return NAN;
      started = true;
    } else {
      acc += 0.5 * (q[j] + prev_q) * (times[j] - prev_t);
    }
    prev_t = times[j];
    prev_q = q[j];
  }
  if (!started || std::abs(prev_t - t2) > eps) return NAN;
  return acc / (t2 - t1);
}

/// Q(T) = int_0^T |u_s - h(u_c)|_alpha^2 / int_0^T |u_s|_alpha^2, with h supplied as
/// h(frame_index, u_c, out_high) filling modes m+1..m+out_high.size().
template <class Parameterization>
DefectReport parameterization_defect(const Model& model, const ModeTrajectory& full, Parameterization&& h,
                                     const DefectOptions& opts) {
  if (opts.stride < 1) throw std::invalid_argument("parameterization_defect: stride must be >= 1");
  const int m = model.m();
  const int ng = full.n_modes();
  const auto w = model.norm_weights(opts.alpha);
  ModalVector high(static_cast<std::size_t>(model.n_noise() - m), 0.0);

  DefectReport r;
  r.alpha = opts.alpha;
  r.t1 = opts.t1;
  r.t2 = opts.t2;
  r.seed = full.seed;
  r.params = model.params();

  double num = 0.0, den = 0.0, prev_err = 0.0, prev_var = 0.0, prev_t = 0.0;
  bool first = true;
  for (std::size_t k = 0; k < full.size(); k += static_cast<std::size_t>(opts.stride)) {
    const auto u = full.frame(k);
    h(static_cast<std::int64_t>(k), u.first(static_cast<std::size_t>(m)), std::span<double>(high));
    double err = 0.0, var = 0.0;
    for (int n = m + 1; n <= ng; ++n) {
      const double us = u[n - 1];
      const double hn = (n - m - 1) < static_cast<int>(high.size()) ? high[n - m - 1] : 0.0;
      err += w[n - 1] * (us - hn) * (us - hn);
      var += w[n - 1] * us * us;
    }
    const double t = full.time(k);
    if (!first) {
      num += 0.5 * (err + prev_err) * (t - prev_t);
      den += 0.5 * (var + prev_var) * (t - prev_t);
      if (den > 0.0) {
        r.times.push_back(t);
        r.q.push_back(num / den);
      }
    }
    first = false;
    prev_err = err;
    prev_var = var;
    prev_t = t;
  }
  if (!(den > 0.0)) throw DegenerateDenominator("unresolved component vanishes identically on the window");
  r.mean = time_average(r.times, r.q, opts.t1, opts.t2);
  return r;
}

/// Defect of the on-the-fly pullback parameterization with window `window_steps`.
template <IncrementSource Noise>
DefectReport parameterization_defect(const Model& model, const ModeTrajectory& full, std::int64_t window_steps,
                                     const Noise& noise, const DefectOptions& opts) {
  PullbackIntegrator integ(model, noise.dt(), window_steps);
  auto report = parameterization_defect(
      model, full,
      [&](std::int64_t k, std::span<const double> uc, std::span<double> out) { integ.evaluate(uc, k, noise, out); },
      opts);
  return report;
}

inline DefectReport parameterization_defect(const Model& model, const ModeTrajectory& full, double window,
                                            const WienerPath& path, const DefectOptions& opts) {
  const std::int64_t k_win = steps_for(window, path.dt(), "pullback_time");
  const PathWindow cached(path, -k_win, static_cast<std::int64_t>(full.size()));
  return parameterization_defect(model, full, k_win, cached, opts);
}

// ---------------------------------------------------------------------------------------
// Unresolved-variance fraction

/// Share of the alpha-weighted unresolved energy of modes lo..hi over [0, horizon].
inline double variance_fraction(const ModeTrajectory& full, int m, int lo, int hi, double horizon, double alpha = 0.0) {
  if (!(m < lo && lo <= hi && hi <= full.n_modes())) throw std::invalid_argument("variance_fraction: need m < lo <= hi <= N_g");
  const auto last = std::min<std::size_t>(full.size() - 1, static_cast<std::size_t>(std::llround(horizon / full.dt())));
  double part = 0.0, total = 0.0;
  for (std::size_t k = 0; k <= last; ++k) {
    const double wt = (k == 0 || k == last) ? 0.5 : 1.0;
    for (int n = m + 1; n <= full.n_modes(); ++n) {
      const double e = wt * norm_weight(full.params, n, alpha) * full.coefficient(k, n) * full.coefficient(k, n);
      total += e;
      if (n >= lo && n <= hi) part += e;
    }
  }
  if (!(total > 0.0)) throw DegenerateDenominator("unresolved component vanishes identically");
  return part / total;
}

// ---------------------------------------------------------------------------------------
// PDFs

struct PdfEstimate {
  std::vector<double> edges;    // bins + 1 edges
  std::vector<double> density;  // one value per bin
  std::size_t count = 0;
  int mode = 0;

  std::size_t bins() const { return density.size(); }
  double center(std::size_t j) const { return 0.5 * (edges[j] + edges[j + 1]); }
  double width(std::size_t j) const { return edges[j + 1] - edges[j]; }
  double integral() const {
    double s = 0.0;
    for (std::size_t j = 0; j < bins(); ++j) s += density[j] * width(j);
    return s;
  }
};

inline std::pair<double, double> sample_range(std::span<const double> samples) {
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  return {*lo, *hi};
}

inline std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> e(bins + 1);
  for (std::size_t j = 0; j <= bins; ++j) e[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(bins);
  return e;
}

/// Normalized histogram. Without a range the sample min/max are used; samples outside an
/// explicit range are ignored.
inline PdfEstimate estimate_pdf(std::span<const double> samples, std::size_t bins,
                                std::optional<std::pair<double, double>> range = std::nullopt) {
  if (samples.size() < 2) throw EmptyInput("estimate_pdf needs at least two samples");
  if (bins < 1) throw std::invalid_argument("estimate_pdf: bins must be >= 1");
  const auto [lo, hi] = range ? *range : sample_range(samples);
  PdfEstimate pdf;
  pdf.edges = uniform_edges(lo, hi, bins);
  pdf.density.assign(bins, 0.0);
  const double a = pdf.edges.front(), b = pdf.edges.back();
  const double scale = static_cast<double>(bins) / (b - a);
  for (double x : samples) {
    if (x < a || x > b) continue;
    auto j = static_cast<std::size_t>((x - a) * scale);
    if (j >= bins) j = bins - 1;
    pdf.density[j] += 1.0;
    ++pdf.count;
  }
  if (pdf.count == 0) throw EmptyInput("estimate_pdf: no samples inside the range");
  for (std::size_t j = 0; j < bins; ++j) pdf.density[j] /= static_cast<double>(pdf.count) * pdf.width(j);
  return pdf;
}

/// Silverman's rule: 0.9 min(sd, IQR / 1.34) n^{-1/5}.
inline double silverman_bandwidth(std::span<const double> samples) {
  const auto n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0)) spread = 1.0;
  return 0.9 * spread * std::pow(n, -0.2);
}

/// Gaussian-kernel density evaluated at `points` (bandwidth by Silverman's rule by default).
inline std::vector<double> kernel_density(std::span<const double> samples, std::span<const double> points,
                                          double bandwidth = 0.0) {
  if (samples.size() < 2) throw EmptyInput("kernel_density needs at least two samples");
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(points.size(), 0.0);
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double x = points[j];
    auto it = std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * h);
    const auto end = std::upper_bound(it, sorted.end(), x + 8.0 * h);
    double acc = 0.0;
    for (; it != end; ++it) {
      const double z = (x - *it) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out[j] = acc * norm;
  }
  return out;
}

/// Kernel-smoothed variant of estimate_pdf, renormalized over the binned range.
inline PdfEstimate smoothed_pdf(std::span<const double> samples, std::size_t bins,
                                std::optional<std::pair<double, double>> range = std::nullopt) {
  PdfEstimate pdf = estimate_pdf(samples, bins, range);
  std::vector<double> centers(bins);
  for (std::size_t j = 0; j < bins; ++j) centers[j] = pdf.center(j);
  pdf.density = kernel_density(samples, centers);
  const double mass = pdf.integral();
  if (mass > 0.0)
    for (double& d : pdf.density) d /= mass;
  return pdf;
}

struct DistributionDistance {
  double l1 = 0.0;  // in [0, 2]
  double ks = 0.0;  // in [0, 1], on the binned CDFs
};

/// Distances between two estimates on identical bins.
inline DistributionDistance compare_distributions(const PdfEstimate& a, const PdfEstimate& b) {
  if (a.edges.size() != b.edges.size()) throw std::invalid_argument("compare_distributions: bins differ");
  for (std::size_t j = 0; j < a.edges.size(); ++j)
    if (std::abs(a.edges[j] - b.edges[j]) > 1e-12 * std::max(1.0, std::abs(a.edges[j])))
      throw std::invalid_argument("compare_distributions: bin edges differ");
  DistributionDistance d;
  double fa = 0.0, fb = 0.0;
  for (std::size_t j = 0; j < a.bins(); ++j) {
    const double pa = a.density[j] * a.width(j);
    const double pb = b.density[j] * b.width(j);
    d.l1 += std::abs(pa - pb);
    fa += pa;
    fb += pb;
    d.ks = std::max(d.ks, std::abs(fa - fb));
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov statistic on raw samples.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / x.size() - static_cast<double>(j) / y.size()));
  }
  return d;
}

// ---------------------------------------------------------------------------------------
// Bimodality

struct BimodalityOptions {
  double prominence = 0.1;  // fraction of the global density maximum
  double dwell = 1.0;       // time units a sign must persist to count as a transition
  std::size_t grid = 256;
};

struct BimodalityReport {
  int modes = 0;
  std::vector<double> peaks;  // locations of the counted maxima
  std::int64_t transitions = 0;
};

/// Topographic prominence of each local maximum of a sampled curve.
inline std::vector<std::pair<std::size_t, double>> peak_prominences(std::span<const double> f) {
  std::vector<std::pair<std::size_t, double>> out;
  const std::size_t n = f.size();
  for (std::size_t j = 0; j < n; ++j) {
    const bool left_ok = j == 0 || f[j] > f[j - 1];
    std::size_t r = j;
    while (r + 1 < n && f[r + 1] == f[j]) ++r;  // plateau
    const bool right_ok = r + 1 == n || f[r + 1] < f[j];
    if (!(left_ok && right_ok)) continue;
    double left_min = f[j];
    for (std::size_t q = j; q-- > 0;) {
      if (f[q] > f[j]) break;
      left_min = std::min(left_min, f[q]);
    }
    double right_min = f[j];
    for (std::size_t q = r + 1; q < n; ++q) {
      if (f[q] > f[j]) break;
      right_min = std::min(right_min, f[q]);
    }
    out.emplace_back((j + r) / 2, f[j] - std::max(left_min, right_min));
    j = r;
  }
  return out;
}

/// Dwell-filtered sign changes of the mean-centered signal.
inline std::int64_t count_transitions(std::span<const double> samples, double dt, double dwell) {
  if (samples.empty()) return 0;
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  const auto need = std::max<std::int64_t>(1, std::llround(dwell / dt));
  int committed = 0, run_sign = 0;
  std::int64_t run = 0, transitions = 0;
  for (double x : samples) {
    const int s = x > mean ? 1 : (x < mean ? -1 : 0);
    if (s == 0) continue;
    if (s == run_sign) {
      ++run;
    } else {
      run_sign = s;
      run = 1;
    }
    if (run >= need && run_sign != committed) {
      if (committed != 0) ++transitions;
      committed = run_sign;
    }
  }
  return transitions;
}

inline BimodalityReport detect_bimodality(std::span<const double> samples, double dt,
                                          const BimodalityOptions& opts = {}) {
  if (samples.size() < 1000) throw EmptyInput("detect_bimodality needs at least 1000 samples");
  const double h = silverman_bandwidth(samples);
  auto [lo, hi] = sample_range(samples);
  lo -= 3.0 * h;
  hi += 3.0 * h;
  std::vector<double> grid(opts.grid);
  for (std::size_t j = 0; j < opts.grid; ++j) grid[j] = lo + (hi - lo) * static_cast<double>(j) / (opts.grid - 1.0);
  const auto f = kernel_density(samples, grid, h);
  const double fmax = *std::max_element(f.begin(), f.end());
  BimodalityReport r;
  for (const auto& [j, prom] : peak_prominences(f)) {
    if (prom >= opts.prominence * fmax) {
      ++r.modes;
      r.peaks.push_back(grid[j]);
    }
  }
  r.transitions = count_transitions(samples, dt, opts.dwell);
  return r;
}

// ---------------------------------------------------------------------------------------
// Field comparison

/// |a - b|_2 / |b|_2 over a space-time array.
inline double relative_l2_error(const SpaceTimeField& a, const SpaceTimeField& b) {
  if (a.values.size() != b.values.size()) throw std::invalid_argument("relative_l2_error: shapes differ");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    num += (a.values[j] - b.values[j]) * (a.values[j] - b.values[j]);
    den += b.values[j] * b.values[j];
  }
  if (!(den > 0.0)) throw DegenerateDenominator("reference field vanishes identically");
  return std::sqrt(num / den);
}

}  // namespace pmred
