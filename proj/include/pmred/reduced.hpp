#pragma once

// m-dimensional reduced systems
//   dxi = (L^c xi + P_c B(xi + h)) dt + dP_c W,
// with h the on-the-fly pullback value (non-Markovian) or the averaged quadratic
// manifold (Markovian). The PM value at step k is computed from xi at step k and the
// drift is stepped with exponential Euler-Maruyama, sharing increments with the full model.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmred/errors.hpp"
#include "pmred/model.hpp"
#include "pmred/noise.hpp"
#include "pmred/pm.hpp"
#include "pmred/spde.hpp"

namespace pmred {

enum class Variant { kNonMarkovian, kAveraged };

inline const char* to_string(Variant v) { return v == Variant::kNonMarkovian ? "nonmarkov" : "averaged"; }

inline Variant parse_variant(std::string_view s) {
  if (s == "nonmarkov") return Variant::kNonMarkovian;
  if (s == "averaged") return Variant::kAveraged;
  throw ConfigInvalid("experiment.variant", "expected 'nonmarkov' or 'averaged', got '" + std::string(s) + "'");
}

class ReducedTrajectory {
 public:
  ReducedTrajectory() = default;
  ReducedTrajectory(int m, int n_noise, double dt) : m_(m), n_high_(n_noise - m), dt_(dt) {}

  int m() const { return m_; }
  int n_high() const { return n_high_; }
  double dt() const { return dt_; }
  std::size_t size() const { return m_ == 0 ? 0 : xi_.size() / static_cast<std::size_t>(m_); }
  double time(std::size_t k) const { return static_cast<double>(k) * dt_; }

  std::span<const double> xi(std::size_t k) const {
    return {xi_.data() + k * static_cast<std::size_t>(m_), static_cast<std::size_t>(m_)};
  }
  /// PM value (modes m+1..N) used at frame k.
  std::span<const double> high(std::size_t k) const {
    return {high_.data() + k * static_cast<std::size_t>(n_high_), static_cast<std::size_t>(n_high_)};
  }
  std::vector<double> xi_series(int i) const {
    std::vector<double> s(size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = xi_[k * static_cast<std::size_t>(m_) + i - 1];
    return s;
  }

  void push_back(std::span<const double> xi, std::span<const double> high) {
    xi_.insert(xi_.end(), xi.begin(), xi.end());
    high_.insert(high_.end(), high.begin(), high.end());
  }
  void reserve(std::size_t frames) {
    xi_.reserve(frames * static_cast<std::size_t>(m_));
    high_.reserve(frames * static_cast<std::size_t>(n_high_));
  }

  // Metadata.
  Variant variant = Variant::kNonMarkovian;
  std::int64_t window_steps = 0;
  std::uint64_t seed = 0;
  ModelParams params;

 private:
  int m_ = 0;
  int n_high_ = 0;
  double dt_ = 0.0;
  std::vector<double> xi_;
  std::vector<double> high_;
};

class ReducedSolver {
 public:
  ReducedSolver(const Model& model, double dt, std::int64_t window_steps, Variant variant)
      : model_(&model),
        dt_(dt),
        variant_(variant),
        pullback_(model, dt, window_steps),
        averaged_(model),
        full_(static_cast<std::size_t>(model.n_noise()), 0.0) {
    if (variant == Variant::kNonMarkovian) {
      const auto nr = check_non_resonance(model);
      if (!nr.satisfied) throw NRViolation("non-Markovian reduced model requires the non-resonance conditions");
    }
    const int m = model.m();
    decay_.resize(m);
    forcing_.resize(m);
    for (int i = 1; i <= m; ++i) {
      const double z = model.beta(i) * dt;
      decay_[i - 1] = std::exp(z);
      forcing_[i - 1] = phi1(z) * dt;
    }
  }

  Variant variant() const { return variant_; }
  int n_high() const { return model_->n_noise() - model_->m(); }

  /// PM value for xi at anchor step k.
  template <IncrementSource Noise>
  void manifold(std::span<const double> xi, std::int64_t k, const Noise& noise, std::span<double> high) {
    if (variant_ == Variant::kNonMarkovian)
      pullback_.evaluate(xi, k, noise, high);
    else
      averaged_.evaluate(xi, high);
  }

  /// One step of xi from k to k + 1, given the PM value `high` at step k.
  template <IncrementSource Noise>
  void advance(std::span<double> xi, std::span<const double> high, std::int64_t k, const Noise& noise) {
    const int m = model_->m();
    const int len = model_->n_noise();
    for (int i = 0; i < m; ++i) full_[i] = xi[i];
    for (int q = 0; q < len - m; ++q) full_[m + q] = high[q];
    double sup = 0.0;
    for (int i = 1; i <= m; ++i) {
      double drift = 0.0;
      for (const auto& t : model_->table().terms(i)) {
        if (std::max(t.i1, t.i2) > len) break;
        drift += t.coefficient * full_[t.i1 - 1] * full_[t.i2 - 1];
      }
      const double v = decay_[i - 1] * xi[i - 1] + forcing_[i - 1] * drift + model_->sigma(i) * noise.increment(i, k);
      xi[i - 1] = v;
      sup = std::max(sup, std::abs(v));
    }
    if (!(sup <= kBlowUpThreshold)) throw NonFinite("reduced state left the finite range", k);
  }

  /// Evaluate-then-step; `high` receives the PM value used at step k.
  template <IncrementSource Noise>
  void step(std::span<double> xi, std::int64_t k, const Noise& noise, std::span<double> high) {
    manifold(xi, k, noise, high);
    advance(xi, high, k, noise);
  }

 private:
  const Model* model_;
  double dt_;
  Variant variant_;
  PullbackIntegrator pullback_;
  AveragedManifold averaged_;
  std::vector<double> decay_, forcing_;
  std::vector<double> full_;
};

template <IncrementSource Noise>
ModalVector step_reduced(const Model& model, std::span<const double> xi, std::int64_t k, const Noise& noise,
                         std::int64_t window_steps, Variant variant) {
  ReducedSolver solver(model, noise.dt(), window_steps, variant);
  ModalVector next(xi.begin(), xi.end());
  ModalVector high(static_cast<std::size_t>(solver.n_high()));
  solver.step(std::span<double>(next), k, noise, high);
  return next;
}

template <IncrementSource Noise>
ReducedTrajectory simulate_reduced(const Model& model, std::span<const double> phi, std::int64_t n_steps,
                                   std::int64_t window_steps, const Noise& noise, Variant variant) {
  if (static_cast<int>(phi.size()) != model.m()) throw std::invalid_argument("simulate_reduced: phi must have m entries");
  ReducedSolver solver(model, noise.dt(), window_steps, variant);
  ReducedTrajectory traj(model.m(), model.n_noise(), noise.dt());
  traj.variant = variant;
  traj.window_steps = window_steps;
  traj.params = model.params();
  traj.reserve(static_cast<std::size_t>(n_steps) + 1);
  ModalVector xi(phi.begin(), phi.end());
  ModalVector high(static_cast<std::size_t>(solver.n_high()));
  for (std::int64_t k = 0; k < n_steps; ++k) {
    solver.manifold(xi, k, noise, high);
    traj.push_back(xi, high);
    solver.advance(std::span<double>(xi), high, k, noise);
  }
  solver.manifold(xi, n_steps, noise, high);
  traj.push_back(xi, high);
  return traj;
}

/// Reduced run over [0, t_end] with pullback time T on the path's grid.
inline ReducedTrajectory simulate_reduced(const Model& model, std::span<const double> phi, double t_end, double window,
                                          const WienerPath& path, Variant variant) {
  const std::int64_t n_steps = steps_for(t_end, path.dt(), "t_end");
  const std::int64_t k_win = steps_for(window, path.dt(), "pullback_time");
  const PathWindow cached(path, -k_win, n_steps + 1);
  ReducedTrajectory traj = simulate_reduced(model, phi, n_steps, k_win, cached, variant);
  traj.seed = path.seed();
  return traj;
}

/// Space-time array, row-major over (frame, position).
struct SpaceTimeField {
  std::vector<double> times;
  std::vector<double> xs;
  std::vector<double> values;

  double at(std::size_t frame, std::size_t j) const { return values[frame * xs.size() + j]; }
};

/// xi(t) + h(t) summed over modes on `xs`, for every `stride`-th frame.
inline SpaceTimeField reconstruct_field(const ModelParams& p, const ReducedTrajectory& traj, std::span<const double> xs,
                                        std::size_t stride = 1) {
  SpaceTimeField f;
  f.xs.assign(xs.begin(), xs.end());
  ModalVector coeffs(static_cast<std::size_t>(traj.m() + traj.n_high()));
  for (std::size_t k = 0; k < traj.size(); k += stride) {
    const auto xi = traj.xi(k);
    const auto hi = traj.high(k);
    std::copy(xi.begin(), xi.end(), coeffs.begin());
    std::copy(hi.begin(), hi.end(), coeffs.begin() + traj.m());
    const auto u = field_value(p, coeffs, xs);
    f.times.push_back(traj.time(k));
    f.values.insert(f.values.end(), u.begin(), u.end());
  }
  return f;
}

/// Physical field of a full-model trajectory on the same layout.
inline SpaceTimeField spde_field(const ModelParams& p, const ModeTrajectory& traj, std::span<const double> xs,
                                 std::size_t stride = 1) {
  SpaceTimeField f;
  f.xs.assign(xs.begin(), xs.end());
  for (std::size_t k = 0; k < traj.size(); k += stride) {
    const auto u = field_value(p, traj.frame(k), xs);
    f.times.push_back(traj.time(k));
    f.values.insert(f.values.end(), u.begin(), u.end());
  }
  return f;
}

}  // namespace pmred
