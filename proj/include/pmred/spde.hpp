#pragma once

// Ground-truth spectral Galerkin solver for the stochastic Burgers equation
//   du = (nu u_xx + lambda u - gamma u u_x) dt + sum_{i<=N} sigma_i e_i dW^i
// with exponential Euler-Maruyama stepping:
//   u_n <- e^{beta_n dt} u_n + phi1(beta_n dt) dt [B(u,u)]_n + sigma_n dW^n_k.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmred/errors.hpp"
#include "pmred/model.hpp"
#include "pmred/noise.hpp"

namespace pmred {

/// phi1(z) = (e^z - 1) / z with phi1(0) = 1.
inline double phi1(double z) { return z == 0.0 ? 1.0 : std::expm1(z) / z; }

inline constexpr double kBlowUpThreshold = 1e8;

/// Uniform-grid series of modal vectors. Frame k sits at t = k dt.
class ModeTrajectory {
 public:
  ModeTrajectory() = default;
  ModeTrajectory(int n_modes, double dt) : n_modes_(n_modes), dt_(dt) {}

  int n_modes() const { return n_modes_; }
  double dt() const { return dt_; }
  std::size_t size() const { return n_modes_ == 0 ? 0 : data_.size() / static_cast<std::size_t>(n_modes_); }
  double time(std::size_t k) const { return static_cast<double>(k) * dt_; }

  std::span<const double> frame(std::size_t k) const {
    return {data_.data() + k * static_cast<std::size_t>(n_modes_), static_cast<std::size_t>(n_modes_)};
  }
  double coefficient(std::size_t k, int n) const { return data_[k * static_cast<std::size_t>(n_modes_) + n - 1]; }

  /// Time series of mode n.
  std::vector<double> mode_series(int n) const {
    std::vector<double> s(size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = coefficient(k, n);
    return s;
  }

  void push_back(std::span<const double> frame) { data_.insert(data_.end(), frame.begin(), frame.end()); }
  void reserve(std::size_t frames) { data_.reserve(frames * static_cast<std::size_t>(n_modes_)); }

  // Metadata.
  ModelParams params;
  std::uint64_t seed = 0;
  std::string solver = "exponential-euler-maruyama/galerkin-sine";

 private:
  int n_modes_ = 0;
  double dt_ = 0.0;
  std::vector<double> data_;
};

/// Convert a horizon to a step count, requiring it to be a whole multiple of dt.
inline std::int64_t steps_for(double horizon, double dt, const char* what = "horizon") {
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (!(horizon >= 0.0) || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw ConfigInvalid(what, "must be a non-negative multiple of dt");
  return static_cast<std::int64_t>(rounded);
}

class SpdeSolver {
 public:
  SpdeSolver(const Model& model, double dt) : model_(&model), dt_(dt) {
    const int ng = model.n_galerkin();
    decay_.resize(ng);
    forcing_.resize(ng);
    sigma_.resize(ng);
    scratch_.resize(ng);
    for (int n = 1; n <= ng; ++n) {
      const double z = model.beta(n) * dt;
      decay_[n - 1] = std::exp(z);
      forcing_[n - 1] = phi1(z) * dt;
      sigma_[n - 1] = model.sigma(n);
    }
  }

  const Model& model() const { return *model_; }
  double dt() const { return dt_; }

  /// Advance `state` in place from step k to k + 1 using increments dW^n_k.
  template <IncrementSource Noise>
  void step(std::span<double> state, std::int64_t k, const Noise& noise) {
    nonlinear_term(model_->table(), state, scratch_);
    const int nn = model_->n_noise();
    double sup = 0.0;
    for (std::size_t j = 0; j < state.size(); ++j) {
      double v = decay_[j] * state[j] + forcing_[j] * scratch_[j];
      if (static_cast<int>(j) < nn) v += sigma_[j] * noise.increment(static_cast<int>(j) + 1, k);
      state[j] = v;
      sup = std::max(sup, std::abs(v));
    }
    if (!(sup <= kBlowUpThreshold)) throw NonFinite("spde state left the finite range", k);
  }

 private:
  const Model* model_;
  double dt_;
  std::vector<double> decay_, forcing_, sigma_, scratch_;
};

template <IncrementSource Noise>
ModeTrajectory simulate_spde(const Model& model, std::span<const double> u0, std::int64_t n_steps,
                             const Noise& noise) {
  if (static_cast<int>(u0.size()) != model.n_galerkin())
    throw std::invalid_argument("simulate_spde: u0 must have n_galerkin entries");
  SpdeSolver solver(model, noise.dt());
  ModeTrajectory traj(model.n_galerkin(), noise.dt());
  traj.params = model.params();
  traj.reserve(static_cast<std::size_t>(n_steps) + 1);
  ModalVector state(u0.begin(), u0.end());
  traj.push_back(state);
  for (std::int64_t k = 0; k < n_steps; ++k) {
    solver.step(std::span<double>(state), k, noise);
    traj.push_back(state);
  }
  return traj;
}

/// Full-model run over [0, t_end] on the path's grid. Caches the increments it consumes.
inline ModeTrajectory simulate_spde(const Model& model, std::span<const double> u0, double t_end,
                                    const WienerPath& path) {
  const std::int64_t n_steps = steps_for(t_end, path.dt(), "t_end");
  const PathWindow window(path, 0, n_steps);
  ModeTrajectory traj = simulate_spde(model, u0, n_steps, window);
  traj.seed = path.seed();
  return traj;
}

/// u(x) = sum_n coeffs_n e_n(x) on the given positions.
inline std::vector<double> field_value(const ModelParams& p, std::span<const double> coeffs,
                                       std::span<const double> xs) {
  std::vector<double> out(xs.size(), 0.0);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    double acc = 0.0;
    for (std::size_t n = 0; n < coeffs.size(); ++n)
      acc += coeffs[n] * eigenfunction_value(p, static_cast<int>(n) + 1, xs[j]);
    out[j] = acc;
  }
  return out;
}

/// Uniform grid of `points` positions spanning [0, l] inclusive.
inline std::vector<double> uniform_grid(const ModelParams& p, int points) {
  std::vector<double> xs(static_cast<std::size_t>(points));
  for (int j = 0; j < points; ++j) xs[j] = p.length * j / (points - 1);
  return xs;
}

}  // namespace pmred
