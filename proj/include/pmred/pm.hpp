#pragma once

// Parameterizing manifold h^(1) of the unresolved modes m+1..N by the resolved ones,
// computed two ways:
//
//  * Pullback: the backward-forward system. The low modes y_1..y_m solve the linear SDE
//    dy = beta y ds + sigma dW backward over [t - T, t] from y(t) = xi; the high modes
//    y_{m+1}..y_N then solve, forward over [t, t + T] from zero,
//      dy_n = (beta_n y_n + sum_{i1,i2<=m} B^n_{i1 i2} y_i1(s - T) y_i2(s - T)) ds + sigma_n dW^n_{s-T}.
//    The value at s = t + T approximates h^(1)(xi, theta_t omega).
//
//  * Analytic: the closed-form expansion
//      h_n = Z_n + sum_{i1,i2} (A + B xi_i1 + C xi_i2 + D xi_i1 xi_i2) B^n_{i1 i2},
//    whose random coefficients are integrals over the past of W, evaluated by left-endpoint
//    quadrature on the dt grid over [-T_past, 0].
//
// Anchors and windows are integer step counts on the noise grid. High-mode vectors hold
// modes m+1..N at positions 0..N-m-1.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pmred/errors.hpp"
#include "pmred/model.hpp"
#include "pmred/noise.hpp"
#include "pmred/spde.hpp"

namespace pmred {

/// y_1..y_m on the grid t - T + j dt, j = 0..K. Row j holds the m low modes.
class LowModeHistory {
 public:
  LowModeHistory() = default;
  LowModeHistory(int m, std::int64_t steps)
      : m_(m), steps_(steps), data_(static_cast<std::size_t>((steps + 1) * m), 0.0) {}

  int m() const { return m_; }
  std::int64_t steps() const { return steps_; }
  std::span<double> row(std::int64_t j) { return {data_.data() + j * m_, static_cast<std::size_t>(m_)}; }
  std::span<const double> row(std::int64_t j) const {
    return {data_.data() + j * m_, static_cast<std::size_t>(m_)};
  }
  double at(std::int64_t j, int i) const { return data_[j * m_ + i - 1]; }

 private:
  int m_ = 0;
  std::int64_t steps_ = 0;
  std::vector<double> data_;
};

/// Bilinear forcing of the high modes by the low modes: (i1, i2 <= m, n in m+1..N).
struct LowForcingTerm {
  int n;
  int i1;
  int i2;
  double coefficient;
};

inline std::vector<LowForcingTerm> low_mode_forcing(const Model& model) {
  std::vector<LowForcingTerm> out;
  const int m = model.m();
  for (int n = m + 1; n <= model.n_noise(); ++n)
    for (const auto& t : model.table().terms(n))
      if (t.i1 <= m && t.i2 <= m) out.push_back({n, t.i1, t.i2, t.coefficient});
  return out;
}

/// Reusable backward-forward integrator for a fixed window of K steps. Holds scratch
/// buffers, so give each thread its own instance.
class PullbackIntegrator {
 public:
  PullbackIntegrator(const Model& model, double dt, std::int64_t window_steps)
      : model_(&model), dt_(dt), window_(window_steps), forcing_(low_mode_forcing(model)) {
    if (window_steps < 1) throw std::invalid_argument("pullback window must be at least one step");
    const int m = model.m();
    const int nn = model.n_noise();
    back_decay_.resize(m);
    for (int i = 1; i <= m; ++i) back_decay_[i - 1] = std::exp(-model.beta(i) * dt);
    fwd_decay_.resize(nn - m);
    fwd_forcing_.resize(nn - m);
    for (int n = m + 1; n <= nn; ++n) {
      const double z = model.beta(n) * dt;
      fwd_decay_[n - m - 1] = std::exp(z);
      fwd_forcing_[n - m - 1] = phi1(z) * dt;
    }
    drive_.resize(nn - m);
    history_ = LowModeHistory(m, window_steps);
  }

  std::int64_t window_steps() const { return window_; }
  double dt() const { return dt_; }
  const Model& model() const { return *model_; }

  /// Backward leg from y(anchor) = xi, via the reverse exponential step
  /// y(s - dt) = e^{-beta dt} (y(s) - sigma dW), the exact inverse of the forward step.
  template <IncrementSource Noise>
  void backward_leg(std::span<const double> xi, std::int64_t anchor, const Noise& noise, LowModeHistory& out) const {
    const int m = model_->m();
    const std::int64_t k0 = anchor - window_;
    auto last = out.row(window_);
    for (int i = 0; i < m; ++i) last[i] = xi[i];
    for (std::int64_t j = window_; j >= 1; --j) {
      auto prev = out.row(j - 1);
      const auto cur = out.row(j);
      for (int i = 1; i <= m; ++i) {
        prev[i - 1] = back_decay_[i - 1] * (cur[i - 1] - model_->sigma(i) * noise.increment(i, k0 + j - 1));
      }
    }
  }

  /// Forward leg from zero over [t, t + T] with the history and noise shifted back by T.
  template <IncrementSource Noise>
  void forward_leg(const LowModeHistory& history, std::int64_t anchor, const Noise& noise,
                   std::span<double> high) {
    const int m = model_->m();
    const int nn = model_->n_noise();
    const std::int64_t k0 = anchor - window_;
    std::fill(high.begin(), high.end(), 0.0);
    for (std::int64_t j = 0; j < window_; ++j) {
      const auto low = history.row(j);
      std::fill(drive_.begin(), drive_.end(), 0.0);
      for (const auto& t : forcing_) drive_[t.n - m - 1] += t.coefficient * low[t.i1 - 1] * low[t.i2 - 1];
      for (int n = m + 1; n <= nn; ++n) {
        const std::size_t q = static_cast<std::size_t>(n - m - 1);
        high[q] = fwd_decay_[q] * high[q] + fwd_forcing_[q] * drive_[q] +
                  model_->sigma(n) * noise.increment(n, k0 + j);
      }
    }
  }

  /// u_s^(1)[xi](t + T, theta_{-T} omega; 0) with t = anchor dt.
  template <IncrementSource Noise>
  void evaluate(std::span<const double> xi, std::int64_t anchor, const Noise& noise, std::span<double> high) {
    backward_leg(xi, anchor, noise, history_);
    forward_leg(history_, anchor, noise, high);
  }

  template <IncrementSource Noise>
  ModalVector evaluate(std::span<const double> xi, std::int64_t anchor, const Noise& noise) {
    ModalVector high(static_cast<std::size_t>(model_->n_noise() - model_->m()));
    evaluate(xi, anchor, noise, high);
    return high;
  }

 private:
  const Model* model_;
  double dt_;
  std::int64_t window_;
  std::vector<LowForcingTerm> forcing_;
  std::vector<double> back_decay_, fwd_decay_, fwd_forcing_;
  std::vector<double> drive_;
  LowModeHistory history_;
};

template <IncrementSource Noise>
LowModeHistory backward_leg(const Model& model, std::span<const double> xi, std::int64_t anchor,
                            std::int64_t window_steps, const Noise& noise) {
  const PullbackIntegrator integ(model, noise.dt(), window_steps);
  LowModeHistory h(model.m(), window_steps);
  integ.backward_leg(xi, anchor, noise, h);
  return h;
}

template <IncrementSource Noise>
ModalVector forward_leg(const Model& model, const LowModeHistory& history, std::int64_t anchor, const Noise& noise) {
  PullbackIntegrator integ(model, noise.dt(), history.steps());
  ModalVector high(static_cast<std::size_t>(model.n_noise() - model.m()));
  integ.forward_leg(history, anchor, noise, high);
  return high;
}

/// On-the-fly PM value at anchor step `anchor` for a window of `window_steps`.
template <IncrementSource Noise>
ModalVector pullback_hs(const Model& model, std::span<const double> xi, std::int64_t anchor,
                        std::int64_t window_steps, const Noise& noise) {
  PullbackIntegrator integ(model, noise.dt(), window_steps);
  return integ.evaluate(xi, anchor, noise);
}

// ---------------------------------------------------------------------------------------
// Analytic expansion

/// How the improper integrals over (-inf, 0] are cut at -T_past.
enum class Truncation {
  /// Plain truncation of every integral; D keeps its infinite-horizon value 1/gap.
  kImproper,
  /// Exact finite-window form of the pullback at T = T_past: D becomes (1 - e^{-gap T}) / gap
  /// and Z_n gains the boundary term -sigma_n e^{beta_n T} W^n(-T). Tends to kImproper as T grows.
  kFiniteWindow,
};

struct TripleCoefficients {
  int n;
  int i1;
  int i2;
  double interaction;          // B^n_{i1 i2}
  std::array<double, 8> mcoef;  // M_1..M_8
  double d;                     // 1 / (beta_i1 + beta_i2 - beta_n)
  double d_window;              // integral of e^{gap tau} over [-T_past, 0]

  double a() const { return mcoef[0] + mcoef[1] + mcoef[2] + mcoef[3]; }
  double b() const { return mcoef[4] + mcoef[5]; }
  double c() const { return mcoef[6] + mcoef[7]; }
};

struct AnalyticCoefficients {
  int m = 0;
  int n_noise = 0;
  double t_past = 0.0;
  Truncation truncation = Truncation::kFiniteWindow;
  std::vector<double> z;  // Z_n for n = m+1..N
  std::vector<TripleCoefficients> triples;

  /// Evaluate the expansion at xi.
  ModalVector evaluate(std::span<const double> xi) const {
    ModalVector h(z);
    for (const auto& t : triples) {
      const double x1 = xi[t.i1 - 1];
      const double x2 = xi[t.i2 - 1];
      const double dd = truncation == Truncation::kFiniteWindow ? t.d_window : t.d;
      h[t.n - m - 1] += (t.a() + t.b() * x1 + t.c() * x2 + dd * x1 * x2) * t.interaction;
    }
    return h;
  }
};

inline void require_stable_high_modes(const Model& model) {
  for (int n = model.m() + 1; n <= model.n_galerkin(); ++n)
    if (model.beta(n) >= 0.0)
      throw StabilityViolation("beta_" + std::to_string(n) + " must be negative for the pullback limit");
}

inline double sum_gap(const Model& model, int i1, int i2, int n) {
  const double g = model.beta(i1) + model.beta(i2) - model.beta(n);
  if (!(g > 0.0))
    throw NRViolation("gap beta_" + std::to_string(i1) + " + beta_" + std::to_string(i2) + " - beta_" +
                      std::to_string(n) + " = " + std::to_string(g) + " is not positive");
  return g;
}

/// Quadrature of Z_n and M_1..M_8 over [-J dt, 0] for the path seen from `anchor`.
template <IncrementSource Noise>
AnalyticCoefficients analytic_coefficients(const Model& model, const Noise& noise, std::int64_t past_steps,
                                           Truncation truncation = Truncation::kFiniteWindow,
                                           std::int64_t anchor = 0) {
  require_stable_high_modes(model);
  if (past_steps < 1) throw std::invalid_argument("analytic_coefficients: T_past must be at least one step");
  const int m = model.m();
  const int nn = model.n_noise();
  const double dt = noise.dt();
  const auto J = past_steps;

  // W^i(-j dt) relative to the anchor, j = 0..J, for every forced mode.
  std::vector<std::vector<double>> w(static_cast<std::size_t>(nn), std::vector<double>(J + 1, 0.0));
  for (int i = 1; i <= nn; ++i)
    for (std::int64_t j = 1; j <= J; ++j) w[i - 1][j] = w[i - 1][j - 1] - noise.increment(i, anchor - j);

  // I^i(-j dt) = int_{-j dt}^0 e^{(tau - tau') beta_i} W^i(tau') dtau' on left endpoints.
  std::vector<std::vector<double>> inner(static_cast<std::size_t>(m), std::vector<double>(J + 1, 0.0));
  for (int i = 1; i <= m; ++i) {
    const double f = std::exp(-model.beta(i) * dt);
    for (std::int64_t j = 1; j <= J; ++j) inner[i - 1][j] = f * inner[i - 1][j - 1] + w[i - 1][j] * dt;
  }

  AnalyticCoefficients out;
  out.m = m;
  out.n_noise = nn;
  out.t_past = static_cast<double>(J) * dt;
  out.truncation = truncation;
  out.z.assign(static_cast<std::size_t>(nn - m), 0.0);

  for (int n = m + 1; n <= nn; ++n) {
    const double bn = model.beta(n);
    const double sn = model.sigma(n);
    if (sn == 0.0) continue;
    double acc = 0.0;
    for (std::int64_t j = 1; j <= J; ++j) acc += std::exp(bn * j * dt) * w[n - 1][j];
    double zn = sn * bn * acc * dt;
    if (truncation == Truncation::kFiniteWindow) zn -= sn * std::exp(bn * J * dt) * w[n - 1][J];
    out.z[n - m - 1] = zn;
  }

  for (const auto& t : low_mode_forcing(model)) {
    const int n = t.n, i1 = t.i1, i2 = t.i2;
    const double bn = model.beta(n), b1 = model.beta(i1), b2 = model.beta(i2);
    const double s1 = model.sigma(i1), s2 = model.sigma(i2);
    const double gap = sum_gap(model, i1, i2, n);
    TripleCoefficients tc{n, i1, i2, t.coefficient, {}, 1.0 / gap, -std::expm1(-gap * out.t_past) / gap};
    std::array<double, 8> acc{};
    const auto& w1 = w[i1 - 1];
    const auto& w2 = w[i2 - 1];
    const auto& in1 = inner[i1 - 1];
    const auto& in2 = inner[i2 - 1];
    for (std::int64_t j = 1; j <= J; ++j) {
      const double tau = -static_cast<double>(j) * dt;
      const double en = std::exp(-bn * tau);
      const double e1 = std::exp((b1 - bn) * tau);
      const double e2 = std::exp((b2 - bn) * tau);
      acc[0] += en * w1[j] * w2[j];
      acc[1] += en * w1[j] * in2[j];
      acc[2] += en * w2[j] * in1[j];
      acc[3] += en * in1[j] * in2[j];
      acc[4] += e1 * w2[j];
      acc[5] += e1 * in2[j];
      acc[6] += e2 * w1[j];
      acc[7] += e2 * in1[j];
    }
    tc.mcoef[0] = s1 * s2 * acc[0] * dt;
    tc.mcoef[1] = -s1 * s2 * b2 * acc[1] * dt;
    tc.mcoef[2] = -s1 * s2 * b1 * acc[2] * dt;
    tc.mcoef[3] = s1 * s2 * b1 * b2 * acc[3] * dt;
    tc.mcoef[4] = s2 * acc[4] * dt;
    tc.mcoef[5] = -s2 * b2 * acc[5] * dt;
    tc.mcoef[6] = s1 * acc[6] * dt;
    tc.mcoef[7] = -s1 * b1 * acc[7] * dt;
    out.triples.push_back(tc);
  }
  return out;
}

/// h^(1)(xi, theta_{anchor dt} omega) from the analytic expansion truncated at T_past.
template <IncrementSource Noise>
ModalVector analytic_h1(const Model& model, std::span<const double> xi, const Noise& noise, std::int64_t past_steps,
                        Truncation truncation = Truncation::kFiniteWindow, std::int64_t anchor = 0) {
  return analytic_coefficients(model, noise, past_steps, truncation, anchor).evaluate(xi);
}

/// Deterministic quadratic manifold E[h^(1)](xi) = sum D^{n,i1,i2} xi_i1 xi_i2 B^n_{i1 i2}.
class AveragedManifold {
 public:
  explicit AveragedManifold(const Model& model) : m_(model.m()), n_noise_(model.n_noise()) {
    for (const auto& t : low_mode_forcing(model))
      terms_.push_back({t.n, t.i1, t.i2, t.coefficient / sum_gap(model, t.i1, t.i2, t.n)});
  }

  void evaluate(std::span<const double> xi, std::span<double> high) const {
    std::fill(high.begin(), high.end(), 0.0);
    for (const auto& t : terms_) high[t.n - m_ - 1] += t.coefficient * xi[t.i1 - 1] * xi[t.i2 - 1];
  }

  ModalVector evaluate(std::span<const double> xi) const {
    ModalVector h(static_cast<std::size_t>(n_noise_ - m_));
    evaluate(xi, h);
    return h;
  }

 private:
  int m_;
  int n_noise_;
  std::vector<LowForcingTerm> terms_;  // coefficient already multiplied by D
};

inline ModalVector averaged_h1(const Model& model, std::span<const double> xi) {
  return AveragedManifold(model).evaluate(xi);
}

/// Default quadrature horizon: max(T, 10 / slowest required gap).
inline double default_t_past(const Model& model, double window) {
  const auto nr = check_non_resonance(model);
  if (!nr.satisfied) throw NRViolation("non-resonance conditions fail");
  return std::max(window, 10.0 / nr.min_gap);
}

}  // namespace pmred
