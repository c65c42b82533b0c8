#pragma once

// Spectral structure of the Dirichlet Burgers operator
//   L u = nu u_xx + lambda u,   B(u, v) = -gamma u v_x   on (0, l).
//
// Mode indices are 1-based throughout (mode n <-> e_n(x) = sqrt(2/l) sin(n pi x / l)).
// Coefficient vectors store mode n at position n - 1.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pmred/errors.hpp"

namespace pmred {

using ModalVector = std::vector<double>;

struct ModelParams {
  double nu = 2.0;
  double lambda = 0.0;
  double gamma = 0.5;
  double length = 7.0 * std::numbers::pi;
  int m = 2;            // resolved modes
  int n_noise = 10;     // forced modes N
  int n_galerkin = 32;  // full-solver modes N_g
  std::vector<double> sigma = std::vector<double>(10, 3.0);  // sigma_1..sigma_N

  double lambda_c() const { return nu * std::numbers::pi * std::numbers::pi / (length * length); }

  /// Noise amplitude of mode n; zero for unforced modes.
  double sigma_of(int n) const {
    return (n >= 1 && n <= static_cast<int>(sigma.size())) ? sigma[n - 1] : 0.0;
  }

  void validate() const {
    if (!(nu > 0.0)) throw ConfigInvalid("model.nu", "must be > 0");
    if (!(length > 0.0)) throw ConfigInvalid("model.length", "must be > 0");
    if (!(gamma >= 0.0)) throw ConfigInvalid("model.gamma", "must be >= 0");
    if (!std::isfinite(lambda)) throw ConfigInvalid("model.lambda", "must be finite");
    if (m < 1) throw ConfigInvalid("model.m", "must be >= 1");
    if (n_noise <= m) throw ConfigInvalid("model.n_noise", "must exceed m");
    if (n_galerkin < n_noise) throw ConfigInvalid("model.n_galerkin", "must be >= n_noise");
    if (static_cast<int>(sigma.size()) != n_noise)
      throw ConfigInvalid("model.sigma", "expected " + std::to_string(n_noise) + " amplitudes");
    for (double s : sigma)
      if (!(s >= 0.0)) throw ConfigInvalid("model.sigma", "amplitudes must be >= 0");
  }

  /// Copy with every sigma_i set to `s`.
  ModelParams with_uniform_sigma(double s) const {
    ModelParams p = *this;
    p.sigma.assign(static_cast<std::size_t>(n_noise), s);
    return p;
  }
};

inline double eigenvalue(const ModelParams& p, int n) {
  const double k = n * std::numbers::pi / p.length;
  return p.lambda - p.nu * k * k;
}

inline double eigenfunction_value(const ModelParams& p, int n, double x) {
  return std::sqrt(2.0 / p.length) * std::sin(n * std::numbers::pi * x / p.length);
}

/// <B(e_i1, e_i2), e_n> = -gamma <e_i1 (e_i2)_x, e_n>.
inline double interaction_coefficient(const ModelParams& p, int i1, int i2, int n) {
  const double scale = -p.gamma * i2 * std::numbers::pi / (std::numbers::sqrt2 * std::pow(p.length, 1.5));
  if (n == i1 + i2) return scale;
  if (n >= 1 && n == std::abs(i1 - i2)) return i1 > i2 ? scale : -scale;
  return 0.0;
}

/// Weight (1 + (n pi / l)^2)^alpha of mode n in the alpha-norm.
inline double norm_weight(const ModelParams& p, int n, double alpha) {
  if (alpha == 0.0) return 1.0;
  const double k = n * std::numbers::pi / p.length;
  return std::pow(1.0 + k * k, alpha);
}

struct InteractionTerm {
  int i1;
  int i2;
  double coefficient;
};

/// Sparse B^n_{i1 i2} for 1 <= i1, i2, n <= size. Terms are grouped by output mode n.
class InteractionTable {
 public:
  InteractionTable() = default;
  InteractionTable(const ModelParams& p, int size) : size_(size), by_mode_(static_cast<std::size_t>(size)) {
    for (int i1 = 1; i1 <= size; ++i1) {
      for (int i2 = 1; i2 <= size; ++i2) {
        for (int n : {i1 + i2, std::abs(i1 - i2)}) {
          if (n < 1 || n > size) continue;
          by_mode_[n - 1].push_back({i1, i2, interaction_coefficient(p, i1, i2, n)});
        }
      }
    }
    for (auto& terms : by_mode_)
      std::sort(terms.begin(), terms.end(), [](const InteractionTerm& a, const InteractionTerm& b) {
        return std::max(a.i1, a.i2) < std::max(b.i1, b.i2);
      });
  }

  int size() const { return size_; }

  /// Terms contributing to mode n, sorted by max(i1, i2).
  std::span<const InteractionTerm> terms(int n) const { return by_mode_[n - 1]; }

  double coefficient(int i1, int i2, int n) const {
    if (n < 1 || n > size_) return 0.0;
    for (const auto& t : by_mode_[n - 1])
      if (t.i1 == i1 && t.i2 == i2) return t.coefficient;
    return 0.0;
  }

 private:
  int size_ = 0;
  std::vector<std::vector<InteractionTerm>> by_mode_;
};

/// Galerkin projection of B(u, u): component n = sum u_i1 u_i2 B^n_{i1 i2}, over indices
/// within the length of `u`. Pairs reaching beyond the truncation are dropped.
inline void nonlinear_term(const InteractionTable& table, std::span<const double> u, std::span<double> out) {
  const int len = static_cast<int>(u.size());
  for (int n = 1; n <= len; ++n) {
    double acc = 0.0;
    for (const auto& t : table.terms(n)) {
      if (std::max(t.i1, t.i2) > len) break;
      acc += t.coefficient * u[t.i1 - 1] * u[t.i2 - 1];
    }
    out[n - 1] = acc;
  }
}

inline ModalVector nonlinear_term(const InteractionTable& table, std::span<const double> u) {
  ModalVector out(u.size(), 0.0);
  nonlinear_term(table, u, out);
  return out;
}

/// Immutable bundle of parameters plus precomputed eigen-data.
class Model {
 public:
  explicit Model(ModelParams params) : params_(std::move(params)) {
    params_.validate();
    betas_.resize(static_cast<std::size_t>(params_.n_galerkin));
    for (int n = 1; n <= params_.n_galerkin; ++n) betas_[n - 1] = eigenvalue(params_, n);
    table_ = InteractionTable(params_, params_.n_galerkin);
  }

  const ModelParams& params() const { return params_; }
  int m() const { return params_.m; }
  int n_noise() const { return params_.n_noise; }
  int n_galerkin() const { return params_.n_galerkin; }

  double beta(int n) const { return betas_[n - 1]; }
  std::span<const double> betas() const { return betas_; }
  double sigma(int n) const { return params_.sigma_of(n); }
  const InteractionTable& table() const { return table_; }

  std::vector<double> norm_weights(double alpha) const {
    std::vector<double> w(betas_.size());
    for (int n = 1; n <= params_.n_galerkin; ++n) w[n - 1] = norm_weight(params_, n, alpha);
    return w;
  }

 private:
  ModelParams params_;
  std::vector<double> betas_;
  InteractionTable table_;
};

enum class GapKind {
  kSum,     // beta_i1 + beta_i2 - beta_n
  kSecond,  // beta_i2 - beta_n, required when sigma_i1 != 0
  kFirst,   // beta_i1 - beta_n, required when sigma_i2 != 0
};

inline const char* to_string(GapKind k) {
  switch (k) {
    case GapKind::kSum: return "sum";
    case GapKind::kSecond: return "second";
    case GapKind::kFirst: return "first";
  }
  return "?";
}

struct ResonanceGap {
  int i1;
  int i2;
  int n;
  GapKind kind;
  double value;
};

struct NRReport {
  bool satisfied = true;
  std::vector<ResonanceGap> gaps;  // only the gaps the conditions require
  double min_gap = 0.0;

  /// Smallest gap of a given kind, or +inf if none is required.
  double min_of(GapKind kind) const {
    double best = INFINITY;
    for (const auto& g : gaps)
      if (g.kind == kind) best = std::min(best, g.value);
    return best;
  }
};

/// Non-resonance check over every (i1, i2) in {1..m}^2 and n > m with B^n_{i1 i2} != 0.
inline NRReport check_non_resonance(const Model& model) {
  const int m = model.m();
  for (int n = m + 1; n <= model.n_galerkin(); ++n) {
    if (model.beta(n) >= 0.0)
      throw StabilityViolation("beta_" + std::to_string(n) + " = " + std::to_string(model.beta(n)) +
                               " is not negative");
  }
  const auto& p = model.params();
  const auto add = [](NRReport& r, ResonanceGap g) {
    r.satisfied = r.satisfied && g.value > 0.0;
    r.gaps.push_back(g);
  };
  NRReport report;
  for (int i1 = 1; i1 <= m; ++i1) {
    for (int i2 = 1; i2 <= m; ++i2) {
      for (int n = m + 1; n <= 2 * m; ++n) {
        if (interaction_coefficient(p, i1, i2, n) == 0.0) continue;
        const double bn = eigenvalue(p, n);
        const double b1 = eigenvalue(p, i1);
        const double b2 = eigenvalue(p, i2);
        add(report, {i1, i2, n, GapKind::kSum, b1 + b2 - bn});
        if (p.sigma_of(i1) != 0.0) add(report, {i1, i2, n, GapKind::kSecond, b2 - bn});
        if (p.sigma_of(i2) != 0.0) add(report, {i1, i2, n, GapKind::kFirst, b1 - bn});
      }
    }
  }
  report.min_gap = INFINITY;
  for (const auto& g : report.gaps) report.min_gap = std::min(report.min_gap, g.value);
  return report;
}

}  // namespace pmred
