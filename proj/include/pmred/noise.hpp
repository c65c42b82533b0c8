#pragma once

// Two-sided Brownian increments with random access.
//
// increment(i, k) is dW^i over [k dt, (k + 1) dt] for any integer k. Values come from a
// Philox4x32-10 counter keyed on (seed, i, k), mapped to N(0, 1) by the cosine branch of
// Box-Muller. A path built with `substeps = s` sums s finer draws per increment, so
// `coarsened(f)` yields the same Brownian path seen on an f-times coarser grid.

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace pmred {

namespace detail {

struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter round(Counter c, Key k) {
    constexpr std::uint64_t kM0 = 0xD2511F53u;
    constexpr std::uint64_t kM1 = 0xCD9E8D57u;
    const std::uint64_t p0 = kM0 * c[0];
    const std::uint64_t p1 = kM1 * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  static Counter generate(Counter c, Key k) {
    for (int r = 0; r < 10; ++r) {
      c = round(c, k);
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    return c;
  }
};

/// Uniform in the open interval (0, 1) from 64 random bits.
inline double open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Standard normal draw, a pure function of (seed, stream, index).
inline double counter_normal(std::uint64_t seed, std::uint32_t stream, std::int64_t index) {
  const auto idx = static_cast<std::uint64_t>(index);
  const detail::Philox4x32::Counter ctr{static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32),
                                        stream, 0u};
  const detail::Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto out = detail::Philox4x32::generate(ctr, key);
  const double u1 = detail::open_unit(out[0], out[1]);
  const double u2 = detail::open_unit(out[2], out[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Anything that can hand out Brownian increments dW^i_k on a fixed dt grid.
template <class T>
concept IncrementSource = requires(const T& s, int i, std::int64_t k) {
  { s.increment(i, k) } -> std::convertible_to<double>;
  { s.dt() } -> std::convertible_to<double>;
  { s.n_components() } -> std::convertible_to<int>;
};

class WienerPath {
 public:
  WienerPath(std::uint64_t seed, int n_components, double dt, int substeps = 1)
      : seed_(seed), n_(n_components), dt_(dt), substeps_(substeps), scale_(std::sqrt(dt / substeps)) {
    if (n_components < 1) throw std::invalid_argument("WienerPath: n_components must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("WienerPath: dt must be > 0");
    if (substeps < 1) throw std::invalid_argument("WienerPath: substeps must be >= 1");
  }

  std::uint64_t seed() const { return seed_; }
  int n_components() const { return n_; }
  double dt() const { return dt_; }
  int substeps() const { return substeps_; }

  /// dW^i over [k dt, (k + 1) dt]; component i is 1-based.
  double increment(int i, std::int64_t k) const {
    if (substeps_ == 1) return scale_ * counter_normal(seed_, static_cast<std::uint32_t>(i), k);
    double acc = 0.0;
    const std::int64_t base = k * substeps_;
    for (int j = 0; j < substeps_; ++j) acc += counter_normal(seed_, static_cast<std::uint32_t>(i), base + j);
    return scale_ * acc;
  }

  /// W^i(k_to dt) - W^i(k_from dt).
  double bridge_value(int i, std::int64_t k_from, std::int64_t k_to) const {
    if (k_from > k_to) return -bridge_value(i, k_to, k_from);
    double acc = 0.0;
    for (std::int64_t k = k_from; k < k_to; ++k) acc += increment(i, k);
    return acc;
  }

  /// W^i at time k dt, with W^i(0) = 0.
  double value(int i, std::int64_t k) const { return bridge_value(i, 0, k); }

  /// Same Brownian path on a grid `factor` times coarser.
  WienerPath coarsened(int factor) const { return WienerPath(seed_, n_, dt_ * factor, substeps_ * factor); }

 private:
  std::uint64_t seed_;
  int n_;
  double dt_;
  int substeps_;
  double scale_;
};

/// Time-shifted view theta_{shift dt} of another increment source.
template <IncrementSource Base>
class Shifted {
 public:
  Shifted(const Base& base, std::int64_t shift) : base_(&base), shift_(shift) {}
  double increment(int i, std::int64_t k) const { return base_->increment(i, k + shift_); }
  double dt() const { return base_->dt(); }
  int n_components() const { return base_->n_components(); }

 private:
  const Base* base_;
  std::int64_t shift_;
};

/// Increments of a source cached over the index range [k_lo, k_hi) for every component.
/// Lookups outside the range fall through to the underlying path.
class PathWindow {
 public:
  PathWindow(const WienerPath& path, std::int64_t k_lo, std::int64_t k_hi)
      : path_(path), k_lo_(k_lo), k_hi_(k_hi) {
    if (k_hi < k_lo) throw std::invalid_argument("PathWindow: empty range");
    const auto len = static_cast<std::size_t>(k_hi - k_lo);
    data_.resize(len * static_cast<std::size_t>(path.n_components()));
    for (int i = 1; i <= path.n_components(); ++i)
      for (std::int64_t k = k_lo; k < k_hi; ++k) data_[slot(i, k)] = path.increment(i, k);
  }

  double increment(int i, std::int64_t k) const {
    if (k < k_lo_ || k >= k_hi_) return path_.increment(i, k);
    return data_[slot(i, k)];
  }
  double dt() const { return path_.dt(); }
  int n_components() const { return path_.n_components(); }
  std::int64_t k_lo() const { return k_lo_; }
  std::int64_t k_hi() const { return k_hi_; }
  const WienerPath& path() const { return path_; }

  /// W^i(k_to dt) - W^i(k_from dt), summed over cached increments.
  double bridge_value(int i, std::int64_t k_from, std::int64_t k_to) const {
    if (k_from > k_to) return -bridge_value(i, k_to, k_from);
    double acc = 0.0;
    for (std::int64_t k = k_from; k < k_to; ++k) acc += increment(i, k);
    return acc;
  }

 private:
  std::size_t slot(int i, std::int64_t k) const {
    return static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(k_hi_ - k_lo_) +
           static_cast<std::size_t>(k - k_lo_);
  }

  WienerPath path_;
  std::int64_t k_lo_;
  std::int64_t k_hi_;
  std::vector<double> data_;
};

}  // namespace pmred
