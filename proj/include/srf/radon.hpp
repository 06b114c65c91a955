#pragma once

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "srf/error.hpp"
#include "srf/mahalanobis.hpp"

namespace srf {

template <typename Scalar>
using Image = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Bilinear resize on the cell-center grid: output pixel i samples source
/// coordinate (i + 0.5) * in / out - 0.5, clamped to the source extent.
template <typename Derived>
Image<typename Derived::Scalar> resample_bilinear(const Eigen::MatrixBase<Derived>& img,
                                                  Eigen::Index out_h, Eigen::Index out_w) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index in_h = img.rows();
  const Eigen::Index in_w = img.cols();
  if (in_h < 1 || in_w < 1 || out_h < 1 || out_w < 1) {
    throw Error(ErrorCode::ShapeMismatch, "resample needs non-empty source and target");
  }

  struct Tap {
    Eigen::Index lo, hi;
    Scalar w;
  };
  auto taps = [](Eigen::Index in, Eigen::Index out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    for (Eigen::Index i = 0; i < out; ++i) {
      Scalar src = (Scalar(i) + Scalar(0.5)) * Scalar(in) / Scalar(out) - Scalar(0.5);
      src = std::clamp(src, Scalar(0), Scalar(in - 1));
      const auto lo = static_cast<Eigen::Index>(std::floor(src));
      t[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, in - 1), src - Scalar(lo)};
    }
    return t;
  };
  const auto rows = taps(in_h, out_h);
  const auto cols = taps(in_w, out_w);

  Image<Scalar> out(out_h, out_w);
  for (Eigen::Index c = 0; c < out_w; ++c) {
    const Tap& tc = cols[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < out_h; ++r) {
      const Tap& tr = rows[static_cast<std::size_t>(r)];
      const Scalar top = (Scalar(1) - tc.w) * img(tr.lo, tc.lo) + tc.w * img(tr.lo, tc.hi);
      const Scalar bottom = (Scalar(1) - tc.w) * img(tr.hi, tc.lo) + tc.w * img(tr.hi, tc.hi);
      out(r, c) = (Scalar(1) - tr.w) * top + tr.w * bottom;
    }
  }
  return out;
}

/// Discrete Radon transform: rows index rho, columns index theta.
template <typename Scalar>
struct BasicSinogram {
  Image<Scalar> values;
  Scalar rho_max = 0;

  Eigen::Index n_rho() const { return values.rows(); }
  Eigen::Index n_theta() const { return values.cols(); }
  Scalar rho_step() const { return Scalar(2) * rho_max / Scalar(n_rho()); }
  Scalar rho(Eigen::Index k) const { return -rho_max + (Scalar(k) + Scalar(0.5)) * rho_step(); }
  Scalar theta(Eigen::Index k) const {
    return Scalar(k) * std::numbers::pi_v<Scalar> / Scalar(n_theta());
  }

  bool operator==(const BasicSinogram& other) const {
    return rho_max == other.rho_max && values.rows() == other.values.rows() &&
           values.cols() == other.values.cols() && values == other.values;
  }
};

using Sinogram = BasicSinogram<double>;

// The image is the bilinear interpolant of its pixel-center values with
// zero padding: pixel (r, c) sits at x = c - (W-1)/2, y = r - (H-1)/2 and
// contributes a unit-area tent, so the interpolant vanishes outside
// [-(W+1)/2, (W+1)/2] x [-(H+1)/2, (H+1)/2] and integrates to the pixel sum.
namespace detail {

template <typename Derived>
typename Derived::Scalar sample_zero_padded(const Eigen::MatrixBase<Derived>& img,
                                            typename Derived::Scalar x,
                                            typename Derived::Scalar y) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index h = img.rows();
  const Eigen::Index w = img.cols();
  const Scalar col = x + Scalar(w - 1) / Scalar(2);
  const Scalar row = y + Scalar(h - 1) / Scalar(2);
  const Scalar fc = std::floor(col);
  const Scalar fr = std::floor(row);
  const auto c0 = static_cast<Eigen::Index>(fc);
  const auto r0 = static_cast<Eigen::Index>(fr);
  const Scalar wc = col - fc;
  const Scalar wr = row - fr;
  auto at = [&](Eigen::Index r, Eigen::Index c) {
    return (r >= 0 && r < h && c >= 0 && c < w) ? img(r, c) : Scalar(0);
  };
  const Scalar top = (Scalar(1) - wc) * at(r0, c0) + wc * at(r0, c0 + 1);
  const Scalar bottom = (Scalar(1) - wc) * at(r0 + 1, c0) + wc * at(r0 + 1, c0 + 1);
  return (Scalar(1) - wr) * top + wr * bottom;
}

/// Parameter interval [lo, hi] of the line p(s) = rho * n + s * d inside the
/// half-extents (hx, hy); empty when hi <= lo.
template <typename Scalar>
std::pair<Scalar, Scalar> clip_chord(Scalar rho, Scalar cos_t, Scalar sin_t, Scalar hx, Scalar hy) {
  constexpr Scalar kParallel = Scalar(1e-12);
  Scalar lo = -std::numeric_limits<Scalar>::infinity();
  Scalar hi = std::numeric_limits<Scalar>::infinity();
  // x(a) = rho cos - a sin, y(a) = rho sin + a cos
  const Scalar px = rho * cos_t, dx = -sin_t;
  const Scalar py = rho * sin_t, dy = cos_t;
  auto slab = [&](Scalar p, Scalar d, Scalar half) {
    if (std::abs(d) < kParallel) {
      if (std::abs(p) > half) hi = lo;  // misses the slab entirely
      return;
    }
    Scalar a = (-half - p) / d;
    Scalar b = (half - p) / d;
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
  };
  slab(px, dx, hx);
  slab(py, dy, hy);
  return {lo, hi};
}

}  // namespace detail

/// Line integrals of `img` along x cos(theta) + y sin(theta) = rho for
/// n_theta angles uniformly covering [0, pi) and n_rho bins spanning
/// +-half the image diagonal. Each integral is the mean of samples_per_ray
/// midpoint samples along the chord through the interpolant's support,
/// times the chord length.
template <typename Derived>
BasicSinogram<typename Derived::Scalar> radon_transform(const Eigen::MatrixBase<Derived>& img,
                                                        Eigen::Index n_rho, Eigen::Index n_theta,
                                                        Eigen::Index samples_per_ray) {
  using Scalar = typename Derived::Scalar;
  if (img.rows() < 1 || img.cols() < 1 || n_rho < 1 || n_theta < 1 || samples_per_ray < 1) {
    throw Error(ErrorCode::InvalidConfig, "radon transform needs positive sizes");
  }
  const Scalar hx = Scalar(img.cols() + 1) / Scalar(2);
  const Scalar hy = Scalar(img.rows() + 1) / Scalar(2);

  BasicSinogram<Scalar> out;
  out.rho_max = std::hypot(Scalar(img.cols()), Scalar(img.rows())) / Scalar(2);
  out.values = Image<Scalar>::Zero(n_rho, n_theta);

  for (Eigen::Index t = 0; t < n_theta; ++t) {
    const Scalar theta = out.theta(t);
    const Scalar c = std::cos(theta);
    const Scalar s = std::sin(theta);
    for (Eigen::Index k = 0; k < n_rho; ++k) {
      const Scalar rho = out.rho(k);
      const auto [lo, hi] = detail::clip_chord(rho, c, s, hx, hy);
      if (!(hi > lo)) continue;
      const Scalar chord = hi - lo;
      const Scalar step = chord / Scalar(samples_per_ray);
      Scalar sum = 0;
      for (Eigen::Index i = 0; i < samples_per_ray; ++i) {
        const Scalar along = lo + (Scalar(i) + Scalar(0.5)) * step;
        sum += detail::sample_zero_padded(img, rho * c - along * s, rho * s + along * c);
      }
      out.values(k, t) = sum * step;
    }
  }
  return out;
}

struct SrfConfig {
  Eigen::Index resample_h = 64;
  Eigen::Index resample_w = 64;
  Eigen::Index n_rho = 64;
  Eigen::Index n_theta = 90;
  std::optional<Eigen::Index> samples_per_ray;  // default 2 * max(resample_h, resample_w)
  Eigen::Index min_t = 2;

  Eigen::Index rays() const {
    return samples_per_ray.value_or(2 * std::max(resample_h, resample_w));
  }
  void validate() const;
};

/// M divided by its largest entry; an all-zero M is returned unchanged.
Eigen::MatrixXd normalize_by_max(const Eigen::Ref<const Eigen::MatrixXd>& m);

/// Radon footprint of the sequence so far: normalize, resample to a fixed
/// grid, transform. Output shape depends only on the config.
Sinogram srf(const MahalanobisMatrix& state, const SrfConfig& config);

void export_sinogram_pgm(std::ostream& out, const Sinogram& s);
void export_sinogram_csv(std::ostream& out, const Sinogram& s);

}  // namespace srf
