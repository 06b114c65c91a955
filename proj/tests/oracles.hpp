#pragma once

// Test-only reference implementations. Each one recomputes a quantity by a
// route that does not share code with the library path it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "srf/radon.hpp"
#include "srf/skeleton.hpp"

namespace oracle {

/// Neumaier-compensated mean of the rows, summed last row first.
inline Eigen::VectorXd compensated_centroid(const Eigen::MatrixXd& points) {
  Eigen::VectorXd out(points.cols());
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    double sum = 0.0, comp = 0.0;
    for (Eigen::Index j = points.rows(); j-- > 0;) {
      const double v = points(j, k);
      const double t = sum + v;
      comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    out(k) = (sum + comp) / static_cast<double>(points.rows());
  }
  return out;
}

/// Sum over joints of (x - mu)(x - mu)^T / (J - 1), element by element.
inline Eigen::MatrixXd loop_covariance(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  const Eigen::VectorXd mu = compensated_centroid(points);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) acc += (points(j, a) - mu(a)) * (points(j, b) - mu(b));
      s(a, b) = acc / static_cast<double>(n - 1);
    }
  }
  return s;
}

/// sqrt(diff^T S^-1 diff) via a full-pivot LU solve of S y = diff.
inline double solve_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                             const Eigen::MatrixXd& s) {
  const Eigen::VectorXd diff = x - mu;
  const Eigen::VectorXd y = s.fullPivLu().solve(diff);
  return std::sqrt(std::max(0.0, diff.dot(y)));
}

/// Per-joint distances with the same ridge rule, via linear solves.
inline Eigen::VectorXd solve_row(const Eigen::MatrixXd& points, double lambda_rel) {
  const Eigen::VectorXd mu = compensated_centroid(points);
  Eigen::MatrixXd s = loop_covariance(points);
  const double ridge = lambda_rel * std::max(s.trace() / static_cast<double>(s.rows()), 1e-12);
  s.diagonal().array() += ridge;
  Eigen::VectorXd row(points.rows());
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    row(j) = solve_distance(points.row(j).transpose(), mu, s);
  }
  return row;
}

/// Bilinear resize written pixel by pixel from the cell-center formula.
inline Eigen::MatrixXd pixel_bilinear(const Eigen::MatrixXd& img, int out_h, int out_w) {
  const int in_h = static_cast<int>(img.rows());
  const int in_w = static_cast<int>(img.cols());
  Eigen::MatrixXd out(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      double y = (r + 0.5) * in_h / out_h - 0.5;
      double x = (c + 0.5) * in_w / out_w - 0.5;
      y = std::min(std::max(y, 0.0), in_h - 1.0);
      x = std::min(std::max(x, 0.0), in_w - 1.0);
      const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
      const int y1 = std::min(y0 + 1, in_h - 1), x1 = std::min(x0 + 1, in_w - 1);
      const double fy = y - y0, fx = x - x0;
      out(r, c) = img(y0, x0) * (1 - fy) * (1 - fx) + img(y0, x1) * (1 - fy) * fx +
                  img(y1, x0) * fy * (1 - fx) + img(y1, x1) * fy * fx;
    }
  }
  return out;
}

/// The continuous image: sum of unit tents centered on the pixel centers.
inline double image_at(const Eigen::MatrixXd& img, double x, double y) {
  const double col = x + (img.cols() - 1) / 2.0;
  const double row = y + (img.rows() - 1) / 2.0;
  const auto r_lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(row)));
  const auto c_lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(col)));
  double acc = 0.0;
  for (Eigen::Index r = r_lo; r < std::min<Eigen::Index>(img.rows(), r_lo + 2); ++r) {
    const double wr = 1.0 - std::abs(row - static_cast<double>(r));
    if (wr <= 0.0) continue;
    for (Eigen::Index c = c_lo; c < std::min<Eigen::Index>(img.cols(), c_lo + 2); ++c) {
      const double wc = 1.0 - std::abs(col - static_cast<double>(c));
      if (wc > 0.0) acc += img(r, c) * wr * wc;
    }
  }
  return acc;
}

/// Line integrals by uniform sampling along each ray over the full span of
/// the interpolant's support, no chord clipping.
inline Eigen::MatrixXd dense_radon(const Eigen::MatrixXd& img, int n_rho, int n_theta,
                                   int samples) {
  const double rho_max = std::sqrt(double(img.rows() * img.rows() + img.cols() * img.cols())) / 2.0;
  const double d_rho = 2.0 * rho_max / n_rho;
  const double reach = std::hypot(img.rows() + 1.0, img.cols() + 1.0) / 2.0;
  const double d_s = 2.0 * reach / samples;
  const double pi = std::acos(-1.0);
  Eigen::MatrixXd out(n_rho, n_theta);
  for (int t = 0; t < n_theta; ++t) {
    const double th = t * pi / n_theta;
    for (int k = 0; k < n_rho; ++k) {
      const double rho = -rho_max + (k + 0.5) * d_rho;
      double acc = 0.0;
      for (int i = 0; i < samples; ++i) {
        const double s = -reach + (i + 0.5) * d_s;
        acc += image_at(img, rho * std::cos(th) - s * std::sin(th), rho * std::sin(th) + s * std::cos(th));
      }
      out(k, t) = acc * d_s;
    }
  }
  return out;
}

/// Central finite difference of f with respect to every entry of `x`.
inline Eigen::VectorXd finite_difference(const std::function<double()>& f, double* x,
                                         Eigen::Index n, double h = 1e-5) {
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// max |a - b| / max(|a|, |b|, floor), element-wise.
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

}  // namespace oracle

namespace fixture {

inline srf::SkeletonFrame frame_from(const Eigen::MatrixXd& points, std::int64_t index = 0) {
  srf::SkeletonFrame f;
  f.joints = points.cast<float>();
  f.frame_index = index;
  return f;
}

inline Eigen::MatrixXd random_points(std::mt19937_64& rng, Eigen::Index joints = 25,
                                     Eigen::Index dim = 3) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd p(joints, dim);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = n(rng);
  // anisotropic, translated cloud
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) a(i, i) = 0.2 + 0.3 * static_cast<double>(i);
  a(0, dim - 1) = 0.1;
  return (p * a).rowwise() + Eigen::RowVectorXd::Constant(dim, 1.5);
}

inline srf::RawSequence raw_from(const std::vector<Eigen::MatrixXd>& frames, int label = 0,
                                 std::string subject = "s1", std::string trial = "t1") {
  srf::RawSequence raw;
  raw.subject_id = std::move(subject);
  raw.trial_id = std::move(trial);
  raw.label = label;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    srf::RawFrame rf;
    rf.frame_index = static_cast<std::int64_t>(f);
    for (Eigen::Index j = 0; j < frames[f].rows(); ++j) {
      std::vector<double> c(static_cast<std::size_t>(frames[f].cols()));
      for (Eigen::Index k = 0; k < frames[f].cols(); ++k) c[static_cast<std::size_t>(k)] = frames[f](j, k);
      rf.joints.push_back(std::move(c));
    }
    raw.frames.push_back(std::move(rf));
  }
  return raw;
}

inline srf::ActionSequence random_sequence(std::mt19937_64& rng, int frames, int label = 0,
                                           std::string subject = "s1", std::string trial = "t1",
                                           Eigen::Index joints = 25) {
  std::vector<Eigen::MatrixXd> f;
  for (int i = 0; i < frames; ++i) f.push_back(random_points(rng, joints));
  return srf::validate_sequence(raw_from(f, label, std::move(subject), std::move(trial)));
}

inline Eigen::MatrixXd random_image(std::mt19937_64& rng, Eigen::Index h, Eigen::Index w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd img(h, w);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = u(rng);
  return img;
}

}  // namespace fixture
