#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "srf/error.hpp"
#include "srf/skeleton.hpp"

namespace srf {

inline constexpr double kDefaultLambdaRel = 1e-6;
inline constexpr double kRidgeFloor = 1e-12;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Point clouds are passed one point per row (J x d).

/// Arithmetic mean of the rows.
template <typename Derived>
Vector<typename Derived::Scalar> centroid(const Eigen::MatrixBase<Derived>& points) {
  return points.colwise().mean().transpose();
}

/// Sample covariance of the rows (denominator J - 1), exactly symmetric.
template <typename Derived>
Matrix<typename Derived::Scalar> covariance(const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> mu = centroid(points);
  const Matrix<Scalar> centered = points.rowwise() - mu.transpose();
  const Matrix<Scalar> s = (centered.transpose() * centered) / Scalar(points.rows() - 1);
  return (s + s.transpose()) / Scalar(2);
}

template <typename Scalar>
struct RegularizedInverse {
  Matrix<Scalar> inverse;
  Scalar ridge = 0;
};

/// Inverse of S + ridge * I with ridge = lambda_rel * max(trace(S) / d, 1e-12).
template <typename Derived>
RegularizedInverse<typename Derived::Scalar> regularized_inverse(
    const Eigen::MatrixBase<Derived>& s, typename Derived::Scalar lambda_rel = kDefaultLambdaRel) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index d = s.rows();
  if (s.cols() != d) throw Error(ErrorCode::NotSymmetric, "covariance is not square");
  if (!(lambda_rel >= Scalar(0))) throw Error(ErrorCode::InvalidConfig, "lambda_rel must be >= 0");
  const Scalar scale = s.cwiseAbs().maxCoeff();
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * std::max(scale, Scalar(1))) {
    throw Error(ErrorCode::NotSymmetric, "covariance is not symmetric");
  }

  RegularizedInverse<Scalar> out;
  out.ridge = lambda_rel * std::max(s.trace() / Scalar(d), Scalar(kRidgeFloor));
  const Matrix<Scalar> shifted = s + out.ridge * Matrix<Scalar>::Identity(d, d);
  const Matrix<Scalar> inv = shifted.ldlt().solve(Matrix<Scalar>::Identity(d, d));
  out.inverse = (inv + inv.transpose()) / Scalar(2);
  return out;
}

/// sqrt((x - mu)^T S_inv (x - mu)).
template <typename DerivedX, typename DerivedMu, typename DerivedS>
typename DerivedX::Scalar mahalanobis_distance(const Eigen::MatrixBase<DerivedX>& x,
                                               const Eigen::MatrixBase<DerivedMu>& mu,
                                               const Eigen::MatrixBase<DerivedS>& s_inv) {
  using Scalar = typename DerivedX::Scalar;
  const Vector<Scalar> diff = x - mu;
  const Scalar q = diff.dot(s_inv * diff);
  if (q < Scalar(0)) {
    // Rounding can push a PD form of a tiny vector slightly below zero.
    const Scalar bound = Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                         diff.squaredNorm() * s_inv.cwiseAbs().maxCoeff() * Scalar(s_inv.rows());
    if (-q > bound) {
      throw Error(ErrorCode::NegativeQuadraticForm, "inverse covariance is not positive definite");
    }
    return Scalar(0);
  }
  return std::sqrt(q);
}

/// Distance of every point to the cloud formed by all points.
template <typename Derived>
Vector<typename Derived::Scalar> mahalanobis_row(
    const Eigen::MatrixBase<Derived>& points,
    typename Derived::Scalar lambda_rel = kDefaultLambdaRel) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> mu = centroid(points);
  const Matrix<Scalar> s_inv = regularized_inverse(covariance(points), lambda_rel).inverse;
  Vector<Scalar> row(points.rows());
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    row(j) = mahalanobis_distance(points.row(j).transpose(), mu, s_inv);
  }
  return row;
}

// Skeleton-frame entry points: coordinates are promoted to double.

inline Eigen::MatrixXd to_double(const SkeletonFrame& frame) { return frame.joints.cast<double>(); }

struct FrameStats {
  Eigen::VectorXd centroid;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd regularized_inverse;
  double ridge_used = 0.0;
};

Eigen::VectorXd frame_centroid(const SkeletonFrame& frame);
Eigen::MatrixXd frame_covariance(const SkeletonFrame& frame);
FrameStats frame_stats(const SkeletonFrame& frame, double lambda_rel = kDefaultLambdaRel);
Eigen::VectorXd mahalanobis_row(const SkeletonFrame& frame, double lambda_rel = kDefaultLambdaRel);

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Growing t x J grid of per-frame joint distances; rows are frames in
/// temporal order. Appending touches only the new row.
class MahalanobisMatrix {
 public:
  explicit MahalanobisMatrix(Eigen::Index joint_count, double lambda_rel = kDefaultLambdaRel);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index joint_count() const { return joint_count_; }
  double lambda_rel() const { return lambda_rel_; }
  bool empty() const { return rows_ == 0; }

  Eigen::Map<const RowMatrixXd> values() const {
    return Eigen::Map<const RowMatrixXd>(data_.data(), rows_, joint_count_);
  }
  double operator()(Eigen::Index frame, Eigen::Index joint) const {
    return data_[static_cast<std::size_t>(frame * joint_count_ + joint)];
  }

  void append(const SkeletonFrame& frame);

  /// The first `rows` rows, as if only those frames had been appended.
  MahalanobisMatrix prefix(Eigen::Index rows) const;

  bool operator==(const MahalanobisMatrix& other) const = default;

 private:
  friend MahalanobisMatrix build_mahalanobis_matrix(std::span<const SkeletonFrame> frames,
                                                    Eigen::Index joint_count, double lambda_rel);

  Eigen::Index joint_count_;
  double lambda_rel_;
  Eigen::Index rows_ = 0;
  std::vector<double> data_;
};

MahalanobisMatrix append_frame(MahalanobisMatrix state, const SkeletonFrame& frame);

/// Whole-sequence construction; rows are computed independently.
MahalanobisMatrix build_mahalanobis_matrix(const ActionSequence& seq,
                                           double lambda_rel = kDefaultLambdaRel);
MahalanobisMatrix build_mahalanobis_matrix(std::span<const SkeletonFrame> frames,
                                           Eigen::Index joint_count,
                                           double lambda_rel = kDefaultLambdaRel);

void write_matrix_csv(std::ostream& out, const MahalanobisMatrix& m);
void write_matrix_pgm(std::ostream& out, const MahalanobisMatrix& m);

}  // namespace srf
