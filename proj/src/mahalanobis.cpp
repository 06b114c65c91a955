#include "srf/mahalanobis.hpp"

#include <ostream>

#include "srf/image_io.hpp"

namespace srf {

Eigen::VectorXd frame_centroid(const SkeletonFrame& frame) { return centroid(to_double(frame)); }

Eigen::MatrixXd frame_covariance(const SkeletonFrame& frame) { return covariance(to_double(frame)); }

FrameStats frame_stats(const SkeletonFrame& frame, double lambda_rel) {
  const Eigen::MatrixXd points = to_double(frame);
  FrameStats stats;
  stats.centroid = centroid(points);
  stats.covariance = covariance(points);
  auto inv = regularized_inverse(stats.covariance, lambda_rel);
  stats.regularized_inverse = std::move(inv.inverse);
  stats.ridge_used = inv.ridge;
  return stats;
}

Eigen::VectorXd mahalanobis_row(const SkeletonFrame& frame, double lambda_rel) {
  return mahalanobis_row(to_double(frame), lambda_rel);
}

MahalanobisMatrix::MahalanobisMatrix(Eigen::Index joint_count, double lambda_rel)
    : joint_count_(joint_count), lambda_rel_(lambda_rel) {
  if (joint_count < kMinJoints) {
    throw Error(ErrorCode::TooFewJoints, "Mahalanobis matrix needs at least 4 joints");
  }
  if (!(lambda_rel >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda_rel must be >= 0");
}

void MahalanobisMatrix::append(const SkeletonFrame& frame) {
  if (frame.joint_count() != joint_count_) {
    throw Error(ErrorCode::JointCountMismatch,
                "frame has " + std::to_string(frame.joint_count()) + " joints, matrix has " +
                    std::to_string(joint_count_));
  }
  const Eigen::VectorXd row = mahalanobis_row(frame, lambda_rel_);
  data_.insert(data_.end(), row.data(), row.data() + row.size());
  ++rows_;
}

MahalanobisMatrix MahalanobisMatrix::prefix(Eigen::Index rows) const {
  MahalanobisMatrix out(joint_count_, lambda_rel_);
  out.rows_ = std::clamp<Eigen::Index>(rows, 0, rows_);
  out.data_.assign(data_.begin(), data_.begin() + out.rows_ * joint_count_);
  return out;
}

MahalanobisMatrix append_frame(MahalanobisMatrix state, const SkeletonFrame& frame) {
  state.append(frame);
  return state;
}

MahalanobisMatrix build_mahalanobis_matrix(std::span<const SkeletonFrame> frames,
                                           Eigen::Index joint_count, double lambda_rel) {
  MahalanobisMatrix m(joint_count, lambda_rel);
  m.rows_ = static_cast<Eigen::Index>(frames.size());
  m.data_.resize(static_cast<std::size_t>(m.rows_ * joint_count));
  Eigen::Map<RowMatrixXd> grid(m.data_.data(), m.rows_, joint_count);
  for (Eigen::Index f = 0; f < m.rows_; ++f) {
    const SkeletonFrame& frame = frames[static_cast<std::size_t>(f)];
    if (frame.joint_count() != joint_count) {
      throw Error(ErrorCode::JointCountMismatch, "frame " + std::to_string(f) + " has " +
                                                     std::to_string(frame.joint_count()) + " joints");
    }
    grid.row(f) = mahalanobis_row(frame, lambda_rel).transpose();
  }
  return m;
}

MahalanobisMatrix build_mahalanobis_matrix(const ActionSequence& seq, double lambda_rel) {
  return build_mahalanobis_matrix(seq.frames(), seq.joint_count(), lambda_rel);
}

void write_matrix_csv(std::ostream& out, const MahalanobisMatrix& m) { write_csv(out, m.values()); }

void write_matrix_pgm(std::ostream& out, const MahalanobisMatrix& m) { write_pgm(out, m.values()); }

}  // namespace srf
