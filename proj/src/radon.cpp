#include "srf/radon.hpp"

#include <ostream>

#include "srf/image_io.hpp"

namespace srf {

void SrfConfig::validate() const {
  if (resample_h < 2 || resample_w < 2) {
    throw Error(ErrorCode::InvalidConfig, "resample dimensions must be >= 2");
  }
  if (n_rho < 1 || n_theta < 1) throw Error(ErrorCode::InvalidConfig, "sinogram size must be positive");
  if (samples_per_ray && *samples_per_ray < 1) {
    throw Error(ErrorCode::InvalidConfig, "samples_per_ray must be positive");
  }
  if (min_t < 2) throw Error(ErrorCode::InvalidConfig, "min_t must be >= 2");
}

Eigen::MatrixXd normalize_by_max(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  const double peak = m.size() > 0 ? m.maxCoeff() : 0.0;
  if (peak > 0.0) return m / peak;
  return m;
}

Sinogram srf(const MahalanobisMatrix& state, const SrfConfig& config) {
  config.validate();
  if (state.rows() < config.min_t) {
    throw Error(ErrorCode::SequenceTooShort, "footprint needs at least " +
                                                 std::to_string(config.min_t) + " frames, have " +
                                                 std::to_string(state.rows()));
  }
  const Eigen::MatrixXd normalized = normalize_by_max(state.values());
  const Image<double> resized = resample_bilinear(normalized, config.resample_h, config.resample_w);
  return radon_transform(resized, config.n_rho, config.n_theta, config.rays());
}

void export_sinogram_pgm(std::ostream& out, const Sinogram& s) { write_pgm(out, s.values); }

void export_sinogram_csv(std::ostream& out, const Sinogram& s) { write_csv(out, s.values); }

}  // namespace srf
