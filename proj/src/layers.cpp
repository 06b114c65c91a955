#include "srf/layers.hpp"

#include <cmath>

namespace srf::cnn {

RowMatrixXd im2col3x3(const RowMatrixXd& input, Eigen::Index h, Eigen::Index w) {
  const Eigen::Index channels = input.rows();
  RowMatrixXd cols = RowMatrixXd::Zero(channels * 9, h * w);
  for (Eigen::Index c = 0; c < channels; ++c) {
    const double* src = input.row(c).data();
    for (Eigen::Index ky = 0; ky < 3; ++ky) {
      for (Eigen::Index kx = 0; kx < 3; ++kx) {
        double* dst = cols.row(c * 9 + ky * 3 + kx).data();
        for (Eigen::Index y = 0; y < h; ++y) {
          const Eigen::Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const Eigen::Index x_begin = kx == 0 ? 1 : 0;
          const Eigen::Index x_end = kx == 2 ? w - 1 : w;
          for (Eigen::Index x = x_begin; x < x_end; ++x) {
            dst[y * w + x] = src[sy * w + x + kx - 1];
          }
        }
      }
    }
  }
  return cols;
}

RowMatrixXd col2im3x3(const RowMatrixXd& cols, Eigen::Index channels, Eigen::Index h,
                      Eigen::Index w) {
  RowMatrixXd out = RowMatrixXd::Zero(channels, h * w);
  for (Eigen::Index c = 0; c < channels; ++c) {
    double* dst = out.row(c).data();
    for (Eigen::Index ky = 0; ky < 3; ++ky) {
      for (Eigen::Index kx = 0; kx < 3; ++kx) {
        const double* src = cols.row(c * 9 + ky * 3 + kx).data();
        for (Eigen::Index y = 0; y < h; ++y) {
          const Eigen::Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const Eigen::Index x_begin = kx == 0 ? 1 : 0;
          const Eigen::Index x_end = kx == 2 ? w - 1 : w;
          for (Eigen::Index x = x_begin; x < x_end; ++x) {
            dst[sy * w + x + kx - 1] += src[y * w + x];
          }
        }
      }
    }
  }
  return out;
}

RowMatrixXd conv3x3_forward(const RowMatrixXd& cols, const ConstRowMap& weights,
                            const Eigen::Ref<const Eigen::VectorXd>& bias) {
  RowMatrixXd out = weights * cols;
  out.colwise() += bias;
  return out;
}

ConvGradients conv3x3_backward(const RowMatrixXd& cols, const ConstRowMap& weights,
                               const RowMatrixXd& d_output, Eigen::Index in_channels,
                               Eigen::Index h, Eigen::Index w) {
  ConvGradients g;
  g.d_weights = d_output * cols.transpose();
  g.d_bias = d_output.rowwise().sum();
  const RowMatrixXd d_cols = weights.transpose() * d_output;
  g.d_input = col2im3x3(d_cols, in_channels, h, w);
  return g;
}

RowMatrixXd relu_forward(const RowMatrixXd& x) { return x.cwiseMax(0.0); }

RowMatrixXd relu_backward(const RowMatrixXd& x, const RowMatrixXd& d_output) {
  return (x.array() > 0.0).select(d_output, 0.0);
}

PoolOutput maxpool2_forward(const RowMatrixXd& x, Eigen::Index h, Eigen::Index w) {
  const Eigen::Index oh = h / 2;
  const Eigen::Index ow = w / 2;
  PoolOutput p;
  p.output.resize(x.rows(), oh * ow);
  p.argmax.resize(static_cast<std::size_t>(x.rows() * oh * ow));
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const double* src = x.row(c).data();
    for (Eigen::Index oy = 0; oy < oh; ++oy) {
      for (Eigen::Index ox = 0; ox < ow; ++ox) {
        Eigen::Index best = (2 * oy) * w + 2 * ox;
        for (const Eigen::Index cand : {best + 1, best + w, best + w + 1}) {
          if (src[cand] > src[best]) best = cand;
        }
        p.output(c, oy * ow + ox) = src[best];
        p.argmax[static_cast<std::size_t>((c * oh + oy) * ow + ox)] = c * h * w + best;
      }
    }
  }
  return p;
}

RowMatrixXd maxpool2_backward(const std::vector<Eigen::Index>& argmax, const RowMatrixXd& d_output,
                              Eigen::Index channels, Eigen::Index h, Eigen::Index w) {
  RowMatrixXd d_input = RowMatrixXd::Zero(channels, h * w);
  const double* g = d_output.data();
  for (std::size_t i = 0; i < argmax.size(); ++i) d_input.data()[argmax[i]] += g[i];
  return d_input;
}

Eigen::VectorXd dense_forward(const Eigen::Ref<const Eigen::VectorXd>& x, const ConstRowMap& weights,
                              const Eigen::Ref<const Eigen::VectorXd>& bias) {
  return weights * x + bias;
}

DenseGradients dense_backward(const Eigen::Ref<const Eigen::VectorXd>& x, const ConstRowMap& weights,
                              const Eigen::Ref<const Eigen::VectorXd>& d_output) {
  DenseGradients g;
  g.d_weights = d_output * x.transpose();
  g.d_bias = d_output;
  g.d_input = weights.transpose() * d_output;
  return g;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

CrossEntropy softmax_cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, int label) {
  const double peak = logits.maxCoeff();
  const Eigen::VectorXd e = (logits.array() - peak).exp();
  const double total = e.sum();
  CrossEntropy ce;
  ce.loss = std::log(total) + peak - logits(label);
  ce.d_logits = e / total;
  ce.d_logits(label) -= 1.0;
  return ce;
}

}  // namespace srf::cnn
