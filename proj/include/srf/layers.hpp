#pragma once

// Per-sample layer kernels. A feature map is a (channels x height*width)
// row-major matrix; flattening it is a reinterpretation of its storage.

#include <vector>

#include <Eigen/Core>

namespace srf::cnn {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrixXd>;

/// (channels*9) x (h*w) patch matrix for a 3x3 kernel with zero padding 1.
RowMatrixXd im2col3x3(const RowMatrixXd& input, Eigen::Index h, Eigen::Index w);

/// Adjoint of im2col3x3: scatters patch gradients back onto the input grid.
RowMatrixXd col2im3x3(const RowMatrixXd& cols, Eigen::Index channels, Eigen::Index h,
                      Eigen::Index w);

/// weights: out x (in*9), bias: out.
RowMatrixXd conv3x3_forward(const RowMatrixXd& cols, const ConstRowMap& weights,
                            const Eigen::Ref<const Eigen::VectorXd>& bias);

struct ConvGradients {
  RowMatrixXd d_input;
  RowMatrixXd d_weights;
  Eigen::VectorXd d_bias;
};

ConvGradients conv3x3_backward(const RowMatrixXd& cols, const ConstRowMap& weights,
                               const RowMatrixXd& d_output, Eigen::Index in_channels,
                               Eigen::Index h, Eigen::Index w);

RowMatrixXd relu_forward(const RowMatrixXd& x);
RowMatrixXd relu_backward(const RowMatrixXd& x, const RowMatrixXd& d_output);

struct PoolOutput {
  RowMatrixXd output;
  std::vector<Eigen::Index> argmax;  // flat input index per output element
};

/// 2x2 window, stride 2; odd trailing rows/columns are dropped.
PoolOutput maxpool2_forward(const RowMatrixXd& x, Eigen::Index h, Eigen::Index w);
RowMatrixXd maxpool2_backward(const std::vector<Eigen::Index>& argmax, const RowMatrixXd& d_output,
                              Eigen::Index channels, Eigen::Index h, Eigen::Index w);

/// x is a column vector; weights: out x in.
Eigen::VectorXd dense_forward(const Eigen::Ref<const Eigen::VectorXd>& x, const ConstRowMap& weights,
                              const Eigen::Ref<const Eigen::VectorXd>& bias);

struct DenseGradients {
  Eigen::VectorXd d_input;
  RowMatrixXd d_weights;
  Eigen::VectorXd d_bias;
};

DenseGradients dense_backward(const Eigen::Ref<const Eigen::VectorXd>& x, const ConstRowMap& weights,
                              const Eigen::Ref<const Eigen::VectorXd>& d_output);

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

struct CrossEntropy {
  double loss;
  Eigen::VectorXd d_logits;
};

/// -log softmax(logits)[label] and its gradient with respect to the logits.
CrossEntropy softmax_cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& logits, int label);

}  // namespace srf::cnn
