#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srf/radon.hpp"
#include "srf/skeleton.hpp"

namespace srf::cnn {

/// Dense row-major tensor of doubles.
struct Tensor {
  std::vector<Eigen::Index> shape;
  Eigen::VectorXd data;

  Tensor() = default;
  explicit Tensor(std::vector<Eigen::Index> dims);

  Eigen::Index size() const { return data.size(); }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(shape.size()); }
  Eigen::Index dim(std::size_t i) const { return shape.at(i); }

  bool operator==(const Tensor& other) const {
    return shape == other.shape && data.size() == other.data.size() && data == other.data;
  }
};

enum class LayerKind : std::uint8_t { Conv = 1, ReLU = 2, MaxPool = 3, Flatten = 4, Dense = 5, Softmax = 6 };

/// Conv is 3x3, stride 1, zero padding 1; MaxPool is 2x2, stride 2.
/// `units` is the output channel count for Conv and the output width for
/// Dense, and unused otherwise.
struct LayerSpec {
  LayerKind kind;
  Eigen::Index units = 0;
  bool operator==(const LayerSpec&) const = default;
};

struct FeatureShape {
  Eigen::Index channels, height, width;
  Eigen::Index size() const { return channels * height * width; }
  bool operator==(const FeatureShape&) const = default;
};

struct Architecture {
  FeatureShape input;
  std::vector<LayerSpec> layers;

  /// Output shape of every layer; throws ShapeMismatch if the chain is
  /// inconsistent or does not end in Dense -> Softmax.
  std::vector<FeatureShape> shapes() const;
  Eigen::Index classes() const;

  bool operator==(const Architecture&) const = default;
};

/// Two VGG-style 3x3 conv stacks (8 then 16 channels), each closed by a max
/// pool, then Dense(64) and the class layer.
Architecture default_architecture(Eigen::Index n_rho, Eigen::Index n_theta, Eigen::Index classes);

/// One conv layer and one dense layer; small enough for finite differences.
Architecture thumbnail_architecture(Eigen::Index height, Eigen::Index width, Eigen::Index classes,
                                    Eigen::Index channels = 2);

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Affine map x -> (x - shift) / scale applied to every input pixel before
/// the first layer. train() fits it to the mean and standard deviation of
/// the training pixels.
struct InputNorm {
  double shift = 0.0;
  double scale = 1.0;
  bool operator==(const InputNorm&) const = default;
};

struct Model {
  Architecture architecture;
  std::vector<Tensor> parameters;  // weights then bias, per Conv/Dense layer
  LabelSet labels;
  std::uint32_t format_version = kModelFormatVersion;
  InputNorm input_norm;

  bool operator==(const Model&) const = default;
};

/// Model with all parameters zero. Class count must match the label set.
Model make_model(const Architecture& arch, const LabelSet& labels);

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
void initialize_he_uniform(Model& model, std::uint64_t seed);

/// Batch of N single-channel images stacked as [N, 1, H, W].
Tensor make_batch(std::span<const Sinogram> items);

/// Softmax probabilities, [N, C].
Tensor forward(const Model& model, const Tensor& batch);

struct LossAndGradients {
  double loss = 0.0;
  std::vector<Tensor> gradients;  // parallel to Model::parameters
  std::vector<int> predicted;     // argmax class per sample, before any update
};

/// Mean categorical cross-entropy over the batch and its gradients.
LossAndGradients loss_and_gradients(const Model& model, const Tensor& batch,
                                    std::span<const int> labels);

enum class Optimizer { SgdMomentum, Adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct LabeledSinogram {
  Sinogram sinogram;
  int label = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

/// Trains from a He-uniform start. Deterministic for a fixed dataset order
/// and seed. The architecture defaults to default_architecture() sized to
/// the sinograms and the label set.
TrainResult train(std::span<const LabeledSinogram> dataset, const LabelSet& labels,
                  const TrainConfig& config,
                  const std::optional<Architecture>& architecture = std::nullopt);

struct Prediction {
  int label = 0;
  Eigen::VectorXd probabilities;
};

/// Argmax class, ties toward the lowest index.
Prediction predict(const Model& model, const Sinogram& s);

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& v);

void write_history_csv(std::ostream& out, std::span<const EpochStats> history);

// Binary model file: magic "SRFMODEL", u32 version, architecture, label
// names, input shift and scale, then every parameter tensor. Numbers are
// little-endian; reals are IEEE-754 doubles.
void save_model(std::ostream& out, const Model& m);
Model load_model(std::istream& in);
std::string save_model_bytes(const Model& m);
Model load_model_bytes(const std::string& bytes);

}  // namespace srf::cnn
