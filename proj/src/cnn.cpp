#include "srf/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "srf/error.hpp"
#include "srf/image_io.hpp"
#include "srf/layers.hpp"

namespace srf::cnn {

Tensor::Tensor(std::vector<Eigen::Index> dims) : shape(std::move(dims)) {
  Eigen::Index n = 1;
  for (const auto d : shape) {
    if (d < 1) throw Error(ErrorCode::ShapeMismatch, "tensor dimensions must be positive");
    n *= d;
  }
  data = Eigen::VectorXd::Zero(n);
}

std::vector<FeatureShape> Architecture::shapes() const {
  if (input.channels < 1 || input.height < 1 || input.width < 1) {
    throw Error(ErrorCode::ShapeMismatch, "architecture input shape must be positive");
  }
  if (layers.size() < 2 || layers.back().kind != LayerKind::Softmax ||
      layers[layers.size() - 2].kind != LayerKind::Dense) {
    throw Error(ErrorCode::ShapeMismatch, "architecture must end with Dense -> Softmax");
  }
  std::vector<FeatureShape> out;
  FeatureShape s = input;
  bool flat = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        if (flat || l.units < 1) throw Error(ErrorCode::ShapeMismatch, "bad Conv layer");
        s.channels = l.units;
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::MaxPool:
        if (flat || s.height < 2 || s.width < 2) {
          throw Error(ErrorCode::ShapeMismatch, "MaxPool needs a feature map of at least 2x2");
        }
        s.height /= 2;
        s.width /= 2;
        break;
      case LayerKind::Flatten:
        s = {s.size(), 1, 1};
        flat = true;
        break;
      case LayerKind::Dense:
        if (!flat || l.units < 1) throw Error(ErrorCode::ShapeMismatch, "Dense must follow Flatten");
        s = {l.units, 1, 1};
        break;
      case LayerKind::Softmax:
        if (i + 1 != layers.size()) throw Error(ErrorCode::ShapeMismatch, "Softmax must be last");
        break;
      default:
        throw Error(ErrorCode::ShapeMismatch, "unknown layer kind");
    }
    out.push_back(s);
  }
  return out;
}

Eigen::Index Architecture::classes() const { return shapes().back().channels; }

Architecture default_architecture(Eigen::Index n_rho, Eigen::Index n_theta, Eigen::Index classes) {
  return Architecture{{1, n_rho, n_theta},
                      {{LayerKind::Conv, 8},
                       {LayerKind::ReLU},
                       {LayerKind::Conv, 8},
                       {LayerKind::ReLU},
                       {LayerKind::MaxPool},
                       {LayerKind::Conv, 16},
                       {LayerKind::ReLU},
                       {LayerKind::Conv, 16},
                       {LayerKind::ReLU},
                       {LayerKind::MaxPool},
                       {LayerKind::Flatten},
                       {LayerKind::Dense, 64},
                       {LayerKind::ReLU},
                       {LayerKind::Dense, classes},
                       {LayerKind::Softmax}}};
}

Architecture thumbnail_architecture(Eigen::Index height, Eigen::Index width, Eigen::Index classes,
                                    Eigen::Index channels) {
  return Architecture{{1, height, width},
                      {{LayerKind::Conv, channels},
                       {LayerKind::ReLU},
                       {LayerKind::Flatten},
                       {LayerKind::Dense, classes},
                       {LayerKind::Softmax}}};
}

namespace {

// Per-layer parameter shapes (weights, bias) for Conv and Dense layers.
std::vector<std::vector<Eigen::Index>> parameter_shapes(const Architecture& arch) {
  const auto shapes = arch.shapes();
  std::vector<std::vector<Eigen::Index>> out;
  FeatureShape in = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    if (l.kind == LayerKind::Conv) {
      out.push_back({l.units, in.channels, 3, 3});
      out.push_back({l.units});
    } else if (l.kind == LayerKind::Dense) {
      out.push_back({l.units, in.size()});
      out.push_back({l.units});
    }
    in = shapes[i];
  }
  return out;
}

// Index of the weight tensor for each layer, or -1.
std::vector<int> parameter_slots(const Architecture& arch) {
  std::vector<int> slots;
  int next = 0;
  for (const auto& l : arch.layers) {
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::Dense) {
      slots.push_back(next);
      next += 2;
    } else {
      slots.push_back(-1);
    }
  }
  return slots;
}

ConstRowMap weight_map(const Tensor& t) {
  return ConstRowMap(t.data.data(), t.shape[0], t.size() / t.shape[0]);
}

void check_model(const Model& model) {
  const auto expected = parameter_shapes(model.architecture);
  if (expected.size() != model.parameters.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter count does not match architecture");
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] != model.parameters[i].shape) {
      throw Error(ErrorCode::ShapeMismatch, "parameter shape does not match architecture");
    }
  }
  if (model.architecture.classes() != model.labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "class count does not match label set");
  }
}

FeatureShape batch_sample_shape(const Tensor& batch) {
  if (batch.rank() != 4) throw Error(ErrorCode::ShapeMismatch, "batch must be [N, C, H, W]");
  return {batch.shape[1], batch.shape[2], batch.shape[3]};
}

/// Forward/backward over one sample, keeping what backprop needs.
class SampleRunner {
 public:
  explicit SampleRunner(const Model& model)
      : model_(model),
        shapes_(model.architecture.shapes()),
        slots_(parameter_slots(model.architecture)) {}

  Eigen::VectorXd logits(const double* image) {
    const auto& arch = model_.architecture;
    const std::size_t n = arch.layers.size();
    inputs_.resize(n);
    cols_.resize(n);
    argmax_.resize(n);

    const InputNorm& norm = model_.input_norm;
    RowMatrixXd a = (ConstRowMap(image, arch.input.channels, arch.input.height * arch.input.width).array() -
                     norm.shift) / norm.scale;
    FeatureShape in = arch.input;
    for (std::size_t i = 0; i + 1 < n; ++i) {  // Softmax is folded into the loss
      const LayerSpec& l = arch.layers[i];
      inputs_[i] = a;
      switch (l.kind) {
        case LayerKind::Conv: {
          cols_[i] = im2col3x3(a, in.height, in.width);
          a = conv3x3_forward(cols_[i], weights(i), bias(i));
          break;
        }
        case LayerKind::ReLU:
          a = relu_forward(a);
          break;
        case LayerKind::MaxPool: {
          auto pooled = maxpool2_forward(a, in.height, in.width);
          a = std::move(pooled.output);
          argmax_[i] = std::move(pooled.argmax);
          break;
        }
        case LayerKind::Flatten:
          a = ConstRowMap(a.data(), a.size(), 1);
          break;
        case LayerKind::Dense: {
          const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
          a = dense_forward(x, weights(i), bias(i));
          break;
        }
        case LayerKind::Softmax:
          break;
      }
      in = shapes_[i];
    }
    return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
  }

  /// Accumulates parameter gradients for the most recent logits() call.
  void backward(const Eigen::VectorXd& d_logits, std::vector<Tensor>& grads) {
    const auto& arch = model_.architecture;
    RowMatrixXd d = ConstRowMap(d_logits.data(), d_logits.size(), 1);
    for (std::size_t k = arch.layers.size() - 1; k-- > 0;) {
      const LayerSpec& l = arch.layers[k];
      const FeatureShape in = k == 0 ? arch.input : shapes_[k - 1];
      switch (l.kind) {
        case LayerKind::Conv: {
          auto g = conv3x3_backward(cols_[k], weights(k), d, in.channels, in.height, in.width);
          const auto slot = static_cast<std::size_t>(slots_[k]);
          grads[slot].data += Eigen::Map<const Eigen::VectorXd>(g.d_weights.data(), g.d_weights.size());
          grads[slot + 1].data += g.d_bias;
          d = std::move(g.d_input);
          break;
        }
        case LayerKind::ReLU:
          d = relu_backward(inputs_[k], d);
          break;
        case LayerKind::MaxPool:
          d = maxpool2_backward(argmax_[k], d, in.channels, in.height, in.width);
          break;
        case LayerKind::Flatten:
          d = ConstRowMap(d.data(), in.channels, in.height * in.width);
          break;
        case LayerKind::Dense: {
          const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(inputs_[k].data(), inputs_[k].size());
          const Eigen::VectorXd dy = Eigen::Map<const Eigen::VectorXd>(d.data(), d.size());
          auto g = dense_backward(x, weights(k), dy);
          const auto slot = static_cast<std::size_t>(slots_[k]);
          grads[slot].data += Eigen::Map<const Eigen::VectorXd>(g.d_weights.data(), g.d_weights.size());
          grads[slot + 1].data += g.d_bias;
          d = ConstRowMap(g.d_input.data(), g.d_input.size(), 1);
          break;
        }
        case LayerKind::Softmax:
          break;
      }
    }
  }

 private:
  ConstRowMap weights(std::size_t layer) const {
    return weight_map(model_.parameters[static_cast<std::size_t>(slots_[layer])]);
  }
  const Eigen::VectorXd& bias(std::size_t layer) const {
    return model_.parameters[static_cast<std::size_t>(slots_[layer]) + 1].data;
  }

  const Model& model_;
  std::vector<FeatureShape> shapes_;
  std::vector<int> slots_;
  std::vector<RowMatrixXd> inputs_;
  std::vector<RowMatrixXd> cols_;
  std::vector<std::vector<Eigen::Index>> argmax_;
};

void check_batch(const Model& model, const Tensor& batch) {
  if (batch_sample_shape(batch) != model.architecture.input) {
    throw Error(ErrorCode::ShapeMismatch, "batch sample shape does not match architecture input");
  }
}

}  // namespace

Model make_model(const Architecture& arch, const LabelSet& labels) {
  if (arch.classes() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "architecture class count does not match label set");
  }
  Model m{arch, {}, labels, kModelFormatVersion, {}};
  for (auto& shape : parameter_shapes(arch)) m.parameters.emplace_back(std::move(shape));
  return m;
}

void initialize_he_uniform(Model& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < model.parameters.size(); i += 2) {
    Tensor& w = model.parameters[i];
    const double fan_in = static_cast<double>(w.size() / w.shape[0]);
    std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data(k) = dist(rng);
    model.parameters[i + 1].data.setZero();
  }
}

Tensor make_batch(std::span<const Sinogram> items) {
  if (items.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
  const Eigen::Index h = items.front().n_rho();
  const Eigen::Index w = items.front().n_theta();
  Tensor batch({static_cast<Eigen::Index>(items.size()), 1, h, w});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].n_rho() != h || items[i].n_theta() != w) {
      throw Error(ErrorCode::ShapeMismatch, "sinograms in a batch must share a shape");
    }
    Eigen::Map<RowMatrixXd>(batch.data.data() + static_cast<Eigen::Index>(i) * h * w, h, w) =
        items[i].values;
  }
  return batch;
}

Tensor forward(const Model& model, const Tensor& batch) {
  check_model(model);
  check_batch(model, batch);
  const Eigen::Index n = batch.shape[0];
  const Eigen::Index stride = model.architecture.input.size();
  const Eigen::Index classes = model.labels.size();
  Tensor out({n, classes});
  SampleRunner runner(model);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.data.segment(i * classes, classes) = softmax(runner.logits(batch.data.data() + i * stride));
  }
  return out;
}

LossAndGradients loss_and_gradients(const Model& model, const Tensor& batch,
                                    std::span<const int> labels) {
  check_model(model);
  check_batch(model, batch);
  const Eigen::Index n = batch.shape[0];
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "label count does not match batch size");
  }
  for (const int label : labels) {
    if (label < 0 || label >= model.labels.size()) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label) + " out of range");
    }
  }

  LossAndGradients out;
  for (const auto& p : model.parameters) out.gradients.emplace_back(p.shape);
  const Eigen::Index stride = model.architecture.input.size();
  SampleRunner runner(model);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd logits = runner.logits(batch.data.data() + i * stride);
    out.predicted.push_back(argmax_lowest(logits));
    const auto ce = softmax_cross_entropy(logits, labels[static_cast<std::size_t>(i)]);
    out.loss += ce.loss;
    runner.backward(ce.d_logits, out.gradients);
  }
  out.loss /= static_cast<double>(n);
  for (auto& g : out.gradients) g.data /= static_cast<double>(n);
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || epochs < 1 || batch_size < 1) {
    throw Error(ErrorCode::InvalidConfig, "learning rate, epochs and batch size must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "optimizer constants out of range");
  }
}

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

TrainResult train(std::span<const LabeledSinogram> dataset, const LabelSet& labels,
                  const TrainConfig& config, const std::optional<Architecture>& architecture) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  std::set<int> present;
  for (const auto& item : dataset) {
    if (item.label < 0 || item.label >= labels.size()) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(item.label) + " out of range");
    }
    present.insert(item.label);
  }
  if (present.size() < 2) throw Error(ErrorCode::SingleClass, "training set has a single class");

  const Sinogram& first = dataset.front().sinogram;
  const Architecture arch =
      architecture.value_or(default_architecture(first.n_rho(), first.n_theta(), labels.size()));
  TrainResult result{make_model(arch, labels), {}};
  Model& model = result.model;
  initialize_he_uniform(model, config.seed);

  std::vector<Sinogram> sinograms;
  sinograms.reserve(dataset.size());
  for (const auto& item : dataset) sinograms.push_back(item.sinogram);
  const Tensor all = make_batch(sinograms);
  check_batch(model, all);
  const double mean = all.data.mean();
  const double sd = std::sqrt((all.data.array() - mean).square().mean());
  model.input_norm = {mean, sd > 0.0 && std::isfinite(sd) ? sd : 1.0};
  const Eigen::Index stride = arch.input.size();

  std::vector<Eigen::VectorXd> first_moment, second_moment;
  for (const auto& p : model.parameters) {
    first_moment.push_back(Eigen::VectorXd::Zero(p.size()));
    second_moment.push_back(Eigen::VectorXd::Zero(p.size()));
  }

  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const auto n = static_cast<Eigen::Index>(end - begin);
      Tensor batch({n, arch.input.channels, arch.input.height, arch.input.width});
      std::vector<int> batch_labels;
      for (std::size_t i = begin; i < end; ++i) {
        batch.data.segment(static_cast<Eigen::Index>(i - begin) * stride, stride) =
            all.data.segment(static_cast<Eigen::Index>(order[i]) * stride, stride);
        batch_labels.push_back(dataset[order[i]].label);
      }

      auto lg = loss_and_gradients(model, batch, batch_labels);
      for (std::size_t i = 0; i < batch_labels.size(); ++i) {
        if (lg.predicted[i] == batch_labels[i]) ++correct;
      }
      loss_sum += lg.loss * static_cast<double>(n);
      ++step;
      for (std::size_t p = 0; p < model.parameters.size(); ++p) {
        Eigen::VectorXd& w = model.parameters[p].data;
        const Eigen::VectorXd& g = lg.gradients[p].data;
        if (config.optimizer == Optimizer::Adam) {
          first_moment[p] = config.beta1 * first_moment[p] + (1.0 - config.beta1) * g;
          second_moment[p] =
              config.beta2 * second_moment[p] + (1.0 - config.beta2) * g.cwiseProduct(g);
          const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
          w.array() -= config.learning_rate * (first_moment[p].array() / c1) /
                       ((second_moment[p].array() / c2).sqrt() + config.epsilon);
        } else {
          first_moment[p] = config.momentum * first_moment[p] - config.learning_rate * g;
          w += first_moment[p];
        }
      }
    }
    result.history.push_back({epoch + 1, loss_sum / static_cast<double>(dataset.size()),
                              static_cast<double>(correct) / static_cast<double>(dataset.size())});
  }
  return result;
}

Prediction predict(const Model& model, const Sinogram& s) {
  const Tensor probs = forward(model, make_batch(std::span<const Sinogram>(&s, 1)));
  Prediction p;
  p.probabilities = probs.data;
  p.label = argmax_lowest(p.probabilities);
  return p;
}

void write_history_csv(std::ostream& out, std::span<const EpochStats> history) {
  out << "epoch,loss,train_accuracy\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.train_accuracy) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing history CSV");
}

}  // namespace srf::cnn
