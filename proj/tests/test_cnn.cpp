#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "srf/cnn.hpp"
#include "srf/layers.hpp"

using namespace srf;
using namespace srf::cnn;

namespace {

constexpr double kGradTol = 1e-4;
using gradcheck::random_matrix;
using gradcheck::sinogram_of;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an srf::Error");
  return ErrorCode::Io;
}

// Two classes told apart by which half of the image carries a bright band.
std::vector<LabeledSinogram> banded(std::mt19937_64& rng, int count, Eigen::Index h, Eigen::Index w) {
  std::vector<LabeledSinogram> out;
  for (int i = 0; i < count; ++i) {
    Eigen::MatrixXd v = 0.3 * fixture::random_image(rng, h, w);
    const int label = i % 2;
    v.middleRows(label == 0 ? 1 : h / 2 + 1, h / 4).array() += 1.0;
    out.push_back({sinogram_of(v), label});
  }
  return out;
}

void check_network_gradients(Model& model, const Tensor& batch, const std::vector<int>& labels) {
  CHECK(gradcheck::network(model, batch, labels) < kGradTol);
}

}  // namespace

TEST_CASE("conv3x3 gradients") {
  std::mt19937_64 rng(31);
  CHECK(gradcheck::conv(rng, 1, 2, 5, 6) < kGradTol);
  CHECK(gradcheck::conv(rng, 3, 4, 4, 4) < kGradTol);
  CHECK(gradcheck::conv(rng, 2, 1, 7, 3) < kGradTol);
}

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(32);
  const RowMatrixXd x = random_matrix(rng, 3, 5 * 4);
  const RowMatrixXd y = random_matrix(rng, 27, 5 * 4);
  const double lhs = (im2col3x3(x, 5, 4).array() * y.array()).sum();
  const double rhs = (x.array() * col2im3x3(y, 3, 5, 4).array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("conv3x3 forward on a hand example") {
  RowMatrixXd x(1, 9);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  RowMatrixXd k = RowMatrixXd::Ones(1, 9);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 0.5);
  const RowMatrixXd y = conv3x3_forward(im2col3x3(x, 3, 3), ConstRowMap(k.data(), 1, 9), b);
  RowMatrixXd expected(1, 9);
  // 3x3 box sums with zero padding
  expected << 12, 21, 16, 27, 45, 33, 24, 39, 28;
  CHECK(y == (expected.array() + 0.5).matrix());
}

TEST_CASE("relu gradients") {
  std::mt19937_64 rng(33);
  CHECK(gradcheck::relu(rng, 3, 10) < kGradTol);
}

TEST_CASE("maxpool gradients, odd extents dropped") {
  std::mt19937_64 rng(34);
  CHECK(maxpool2_forward(RowMatrixXd::Zero(1, 35), 5, 7).output.cols() == 6);
  CHECK(gradcheck::maxpool(rng, 2, 4, 6) < kGradTol);
  CHECK(gradcheck::maxpool(rng, 1, 5, 7) < kGradTol);
  CHECK(gradcheck::maxpool(rng, 3, 2, 3) < kGradTol);
}

TEST_CASE("maxpool breaks ties toward the first element") {
  const RowMatrixXd x = RowMatrixXd::Constant(1, 4, 2.0);
  const auto p = maxpool2_forward(x, 2, 2);
  REQUIRE(p.argmax.size() == 1);
  CHECK(p.argmax[0] == 0);
}

TEST_CASE("dense gradients") {
  std::mt19937_64 rng(35);
  CHECK(gradcheck::dense(rng, 7, 4) < kGradTol);
  CHECK(gradcheck::dense(rng, 1, 3) < kGradTol);
}

TEST_CASE("softmax cross-entropy gradients") {
  std::mt19937_64 rng(36);
  for (int label = 0; label < 5; ++label) {
    const Eigen::VectorXd z = gradcheck::flat(gradcheck::random_matrix(rng, 5, 1));
    CHECK(softmax_cross_entropy(z, label).loss == doctest::Approx(-std::log(softmax(z)(label))).epsilon(1e-12));
    CHECK(gradcheck::softmax_xent(rng, 5, label) < kGradTol);
  }
  const Eigen::VectorXd huge = Eigen::Vector3d(1000.0, -1000.0, 999.0);
  CHECK(softmax(huge).allFinite());
  CHECK(softmax(huge).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("thumbnail network gradients, 2-sample batch") {
  std::mt19937_64 rng(37);
  Model model = make_model(thumbnail_architecture(8, 8, 3), LabelSet::numbered(3));
  initialize_he_uniform(model, 5);
  const std::vector<Sinogram> items = {sinogram_of(fixture::random_image(rng, 8, 8)),
                                       sinogram_of(fixture::random_image(rng, 8, 8))};
  check_network_gradients(model, make_batch(items), {2, 0});
}

TEST_CASE("randomized thumbnail shapes") {
  std::mt19937_64 rng(38);
  std::uniform_int_distribution<Eigen::Index> side(3, 9), classes(2, 4), channels(1, 3);
  for (int trial = 0; trial < 4; ++trial) {
    const Eigen::Index h = side(rng), w = side(rng), c = classes(rng);
    INFO("shape " << h << "x" << w << " classes " << c);
    CHECK(gradcheck::random_thumbnail(rng, h, w, c, channels(rng), 3) < kGradTol);
  }
}

TEST_CASE("gradients under a non-trivial input normalization") {
  std::mt19937_64 rng(40);
  Model model = make_model(thumbnail_architecture(6, 7, 3), LabelSet::numbered(3));
  initialize_he_uniform(model, 8);
  model.input_norm = {0.4, 2.5};
  const std::vector<Sinogram> items = {sinogram_of(fixture::random_image(rng, 6, 7)),
                                       sinogram_of(fixture::random_image(rng, 6, 7))};
  check_network_gradients(model, make_batch(items), {1, 2});
}

TEST_CASE("small VGG stack gradients") {
  std::mt19937_64 rng(39);
  CHECK(gradcheck::small_vgg(rng) < kGradTol);
}

TEST_CASE("architecture validation") {
  const auto arch = default_architecture(64, 90, 10);
  const auto shapes = arch.shapes();
  CHECK(shapes[4] == FeatureShape{8, 32, 45});
  CHECK(shapes[9] == FeatureShape{16, 16, 22});
  CHECK(arch.classes() == 10);

  Architecture no_softmax = arch;
  no_softmax.layers.pop_back();
  CHECK(code_of([&] { no_softmax.shapes(); }) == ErrorCode::ShapeMismatch);
  Architecture no_flatten = thumbnail_architecture(4, 4, 2);
  no_flatten.layers.erase(no_flatten.layers.begin() + 2);
  CHECK(code_of([&] { no_flatten.shapes(); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([] { make_model(thumbnail_architecture(4, 4, 3), LabelSet::numbered(2)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("forward: probability rows, zero head, determinism, shape checks") {
  std::mt19937_64 rng(40);
  Model model = make_model(default_architecture(16, 20, 4), LabelSet::numbered(4));
  initialize_he_uniform(model, 3);
  std::vector<Sinogram> items;
  for (int i = 0; i < 5; ++i) items.push_back(sinogram_of(10.0 * fixture::random_image(rng, 16, 20)));
  const Tensor batch = make_batch(items);
  CHECK(batch.shape == std::vector<Eigen::Index>{5, 1, 16, 20});
  const Tensor probs = forward(model, batch);
  CHECK(probs.shape == std::vector<Eigen::Index>{5, 4});
  for (Eigen::Index n = 0; n < 5; ++n) {
    const Eigen::VectorXd row = probs.data.segment(n * 4, 4);
    CHECK(std::abs(row.sum() - 1.0) <= 1e-9);
    CHECK(row.minCoeff() >= 0.0);
    CHECK(row.maxCoeff() <= 1.0);
  }
  CHECK(forward(model, batch) == probs);

  Model zeroed = model;
  zeroed.parameters[zeroed.parameters.size() - 1].data.setZero();
  zeroed.parameters[zeroed.parameters.size() - 2].data.setZero();
  const Tensor uniform = forward(zeroed, batch);
  CHECK((uniform.data.array() - 0.25).abs().maxCoeff() <= 1e-15);
  const auto p = predict(zeroed, items[0]);
  CHECK(p.label == 0);

  const std::vector<int> labels = {0, 1, 2, 3, 1};
  CHECK(loss_and_gradients(zeroed, batch, labels).loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  CHECK(code_of([&] { predict(model, sinogram_of(Eigen::MatrixXd::Zero(16, 21))); }) == ErrorCode::ShapeMismatch);
  const std::vector<int> bad = {0, 1, 2, 4, 1};
  CHECK(code_of([&] { loss_and_gradients(model, batch, bad); }) == ErrorCode::LabelOutOfRange);
}

TEST_CASE("loss is invariant to duplicating the batch") {
  std::mt19937_64 rng(41);
  Model model = make_model(thumbnail_architecture(6, 6, 3), LabelSet::numbered(3));
  initialize_he_uniform(model, 1);
  std::vector<Sinogram> items;
  for (int i = 0; i < 3; ++i) items.push_back(sinogram_of(fixture::random_image(rng, 6, 6)));
  std::vector<Sinogram> twice = items;
  twice.insert(twice.end(), items.begin(), items.end());
  const std::vector<int> labels = {0, 2, 1};
  const std::vector<int> labels2 = {0, 2, 1, 0, 2, 1};
  CHECK(loss_and_gradients(model, make_batch(twice), labels2).loss ==
        doctest::Approx(loss_and_gradients(model, make_batch(items), labels).loss).epsilon(1e-14));
}

TEST_CASE("argmax_lowest") {
  CHECK(argmax_lowest(Eigen::Vector3d(0.2, 0.4, 0.4)) == 1);
  CHECK(argmax_lowest(Eigen::Vector3d(0.5, 0.5, 0.0)) == 0);
  CHECK(argmax_lowest(Eigen::Vector3d(0.0, 0.0, 1.0)) == 2);
}

TEST_CASE("train: contracts, determinism, toy accuracy") {
  std::mt19937_64 rng(42);
  const auto data = banded(rng, 12, 8, 8);
  const auto labels = LabelSet::numbered(2);
  TrainConfig config;
  config.seed = 17;
  config.epochs = 40;
  config.batch_size = 4;
  config.learning_rate = 1e-2;
  const auto arch = thumbnail_architecture(8, 8, 2);
  const auto a = train(data, labels, config, arch);
  const auto b = train(data, labels, config, arch);
  CHECK(a.model == b.model);
  CHECK(a.history.size() == 40);
  for (std::size_t e = 0; e < a.history.size(); ++e) CHECK(a.history[e].epoch == static_cast<int>(e) + 1);
  CHECK(a.history.back().train_accuracy == 1.0);
  Eigen::VectorXd pixels(static_cast<Eigen::Index>(data.size()) * 64);
  for (std::size_t i = 0; i < data.size(); ++i) {
    pixels.segment(static_cast<Eigen::Index>(i) * 64, 64) = data[i].sinogram.values.reshaped();
  }
  const double mean = pixels.mean();
  CHECK(a.model.input_norm.shift == doctest::Approx(mean).epsilon(1e-12));
  CHECK(a.model.input_norm.scale ==
        doctest::Approx(std::sqrt((pixels.array() - mean).square().mean())).epsilon(1e-12));
  for (const auto& item : data) CHECK(predict(a.model, item.sinogram).label == item.label);

  TrainConfig other = config;
  other.seed = 18;
  CHECK(!(train(data, labels, other, arch).model == a.model));

  TrainConfig sgd = config;
  sgd.optimizer = Optimizer::SgdMomentum;
  const auto s = train(data, labels, sgd, arch);
  CHECK(s.history.back().loss < s.history.front().loss);

  std::vector<LabeledSinogram> single(data.begin(), data.end());
  for (auto& item : single) item.label = 1;
  CHECK(code_of([&] { train(single, labels, config, arch); }) == ErrorCode::SingleClass);
  CHECK(code_of([&] { train({}, labels, config, arch); }) == ErrorCode::EmptyDataset);
  auto out_of_range = single;
  out_of_range[0].label = 2;
  CHECK(code_of([&] { train(out_of_range, labels, config, arch); }) == ErrorCode::LabelOutOfRange);
  TrainConfig zero_lr = config;
  zero_lr.learning_rate = 0.0;
  CHECK(code_of([&] { train(data, labels, zero_lr, arch); }) == ErrorCode::InvalidConfig);

  std::ostringstream csv;
  write_history_csv(csv, a.history);
  CHECK(csv.str().rfind("epoch,loss,train_accuracy\n1,", 0) == 0);
}

TEST_CASE("model serialization") {
  Model model = make_model(default_architecture(16, 12, 3), LabelSet({"wave", "clap", "throw"}));
  initialize_he_uniform(model, 77);
  model.input_norm = {0.25, 3.5};
  model.parameters[1].data(0) = -0.0;
  model.parameters[1].data(1) = std::nextafter(0.0, 1.0);
  const std::string bytes = save_model_bytes(model);
  CHECK(bytes.substr(0, 8) == "SRFMODEL");
  const Model back = load_model_bytes(bytes);
  CHECK(back == model);
  CHECK(std::signbit(back.parameters[1].data(0)));
  std::stringstream stream;
  save_model(stream, model);
  CHECK(load_model(stream) == model);

  for (const std::size_t cut : {std::size_t{4}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
    const auto code = code_of([&] { load_model_bytes(bytes.substr(0, cut)); });
    CHECK((code == ErrorCode::CorruptPayload || (cut < 8 && code == ErrorCode::BadMagic)));
  }
  CHECK(code_of([&] { load_model_bytes(bytes + "x"); }) == ErrorCode::CorruptPayload);
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK(code_of([&] { load_model_bytes(magic); }) == ErrorCode::BadMagic);
  std::string version = bytes;
  version[8] = 2;
  CHECK(code_of([&] { load_model_bytes(version); }) == ErrorCode::UnsupportedVersion);
  const double scale = 3.5;
  std::string scale_bytes(sizeof scale, '\0');
  std::memcpy(scale_bytes.data(), &scale, sizeof scale);
  const auto at = bytes.find(scale_bytes);
  REQUIRE(at != std::string::npos);
  std::string bad_scale = bytes;
  const double negative = -1.0;
  std::memcpy(bad_scale.data() + at, &negative, sizeof negative);
  CHECK(code_of([&] { load_model_bytes(bad_scale); }) == ErrorCode::CorruptPayload);

  std::string dims = bytes;
  dims[12] = 99;  // input channels no longer match the stored tensors
  CHECK(code_of([&] { load_model_bytes(dims); }) == ErrorCode::CorruptPayload);
}
