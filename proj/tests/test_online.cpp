#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "srf/online.hpp"

using namespace srf;
using namespace srf::online;

namespace {

SrfConfig small_config() {
  SrfConfig c;
  c.resample_h = 16;
  c.resample_w = 16;
  c.n_rho = 16;
  c.n_theta = 12;
  return c;
}

cnn::Model random_model(int classes, std::uint64_t seed) {
  const SrfConfig c = small_config();
  auto m = cnn::make_model(cnn::default_architecture(c.n_rho, c.n_theta, classes), LabelSet::numbered(classes));
  cnn::initialize_he_uniform(m, seed);
  return m;
}

ConfidenceTracker with_votes(const std::vector<int>& predictions, int classes) {
  ConfidenceTracker t(classes);
  for (std::size_t i = 0; i < predictions.size(); ++i) t.record(static_cast<Eigen::Index>(i) + 2, predictions[i]);
  return t;
}

}  // namespace

TEST_CASE("vote arithmetic") {
  const auto t = with_votes({1, 1, 2}, 4);
  const Eigen::VectorXd c = t.confidences();
  CHECK(c(0) == 0.0);
  CHECK(c(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(c(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(c(3) == 0.0);
  CHECK(t.votes() == std::vector<std::int64_t>{0, 2, 1, 0});
  CHECK(t.frames_classified() == 3);

  const auto five = final_decision(with_votes({0, 0, 0, 0, 0}, 3));
  CHECK(five.label == 0);
  CHECK(five.confidence == 1.0);
  const auto tie = final_decision(with_votes({1, 0, 1, 0, 0, 1}, 3));
  CHECK(tie.label == 0);
  CHECK(tie.confidence == 0.5);

  ConfidenceTracker empty(3);
  empty.skip();
  CHECK(empty.frames_elapsed() == 1);
  CHECK_THROWS_AS(final_decision(empty), Error);
  try {
    final_decision(empty);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoClassifiedFrames);
  }
  CHECK_THROWS_AS(empty.record(2, 3), Error);
}

TEST_CASE("confidence trace export") {
  std::ostringstream empty;
  export_confidence_trace(empty, ConfidenceTracker(3));
  CHECK(empty.str() == "t,conf_class_0,conf_class_1,conf_class_2\n");

  ConfidenceTracker one(3);
  one.skip();
  one.record(2, 2);
  std::ostringstream single;
  export_confidence_trace(single, one);
  CHECK(single.str() == "t,conf_class_0,conf_class_1,conf_class_2\n2,0,0,1\n");

  const auto many = with_votes({0, 1, 1, 2, 0, 0, 1}, 3);
  std::ostringstream trace;
  export_confidence_trace(trace, many);
  const auto text = trace.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == many.frames_classified() + 1);
}

TEST_CASE("confidences sum to one and counts never decrease") {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> pick(0, 4);
  ConfidenceTracker t(5);
  std::vector<std::int64_t> previous(5, 0);
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd c = t.record(i + 2, pick(rng));
    CHECK(std::abs(c.sum() - 1.0) <= 1e-12);
    CHECK(c.minCoeff() >= 0.0);
    for (std::size_t k = 0; k < 5; ++k) CHECK(t.votes()[k] >= previous[k]);
    previous = t.votes();
  }
  std::int64_t total = 0;
  for (const auto v : t.votes()) total += v;
  CHECK(total == t.frames_classified());
}

TEST_CASE("a run of identical predictions never lowers that class's confidence") {
  auto t = with_votes({2, 0, 0, 1, 2}, 3);
  double last = t.confidences()(1);
  for (int i = 0; i < 20; ++i) {
    const double now = t.record(10 + i, 1)(1);
    CHECK(now >= last);
    last = now;
  }
}

TEST_CASE("a single outlier never flips the decision") {
  for (int classes = 2; classes <= 5; ++classes) {
    for (int truth = 0; truth < classes; ++truth) {
      for (int outlier = 0; outlier < classes; ++outlier) {
        if (outlier == truth) continue;
        for (int n = 2; n <= 40; ++n) {
          for (int at = 0; at <= n; ++at) {
            std::vector<int> p(static_cast<std::size_t>(n), truth);
            p.insert(p.begin() + at, outlier);
            CHECK(final_decision(with_votes(p, classes)).label == truth);
          }
        }
      }
    }
  }
}

TEST_CASE("step warms up, then classifies every frame") {
  std::mt19937_64 rng(52);
  const auto model = random_model(3, 1);
  const auto seq = fixture::random_sequence(rng, 6);
  const SrfConfig config = small_config();
  ConfidenceTracker tracker(3);
  MahalanobisMatrix state(25);
  CHECK(!step(tracker, state, seq.frame(0), model, config).has_value());
  CHECK(tracker.frames_elapsed() == 1);
  CHECK(tracker.frames_classified() == 0);
  const auto c = step(tracker, state, seq.frame(1), model, config);
  REQUIRE(c.has_value());
  CHECK(c->sum() == 1.0);
  CHECK(state.rows() == 2);
  CHECK(tracker.frames_elapsed() == 2);

  const auto small = fixture::frame_from(fixture::random_points(rng, 24));
  try {
    step(tracker, state, small, model, config);
    FAIL("expected JOINT_COUNT_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::JointCountMismatch);
  }
  ConfidenceTracker wrong(4);
  CHECK_THROWS_AS(step(wrong, state, seq.frame(2), model, config), Error);
}

TEST_CASE("streaming replay equals a batch driver") {
  std::mt19937_64 rng(53);
  const SrfConfig config = small_config();
  for (int trial = 0; trial < 4; ++trial) {
    const auto model = random_model(4, static_cast<std::uint64_t>(trial));
    const auto seq = fixture::random_sequence(rng, 25);
    const auto streamed = classify_sequence(seq, model, config);

    // batch driver: whole-prefix matrices built from scratch at every t
    ConfidenceTracker expected(4);
    expected.skip();
    for (std::size_t t = 2; t <= seq.frame_count(); ++t) {
      const auto m = build_mahalanobis_matrix(std::span(seq.frames()).first(t), 25);
      expected.record(static_cast<Eigen::Index>(t), cnn::predict(model, srf::srf(m, config)).label);
    }
    CHECK(streamed.log() == expected.log());
    CHECK(streamed.votes() == expected.votes());
    CHECK(streamed.frames_elapsed() == 25);
    CHECK(streamed.frames_classified() == 24);
  }
}

TEST_CASE("independent streams share one model") {
  std::mt19937_64 rng(54);
  const auto model = random_model(3, 4);
  const auto a = fixture::random_sequence(rng, 8);
  const auto b = fixture::random_sequence(rng, 8);
  StreamClassifier sa(model, small_config(), 25), sb(model, small_config(), 25);
  for (std::size_t f = 0; f < 8; ++f) {
    sa.push(a.frame(f));
    sb.push(b.frame(f));
  }
  CHECK(sa.tracker().log() == classify_sequence(a, model, small_config()).log());
  CHECK(sb.tracker().log() == classify_sequence(b, model, small_config()).log());
}
