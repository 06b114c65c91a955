#include "srf/online.hpp"

#include <ostream>

#include "srf/error.hpp"
#include "srf/image_io.hpp"

namespace srf::online {

ConfidenceTracker::ConfidenceTracker(int classes) {
  if (classes < 1) throw Error(ErrorCode::InvalidConfig, "tracker needs at least one class");
  votes_.assign(static_cast<std::size_t>(classes), 0);
}

Eigen::VectorXd ConfidenceTracker::confidences() const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(classes());
  if (frames_classified_ == 0) return c;
  for (int k = 0; k < classes(); ++k) {
    c(k) = static_cast<double>(votes_[static_cast<std::size_t>(k)]) /
           static_cast<double>(frames_classified_);
  }
  return c;
}

const Eigen::VectorXd& ConfidenceTracker::record(Eigen::Index t, int predicted) {
  if (predicted < 0 || predicted >= classes()) {
    throw Error(ErrorCode::LabelOutOfRange, "predicted class " + std::to_string(predicted));
  }
  ++votes_[static_cast<std::size_t>(predicted)];
  ++frames_classified_;
  ++frames_elapsed_;
  log_.push_back({t, predicted, confidences()});
  return log_.back().confidences;
}

Decision final_decision(const ConfidenceTracker& tracker) {
  if (tracker.frames_classified() == 0) {
    throw Error(ErrorCode::NoClassifiedFrames, "no frame has been classified yet");
  }
  const Eigen::VectorXd c = tracker.confidences();
  const int best = cnn::argmax_lowest(c);
  return {best, c(best)};
}

void export_confidence_trace(std::ostream& out, const ConfidenceTracker& tracker) {
  out << 't';
  for (int k = 0; k < tracker.classes(); ++k) out << ",conf_class_" << k;
  out << '\n';
  for (const auto& d : tracker.log()) {
    out << d.t;
    for (Eigen::Index k = 0; k < d.confidences.size(); ++k) out << ',' << format_double(d.confidences(k));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing confidence trace");
}

std::optional<Eigen::VectorXd> step(ConfidenceTracker& tracker, MahalanobisMatrix& state,
                                    const SkeletonFrame& frame, const cnn::Model& model,
                                    const SrfConfig& config) {
  if (tracker.classes() != model.labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "tracker and model disagree on class count");
  }
  state.append(frame);
  if (state.rows() < config.min_t) {
    tracker.skip();
    return std::nullopt;
  }
  const auto prediction = cnn::predict(model, srf(state, config));
  return tracker.record(state.rows(), prediction.label);
}

StreamClassifier::StreamClassifier(const cnn::Model& model, SrfConfig config,
                                   Eigen::Index joint_count, double lambda_rel)
    : model_(model),
      config_(std::move(config)),
      state_(joint_count, lambda_rel),
      tracker_(model.labels.size()) {
  config_.validate();
}

ConfidenceTracker classify_sequence(const ActionSequence& seq, const cnn::Model& model,
                                    const SrfConfig& config, double lambda_rel) {
  StreamClassifier stream(model, config, seq.joint_count(), lambda_rel);
  for (const auto& frame : seq.frames()) stream.push(frame);
  return stream.tracker();
}

}  // namespace srf::online
