#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "srf/cnn.hpp"
#include "srf/mahalanobis.hpp"
#include "srf/radon.hpp"

namespace srf::online {

struct FrameDecision {
  Eigen::Index t = 0;  // frames consumed when the prediction was made
  int predicted = 0;
  Eigen::VectorXd confidences;

  bool operator==(const FrameDecision& other) const {
    return t == other.t && predicted == other.predicted &&
           confidences.size() == other.confidences.size() && confidences == other.confidences;
  }
};

/// Cumulative per-class votes over a stream. Confidence of class c is
/// votes[c] / frames_classified; frames seen during warm-up count toward
/// frames_elapsed only.
class ConfidenceTracker {
 public:
  explicit ConfidenceTracker(int classes);

  /// Records one classified frame and returns the updated confidences.
  const Eigen::VectorXd& record(Eigen::Index t, int predicted);
  void skip() { ++frames_elapsed_; }

  int classes() const { return static_cast<int>(votes_.size()); }
  const std::vector<std::int64_t>& votes() const { return votes_; }
  std::int64_t frames_classified() const { return frames_classified_; }
  std::int64_t frames_elapsed() const { return frames_elapsed_; }
  Eigen::VectorXd confidences() const;
  const std::vector<FrameDecision>& log() const { return log_; }

 private:
  std::vector<std::int64_t> votes_;
  std::int64_t frames_classified_ = 0;
  std::int64_t frames_elapsed_ = 0;
  std::vector<FrameDecision> log_;
};

struct Decision {
  int label = 0;
  double confidence = 0.0;
};

/// Winning class by vote share, ties toward the lowest index.
Decision final_decision(const ConfidenceTracker& tracker);

/// (t, conf_class_0, ..., conf_class_{C-1}), one row per classified frame.
void export_confidence_trace(std::ostream& out, const ConfidenceTracker& tracker);

/// Appends `frame` to `state`; once state holds at least config.min_t rows
/// its footprint is classified and the vote recorded. Returns the
/// confidences, or nullopt while warming up.
std::optional<Eigen::VectorXd> step(ConfidenceTracker& tracker, MahalanobisMatrix& state,
                                    const SkeletonFrame& frame, const cnn::Model& model,
                                    const SrfConfig& config);

/// One stream: owns the growing matrix and the tracker, shares the model.
class StreamClassifier {
 public:
  StreamClassifier(const cnn::Model& model, SrfConfig config, Eigen::Index joint_count,
                   double lambda_rel = kDefaultLambdaRel);

  std::optional<Eigen::VectorXd> push(const SkeletonFrame& frame) {
    return step(tracker_, state_, frame, model_, config_);
  }

  const ConfidenceTracker& tracker() const { return tracker_; }
  const MahalanobisMatrix& state() const { return state_; }

 private:
  const cnn::Model& model_;
  SrfConfig config_;
  MahalanobisMatrix state_;
  ConfidenceTracker tracker_;
};

/// Replays a whole recorded sequence frame by frame.
ConfidenceTracker classify_sequence(const ActionSequence& seq, const cnn::Model& model,
                                    const SrfConfig& config,
                                    double lambda_rel = kDefaultLambdaRel);

}  // namespace srf::online
