#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace srf {

/// Joint coordinates of one frame, one joint per row (J x d). Stored at
/// 32-bit precision; the numeric core promotes to double.
using JointMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A single joint's coordinates (one row of a JointMatrix).
using JointVector = Eigen::Matrix<float, 1, Eigen::Dynamic>;

inline constexpr Eigen::Index kMinJoints = 4;

struct SkeletonFrame {
  JointMatrix joints;
  std::int64_t frame_index = 0;

  Eigen::Index joint_count() const { return joints.rows(); }
  Eigen::Index dim() const { return joints.cols(); }

  bool operator==(const SkeletonFrame& other) const {
    return frame_index == other.frame_index && joints.rows() == other.joints.rows() &&
           joints.cols() == other.joints.cols() && joints == other.joints;
  }
};

/// Unvalidated sequence data as it comes off storage.
struct RawFrame {
  std::int64_t frame_index = 0;
  std::vector<std::vector<double>> joints;
};

struct RawSequence {
  std::string subject_id;
  std::string trial_id;
  int label = 0;
  std::vector<RawFrame> frames;
};

class ActionSequence;

/// Checks one frame's joints against an expected joint count and dimension
/// and converts it. The minimum joint count is a sequence-level check.
SkeletonFrame validate_frame(const RawFrame& raw, std::size_t joint_count, std::size_t dim);

/// Checks every structural and numeric constraint on a raw sequence. The
/// input is never modified; the first violation is reported with its frame
/// and joint location.
ActionSequence validate_sequence(const RawSequence& raw);

/// Validated, immutable skeleton sequence for one (subject, action, trial).
class ActionSequence {
 public:
  const std::vector<SkeletonFrame>& frames() const { return frames_; }
  const SkeletonFrame& frame(std::size_t i) const { return frames_.at(i); }
  std::size_t frame_count() const { return frames_.size(); }
  int label() const { return label_; }
  const std::string& subject_id() const { return subject_id_; }
  const std::string& trial_id() const { return trial_id_; }
  Eigen::Index joint_count() const { return joint_count_; }
  Eigen::Index dim() const { return dim_; }

  /// Same sequence under a different subject id.
  ActionSequence with_subject(std::string subject_id) const;

  bool operator==(const ActionSequence& other) const = default;

 private:
  friend ActionSequence validate_sequence(const RawSequence& raw);
  ActionSequence() = default;

  std::vector<SkeletonFrame> frames_;
  int label_ = 0;
  std::string subject_id_;
  std::string trial_id_;
  Eigen::Index joint_count_ = 0;
  Eigen::Index dim_ = 0;
};

/// Ordered class names; index <-> name is a bijection.
class LabelSet {
 public:
  explicit LabelSet(std::vector<std::string> names);

  /// Names "a1".."aC", matching the 1-based action naming of skeleton datasets.
  static LabelSet numbered(int classes);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
  int index_of(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> names_;
};

// JSONL persistence. One record per frame:
//   {"subject": "s1", "action": 4, "trial": "t2", "frame": 17, "joints": [[x,y,z], ...]}

// Blank lines are skipped; records of one sequence may be interleaved with
// others and arrive out of order.
std::vector<ActionSequence> read_jsonl(std::istream& in);

struct FrameRecord {
  std::string subject_id;
  int label = 0;
  std::string trial_id;
  RawFrame frame;
};
/// One JSONL line; `line` is only used in error reports.
FrameRecord parse_frame_record(std::string_view text, std::size_t line);

void write_jsonl(std::ostream& out, std::span<const ActionSequence> seqs);

std::vector<ActionSequence> read_jsonl_file(const std::string& path);
void write_jsonl_file(const std::string& path, std::span<const ActionSequence> seqs);

/// Parameters of the synthetic motion classes. Each class displaces a few
/// joints from a rest skeleton and oscillates them along class-specific
/// trajectories; subjects and trials add scale, pose, phase and noise jitter.
struct SynthSpec {
  int classes = 3;
  int joints = 25;
  int active_joints = 5;
  double posture_offset = 0.12;    // meters
  double motion_amplitude = 0.15;  // meters
  double noise = 0.005;            // meters, per coordinate
};

std::vector<ActionSequence> synth_generate(const SynthSpec& spec, int subjects, int trials,
                                           int frames, std::uint64_t seed);

}  // namespace srf
