#include "srf/skeleton.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <Eigen/Geometry>
#include <json.hpp>

#include "srf/error.hpp"

namespace srf {

namespace {

std::string frame_location(std::size_t frame, std::size_t joint) {
  return "frame " + std::to_string(frame) + ", joint " + std::to_string(joint);
}

}  // namespace

SkeletonFrame validate_frame(const RawFrame& raw, std::size_t joint_count, std::size_t dim) {
  const auto f = static_cast<std::size_t>(raw.frame_index);
  if (raw.joints.size() != joint_count) {
    throw Error(ErrorCode::InconsistentJointCount,
                "frame " + std::to_string(f) + " has " + std::to_string(raw.joints.size()) +
                    " joints, expected " + std::to_string(joint_count));
  }
  SkeletonFrame frame;
  frame.frame_index = raw.frame_index;
  frame.joints.resize(static_cast<Eigen::Index>(joint_count), static_cast<Eigen::Index>(dim));
  for (std::size_t j = 0; j < joint_count; ++j) {
    const auto& coords = raw.joints[j];
    if (coords.size() != dim || (dim != 2 && dim != 3)) {
      throw Error(ErrorCode::BadDimension,
                  frame_location(f, j) + " has dimension " + std::to_string(coords.size()));
    }
    for (std::size_t k = 0; k < dim; ++k) {
      const auto value = static_cast<float>(coords[k]);
      if (!std::isfinite(coords[k]) || !std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteCoordinate, frame_location(f, j));
      }
      frame.joints(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = value;
    }
  }
  return frame;
}

ActionSequence validate_sequence(const RawSequence& raw) {
  if (raw.label < 0) {
    throw Error(ErrorCode::MalformedRecord, "negative action label " + std::to_string(raw.label));
  }
  if (raw.frames.empty()) {
    throw Error(ErrorCode::TooFewFrames, "sequence has no frames");
  }

  const std::size_t joint_count = raw.frames.front().joints.size();
  const std::size_t dim = joint_count > 0 ? raw.frames.front().joints.front().size() : 0;

  ActionSequence seq;
  seq.frames_.reserve(raw.frames.size());
  for (std::size_t f = 0; f < raw.frames.size(); ++f) {
    const RawFrame& rf = raw.frames[f];
    if (rf.joints.size() != joint_count) {
      throw Error(ErrorCode::InconsistentJointCount,
                  "frame " + std::to_string(f) + " has " + std::to_string(rf.joints.size()) +
                      " joints, expected " + std::to_string(joint_count));
    }
    if (rf.frame_index != static_cast<std::int64_t>(f)) {
      throw Error(ErrorCode::NonConsecutiveFrames,
                  "frame " + std::to_string(f) + " carries index " + std::to_string(rf.frame_index));
    }
    seq.frames_.push_back(validate_frame(rf, joint_count, dim));
  }

  if (joint_count < static_cast<std::size_t>(kMinJoints)) {
    throw Error(ErrorCode::TooFewJoints, std::to_string(joint_count) + " joints, need at least " +
                                             std::to_string(kMinJoints));
  }
  if (raw.frames.size() <= 2) {
    throw Error(ErrorCode::TooFewFrames,
                std::to_string(raw.frames.size()) + " frames, need more than 2");
  }

  seq.label_ = raw.label;
  seq.subject_id_ = raw.subject_id;
  seq.trial_id_ = raw.trial_id;
  seq.joint_count_ = static_cast<Eigen::Index>(joint_count);
  seq.dim_ = static_cast<Eigen::Index>(dim);
  return seq;
}

ActionSequence ActionSequence::with_subject(std::string subject_id) const {
  ActionSequence copy = *this;
  copy.subject_id_ = std::move(subject_id);
  return copy;
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) {
    throw Error(ErrorCode::InvalidSpec, "a label set needs at least 2 classes");
  }
  std::set<std::string> seen(names_.begin(), names_.end());
  if (seen.size() != names_.size()) {
    throw Error(ErrorCode::InvalidSpec, "class names must be unique");
  }
}

LabelSet LabelSet::numbered(int classes) {
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) names.push_back("a" + std::to_string(c + 1));
  return LabelSet(std::move(names));
}

int LabelSet::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorCode::InvalidSpec, "unknown class name " + name);
  return static_cast<int>(it - names_.begin());
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

using nlohmann::json;

struct SequenceKey {
  std::string subject;
  int label;
  std::string trial;
  auto operator<=>(const SequenceKey&) const = default;
};

struct PendingSequence {
  SequenceKey key;
  std::map<std::int64_t, RawFrame> frames;
};

void expect(bool ok, std::size_t line, const std::string& what) {
  if (!ok) throw ParseError(ErrorCode::MalformedRecord, line, what);
}

void append_float(std::string& out, float value) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  out.append(buf.data(), end);
}

}  // namespace

FrameRecord parse_frame_record(std::string_view text, std::size_t line) {
  static const std::set<std::string> kKeys = {"subject", "action", "trial", "frame", "joints"};

  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ErrorCode::MalformedRecord, line, e.what());
  }
  expect(record.is_object(), line, "record is not a JSON object");
  for (const auto& item : record.items()) {
    expect(kKeys.count(item.key()) == 1, line, "unexpected key \"" + item.key() + "\"");
  }
  for (const auto& key : kKeys) {
    expect(record.contains(key), line, "missing key \"" + key + "\"");
  }
  const json& subject = record["subject"];
  const json& trial = record["trial"];
  const json& action = record["action"];
  const json& frame = record["frame"];
  const json& joints = record["joints"];
  expect(subject.is_string() && trial.is_string(), line, "subject and trial must be strings");
  expect(action.is_number_integer() && action.get<std::int64_t>() >= 0 &&
             action.get<std::int64_t>() <= std::numeric_limits<int>::max(),
         line, "action must be a non-negative integer");
  expect(frame.is_number_integer() && frame.get<std::int64_t>() >= 0, line,
         "frame must be a non-negative integer");
  expect(joints.is_array(), line, "joints must be an array");

  FrameRecord out;
  out.subject_id = subject.get<std::string>();
  out.trial_id = trial.get<std::string>();
  out.label = action.get<int>();
  out.frame.frame_index = frame.get<std::int64_t>();
  out.frame.joints.reserve(joints.size());
  for (const auto& joint : joints) {
    expect(joint.is_array(), line, "each joint must be a coordinate array");
    std::vector<double> coords;
    coords.reserve(joint.size());
    for (const auto& c : joint) {
      expect(c.is_number(), line, "coordinates must be numbers");
      coords.push_back(c.get<double>());
    }
    out.frame.joints.push_back(std::move(coords));
  }
  return out;
}

std::vector<ActionSequence> read_jsonl(std::istream& in) {
  std::vector<PendingSequence> pending;
  std::map<SequenceKey, std::size_t> index;

  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    FrameRecord rec = parse_frame_record(text, line);
    const std::int64_t frame_index = rec.frame.frame_index;
    SequenceKey key{std::move(rec.subject_id), rec.label, std::move(rec.trial_id)};
    auto [it, inserted] = index.try_emplace(key, pending.size());
    if (inserted) pending.push_back(PendingSequence{key, {}});
    auto& frames = pending[it->second].frames;
    if (!frames.try_emplace(frame_index, std::move(rec.frame)).second) {
      throw ParseError(ErrorCode::DuplicateFrameIndex, line,
                       "frame " + std::to_string(frame_index) +
                           " repeated for subject " + key.subject + ", action " +
                           std::to_string(key.label) + ", trial " + key.trial);
    }
  }
  if (in.bad()) throw Error(ErrorCode::Io, "failed reading JSONL stream");

  std::vector<ActionSequence> out;
  out.reserve(pending.size());
  for (auto& p : pending) {
    RawSequence raw;
    raw.subject_id = p.key.subject;
    raw.trial_id = p.key.trial;
    raw.label = p.key.label;
    for (auto& [idx, f] : p.frames) raw.frames.push_back(std::move(f));
    out.push_back(validate_sequence(raw));
  }
  return out;
}

void write_jsonl(std::ostream& out, std::span<const ActionSequence> seqs) {
  std::string line;
  for (const auto& seq : seqs) {
    const std::string subject = json(seq.subject_id()).dump();
    const std::string trial = json(seq.trial_id()).dump();
    for (const auto& frame : seq.frames()) {
      line.clear();
      line += "{\"subject\": " + subject + ", \"action\": " + std::to_string(seq.label()) +
              ", \"trial\": " + trial + ", \"frame\": " + std::to_string(frame.frame_index) +
              ", \"joints\": [";
      for (Eigen::Index j = 0; j < frame.joints.rows(); ++j) {
        if (j > 0) line += ", ";
        line += '[';
        for (Eigen::Index k = 0; k < frame.joints.cols(); ++k) {
          if (k > 0) line += ", ";
          append_float(line, frame.joints(j, k));
        }
        line += ']';
      }
      line += "]}\n";
      out << line;
    }
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing JSONL stream");
}

std::vector<ActionSequence> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_jsonl(in);
}

void write_jsonl_file(const std::string& path, std::span<const ActionSequence> seqs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + path);
  write_jsonl(out, seqs);
}

// ---------------------------------------------------------------------------
// Synthetic sequences

namespace {

// Kinect v2 joint layout in meters, y up, z toward the sensor.
constexpr std::array<std::array<double, 3>, 25> kRestSkeleton = {{
    {0.00, 0.00, 0.00},    // spine base
    {0.00, 0.30, -0.02},   // spine mid
    {0.00, 0.60, -0.01},   // neck
    {0.00, 0.75, 0.03},    // head
    {-0.18, 0.52, 0.02},   // shoulder left
    {-0.25, 0.27, 0.06},   // elbow left
    {-0.28, 0.05, -0.04},  // wrist left
    {-0.29, -0.02, -0.07}, // hand left
    {0.18, 0.52, 0.02},    // shoulder right
    {0.25, 0.27, 0.06},    // elbow right
    {0.28, 0.05, -0.04},   // wrist right
    {0.29, -0.02, -0.07},  // hand right
    {-0.09, -0.02, 0.01},  // hip left
    {-0.10, -0.45, -0.04}, // knee left
    {-0.10, -0.85, 0.03},  // ankle left
    {-0.10, -0.90, -0.10}, // foot left
    {0.09, -0.02, 0.01},   // hip right
    {0.10, -0.45, -0.04},  // knee right
    {0.10, -0.85, 0.03},   // ankle right
    {0.10, -0.90, -0.10},  // foot right
    {0.00, 0.52, 0.00},    // spine shoulder
    {-0.30, -0.08, -0.09}, // hand tip left
    {-0.26, -0.03, -0.10}, // thumb left
    {0.30, -0.08, -0.09},  // hand tip right
    {0.26, -0.03, -0.10},  // thumb right
}};

struct ClassPattern {
  Eigen::MatrixXd offset;     // J x 3 posture displacement
  Eigen::MatrixXd amplitude;  // J x 3 oscillation amplitude
  Eigen::VectorXd frequency;  // cycles per sequence, per joint
  Eigen::VectorXd phase;      // radians, per joint
};

Eigen::Vector3d random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
  return v / std::max(v.norm(), 1e-12);
}

}  // namespace

std::vector<ActionSequence> synth_generate(const SynthSpec& spec, int subjects, int trials,
                                           int frames, std::uint64_t seed) {
  if (spec.classes < 2 || spec.joints < kMinJoints || spec.active_joints < 1 ||
      spec.active_joints > spec.joints || !(spec.posture_offset >= 0.0) ||
      !(spec.motion_amplitude >= 0.0) || !(spec.noise >= 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "synthetic class spec out of range");
  }
  if (subjects < 1 || trials < 1 || frames < 3) {
    throw Error(ErrorCode::InvalidSpec, "need subjects >= 1, trials >= 1, frames >= 3");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> normal(0.0, 1.0);

  const Eigen::Index J = spec.joints;
  Eigen::MatrixXd rest(J, 3);
  if (J == static_cast<Eigen::Index>(kRestSkeleton.size())) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const auto& p = kRestSkeleton[static_cast<std::size_t>(j)];
      rest.row(j) << p[0], p[1], p[2];
    }
  } else {
    for (Eigen::Index j = 0; j < J; ++j) {
      rest.row(j) << uniform(-0.3, 0.3), uniform(-0.9, 0.8), uniform(-0.1, 0.1);
    }
  }

  std::vector<ClassPattern> patterns;
  for (int c = 0; c < spec.classes; ++c) {
    ClassPattern p{Eigen::MatrixXd::Zero(J, 3), Eigen::MatrixXd::Zero(J, 3),
                   Eigen::VectorXd::Zero(J), Eigen::VectorXd::Zero(J)};
    std::vector<Eigen::Index> order(static_cast<std::size_t>(J));
    for (Eigen::Index j = 0; j < J; ++j) order[static_cast<std::size_t>(j)] = j;
    std::shuffle(order.begin(), order.end(), rng);
    for (int a = 0; a < spec.active_joints; ++a) {
      const Eigen::Index j = order[static_cast<std::size_t>(a)];
      p.offset.row(j) = spec.posture_offset * random_direction(rng).transpose();
      p.amplitude.row(j) = spec.motion_amplitude * random_direction(rng).transpose();
      p.frequency(j) = uniform(0.5, 1.5);
      p.phase(j) = uniform(0.0, 2.0 * std::numbers::pi);
    }
    patterns.push_back(std::move(p));
  }

  std::vector<ActionSequence> out;
  out.reserve(static_cast<std::size_t>(spec.classes * subjects * trials));
  for (int s = 0; s < subjects; ++s) {
    const double body_scale = uniform(0.9, 1.1);
    const double yaw = uniform(-0.3, 0.3);
    const Eigen::Matrix3d rotation =
        Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
    const Eigen::Vector3d position(uniform(-0.5, 0.5), uniform(-0.1, 0.1), uniform(2.0, 3.0));
    // Per-subject style: how strongly and with what timing each class is performed.
    std::vector<std::array<double, 3>> style;
    for (int c = 0; c < spec.classes; ++c) {
      style.push_back({uniform(0.8, 1.2), uniform(0.8, 1.2), uniform(-0.5, 0.5)});
    }

    for (int c = 0; c < spec.classes; ++c) {
      const ClassPattern& p = patterns[static_cast<std::size_t>(c)];
      const auto [offset_scale, amplitude_scale, phase_shift] = style[static_cast<std::size_t>(c)];
      for (int t = 0; t < trials; ++t) {
        const double speed = uniform(0.9, 1.1);
        const double trial_phase = phase_shift + uniform(-0.3, 0.3);

        RawSequence raw;
        raw.subject_id = "s" + std::to_string(s + 1);
        raw.trial_id = "t" + std::to_string(t + 1);
        raw.label = c;
        for (int f = 0; f < frames; ++f) {
          const double progress = static_cast<double>(f) / static_cast<double>(frames);
          RawFrame rf;
          rf.frame_index = f;
          for (Eigen::Index j = 0; j < J; ++j) {
            const double angle =
                2.0 * std::numbers::pi * p.frequency(j) * speed * progress + p.phase(j) + trial_phase;
            const Eigen::Vector3d local =
                body_scale * (rest.row(j).transpose() + offset_scale * p.offset.row(j).transpose() +
                              amplitude_scale * std::sin(angle) * p.amplitude.row(j).transpose());
            Eigen::Vector3d world = rotation * local + position;
            for (int k = 0; k < 3; ++k) world(k) += spec.noise * normal(rng);
            rf.joints.push_back({world(0), world(1), world(2)});
          }
          raw.frames.push_back(std::move(rf));
        }
        out.push_back(validate_sequence(raw));
      }
    }
  }
  return out;
}

}  // namespace srf
