#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srf/cnn.hpp"
#include "srf/radon.hpp"
#include "srf/skeleton.hpp"

namespace srf::harness {

struct Fold {
  std::string held_out_subject;
  std::vector<ActionSequence> train;
  std::vector<ActionSequence> test;
};

/// One fold per distinct subject, ordered by subject id.
std::vector<Fold> lopo_split(std::span<const ActionSequence> dataset);

using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct EvalReport {
  std::vector<std::string> class_names;
  std::map<std::string, double> fold_accuracy;        // held-out subject -> accuracy
  std::map<std::string, double> fold_train_accuracy;  // final-epoch training accuracy
  double mean_accuracy = 0.0;
  ConfusionMatrix confusion;                  // rows = predicted, columns = truth
  std::vector<std::int64_t> class_totals;     // test sequences per true class

  std::int64_t total() const { return confusion.sum(); }
  bool operator==(const EvalReport& other) const;
};

struct EvalOptions {
  double lambda_rel = kDefaultLambdaRel;
  /// Also train on the footprint at t = ceil(F / 2) of every training sequence.
  bool mid_sequence_augmentation = false;
};

/// Leave-one-person-out evaluation. Each fold trains on the final-frame
/// footprint of every training sequence (seed = train_config.seed XOR fold
/// index) and classifies each held-out sequence by cumulative online voting.
EvalReport run_lopo(std::span<const ActionSequence> dataset, const SrfConfig& srf_config,
                    const cnn::TrainConfig& train_config, const EvalOptions& options = {});

/// Final-frame footprint of each sequence, the training input of run_lopo.
std::vector<cnn::LabeledSinogram> encode_final_frames(std::span<const ActionSequence> seqs,
                                                      const SrfConfig& config,
                                                      const EvalOptions& options = {});

/// Labels "a1".."aC" where C is one more than the largest action index.
LabelSet label_set_for(std::span<const ActionSequence> dataset);

void write_report_json(std::ostream& out, const EvalReport& r);
EvalReport read_report_json(std::istream& in);
void write_report_csv(std::ostream& out, const EvalReport& r);

}  // namespace srf::harness
