#include "srf/harness.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "srf/error.hpp"
#include "srf/mahalanobis.hpp"
#include "srf/online.hpp"

namespace srf::harness {

namespace {

struct FoldIndices {
  std::string subject;
  std::vector<std::size_t> train, test;
};

std::vector<FoldIndices> split_indices(std::span<const ActionSequence> dataset) {
  std::set<std::string> subjects;
  for (const auto& seq : dataset) subjects.insert(seq.subject_id());
  if (subjects.size() < 2) {
    throw Error(ErrorCode::TooFewSubjects, "leave-one-person-out needs at least 2 subjects, have " +
                                               std::to_string(subjects.size()));
  }
  std::vector<FoldIndices> folds;
  for (const auto& subject : subjects) {
    FoldIndices f{subject, {}, {}};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      (dataset[i].subject_id() == subject ? f.test : f.train).push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace

std::vector<Fold> lopo_split(std::span<const ActionSequence> dataset) {
  std::vector<Fold> folds;
  for (const auto& idx : split_indices(dataset)) {
    Fold f{idx.subject, {}, {}};
    for (const auto i : idx.train) f.train.push_back(dataset[i]);
    for (const auto i : idx.test) f.test.push_back(dataset[i]);
    folds.push_back(std::move(f));
  }
  return folds;
}

LabelSet label_set_for(std::span<const ActionSequence> dataset) {
  int top = -1;
  for (const auto& seq : dataset) top = std::max(top, seq.label());
  if (top < 1) throw Error(ErrorCode::SingleClass, "dataset needs at least 2 classes");
  return LabelSet::numbered(top + 1);
}

std::vector<cnn::LabeledSinogram> encode_final_frames(std::span<const ActionSequence> seqs,
                                                      const SrfConfig& config,
                                                      const EvalOptions& options) {
  std::vector<cnn::LabeledSinogram> out;
  for (const auto& seq : seqs) {
    const MahalanobisMatrix m = build_mahalanobis_matrix(seq, options.lambda_rel);
    out.push_back({srf(m, config), seq.label()});
    if (options.mid_sequence_augmentation) {
      const Eigen::Index mid = std::max<Eigen::Index>((m.rows() + 1) / 2, config.min_t);
      out.push_back({srf(m.prefix(mid), config), seq.label()});
    }
  }
  return out;
}

EvalReport run_lopo(std::span<const ActionSequence> dataset, const SrfConfig& srf_config,
                    const cnn::TrainConfig& train_config, const EvalOptions& options) {
  srf_config.validate();
  train_config.validate();
  const auto folds = split_indices(dataset);
  const LabelSet labels = label_set_for(dataset);
  const int classes = labels.size();

  // Each sequence trains in every fold but its own; encode once.
  std::vector<std::vector<cnn::LabeledSinogram>> encoded;
  encoded.reserve(dataset.size());
  for (const auto& seq : dataset) {
    encoded.push_back(encode_final_frames(std::span<const ActionSequence>(&seq, 1), srf_config, options));
  }

  EvalReport report;
  report.class_names = labels.names();
  report.confusion = ConfusionMatrix::Zero(classes, classes);
  report.class_totals.assign(static_cast<std::size_t>(classes), 0);

  double accuracy_sum = 0.0;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    const auto& fold = folds[k];
    std::vector<cnn::LabeledSinogram> train_set;
    for (const auto i : fold.train) {
      train_set.insert(train_set.end(), encoded[i].begin(), encoded[i].end());
    }
    cnn::TrainConfig config = train_config;
    config.seed = train_config.seed ^ static_cast<std::uint64_t>(k);
    const auto trained = cnn::train(train_set, labels, config);

    std::int64_t correct = 0;
    for (const auto i : fold.test) {
      const ActionSequence& seq = dataset[i];
      const auto tracker = online::classify_sequence(seq, trained.model, srf_config, options.lambda_rel);
      const int predicted = online::final_decision(tracker).label;
      ++report.confusion(predicted, seq.label());
      ++report.class_totals[static_cast<std::size_t>(seq.label())];
      if (predicted == seq.label()) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(fold.test.size());
    report.fold_accuracy[fold.subject] = accuracy;
    report.fold_train_accuracy[fold.subject] = trained.history.back().train_accuracy;
    accuracy_sum += accuracy;
  }
  report.mean_accuracy = accuracy_sum / static_cast<double>(folds.size());
  return report;
}

bool EvalReport::operator==(const EvalReport& other) const {
  return class_names == other.class_names && fold_accuracy == other.fold_accuracy &&
         fold_train_accuracy == other.fold_train_accuracy && mean_accuracy == other.mean_accuracy &&
         confusion.rows() == other.confusion.rows() && confusion.cols() == other.confusion.cols() &&
         confusion == other.confusion && class_totals == other.class_totals;
}

void write_report_json(std::ostream& out, const EvalReport& r) {
  nlohmann::json j;
  j["classes"] = r.class_names;
  j["folds"] = nlohmann::json::array();
  for (const auto& [subject, accuracy] : r.fold_accuracy) {
    nlohmann::json fold{{"subject", subject}, {"accuracy", accuracy}};
    if (const auto it = r.fold_train_accuracy.find(subject); it != r.fold_train_accuracy.end()) {
      fold["train_accuracy"] = it->second;
    }
    j["folds"].push_back(std::move(fold));
  }
  j["mean_accuracy"] = r.mean_accuracy;
  j["confusion"] = nlohmann::json::array();
  for (Eigen::Index p = 0; p < r.confusion.rows(); ++p) {
    std::vector<std::int64_t> row(static_cast<std::size_t>(r.confusion.cols()));
    for (Eigen::Index t = 0; t < r.confusion.cols(); ++t) row[static_cast<std::size_t>(t)] = r.confusion(p, t);
    j["confusion"].push_back(row);
  }
  j["class_totals"] = r.class_totals;
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing report JSON");
}

EvalReport read_report_json(std::istream& in) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(in);
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    for (const auto& fold : j.at("folds")) {
      const auto subject = fold.at("subject").get<std::string>();
      r.fold_accuracy[subject] = fold.at("accuracy").get<double>();
      if (fold.contains("train_accuracy")) {
        r.fold_train_accuracy[subject] = fold.at("train_accuracy").get<double>();
      }
    }
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    const auto rows = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
    const auto n = static_cast<Eigen::Index>(rows.size());
    r.confusion = ConfusionMatrix::Zero(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
      const auto& row = rows[static_cast<std::size_t>(p)];
      if (static_cast<Eigen::Index>(row.size()) != n) {
        throw Error(ErrorCode::MalformedRecord, "confusion matrix is not square");
      }
      for (Eigen::Index t = 0; t < n; ++t) r.confusion(p, t) = row[static_cast<std::size_t>(t)];
    }
    r.class_totals = j.at("class_totals").get<std::vector<std::int64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("report JSON: ") + e.what());
  }
  return r;
}

void write_report_csv(std::ostream& out, const EvalReport& r) {
  out << "predicted\\truth";
  for (const auto& name : r.class_names) out << ',' << name;
  out << ",total\n";
  for (Eigen::Index p = 0; p < r.confusion.rows(); ++p) {
    out << r.class_names[static_cast<std::size_t>(p)];
    for (Eigen::Index t = 0; t < r.confusion.cols(); ++t) out << ',' << r.confusion(p, t);
    out << ',' << r.confusion.row(p).sum() << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing report CSV");
}

}  // namespace srf::harness
