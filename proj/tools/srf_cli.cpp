#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "srf/error.hpp"
#include "srf/harness.hpp"
#include "srf/image_io.hpp"
#include "srf/online.hpp"

namespace fs = std::filesystem;
using namespace srf;

namespace {

struct SrfOptions {
  SrfConfig config;
  double lambda_rel = kDefaultLambdaRel;
};

void add_srf_options(CLI::App* app, SrfOptions& o) {
  app->add_option("--resample-h", o.config.resample_h, "Rows of the resampled distance matrix")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--resample-w", o.config.resample_w, "Columns of the resampled distance matrix")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--n-rho", o.config.n_rho, "Radial bins")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--n-theta", o.config.n_theta, "Angles over [0, pi)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--samples-per-ray", o.config.samples_per_ray,
                  "Samples along each ray (default 2 * max(resample-h, resample-w))")
      ->check(CLI::PositiveNumber);
  app->add_option("--min-t", o.config.min_t, "Frames needed before the first footprint")
      ->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--lambda-rel", o.lambda_rel, "Relative covariance ridge")->capture_default_str();
}

struct TrainOptions {
  cnn::TrainConfig config;
  std::string optimizer = "adam";
  bool augment_mid = false;
};

void add_train_options(CLI::App* app, TrainOptions& o) {
  app->add_option("--seed", o.config.seed, "Random seed")->required();
  app->add_option("--lr", o.config.learning_rate, "Learning rate")->capture_default_str();
  app->add_option("--epochs", o.config.epochs, "Training epochs")->capture_default_str();
  app->add_option("--batch-size", o.config.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--optimizer", o.optimizer, "adam or sgd")
      ->capture_default_str()->check(CLI::IsMember({"adam", "sgd"}));
  app->add_option("--momentum", o.config.momentum, "SGD momentum")->capture_default_str();
  app->add_flag("--augment-mid", o.augment_mid, "Also train on the footprint at the middle frame");
}

cnn::TrainConfig train_config(const TrainOptions& o) {
  cnn::TrainConfig c = o.config;
  c.optimizer = o.optimizer == "sgd" ? cnn::Optimizer::SgdMomentum : cnn::Optimizer::Adam;
  return c;
}

std::vector<ActionSequence> read_dataset(const std::string& path) {
  if (path == "-") return read_jsonl(std::cin);
  return read_jsonl_file(path);
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  return out;
}

std::string sequence_stem(const ActionSequence& seq) {
  std::string stem = "a" + std::to_string(seq.label() + 1) + "_" + seq.subject_id() + "_" + seq.trial_id();
  for (char& c : stem) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  }
  return stem;
}

void write_sinogram(const fs::path& stem, const Sinogram& s, const std::string& format) {
  if (format == "pgm" || format == "both") {
    auto out = open_out(fs::path(stem).concat(".pgm"), true);
    export_sinogram_pgm(out, s);
  }
  if (format == "csv" || format == "both") {
    auto out = open_out(fs::path(stem).concat(".csv"));
    export_sinogram_csv(out, s);
  }
}

// Footprint after `t` frames, or after the whole sequence.
Sinogram footprint(const ActionSequence& seq, std::optional<Eigen::Index> t, const SrfOptions& o) {
  const MahalanobisMatrix m = build_mahalanobis_matrix(seq, o.lambda_rel);
  const Eigen::Index rows = t.value_or(m.rows());
  if (rows > m.rows()) {
    throw Error(ErrorCode::InvalidConfig, "t = " + std::to_string(rows) + " exceeds the " +
                                              std::to_string(m.rows()) + " frames of the sequence");
  }
  return srf::srf(m.prefix(rows), o.config);
}

void print_report_summary(std::ostream& out, const harness::EvalReport& r) {
  for (const auto& [subject, accuracy] : r.fold_accuracy) {
    out << "fold " << subject << ": " << format_double(accuracy) << '\n';
  }
  out << "mean accuracy: " << format_double(r.mean_accuracy) << '\n';
}

int run_classify(const std::string& model_path, const SrfOptions& o, const std::string& trace_path) {
  std::ifstream in(model_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + model_path);
  const cnn::Model model = cnn::load_model(in);
  o.config.validate();
  const auto& input = model.architecture.input;
  if (input.height != o.config.n_rho || input.width != o.config.n_theta) {
    throw Error(ErrorCode::ShapeMismatch, "model expects " + std::to_string(input.height) + "x" +
                                              std::to_string(input.width) + " footprints, options give " +
                                              std::to_string(o.config.n_rho) + "x" +
                                              std::to_string(o.config.n_theta));
  }

  std::optional<online::StreamClassifier> stream;
  std::optional<FrameRecord> first;
  std::size_t dim = 0;
  std::string text;
  std::size_t line = 0;
  while (std::getline(std::cin, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    FrameRecord rec = parse_frame_record(text, line);
    if (!first) {
      first = rec;
      dim = rec.frame.joints.empty() ? 0 : rec.frame.joints.front().size();
      if (rec.frame.joints.size() < static_cast<std::size_t>(kMinJoints)) {
        throw ParseError(ErrorCode::TooFewJoints, line, std::to_string(rec.frame.joints.size()) + " joints");
      }
      stream.emplace(model, o.config, static_cast<Eigen::Index>(rec.frame.joints.size()), o.lambda_rel);
    } else if (rec.subject_id != first->subject_id || rec.label != first->label ||
               rec.trial_id != first->trial_id) {
      throw ParseError(ErrorCode::MalformedRecord, line, "classify reads a single sequence per run");
    }
    const auto expected = static_cast<std::int64_t>(stream->state().rows());
    if (rec.frame.frame_index != expected) {
      throw ParseError(ErrorCode::NonConsecutiveFrames, line,
                       "expected frame " + std::to_string(expected) + ", got " +
                           std::to_string(rec.frame.frame_index));
    }
    SkeletonFrame frame;
    try {
      frame = validate_frame(rec.frame, static_cast<std::size_t>(stream->state().joint_count()), dim);
    } catch (const Error& e) {
      throw ParseError(e.code(), line, e.what());
    }
    const auto confidences = stream->push(frame);
    if (!confidences) continue;
    const auto& decision = stream->tracker().log().back();
    nlohmann::ordered_json j{{"t", decision.t},
                     {"class", decision.predicted},
                     {"confidences", std::vector<double>(confidences->data(), confidences->data() + confidences->size())}};
    std::cout << j.dump() << '\n' << std::flush;
  }
  if (std::cin.bad()) throw Error(ErrorCode::Io, "failed reading standard input");
  if (!stream) throw Error(ErrorCode::TooFewFrames, "no frames on standard input");

  const auto& tracker = stream->tracker();
  if (!trace_path.empty()) {
    auto out = open_out(trace_path);
    online::export_confidence_trace(out, tracker);
  }
  const auto decision = online::final_decision(tracker);
  std::cerr << "final decision: class " << decision.label << " (" << model.labels.name(decision.label)
            << "), confidence " << format_double(decision.confidence) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton action recognition from Radon footprints of per-frame Mahalanobis distances"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic skeleton dataset as JSONL");
  SynthSpec spec;
  int subjects = 5, trials = 5, frames = 40;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "-";
  synth->add_option("--classes", spec.classes, "Action classes")->capture_default_str();
  synth->add_option("--joints", spec.joints, "Joints per skeleton")->capture_default_str();
  synth->add_option("--active-joints", spec.active_joints, "Joints moved by each class")->capture_default_str();
  synth->add_option("--posture-offset", spec.posture_offset, "Class posture displacement")->capture_default_str();
  synth->add_option("--motion-amplitude", spec.motion_amplitude, "Class motion amplitude")->capture_default_str();
  synth->add_option("--noise", spec.noise, "Per-coordinate noise")->capture_default_str();
  synth->add_option("--subjects", subjects, "Subjects")->capture_default_str();
  synth->add_option("--trials", trials, "Trials per subject and class")->capture_default_str();
  synth->add_option("--frames", frames, "Frames per sequence")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("-o,--output", synth_out, "Output JSONL, - for stdout")->capture_default_str();

  // encode
  auto* encode = app.add_subcommand("encode", "Write the footprint of every sequence as PGM/CSV");
  std::string encode_in, encode_dir, encode_format = "pgm";
  std::optional<Eigen::Index> encode_t;
  bool encode_matrix = false;
  SrfOptions encode_srf;
  encode->add_option("-i,--input", encode_in, "Input JSONL, - for stdin")->required();
  encode->add_option("--out-dir", encode_dir, "Output directory")->required();
  encode->add_option("--format", encode_format, "pgm, csv or both")
      ->capture_default_str()->check(CLI::IsMember({"pgm", "csv", "both"}));
  encode->add_option("--t", encode_t, "Frames to encode (default: all)")->check(CLI::PositiveNumber);
  encode->add_flag("--matrix", encode_matrix, "Also write the distance matrix");
  add_srf_options(encode, encode_srf);

  // train
  auto* train = app.add_subcommand("train", "Train a classifier on final-frame footprints");
  std::string train_in, model_out, history_out;
  SrfOptions train_srf;
  TrainOptions train_opts;
  train->add_option("-i,--input", train_in, "Input JSONL, - for stdin")->required();
  train->add_option("-m,--model", model_out, "Output model file")->required();
  train->add_option("--history", history_out, "Per-epoch history CSV");
  add_srf_options(train, train_srf);
  add_train_options(train, train_opts);

  // eval-lopo
  auto* eval = app.add_subcommand("eval-lopo", "Leave-one-person-out evaluation");
  std::string eval_in, eval_json, eval_csv;
  SrfOptions eval_srf;
  TrainOptions eval_opts;
  eval->add_option("-i,--input", eval_in, "Input JSONL, - for stdin")->required();
  eval->add_option("--json", eval_json, "Report JSON (default: stdout)");
  eval->add_option("--csv", eval_csv, "Confusion matrix CSV");
  add_srf_options(eval, eval_srf);
  add_train_options(eval, eval_opts);

  // classify
  auto* classify = app.add_subcommand("classify", "Classify one JSONL sequence from stdin, frame by frame");
  std::string classify_model, trace_out;
  SrfOptions classify_srf;
  classify->add_option("-m,--model", classify_model, "Model file")->required();
  classify->add_option("--trace", trace_out, "Confidence trace CSV");
  add_srf_options(classify, classify_srf);

  // export-srf
  auto* exp = app.add_subcommand("export-srf", "Write one sequence's footprint at frame t as PGM");
  std::string exp_in, exp_subject, exp_trial, exp_out, exp_csv;
  std::optional<int> exp_action;
  std::optional<Eigen::Index> exp_t;
  SrfOptions exp_srf;
  exp->add_option("-i,--input", exp_in, "Input JSONL, - for stdin")->required();
  exp->add_option("--subject", exp_subject, "Subject id")->required();
  exp->add_option("--trial", exp_trial, "Trial id")->required();
  exp->add_option("--action", exp_action, "Action index, when subject and trial are ambiguous");
  exp->add_option("--t", exp_t, "Frames to encode (default: all)")->check(CLI::PositiveNumber);
  exp->add_option("-o,--output", exp_out, "Output PGM")->required();
  exp->add_option("--csv", exp_csv, "Also write the sinogram as CSV");
  add_srf_options(exp, exp_srf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      const auto data = synth_generate(spec, subjects, trials, frames, synth_seed);
      if (synth_out == "-") {
        write_jsonl(std::cout, data);
      } else {
        write_jsonl_file(synth_out, data);
      }
      std::cerr << data.size() << " sequences\n";
    } else if (*encode) {
      encode_srf.config.validate();
      const auto data = read_dataset(encode_in);
      std::error_code ec;
      fs::create_directories(encode_dir, ec);
      if (ec) throw Error(ErrorCode::Io, "cannot create " + encode_dir + ": " + ec.message());
      for (const auto& seq : data) {
        const fs::path stem = fs::path(encode_dir) / sequence_stem(seq);
        write_sinogram(stem, footprint(seq, encode_t, encode_srf), encode_format);
        if (encode_matrix) {
          const auto m = build_mahalanobis_matrix(seq, encode_srf.lambda_rel);
          auto csv = open_out(fs::path(stem).concat("_matrix.csv"));
          write_matrix_csv(csv, m);
          auto pgm = open_out(fs::path(stem).concat("_matrix.pgm"), true);
          write_matrix_pgm(pgm, m);
        }
      }
      std::cerr << data.size() << " sequences encoded into " << encode_dir << '\n';
    } else if (*train) {
      const auto data = read_dataset(train_in);
      const harness::EvalOptions options{train_srf.lambda_rel, train_opts.augment_mid};
      train_srf.config.validate();
      const auto samples = harness::encode_final_frames(data, train_srf.config, options);
      const auto result = cnn::train(samples, harness::label_set_for(data), train_config(train_opts));
      auto out = open_out(model_out, true);
      cnn::save_model(out, result.model);
      if (!history_out.empty()) {
        auto h = open_out(history_out);
        cnn::write_history_csv(h, result.history);
      }
      std::cerr << "trained on " << samples.size() << " footprints, final accuracy "
                << format_double(result.history.back().train_accuracy) << '\n';
    } else if (*eval) {
      const auto data = read_dataset(eval_in);
      const harness::EvalOptions options{eval_srf.lambda_rel, eval_opts.augment_mid};
      const auto report = harness::run_lopo(data, eval_srf.config, train_config(eval_opts), options);
      if (eval_json.empty()) {
        harness::write_report_json(std::cout, report);
      } else {
        auto out = open_out(eval_json);
        harness::write_report_json(out, report);
      }
      if (!eval_csv.empty()) {
        auto out = open_out(eval_csv);
        harness::write_report_csv(out, report);
      }
      print_report_summary(std::cerr, report);
    } else if (*classify) {
      return run_classify(classify_model, classify_srf, trace_out);
    } else if (*exp) {
      exp_srf.config.validate();
      const auto data = read_dataset(exp_in);
      const ActionSequence* match = nullptr;
      for (const auto& seq : data) {
        if (seq.subject_id() != exp_subject || seq.trial_id() != exp_trial) continue;
        if (exp_action && seq.label() != *exp_action) continue;
        if (match) throw Error(ErrorCode::InvalidConfig, "several sequences match; pass --action");
        match = &seq;
      }
      if (!match) throw Error(ErrorCode::InvalidConfig, "no sequence matches the subject and trial");
      const Sinogram s = footprint(*match, exp_t, exp_srf);
      auto out = open_out(exp_out, true);
      export_sinogram_pgm(out, s);
      if (!exp_csv.empty()) {
        auto csv = open_out(exp_csv);
        export_sinogram_csv(csv, s);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
