// Experiment harness: stratified K-fold splitting, identification metrics,
// and the drivers that run each fusion mode end to end and render the
// fold-by-fold report tables.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fusebio/embeddings.hpp"
#include "fusebio/frontend.hpp"
#include "fusebio/fusion.hpp"
#include "fusebio/verification.hpp"

namespace fusebio {

struct FoldSplit {
  int k = 0;
  std::vector<int> fold;  // fold index per utterance, aligned with the input

  std::vector<std::size_t> test_indices(int f) const;
  std::vector<std::size_t> train_indices(int f) const;
};

// Per-speaker stratified round-robin after a seeded shuffle; every speaker
// needs at least K utterances so each fold sees every class.
FoldSplit kfold_split(const std::vector<int>& speakers, int k, std::uint64_t seed);

struct ConfusionMatrix {
  Eigen::MatrixXi counts;  // rows = truth, cols = prediction

  long total() const { return counts.sum(); }
  long trace() const { return counts.diagonal().sum(); }
};

ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                 const std::vector<int>& truths, int n_classes);

struct MetricsReport {
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f_measure = 0.0;
  double accuracy = 0.0;  // percent
};

// Macro-averaged over classes; accuracy = 100 * trace / total.
MetricsReport metrics_from_confusion(const ConfusionMatrix& m);

enum class IdMode { kFace, kVoiceXvec, kVoiceGtg, kSensor, kFeatureXvec, kFeatureGtg, kScore };
enum class VerifyMode { kFace, kVoice, kFeatureGtg, kFeatureXvec };

std::string id_mode_name(IdMode mode);
std::string verify_mode_name(VerifyMode mode);
IdMode id_mode_from_string(const std::string& name);
VerifyMode verify_mode_from_string(const std::string& name);

struct EvalOptions {
  FrontendConfig frontend;
  VoiceNetSpec voicenet;     // n_classes filled in by the driver
  TrainConfig voice_train;
  TrainConfig fusion_train{.epochs = 60, .batch_size = 128, .lr_start = 0.5, .lr_end = 0.01};
  BackendConfig backend;
  int k = 3;
  std::uint64_t seed = 42;
  int sensor_downsample = 16;
  bool sensor_augment = true;
  int trials_per_fold = 400;
};

// Featurized dataset; only the fields a mode needs are populated.
struct EvalUtterance {
  std::string utt_id;
  std::string speaker_id;
  int speaker = -1;
  FrameMatrix mfcc;
  Eigen::VectorXd gtg_stats;
  GrayImage gtg_image;
  Eigen::VectorXd face;
  GrayImage face_image;
};

struct EvalDataset {
  std::vector<EvalUtterance> utts;
  int n_classes = 0;

  std::vector<int> speakers() const;
};

struct FeatureNeeds {
  bool mfcc = false;
  bool gtg_stats = false;
  bool gtg_image = false;
  bool face = false;
  bool face_image = false;
};

FeatureNeeds needs_for(IdMode mode);
FeatureNeeds needs_for(VerifyMode mode);

EvalDataset load_eval_dataset(const Manifest& manifest, const FrontendConfig& frontend,
                              const FeatureNeeds& needs);

struct IdExperimentReport {
  IdMode mode = IdMode::kFace;
  int k = 0;
  std::vector<MetricsReport> folds;
  MetricsReport average;
};

struct VerifyExperimentReport {
  VerifyMode mode = VerifyMode::kFace;
  int k = 0;
  std::vector<double> fold_eer_percent;
  double average_eer_percent = 0.0;
};

// Per fold: train the mode's pipeline on the other folds, classify the held
// out fold. Averages are unweighted means over folds.
IdExperimentReport run_identification_experiment(const EvalDataset& data, IdMode mode,
                                                 const EvalOptions& opts);

// Per fold: fit WCCN/LDA/GPLDA on the training side, score a seeded balanced
// trial list on the held-out fold, report the EER.
VerifyExperimentReport run_verification_experiment(const EvalDataset& data, VerifyMode mode,
                                                   const EvalOptions& opts);

// Balanced genuine/impostor pairs drawn from the given utterances.
std::vector<Trial> build_trial_list(const std::vector<std::string>& utt_ids,
                                    const std::vector<int>& speakers, int n_trials,
                                    std::uint64_t seed);

// Classifier trained on z-scored inputs with the normalization folded back
// into the weights, so the returned model operates on raw vectors.
SoftmaxClassifier train_standardized_classifier(const std::vector<Eigen::VectorXd>& all,
                                                const std::vector<std::size_t>& train_idx,
                                                const std::vector<int>& labels, int n_classes,
                                                const TrainConfig& cfg);

// Fusion vectors for a feature/score mode, with the per-modality extractors
// trained on train_idx only.
std::vector<FusionVector> compute_fusion_vectors(const EvalDataset& data, IdMode mode,
                                                 const std::vector<std::size_t>& train_idx,
                                                 const EvalOptions& opts);

// Block-mean composite pixels for the sensor mode, one vector per utterance.
std::vector<Eigen::VectorXd> compute_sensor_features(const EvalDataset& data,
                                                     const EvalOptions& opts);

std::string render_id_report_markdown(const IdExperimentReport& report);
std::string render_id_report_csv(const IdExperimentReport& report);
std::string render_verify_report_markdown(const VerifyExperimentReport& report);
std::string render_verify_report_csv(const VerifyExperimentReport& report);

}  // namespace fusebio
