#include "fusebio/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

namespace fusebio {

namespace {

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

// per-dimension z-scoring statistics over the training side of a fold
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  void fit(const std::vector<Eigen::VectorXd>& all, const std::vector<std::size_t>& train_idx) {
    const Eigen::Index d = all.front().size();
    mean = Eigen::VectorXd::Zero(d);
    for (std::size_t i : train_idx) mean += all[i];
    mean /= static_cast<double>(train_idx.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (std::size_t i : train_idx) var += (all[i] - mean).cwiseAbs2();
    var /= static_cast<double>(train_idx.size());
    scale.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      scale(j) = var(j) > 1e-12 ? 1.0 / std::sqrt(var(j)) : 1.0;
    }
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return ((x - mean).array() * scale.array()).matrix();
  }
};

Embedding wrap_embedding(const EvalUtterance& u, Modality m, Eigen::VectorXd values) {
  Embedding e;
  e.utt_id = u.utt_id;
  e.speaker = u.speaker;
  e.modality = m;
  e.values = std::move(values);
  return e;
}

MetricsReport average_metrics(const std::vector<MetricsReport>& folds) {
  MetricsReport avg;
  for (const MetricsReport& m : folds) {
    avg.precision += m.precision;
    avg.sensitivity += m.sensitivity;
    avg.specificity += m.specificity;
    avg.f_measure += m.f_measure;
    avg.accuracy += m.accuracy;
  }
  const double n = static_cast<double>(folds.size());
  avg.precision /= n;
  avg.sensitivity /= n;
  avg.specificity /= n;
  avg.f_measure /= n;
  avg.accuracy /= n;
  return avg;
}

Network train_fold_voicenet(const EvalDataset& data, const EvalOptions& opts,
                            const std::vector<std::size_t>& train_idx, std::uint64_t fold_salt) {
  VoiceNetSpec spec = opts.voicenet;
  spec.input_dim = static_cast<int>(data.utts.front().mfcc.n_coeffs());
  spec.n_classes = data.n_classes;
  Network net = build_voicenet(spec, mix_seed(opts.seed, fold_salt));
  std::vector<TrainSample> samples;
  samples.reserve(train_idx.size());
  for (std::size_t i : train_idx) {
    samples.push_back({Signal(data.utts[i].mfcc.values), data.utts[i].speaker});
  }
  TrainConfig cfg = opts.voice_train;
  cfg.seed = mix_seed(opts.seed, fold_salt + 1);
  train(net, samples, cfg);
  return net;
}

// augmented copies of the training composites, appended to the train inputs
void append_sensor_augmentations(const EvalDataset& data, const EvalOptions& opts,
                                 const std::vector<std::size_t>& train_idx, std::uint64_t seed,
                                 std::vector<Eigen::VectorXd>& inputs, std::vector<int>& labels) {
  Rng rng(seed);
  for (std::size_t i : train_idx) {
    const Augmentation a = sample_augmentation(rng);
    CompositeImage comp = build_composite_image(
        data.utts[i].face_image, data.utts[i].gtg_image, CompositeLayout::kFaceLeft, 224, 224);
    comp.image = augment_image(comp.image, a.rotation_deg, a.dx, a.dy);
    inputs.push_back(sensor_fusion_features(comp, opts.sensor_downsample));
    labels.push_back(data.utts[i].speaker);
  }
}

}  // namespace

std::vector<std::size_t> FoldSplit::test_indices(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldSplit::train_indices(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != f) out.push_back(i);
  }
  return out;
}

FoldSplit kfold_split(const std::vector<int>& speakers, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidRange("need K >= 2");
  if (speakers.empty()) throw EmptyDataset("no utterances to split");

  std::map<int, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < speakers.size(); ++i) by_speaker[speakers[i]].push_back(i);

  FoldSplit split;
  split.k = k;
  split.fold.assign(speakers.size(), -1);
  for (auto& [label, positions] : by_speaker) {
    if (static_cast<int>(positions.size()) < k) {
      throw InsufficientUtterances("speaker " + std::to_string(label) + " has fewer than " +
                                   std::to_string(k) + " utterances");
    }
    Rng rng(mix_seed(seed, 0x666f6c64ULL + static_cast<std::uint64_t>(label)));
    rng.shuffle(positions);
    const int offset = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(k)));
    for (std::size_t i = 0; i < positions.size(); ++i) {
      split.fold[positions[i]] = (static_cast<int>(i) + offset) % k;
    }
  }
  return split;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                 const std::vector<int>& truths, int n_classes) {
  if (predictions.size() != truths.size()) throw DimMismatch("predictions/truths size mismatch");
  ConfusionMatrix m;
  m.counts = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (truths[i] < 0 || truths[i] >= n_classes || predictions[i] < 0 ||
        predictions[i] >= n_classes) {
      throw LabelOutOfRange("label outside [0, C)");
    }
    m.counts(truths[i], predictions[i]) += 1;
  }
  return m;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& m) {
  const long total = m.total();
  if (total <= 0) throw EmptyMatrix("confusion matrix has no entries");
  const int c = static_cast<int>(m.counts.rows());

  MetricsReport r;
  bool warned = false;
  for (int i = 0; i < c; ++i) {
    const double tp = m.counts(i, i);
    const double fn = m.counts.row(i).sum() - tp;
    const double fp = m.counts.col(i).sum() - tp;
    const double tn = static_cast<double>(total) - tp - fn - fp;
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double sensitivity = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    double specificity = 0.0;
    if (tn + fp > 0) {
      specificity = tn / (tn + fp);
    } else if (!warned) {
      std::fprintf(stderr, "warning: specificity undefined (single class), reporting 0\n");
      warned = true;
    }
    const double f1 =
        precision + sensitivity > 0 ? 2.0 * precision * sensitivity / (precision + sensitivity)
                                    : 0.0;
    r.precision += precision;
    r.sensitivity += sensitivity;
    r.specificity += specificity;
    r.f_measure += f1;
  }
  r.precision /= c;
  r.sensitivity /= c;
  r.specificity /= c;
  r.f_measure /= c;
  r.accuracy = 100.0 * static_cast<double>(m.trace()) / static_cast<double>(total);
  return r;
}

std::string id_mode_name(IdMode mode) {
  switch (mode) {
    case IdMode::kFace: return "face";
    case IdMode::kVoiceXvec: return "voice_xvec";
    case IdMode::kVoiceGtg: return "voice_gtg";
    case IdMode::kSensor: return "sensor";
    case IdMode::kFeatureXvec: return "feature_xvec";
    case IdMode::kFeatureGtg: return "feature_gtg";
    case IdMode::kScore: return "score";
  }
  return "unknown";
}

std::string verify_mode_name(VerifyMode mode) {
  switch (mode) {
    case VerifyMode::kFace: return "face";
    case VerifyMode::kVoice: return "voice";
    case VerifyMode::kFeatureGtg: return "feature_gtg";
    case VerifyMode::kFeatureXvec: return "feature_xvec";
  }
  return "unknown";
}

IdMode id_mode_from_string(const std::string& name) {
  for (IdMode m : {IdMode::kFace, IdMode::kVoiceXvec, IdMode::kVoiceGtg, IdMode::kSensor,
                   IdMode::kFeatureXvec, IdMode::kFeatureGtg, IdMode::kScore}) {
    if (id_mode_name(m) == name) return m;
  }
  throw ConfigError("unknown identification mode: " + name);
}

VerifyMode verify_mode_from_string(const std::string& name) {
  for (VerifyMode m :
       {VerifyMode::kFace, VerifyMode::kVoice, VerifyMode::kFeatureGtg, VerifyMode::kFeatureXvec}) {
    if (verify_mode_name(m) == name) return m;
  }
  throw ConfigError("unknown verification mode: " + name);
}

std::vector<int> EvalDataset::speakers() const {
  std::vector<int> out;
  out.reserve(utts.size());
  for (const EvalUtterance& u : utts) out.push_back(u.speaker);
  return out;
}

FeatureNeeds needs_for(IdMode mode) {
  FeatureNeeds n;
  switch (mode) {
    case IdMode::kFace:
      n.face = true;
      break;
    case IdMode::kVoiceXvec:
      n.mfcc = true;
      break;
    case IdMode::kVoiceGtg:
      n.gtg_stats = true;
      break;
    case IdMode::kSensor:
      n.face = true;
      n.face_image = true;
      n.gtg_image = true;
      break;
    case IdMode::kFeatureXvec:
      n.mfcc = true;
      n.face = true;
      break;
    case IdMode::kFeatureGtg:
      n.gtg_stats = true;
      n.face = true;
      break;
    case IdMode::kScore:
      n.gtg_stats = true;
      n.face = true;
      break;
  }
  return n;
}

FeatureNeeds needs_for(VerifyMode mode) {
  FeatureNeeds n;
  switch (mode) {
    case VerifyMode::kFace:
      n.face = true;
      break;
    case VerifyMode::kVoice:
      n.mfcc = true;
      break;
    case VerifyMode::kFeatureGtg:
      n.gtg_stats = true;
      n.face = true;
      break;
    case VerifyMode::kFeatureXvec:
      n.mfcc = true;
      n.face = true;
      break;
  }
  return n;
}

EvalDataset load_eval_dataset(const Manifest& manifest, const FrontendConfig& frontend,
                              const FeatureNeeds& needs) {
  EvalDataset data;
  std::vector<int> classes = speaker_class_indices(manifest, &data.n_classes);
  data.utts.resize(manifest.rows.size());

  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const ManifestRow& row = manifest.rows[i];
    EvalUtterance& u = data.utts[i];
    u.utt_id = row.utt_id;
    u.speaker_id = row.speaker_id;
    u.speaker = classes[i];

    if (needs.mfcc || needs.gtg_stats || needs.gtg_image) {
      const AudioClip clip = apply_vad(load_wav(manifest.resolve(row.wav_path)), frontend);
      if (needs.mfcc) u.mfcc = apply_cmvn(compute_mfcc(clip, frontend));
      if (needs.gtg_stats || needs.gtg_image) {
        const Gammatonegram gtg = compute_gammatonegram(clip, frontend);
        if (needs.gtg_stats) u.gtg_stats = gtg_stats_vector(gtg);
        if (needs.gtg_image) u.gtg_image = render_gammatonegram_image(gtg, 128, 64);
      }
    }
    if (needs.face || needs.face_image) {
      const Embedding face = load_face_embedding(manifest.resolve(row.face_emb_path));
      if (needs.face && i > 0 && data.utts[0].face.size() > 0 &&
          face.values.size() != data.utts[0].face.size()) {
        throw DimMismatch("face embedding dims differ across the dataset");
      }
      if (needs.face) u.face = face.values;
      if (needs.face_image) u.face_image = render_face_heatmap(face.values, 32, 32);
    }
  }
  return data;
}

SoftmaxClassifier train_standardized_classifier(const std::vector<Eigen::VectorXd>& all,
                                                const std::vector<std::size_t>& train_idx,
                                                const std::vector<int>& labels, int n_classes,
                                                const TrainConfig& cfg) {
  Standardizer z;
  z.fit(all, train_idx);
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> train_labels;
  inputs.reserve(train_idx.size());
  for (std::size_t i : train_idx) {
    inputs.push_back(z.apply(all[i]));
    train_labels.push_back(labels[i]);
  }
  SoftmaxClassifier model = train_softmax_classifier(inputs, train_labels, n_classes, cfg);
  // fold the z-scoring into the affine map so the model takes raw inputs
  model.weight = model.weight * z.scale.asDiagonal();
  model.bias -= model.weight * z.mean;
  return model;
}

std::vector<Eigen::VectorXd> compute_sensor_features(const EvalDataset& data,
                                                     const EvalOptions& opts) {
  std::vector<Eigen::VectorXd> out(data.utts.size());
  for (std::size_t i = 0; i < data.utts.size(); ++i) {
    const CompositeImage comp = build_composite_image(
        data.utts[i].face_image, data.utts[i].gtg_image, CompositeLayout::kFaceLeft, 224, 224);
    out[i] = sensor_fusion_features(comp, opts.sensor_downsample);
  }
  return out;
}

std::vector<FusionVector> compute_fusion_vectors(const EvalDataset& data, IdMode mode,
                                                 const std::vector<std::size_t>& train_idx,
                                                 const EvalOptions& opts) {
  const std::vector<int> speakers = data.speakers();
  std::vector<FusionVector> fused(data.utts.size());
  switch (mode) {
    case IdMode::kFeatureXvec: {
      const Network net = train_fold_voicenet(data, opts, train_idx, 6);
      for (std::size_t i = 0; i < data.utts.size(); ++i) {
        fused[i] = concat_features(wrap_embedding(data.utts[i], Modality::kVoiceXvec,
                                                  extract_xvector(net, data.utts[i].mfcc)),
                                   wrap_embedding(data.utts[i], Modality::kFace,
                                                  data.utts[i].face));
      }
      break;
    }
    case IdMode::kFeatureGtg: {
      std::vector<Eigen::VectorXd> stats(data.utts.size());
      for (std::size_t i = 0; i < data.utts.size(); ++i) stats[i] = data.utts[i].gtg_stats;
      TrainConfig gtg_cfg = opts.fusion_train;
      gtg_cfg.seed = mix_seed(opts.seed, 3);
      const SoftmaxClassifier gtg =
          train_standardized_classifier(stats, train_idx, speakers, data.n_classes, gtg_cfg);
      for (std::size_t i = 0; i < data.utts.size(); ++i) {
        fused[i] = concat_features(
            wrap_embedding(data.utts[i], Modality::kVoiceGtg, gtg.logits(stats[i])),
            wrap_embedding(data.utts[i], Modality::kFace, data.utts[i].face));
      }
      break;
    }
    case IdMode::kScore: {
      std::vector<Eigen::VectorXd> voice_vecs(data.utts.size()), face_vecs(data.utts.size());
      for (std::size_t i = 0; i < data.utts.size(); ++i) {
        voice_vecs[i] = data.utts[i].gtg_stats;
        face_vecs[i] = data.utts[i].face;
      }
      TrainConfig voice_cfg = opts.fusion_train;
      voice_cfg.seed = mix_seed(opts.seed, 3);
      TrainConfig face_cfg = opts.fusion_train;
      face_cfg.seed = mix_seed(opts.seed, 4);
      const SoftmaxClassifier voice = train_standardized_classifier(
          voice_vecs, train_idx, speakers, data.n_classes, voice_cfg);
      const SoftmaxClassifier face =
          train_standardized_classifier(face_vecs, train_idx, speakers, data.n_classes, face_cfg);
      for (std::size_t i = 0; i < data.utts.size(); ++i) {
        fused[i] = concat_scores(voice.posterior(voice_vecs[i]), face.posterior(face_vecs[i]));
      }
      break;
    }
    default:
      throw ConfigError("mode has no fusion vectors: " + id_mode_name(mode));
  }
  return fused;
}

IdExperimentReport run_identification_experiment(const EvalDataset& data, IdMode mode,
                                                 const EvalOptions& opts) {
  if (data.utts.empty()) throw EmptyDataset("no utterances");
  const std::vector<int> speakers = data.speakers();
  const FoldSplit split = kfold_split(speakers, opts.k, opts.seed);

  std::vector<Eigen::VectorXd> sensor_feats;
  if (mode == IdMode::kSensor) sensor_feats = compute_sensor_features(data, opts);

  IdExperimentReport report;
  report.mode = mode;
  report.k = opts.k;

  for (int f = 0; f < opts.k; ++f) {
    const std::vector<std::size_t> train_idx = split.train_indices(f);
    const std::vector<std::size_t> test_idx = split.test_indices(f);
    const std::uint64_t fold_salt = 0x100ULL * static_cast<std::uint64_t>(f + 1);

    TrainConfig cls_cfg = opts.fusion_train;
    cls_cfg.seed = mix_seed(opts.seed, fold_salt + 2);
    EvalOptions fold_opts = opts;
    fold_opts.seed = mix_seed(opts.seed, fold_salt);

    std::vector<int> predictions;
    std::vector<int> truths;
    predictions.reserve(test_idx.size());
    for (std::size_t i : test_idx) truths.push_back(data.utts[i].speaker);

    switch (mode) {
      case IdMode::kFace:
      case IdMode::kVoiceGtg: {
        std::vector<Eigen::VectorXd> vecs(data.utts.size());
        for (std::size_t i = 0; i < data.utts.size(); ++i) {
          vecs[i] = mode == IdMode::kFace ? data.utts[i].face : data.utts[i].gtg_stats;
        }
        const SoftmaxClassifier c =
            train_standardized_classifier(vecs, train_idx, speakers, data.n_classes, cls_cfg);
        for (std::size_t i : test_idx) predictions.push_back(c.predict(vecs[i]));
        break;
      }
      case IdMode::kSensor: {
        std::vector<Eigen::VectorXd> inputs = sensor_feats;
        std::vector<int> labels = speakers;
        std::vector<std::size_t> fold_train = train_idx;
        if (opts.sensor_augment) {
          const std::size_t first_aug = inputs.size();
          append_sensor_augmentations(data, opts, train_idx, mix_seed(opts.seed, fold_salt + 5),
                                      inputs, labels);
          for (std::size_t i = first_aug; i < inputs.size(); ++i) fold_train.push_back(i);
        }
        const SoftmaxClassifier model =
            train_standardized_classifier(inputs, fold_train, labels, data.n_classes, cls_cfg);
        for (std::size_t i : test_idx) predictions.push_back(model.predict(sensor_feats[i]));
        break;
      }
      case IdMode::kVoiceXvec: {
        const Network net = train_fold_voicenet(data, opts, train_idx, fold_salt + 6);
        for (std::size_t i : test_idx) {
          predictions.push_back(predict_class(net, Signal(data.utts[i].mfcc.values)));
        }
        break;
      }
      case IdMode::kFeatureXvec:
      case IdMode::kFeatureGtg:
      case IdMode::kScore: {
        const std::vector<FusionVector> fused =
            compute_fusion_vectors(data, mode, train_idx, fold_opts);
        std::vector<Eigen::VectorXd> raw(fused.size());
        for (std::size_t i = 0; i < fused.size(); ++i) raw[i] = fused[i].values;
        const SoftmaxClassifier fusion =
            train_standardized_classifier(raw, train_idx, speakers, data.n_classes, cls_cfg);
        for (std::size_t i : test_idx) predictions.push_back(fusion.predict(raw[i]));
        break;
      }
    }

    report.folds.push_back(
        metrics_from_confusion(confusion_matrix(predictions, truths, data.n_classes)));
  }

  report.average = average_metrics(report.folds);
  return report;
}

std::vector<Trial> build_trial_list(const std::vector<std::string>& utt_ids,
                                    const std::vector<int>& speakers, int n_trials,
                                    std::uint64_t seed) {
  if (utt_ids.size() != speakers.size()) throw DimMismatch("utt_ids/speakers size mismatch");
  if (n_trials < 2) throw InvalidRange("need at least 2 trials");

  std::map<int, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < utt_ids.size(); ++i) by_speaker[speakers[i]].push_back(i);

  std::vector<int> genuine_eligible;
  for (const auto& [label, members] : by_speaker) {
    if (members.size() >= 2) genuine_eligible.push_back(label);
  }
  if (genuine_eligible.empty() || by_speaker.size() < 2) {
    throw EmptyPopulation("cannot build both genuine and impostor trials");
  }
  std::vector<int> all_speakers;
  for (const auto& [label, members] : by_speaker) all_speakers.push_back(label);

  Rng rng(seed);
  std::vector<Trial> trials;
  const int n_genuine = n_trials / 2;
  for (int t = 0; t < n_genuine; ++t) {
    const int spk = genuine_eligible[rng.uniform_index(genuine_eligible.size())];
    const std::vector<std::size_t>& members = by_speaker.at(spk);
    const std::size_t a = rng.uniform_index(members.size());
    std::size_t b = rng.uniform_index(members.size() - 1);
    if (b >= a) ++b;
    trials.push_back({utt_ids[members[a]], utt_ids[members[b]], true});
  }
  for (int t = 0; t < n_trials - n_genuine; ++t) {
    const std::size_t sa = rng.uniform_index(all_speakers.size());
    std::size_t sb = rng.uniform_index(all_speakers.size() - 1);
    if (sb >= sa) ++sb;
    const std::vector<std::size_t>& ma = by_speaker.at(all_speakers[sa]);
    const std::vector<std::size_t>& mb = by_speaker.at(all_speakers[sb]);
    trials.push_back({utt_ids[ma[rng.uniform_index(ma.size())]],
                      utt_ids[mb[rng.uniform_index(mb.size())]], false});
  }
  return trials;
}

VerifyExperimentReport run_verification_experiment(const EvalDataset& data, VerifyMode mode,
                                                   const EvalOptions& opts) {
  if (data.utts.empty()) throw EmptyDataset("no utterances");
  const std::vector<int> speakers = data.speakers();
  const FoldSplit split = kfold_split(speakers, opts.k, opts.seed);

  VerifyExperimentReport report;
  report.mode = mode;
  report.k = opts.k;

  for (int f = 0; f < opts.k; ++f) {
    const std::vector<std::size_t> train_idx = split.train_indices(f);
    const std::vector<std::size_t> test_idx = split.test_indices(f);
    const std::uint64_t fold_salt = 0x100ULL * static_cast<std::uint64_t>(f + 1);
    EvalOptions fold_opts = opts;
    fold_opts.seed = mix_seed(opts.seed, fold_salt);

    // per-utterance embeddings from this fold's extractors
    std::vector<Eigen::VectorXd> emb(data.utts.size());
    switch (mode) {
      case VerifyMode::kFace: {
        for (std::size_t i = 0; i < data.utts.size(); ++i) emb[i] = data.utts[i].face;
        break;
      }
      case VerifyMode::kVoice: {
        const Network net = train_fold_voicenet(data, opts, train_idx, fold_salt + 6);
        for (std::size_t i = 0; i < data.utts.size(); ++i) {
          emb[i] = extract_xvector(net, data.utts[i].mfcc);
        }
        break;
      }
      case VerifyMode::kFeatureXvec: {
        const std::vector<FusionVector> fused =
            compute_fusion_vectors(data, IdMode::kFeatureXvec, train_idx, fold_opts);
        for (std::size_t i = 0; i < data.utts.size(); ++i) emb[i] = fused[i].values;
        break;
      }
      case VerifyMode::kFeatureGtg: {
        const std::vector<FusionVector> fused =
            compute_fusion_vectors(data, IdMode::kFeatureGtg, train_idx, fold_opts);
        for (std::size_t i = 0; i < data.utts.size(); ++i) emb[i] = fused[i].values;
        break;
      }
    }

    std::vector<Eigen::VectorXd> train_emb;
    std::vector<int> train_labels;
    train_emb.reserve(train_idx.size());
    for (std::size_t i : train_idx) {
      train_emb.push_back(emb[i]);
      train_labels.push_back(speakers[i]);
    }
    VerificationBackend backend;
    backend.fit(train_emb, train_labels, opts.backend);

    std::vector<std::string> test_ids;
    std::vector<int> test_speakers;
    std::unordered_map<std::string, std::size_t> index_of;
    for (std::size_t i : test_idx) {
      test_ids.push_back(data.utts[i].utt_id);
      test_speakers.push_back(speakers[i]);
      index_of[data.utts[i].utt_id] = i;
    }
    const std::vector<Trial> trials = build_trial_list(
        test_ids, test_speakers, opts.trials_per_fold, mix_seed(opts.seed, fold_salt + 7));

    ScoreSet scores;
    for (const Trial& t : trials) {
      const double llr =
          backend.score(emb[index_of.at(t.enroll_utt)], emb[index_of.at(t.test_utt)]);
      (t.genuine ? scores.genuine : scores.impostor).push_back(llr);
    }
    report.fold_eer_percent.push_back(100.0 * compute_eer(scores).eer);
  }

  double sum = 0.0;
  for (double e : report.fold_eer_percent) sum += e;
  report.average_eer_percent = sum / static_cast<double>(report.fold_eer_percent.size());
  return report;
}

namespace {

struct ReferenceRow {
  const char* mode;
  const char* value;
};

// Published full-scale averages (VoxCeleb2 test split, 118 speakers); shown
// for layout and ordering context, not reproduced at synthetic scale.
constexpr ReferenceRow kIdReference[] = {
    {"face", "96.00"},         {"voice_xvec", "72.67"},  {"voice_gtg", "61.64"},
    {"sensor", "93.61"},       {"score", "96.24"},       {"feature_gtg", "98.37"},
    {"feature_xvec", "98.33"},
};

constexpr ReferenceRow kVerifyReference[] = {
    {"face", "1.01"},
    {"voice", "5.12"},
    {"feature_gtg", "0.82"},
    {"feature_xvec", "0.62"},
};

void append_fold_header(std::ostringstream& os, int k) {
  os << "| Metrics |";
  for (int f = 1; f <= k; ++f) os << " Fold " << f << " |";
  os << " Avg. |\n|---|";
  for (int f = 0; f <= k; ++f) os << "---:|";
  os << "\n";
}

}  // namespace

std::string render_id_report_markdown(const IdExperimentReport& report) {
  std::ostringstream os;
  os << "# Identification report: " << id_mode_name(report.mode) << "\n\n";
  append_fold_header(os, report.k);
  const auto row = [&](const char* name, double MetricsReport::*field, int decimals) {
    os << "| " << name << " |";
    for (const MetricsReport& m : report.folds) os << " " << fmt(m.*field, decimals) << " |";
    os << " **" << fmt(report.average.*field, decimals) << "** |\n";
  };
  row("Precision", &MetricsReport::precision, 2);
  row("Sensitivity", &MetricsReport::sensitivity, 2);
  row("Specificity", &MetricsReport::specificity, 2);
  row("F-measure", &MetricsReport::f_measure, 2);
  row("Accuracy(%)", &MetricsReport::accuracy, 2);
  os << "\nReference averages from the original full-scale study (118 speakers,\n"
        "VoxCeleb2 test split); context only, not reproduced at this scale:\n\n";
  os << "| Mode | Accuracy(%) |\n|---|---:|\n";
  for (const ReferenceRow& r : kIdReference) os << "| " << r.mode << " | " << r.value << " |\n";
  return os.str();
}

std::string render_id_report_csv(const IdExperimentReport& report) {
  std::ostringstream os;
  os << "metric,fold,value\n";
  const auto rows = [&](const char* name, double MetricsReport::*field, int decimals) {
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
      os << name << ',' << f + 1 << ',' << fmt(report.folds[f].*field, decimals) << '\n';
    }
    os << name << ",avg," << fmt(report.average.*field, decimals) << '\n';
  };
  rows("precision", &MetricsReport::precision, 4);
  rows("sensitivity", &MetricsReport::sensitivity, 4);
  rows("specificity", &MetricsReport::specificity, 4);
  rows("f_measure", &MetricsReport::f_measure, 4);
  rows("accuracy", &MetricsReport::accuracy, 2);
  return os.str();
}

std::string render_verify_report_markdown(const VerifyExperimentReport& report) {
  std::ostringstream os;
  os << "# Verification report: " << verify_mode_name(report.mode) << "\n\n";
  append_fold_header(os, report.k);
  os << "| EER(%) |";
  for (double e : report.fold_eer_percent) os << " " << fmt(e, 2) << " |";
  os << " **" << fmt(report.average_eer_percent, 2) << "** |\n";
  os << "\nReference averages from the original full-scale study (118 speakers,\n"
        "VoxCeleb2 test split); context only, not reproduced at this scale:\n\n";
  os << "| Mode | EER(%) |\n|---|---:|\n";
  for (const ReferenceRow& r : kVerifyReference) {
    os << "| " << r.mode << " | " << r.value << " |\n";
  }
  return os.str();
}

std::string render_verify_report_csv(const VerifyExperimentReport& report) {
  std::ostringstream os;
  os << "metric,fold,value\n";
  for (std::size_t f = 0; f < report.fold_eer_percent.size(); ++f) {
    os << "eer," << f + 1 << ',' << fmt(report.fold_eer_percent[f], 4) << '\n';
  }
  os << "eer,avg," << fmt(report.average_eer_percent, 4) << '\n';
  return os.str();
}

}  // namespace fusebio
