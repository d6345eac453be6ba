// Per-utterance identity vectors: the trainable x-vector network, the
// gammatonegram statistics branch, ingested face embeddings, and the
// synthetic multimodal dataset generator used for desk-scale evaluation.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "fusebio/frontend.hpp"
#include "fusebio/image.hpp"
#include "fusebio/net.hpp"

namespace fusebio {

enum class Modality { kVoiceXvec, kVoiceGtg, kFace };

struct Embedding {
  std::string utt_id;
  int speaker = -1;
  Modality modality = Modality::kFace;
  Eigen::VectorXd values;
};

struct VoiceNetSpec {
  int input_dim = 24;  // MFCC coefficients per frame
  std::array<int, 5> conv_channels = {64, 64, 64, 64, 128};
  std::array<int, 5> conv_kernels = {5, 3, 3, 1, 1};
  std::array<int, 5> conv_dilations = {1, 2, 3, 1, 1};
  int embedding_dim = 512;
  int n_classes = 0;
};

// conv x5 (ReLU between) -> stat pool -> dense(embedding_dim) -> ReLU ->
// dense(512) -> ReLU -> dense(n_classes) -> softmax
Network build_voicenet(const VoiceNetSpec& spec, std::uint64_t seed);

// Pre-activation output of the first dense layer after the pooling layer.
Eigen::VectorXd extract_xvector(const Network& net, const FrameMatrix& frames);

// Per-channel mean and population std of the dB values; length 2*n_channels.
Eigen::VectorXd gtg_stats_vector(const Gammatonegram& gtg);

SoftmaxClassifier train_gtg_classifier(const std::vector<Eigen::VectorXd>& stats,
                                       const std::vector<int>& labels, int n_classes,
                                       const TrainConfig& cfg);

// Pre-softmax logits; length equals the class count the model was trained on.
Eigen::VectorXd extract_gtg_embedding(const SoftmaxClassifier& model,
                                      const Eigen::VectorXd& stats);

// magic "FBEM", u32 dim, f32[dim], little-endian
void save_face_embedding(const std::string& path, const Eigen::VectorXd& values);
Embedding load_face_embedding(const std::string& path);

struct SynthConfig {
  int n_classes = 10;
  int n_utt_per_class = 30;
  int dim_voice = 512;
  int dim_face = 512;
  double class_sep = 3.0;        // spacing of class means
  double noise_voice = 1.0;
  double noise_face = 1.0;
  double cross_modal_corr = 0.0; // fraction of noise shared between modalities
  std::uint64_t seed = 0;
  // rendered audio
  int wav_sample_rate = 8000;
  double wav_duration_s = 1.0;
  double wav_noise = 0.05;
  int n_tones = 3;

  void validate() const;  // throws InvalidConfig
};

struct SynthUtterance {
  std::string utt_id;
  std::string speaker_id;
  int speaker = 0;
  Eigen::VectorXd voice;
  Eigen::VectorXd face;
  GrayImage face_image;  // 32x32 heatmap of the face vector
};

struct SynthDataset {
  std::vector<SynthUtterance> utterances;
  int n_classes = 0;
};

SynthDataset synth_generate(const SynthConfig& cfg);

// Deterministic rendering of a vector as a grayscale heatmap, min-max
// normalized per image (uniform vectors map to 128).
GrayImage render_face_heatmap(const Eigen::VectorXd& values, int width = 32, int height = 32);

// Tone frequencies identifying one synthetic class, in Hz.
std::vector<double> synth_class_tones(const SynthConfig& cfg, int cls);

// Multi-tone utterance for (class, utterance index), deterministic in the
// config seed, with leading/trailing silence so the VAD has work to do.
AudioClip synth_wav(const SynthConfig& cfg, int cls, int utt_index);

struct ManifestRow {
  std::string utt_id;
  std::string speaker_id;
  std::string wav_path;       // relative to the manifest
  std::string face_emb_path;  // relative to the manifest
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::string base_dir;

  std::string resolve(const std::string& relative) const;
};

// CSV with header utt_id,speaker_id,wav_path,face_emb_path
Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

// Class index per row; speaker ids are ordered lexicographically.
std::vector<int> speaker_class_indices(const Manifest& manifest, int* n_classes = nullptr);

}  // namespace fusebio
