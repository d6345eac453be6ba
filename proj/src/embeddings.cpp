#include "fusebio/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fusebio {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Network build_voicenet(const VoiceNetSpec& spec, std::uint64_t seed) {
  if (spec.input_dim < 1 || spec.embedding_dim < 1 || spec.n_classes < 2) {
    throw InvalidSpec("voicenet needs input_dim >= 1, embedding_dim >= 1, n_classes >= 2");
  }
  for (int i = 0; i < 5; ++i) {
    if (spec.conv_channels[i] < 1 || spec.conv_kernels[i] < 1 || spec.conv_dilations[i] < 1) {
      throw InvalidSpec("bad conv spec");
    }
  }
  std::vector<LayerSpec> layers;
  int in_ch = spec.input_dim;
  for (int i = 0; i < 5; ++i) {
    layers.push_back(
        LayerSpec::conv1d(in_ch, spec.conv_channels[i], spec.conv_kernels[i],
                          spec.conv_dilations[i]));
    layers.push_back(LayerSpec::relu());
    in_ch = spec.conv_channels[i];
  }
  layers.push_back(LayerSpec::stat_pool());
  layers.push_back(LayerSpec::dense(2 * in_ch, spec.embedding_dim));
  layers.push_back(LayerSpec::relu());
  layers.push_back(LayerSpec::dense(spec.embedding_dim, 512));
  layers.push_back(LayerSpec::relu());
  layers.push_back(LayerSpec::dense(512, spec.n_classes));
  layers.push_back(LayerSpec::softmax());
  return make_network(std::move(layers), seed);
}

Eigen::VectorXd extract_xvector(const Network& net, const FrameMatrix& frames) {
  if (frames.n_frames() < net.receptive_field()) {
    throw TooShort("fewer frames than the receptive field");
  }
  std::size_t pool_index = net.layers.size();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].type == LayerType::kStatPool) {
      pool_index = i;
      break;
    }
  }
  if (pool_index == net.layers.size()) throw InvalidSpec("network has no pooling layer");
  std::size_t tap_index = net.layers.size();
  for (std::size_t i = pool_index + 1; i < net.layers.size(); ++i) {
    if (net.layers[i].type == LayerType::kDense) {
      tap_index = i;
      break;
    }
  }
  if (tap_index == net.layers.size()) throw InvalidSpec("no dense layer after the pool");

  const ActivationTrace trace = forward(net, Signal(frames.values));
  return as_vector(trace.activations[tap_index + 1]);
}

Eigen::VectorXd gtg_stats_vector(const Gammatonegram& gtg) {
  if (gtg.n_frames() < 1) throw TooShort("gammatonegram has no frames");
  return stat_pool(gtg.values.transpose());
}

SoftmaxClassifier train_gtg_classifier(const std::vector<Eigen::VectorXd>& stats,
                                       const std::vector<int>& labels, int n_classes,
                                       const TrainConfig& cfg) {
  if (n_classes < 2) throw InvalidSpec("need at least 2 classes");
  return train_softmax_classifier(stats, labels, n_classes, cfg);
}

Eigen::VectorXd extract_gtg_embedding(const SoftmaxClassifier& model,
                                      const Eigen::VectorXd& stats) {
  return model.logits(stats);
}

void save_face_embedding(const std::string& path, const Eigen::VectorXd& values) {
  if (values.size() < 1) throw InvalidConfig("refusing to write an empty embedding");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_magic(os, "FBEM");
  write_u32(os, static_cast<std::uint32_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    write_f32(os, static_cast<float>(values(i)));
  }
  if (!os) throw IoError("write failed: " + path);
}

Embedding load_face_embedding(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  expect_magic(is, "FBEM");
  const std::uint32_t dim = read_u32(is);
  if (dim == 0) throw CorruptFile("zero-dimensional embedding: " + path);
  Embedding e;
  e.modality = Modality::kFace;
  e.utt_id = std::filesystem::path(path).stem().string();
  e.values.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    e.values(static_cast<Eigen::Index>(i)) = read_f32(is);
  }
  if (!e.values.allFinite()) throw CorruptFile("non-finite embedding: " + path);
  return e;
}

void SynthConfig::validate() const {
  if (n_classes < 2 || n_utt_per_class < 1) throw InvalidConfig("need >= 2 classes, >= 1 utt");
  if (dim_voice < 2 || dim_face < 2) throw InvalidConfig("dims must be >= 2");
  if (!(noise_voice > 0.0) || !(noise_face > 0.0)) throw InvalidConfig("noise must be positive");
  if (cross_modal_corr < 0.0 || cross_modal_corr > 1.0) {
    throw InvalidConfig("cross_modal_corr must lie in [0, 1]");
  }
  if (wav_sample_rate < 1000 || !(wav_duration_s > 0.0) || n_tones < 1) {
    throw InvalidConfig("bad waveform settings");
  }
}

GrayImage render_face_heatmap(const Eigen::VectorXd& values, int width, int height) {
  if (values.size() < 1) throw EmptyVector("cannot render an empty vector");
  GrayImage img(width, height);
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (hi == lo) {
    std::fill(img.pixels.begin(), img.pixels.end(), std::uint8_t{128});
    return img;
  }
  const double scale = 255.0 / (hi - lo);
  const std::size_t n = static_cast<std::size_t>(values.size());
  const std::size_t total = static_cast<std::size_t>(width) * height;
  for (std::size_t p = 0; p < total; ++p) {
    const std::size_t src = p * n / total;
    const double v = (values(static_cast<Eigen::Index>(src)) - lo) * scale;
    img.pixels[p] = static_cast<std::uint8_t>(std::clamp(std::lrint(v), 0L, 255L));
  }
  return img;
}

SynthDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset ds;
  ds.n_classes = cfg.n_classes;

  Rng mean_rng(mix_seed(cfg.seed, 0x6d65616eULL));
  std::vector<Eigen::VectorXd> voice_means(cfg.n_classes), face_means(cfg.n_classes);
  for (int c = 0; c < cfg.n_classes; ++c) {
    voice_means[c].resize(cfg.dim_voice);
    for (Eigen::Index i = 0; i < cfg.dim_voice; ++i) {
      voice_means[c](i) = cfg.class_sep * mean_rng.normal();
    }
    face_means[c].resize(cfg.dim_face);
    for (Eigen::Index i = 0; i < cfg.dim_face; ++i) {
      face_means[c](i) = cfg.class_sep * mean_rng.normal();
    }
  }

  const double shared = std::sqrt(cfg.cross_modal_corr);
  const double own = std::sqrt(1.0 - cfg.cross_modal_corr);
  const int shared_dim = std::max(cfg.dim_voice, cfg.dim_face);

  Rng noise_rng(mix_seed(cfg.seed, 0x6e6f697365ULL));
  for (int c = 0; c < cfg.n_classes; ++c) {
    for (int u = 0; u < cfg.n_utt_per_class; ++u) {
      SynthUtterance utt;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "spk%03d", c);
      utt.speaker_id = buf;
      std::snprintf(buf, sizeof(buf), "spk%03d_utt%04d", c, u);
      utt.utt_id = buf;
      utt.speaker = c;

      Eigen::VectorXd shared_noise(shared_dim);
      for (int i = 0; i < shared_dim; ++i) shared_noise(i) = noise_rng.normal();

      utt.voice.resize(cfg.dim_voice);
      for (Eigen::Index i = 0; i < cfg.dim_voice; ++i) {
        utt.voice(i) = voice_means[c](i) +
                       cfg.noise_voice * (own * noise_rng.normal() + shared * shared_noise(i));
      }
      utt.face.resize(cfg.dim_face);
      for (Eigen::Index i = 0; i < cfg.dim_face; ++i) {
        utt.face(i) = face_means[c](i) +
                      cfg.noise_face * (own * noise_rng.normal() + shared * shared_noise(i));
      }
      utt.face_image = render_face_heatmap(utt.face, 32, 32);
      ds.utterances.push_back(std::move(utt));
    }
  }
  return ds;
}

std::vector<double> synth_class_tones(const SynthConfig& cfg, int cls) {
  if (cls < 0 || cls >= cfg.n_classes) throw InvalidConfig("class index out of range");
  Rng rng(mix_seed(cfg.seed, 0x746f6e65ULL + static_cast<std::uint64_t>(cls)));
  const double nyquist = cfg.wav_sample_rate / 2.0;
  const double lo = 300.0;
  const double hi = std::min(3400.0, 0.9 * nyquist);
  std::vector<double> tones(cfg.n_tones);
  for (int i = 0; i < cfg.n_tones; ++i) {
    tones[i] = rng.uniform(lo, hi);
  }
  std::sort(tones.begin(), tones.end());
  return tones;
}

AudioClip synth_wav(const SynthConfig& cfg, int cls, int utt_index) {
  cfg.validate();
  const std::vector<double> tones = synth_class_tones(cfg, cls);
  Rng rng(mix_seed(cfg.seed, 0x776176ULL + 1000003ULL * static_cast<std::uint64_t>(cls) +
                                 static_cast<std::uint64_t>(utt_index)));

  AudioClip clip;
  clip.sample_rate = cfg.wav_sample_rate;
  const int n_voiced = static_cast<int>(cfg.wav_duration_s * cfg.wav_sample_rate);
  const int n_pad = cfg.wav_sample_rate / 20;  // 50 ms of silence at each end
  clip.samples.assign(static_cast<std::size_t>(n_voiced) + 2 * n_pad, 0.0);

  std::vector<double> amp(tones.size()), phase(tones.size());
  for (std::size_t k = 0; k < tones.size(); ++k) {
    amp[k] = rng.uniform(0.8, 1.2);
    phase[k] = rng.uniform(0.0, 2.0 * kPi);
  }
  const double norm = 0.7 / static_cast<double>(tones.size());
  for (int n = 0; n < n_voiced; ++n) {
    double x = 0.0;
    for (std::size_t k = 0; k < tones.size(); ++k) {
      x += amp[k] * std::sin(2.0 * kPi * tones[k] * n / cfg.wav_sample_rate + phase[k]);
    }
    x = x * norm + cfg.wav_noise * rng.normal();
    clip.samples[static_cast<std::size_t>(n_pad + n)] = std::clamp(x, -1.0, 1.0);
  }
  return clip;
}

std::string Manifest::resolve(const std::string& relative) const {
  if (relative.empty()) return relative;
  const std::filesystem::path p(relative);
  if (p.is_absolute() || base_dir.empty()) return relative;
  return (std::filesystem::path(base_dir) / p).string();
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  Manifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();

  std::string line;
  if (!std::getline(is, line)) throw CorruptFile("empty manifest: " + path);
  if (line != "utt_id,speaker_id,wav_path,face_emb_path") {
    throw CorruptFile("unexpected manifest header: " + path);
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestRow row;
    if (!std::getline(ss, row.utt_id, ',') || !std::getline(ss, row.speaker_id, ',') ||
        !std::getline(ss, row.wav_path, ',') || !std::getline(ss, row.face_emb_path)) {
      throw CorruptFile("malformed manifest line " + std::to_string(line_no) + ": " + path);
    }
    if (row.utt_id.empty() || row.speaker_id.empty()) {
      throw CorruptFile("empty id on manifest line " + std::to_string(line_no) + ": " + path);
    }
    m.rows.push_back(std::move(row));
  }

  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (!seen.emplace(m.rows[i].utt_id, i).second) {
      throw CorruptFile("duplicate utt_id '" + m.rows[i].utt_id + "' in " + path);
    }
  }
  return m;
}

void save_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "utt_id,speaker_id,wav_path,face_emb_path\n";
  for (const ManifestRow& r : rows) {
    os << r.utt_id << ',' << r.speaker_id << ',' << r.wav_path << ',' << r.face_emb_path << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

std::vector<int> speaker_class_indices(const Manifest& manifest, int* n_classes) {
  std::map<std::string, int> index;
  for (const ManifestRow& r : manifest.rows) index.emplace(r.speaker_id, 0);
  int next = 0;
  for (auto& [id, idx] : index) idx = next++;
  std::vector<int> out;
  out.reserve(manifest.rows.size());
  for (const ManifestRow& r : manifest.rows) out.push_back(index.at(r.speaker_id));
  if (n_classes) *n_classes = next;
  return out;
}

}  // namespace fusebio
