#include "fusebio/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fusebio {

const std::vector<RunConfig::KeyDoc>& RunConfig::key_docs() {
  static const std::vector<KeyDoc> docs = {
      // global
      {"seed", "42", "master seed for everything stochastic"},
      {"out", "out", "output directory"},
      {"jobs", "1", "worker threads for extract"},
      {"manifest", "", "dataset manifest CSV"},
      {"task", "id", "eval task: id | verify"},
      {"mode", "feature_gtg", "fusion mode (see README for the list per task)"},
      {"feature", "mfcc", "extract feature: mfcc | gtg | gtg-image"},
      {"csv", "", "report CSV to re-render (report subcommand)"},
      {"k", "3", "number of cross-validation folds"},
      // front end
      {"frame_length_s", "0.025", "analysis frame length in seconds"},
      {"frame_shift_s", "0.010", "analysis frame shift in seconds"},
      {"n_mfcc", "24", "cepstral coefficients kept (c0 included)"},
      {"n_mel_filters", "26", "mel filterbank size"},
      {"n_gt_channels", "64", "gammatone channels"},
      {"fmin_hz", "50", "lowest filterbank frequency"},
      {"fmax_hz", "0", "highest filterbank frequency; 0 means sample_rate/2"},
      {"vad_threshold_db", "-40", "frame energy threshold relative to the peak frame"},
      {"energy_floor", "1e-10", "floor inside every log of an energy"},
      // voicenet
      {"vn_conv_channels", "64,64,64,64,128", "output channels of the five conv layers"},
      {"vn_conv_kernels", "5,3,3,1,1", "kernel sizes of the five conv layers"},
      {"vn_conv_dilations", "1,2,3,1,1", "dilations of the five conv layers"},
      {"vn_embedding_dim", "512", "x-vector dimension"},
      // voice training
      {"epochs", "8", "voice network training epochs"},
      {"batch_size", "128", "voice network mini-batch size"},
      {"lr_start", "1e-3", "initial learning rate"},
      {"lr_end", "1e-5", "final learning rate"},
      {"momentum", "0.9", "SGD momentum"},
      {"min_gradient_norm", "1e-6", "early-stop threshold on the batch gradient norm"},
      // fusion / classifier training
      {"fusion_epochs", "60", "fusion classifier training epochs"},
      {"fusion_batch_size", "128", "fusion classifier mini-batch size"},
      {"fusion_lr_start", "0.5", "fusion initial learning rate"},
      {"fusion_lr_end", "0.01", "fusion final learning rate"},
      {"fusion_momentum", "0.9", "fusion SGD momentum"},
      {"fusion_min_gradient_norm", "1e-6", "fusion early-stop gradient norm"},
      // synthetic data
      {"synth_classes", "10", "number of synthetic speakers"},
      {"synth_utts_per_class", "30", "utterances per synthetic speaker"},
      {"synth_dim_voice", "512", "synthetic voice vector dimension"},
      {"synth_dim_face", "512", "synthetic face embedding dimension"},
      {"synth_class_sep", "3.0", "scale of the class mean spread"},
      {"synth_noise_voice", "1.0", "voice noise standard deviation"},
      {"synth_noise_face", "1.0", "face noise standard deviation"},
      {"synth_cross_modal_corr", "0.0", "fraction of noise shared between modalities"},
      {"synth_wav_sample_rate", "8000", "sample rate of rendered waveforms"},
      {"synth_wav_duration_s", "1.0", "voiced duration of rendered waveforms"},
      {"synth_wav_noise", "0.05", "additive noise level in rendered waveforms"},
      {"synth_n_tones", "3", "tones per synthetic speaker"},
      // verification backend
      {"lda_dim", "150", "requested LDA output dimension (clipped to rank)"},
      {"plda_latent", "100", "PLDA latent dimension cap"},
      {"plda_iterations", "20", "PLDA EM iterations"},
      {"trials_per_fold", "400", "verification trials per fold"},
      // sensor fusion
      {"sensor_downsample", "16", "composite block-mean grid side"},
      {"sensor_augment", "1", "add one augmented copy of each training composite"},
  };
  return docs;
}

namespace {

const std::map<std::string, std::string>& default_map() {
  static const std::map<std::string, std::string> defaults = [] {
    std::map<std::string, std::string> m;
    for (const RunConfig::KeyDoc& d : RunConfig::key_docs()) m[d.key] = d.default_value;
    return m;
  }();
  return defaults;
}

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::resolve(const std::string& config_path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  cfg.values_ = default_map();

  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot open config file: " + config_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("expected key=value on line " + std::to_string(line_no) + " of " +
                          config_path);
      }
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (cfg.values_.find(key) == cfg.values_.end()) {
        throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(line_no) +
                          " of " + config_path + ")");
      }
      cfg.values_[key] = value;
    }
  }

  for (const auto& [key, value] : overrides) {
    if (cfg.values_.find(key) == cfg.values_.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const long n = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') throw ConfigError("key '" + key + "' is not an integer");
  return static_cast<int>(n);
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') throw ConfigError("key '" + key + "' is not a number");
  return d;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') throw ConfigError("key '" + key + "' is not an integer");
  return static_cast<std::uint64_t>(n);
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("key '" + key + "' is not a boolean (use 0/1)");
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const long n = std::strtol(item.c_str(), &end, 10);
    if (end == item.c_str() || *end != '\0') {
      throw ConfigError("key '" + key + "' is not a comma-separated integer list");
    }
    out.push_back(static_cast<int>(n));
  }
  if (out.empty()) throw ConfigError("key '" + key + "' is empty");
  return out;
}

std::string RunConfig::render() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) os << key << '=' << value << '\n';
  return os.str();
}

FrontendConfig RunConfig::frontend() const {
  FrontendConfig fe;
  fe.frame_length_s = get_double("frame_length_s");
  fe.frame_shift_s = get_double("frame_shift_s");
  fe.n_mfcc = get_int("n_mfcc");
  fe.n_mel_filters = get_int("n_mel_filters");
  fe.n_gt_channels = get_int("n_gt_channels");
  fe.fmin_hz = get_double("fmin_hz");
  fe.fmax_hz = get_double("fmax_hz");
  fe.vad_threshold_db = get_double("vad_threshold_db");
  fe.energy_floor = get_double("energy_floor");
  return fe;
}

TrainConfig RunConfig::voice_train() const {
  TrainConfig tc;
  tc.epochs = get_int("epochs");
  tc.batch_size = get_int("batch_size");
  tc.lr_start = get_double("lr_start");
  tc.lr_end = get_double("lr_end");
  tc.momentum = get_double("momentum");
  tc.min_gradient_norm = get_double("min_gradient_norm");
  tc.seed = get_u64("seed");
  return tc;
}

TrainConfig RunConfig::fusion_train() const {
  TrainConfig tc;
  tc.epochs = get_int("fusion_epochs");
  tc.batch_size = get_int("fusion_batch_size");
  tc.lr_start = get_double("fusion_lr_start");
  tc.lr_end = get_double("fusion_lr_end");
  tc.momentum = get_double("fusion_momentum");
  tc.min_gradient_norm = get_double("fusion_min_gradient_norm");
  tc.seed = get_u64("seed");
  return tc;
}

VoiceNetSpec RunConfig::voicenet() const {
  VoiceNetSpec spec;
  const std::vector<int> channels = get_int_list("vn_conv_channels");
  const std::vector<int> kernels = get_int_list("vn_conv_kernels");
  const std::vector<int> dilations = get_int_list("vn_conv_dilations");
  if (channels.size() != 5 || kernels.size() != 5 || dilations.size() != 5) {
    throw ConfigError("vn_conv_* lists must have exactly 5 entries");
  }
  for (int i = 0; i < 5; ++i) {
    spec.conv_channels[i] = channels[i];
    spec.conv_kernels[i] = kernels[i];
    spec.conv_dilations[i] = dilations[i];
  }
  spec.embedding_dim = get_int("vn_embedding_dim");
  spec.input_dim = get_int("n_mfcc");
  return spec;
}

SynthConfig RunConfig::synth() const {
  SynthConfig sc;
  sc.n_classes = get_int("synth_classes");
  sc.n_utt_per_class = get_int("synth_utts_per_class");
  sc.dim_voice = get_int("synth_dim_voice");
  sc.dim_face = get_int("synth_dim_face");
  sc.class_sep = get_double("synth_class_sep");
  sc.noise_voice = get_double("synth_noise_voice");
  sc.noise_face = get_double("synth_noise_face");
  sc.cross_modal_corr = get_double("synth_cross_modal_corr");
  sc.seed = get_u64("seed");
  sc.wav_sample_rate = get_int("synth_wav_sample_rate");
  sc.wav_duration_s = get_double("synth_wav_duration_s");
  sc.wav_noise = get_double("synth_wav_noise");
  sc.n_tones = get_int("synth_n_tones");
  return sc;
}

BackendConfig RunConfig::backend() const {
  BackendConfig bc;
  bc.lda_dim = get_int("lda_dim");
  bc.plda_latent = get_int("plda_latent");
  bc.plda_iterations = get_int("plda_iterations");
  return bc;
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions opts;
  opts.frontend = frontend();
  opts.voicenet = voicenet();
  opts.voice_train = voice_train();
  opts.fusion_train = fusion_train();
  opts.backend = backend();
  opts.k = get_int("k");
  opts.seed = get_u64("seed");
  opts.sensor_downsample = get_int("sensor_downsample");
  opts.sensor_augment = get_bool("sensor_augment");
  opts.trials_per_fold = get_int("trials_per_fold");
  return opts;
}

}  // namespace fusebio
