// Audio front-end: WAV ingestion, energy VAD, MFCC+CMVN features and the
// gammatonegram representation used as the image form of an utterance.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fusebio/image.hpp"

namespace fusebio {

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 0;          // Hz

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct FrontendConfig {
  double frame_length_s = 0.025;
  double frame_shift_s = 0.010;
  int n_mfcc = 24;
  int n_mel_filters = 26;
  int n_gt_channels = 64;
  double fmin_hz = 50.0;
  double fmax_hz = 0.0;  // 0 means sample_rate / 2
  double vad_threshold_db = -40.0;  // relative to the peak frame energy
  double energy_floor = 1e-10;

  double resolved_fmax(int sample_rate) const {
    return fmax_hz > 0.0 ? fmax_hz : sample_rate / 2.0;
  }
  // Throws InvalidRange when the configuration is not usable at this rate.
  void validate(int sample_rate) const;

  int frame_length_samples(int sample_rate) const {
    return static_cast<int>(frame_length_s * sample_rate + 0.5);
  }
  int frame_shift_samples(int sample_rate) const {
    return static_cast<int>(frame_shift_s * sample_rate + 0.5);
  }
};

// rows = frames, cols = coefficients
struct FrameMatrix {
  Eigen::MatrixXd values;
  double frame_shift_s = 0.0;
  double frame_length_s = 0.0;

  Eigen::Index n_frames() const { return values.rows(); }
  Eigen::Index n_coeffs() const { return values.cols(); }
};

// rows = channels (ascending center frequency), cols = frames, values in dB
struct Gammatonegram {
  Eigen::MatrixXd values;
  std::vector<double> center_freqs;
  double floor_db = -80.0;

  Eigen::Index n_channels() const { return values.rows(); }
  Eigen::Index n_frames() const { return values.cols(); }
};

// RIFF/WAVE, 16-bit PCM, mono only. Samples scaled by 1/32768.
AudioClip load_wav(const std::string& path);
// Inverse of load_wav's scaling up to the int16 clamp.
void write_wav(const std::string& path, const AudioClip& clip);

// Keeps the non-overlapping frames (frame_length_s long, last one possibly
// shorter) whose energy is both above the silence floor and within
// vad_threshold_db of the loudest frame. Output samples are a subsequence
// of the input.
AudioClip apply_vad(const AudioClip& clip, const FrontendConfig& cfg);

// 1 + floor((n_samples - frame_len) / shift); 0 when the clip is shorter
// than one frame.
int frame_count(std::size_t n_samples, int frame_len, int shift);

// Per frame: pre-emphasis (0.97), Hamming window, power spectrum, mel
// filterbank, floored log, DCT-II keeping n_mfcc coefficients (c0 included).
FrameMatrix compute_mfcc(const AudioClip& clip, const FrontendConfig& cfg);

// Per-coefficient mean removal; unit variance where the variance is above
// 1e-10, mean removal only otherwise.
FrameMatrix apply_cmvn(const FrameMatrix& frames);

// ERBrate(f) = 21.4 * log10(1 + 0.00437 f); n points equally spaced on the
// ERB-rate scale with endpoints mapping back to fmin and fmax exactly.
std::vector<double> erb_center_frequencies(int n, double fmin, double fmax);

// Glasberg-Moore: 24.7 * (4.37 f / 1000 + 1) Hz
double erb_bandwidth_hz(double f);

// Envelope of a 4th-order gammatone filter (cascade of four one-pole complex
// resonators, unit gain at the center frequency for a real sinusoid).
std::vector<double> gammatone_envelope(const std::vector<double>& samples, int sample_rate,
                                       double center_freq);

// Per channel and frame: mean envelope power in dB, floored by energy_floor
// and clamped at floor_db = -80. Framing matches compute_mfcc.
Gammatonegram compute_gammatonegram(const AudioClip& clip, const FrontendConfig& cfg);

// Linear map floor_db -> 0, max -> 255 (uniform input -> all 128),
// nearest-neighbor resampling, low frequencies at the bottom.
GrayImage render_gammatonegram_image(const Gammatonegram& gtg, int width, int height);

extern const char kMagicFrameMatrix[4];   // "FBFM"
extern const char kMagicGammatonegram[4]; // "FBGT"

// magic, u32 rows, u32 cols, row-major f32, little-endian
void save_feature_matrix(const std::string& path, const Eigen::MatrixXd& m, const char magic[4]);
Eigen::MatrixXd load_feature_matrix(const std::string& path, const char magic[4]);

}  // namespace fusebio
