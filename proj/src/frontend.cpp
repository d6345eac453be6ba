#include "fusebio/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <limits>

#include "fusebio/common.hpp"

namespace fusebio {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPreEmphasis = 0.97;
constexpr double kGammatoneBandwidthScale = 1.019;
constexpr double kGammatoneFloorDb = -80.0;

struct RiffChunk {
  char id[4];
  std::uint32_t size;
};

bool read_chunk_header(std::istream& is, RiffChunk& c) {
  is.read(c.id, 4);
  if (is.gcount() != 4) return false;
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) return false;
  c.size = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

double erb_rate(double f) { return 21.4 * std::log10(1.0 + 0.00437 * f); }
double erb_rate_inverse(double r) { return (std::pow(10.0, r / 21.4) - 1.0) / 0.00437; }

// 10*log10 of the mean square of one frame, floored
double frame_energy_db(const double* x, std::size_t n, double floor_value) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  const double mean_sq = n > 0 ? acc / static_cast<double>(n) : 0.0;
  return 10.0 * std::log10(std::max(mean_sq, floor_value));
}

}  // namespace

void FrontendConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw InvalidRange("sample rate must be positive");
  if (!(frame_shift_s > 0.0) || frame_shift_s > frame_length_s) {
    throw InvalidRange("need 0 < frame_shift_s <= frame_length_s");
  }
  const double fmax = resolved_fmax(sample_rate);
  if (!(fmin_hz > 0.0) || !(fmin_hz < fmax) || fmax > sample_rate / 2.0 + 1e-9) {
    throw InvalidRange("need 0 < fmin < fmax <= sample_rate/2");
  }
  if (n_gt_channels < 2) throw InvalidRange("need n_gt_channels >= 2");
  if (n_mfcc < 1 || n_mfcc > n_mel_filters) {
    throw InvalidRange("need 1 <= n_mfcc <= n_mel_filters");
  }
  if (energy_floor <= 0.0) throw InvalidRange("energy_floor must be positive");
}

AudioClip load_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);

  char riff[4], wave[4];
  unsigned char size_b[4];
  is.read(riff, 4);
  is.read(reinterpret_cast<char*>(size_b), 4);
  is.read(wave, 4);
  if (!is || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0) {
    throw CorruptHeader("not a RIFF/WAVE file: " + path);
  }

  bool have_fmt = false;
  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<double> samples;
  bool have_data = false;

  RiffChunk chunk;
  while (read_chunk_header(is, chunk)) {
    if (std::memcmp(chunk.id, "fmt ", 4) == 0) {
      if (chunk.size < 16) throw CorruptHeader("fmt chunk too small: " + path);
      std::vector<unsigned char> body(chunk.size);
      is.read(reinterpret_cast<char*>(body.data()), chunk.size);
      if (is.gcount() != static_cast<std::streamsize>(chunk.size)) {
        throw CorruptHeader("truncated fmt chunk: " + path);
      }
      audio_format = le16(body.data());
      channels = le16(body.data() + 2);
      rate = le32(body.data() + 4);
      bits = le16(body.data() + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk.id, "data", 4) == 0) {
      if (!have_fmt) throw CorruptHeader("data chunk before fmt: " + path);
      if (audio_format != 1 || bits != 16) {
        throw UnsupportedFormat("only 16-bit PCM supported: " + path);
      }
      if (channels != 1) throw UnsupportedFormat("only mono supported: " + path);
      const std::uint32_t n = chunk.size / 2;
      std::vector<unsigned char> body(chunk.size);
      is.read(reinterpret_cast<char*>(body.data()), chunk.size);
      if (is.gcount() != static_cast<std::streamsize>(chunk.size)) {
        throw CorruptHeader("truncated data chunk: " + path);
      }
      samples.resize(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        const std::int16_t s =
            static_cast<std::int16_t>(le16(body.data() + 2 * static_cast<std::size_t>(i)));
        samples[i] = static_cast<double>(s) / 32768.0;
      }
      have_data = true;
    } else {
      is.seekg(chunk.size + (chunk.size & 1), std::ios::cur);  // chunks are word-aligned
    }
  }

  if (!have_fmt || !have_data) throw CorruptHeader("missing fmt or data chunk: " + path);
  if (rate == 0) throw CorruptHeader("zero sample rate: " + path);
  if (samples.empty()) throw EmptyAudio("no samples: " + path);

  AudioClip clip;
  clip.samples = std::move(samples);
  clip.sample_rate = static_cast<int>(rate);
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw InvalidRange("sample rate must be positive");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);

  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = n * 2;
  const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate);

  os.write("RIFF", 4);
  write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  const std::uint16_t fmt_tag = 1, channels = 1, bits = 16;
  const std::uint16_t block_align = channels * bits / 8;
  unsigned char fmt_body[16];
  fmt_body[0] = fmt_tag & 0xff;
  fmt_body[1] = fmt_tag >> 8;
  fmt_body[2] = channels & 0xff;
  fmt_body[3] = channels >> 8;
  fmt_body[4] = rate & 0xff;
  fmt_body[5] = (rate >> 8) & 0xff;
  fmt_body[6] = (rate >> 16) & 0xff;
  fmt_body[7] = (rate >> 24) & 0xff;
  const std::uint32_t byte_rate = rate * block_align;
  fmt_body[8] = byte_rate & 0xff;
  fmt_body[9] = (byte_rate >> 8) & 0xff;
  fmt_body[10] = (byte_rate >> 16) & 0xff;
  fmt_body[11] = (byte_rate >> 24) & 0xff;
  fmt_body[12] = block_align & 0xff;
  fmt_body[13] = block_align >> 8;
  fmt_body[14] = bits & 0xff;
  fmt_body[15] = bits >> 8;
  os.write(reinterpret_cast<const char*>(fmt_body), 16);
  os.write("data", 4);
  write_u32(os, data_bytes);
  for (std::uint32_t i = 0; i < n; ++i) {
    double x = std::clamp(clip.samples[i], -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lrint(x * 32767.0));
    const char b[2] = {static_cast<char>(q & 0xff), static_cast<char>((q >> 8) & 0xff)};
    os.write(b, 2);
  }
  if (!os) throw IoError("write failed: " + path);
}

AudioClip apply_vad(const AudioClip& clip, const FrontendConfig& cfg) {
  if (clip.samples.empty()) throw EmptyAudio("empty clip");
  cfg.validate(clip.sample_rate);

  const std::size_t frame_len =
      static_cast<std::size_t>(cfg.frame_length_samples(clip.sample_rate));
  const std::size_t n = clip.samples.size();
  const std::size_t n_full = n / frame_len;
  const std::size_t tail = n - n_full * frame_len;
  const std::size_t n_frames = n_full + (tail > 0 ? 1 : 0);

  std::vector<double> energy_db(n_frames);
  double peak_db = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * frame_len;
    const std::size_t len = std::min(frame_len, n - start);
    energy_db[f] = frame_energy_db(clip.samples.data() + start, len, cfg.energy_floor);
    peak_db = std::max(peak_db, energy_db[f]);
  }

  const double threshold_db = peak_db + cfg.vad_threshold_db;
  const double silence_db = 10.0 * std::log10(cfg.energy_floor);

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  for (std::size_t f = 0; f < n_frames; ++f) {
    if (energy_db[f] > threshold_db && energy_db[f] > silence_db) {
      const std::size_t start = f * frame_len;
      const std::size_t len = std::min(frame_len, n - start);
      out.samples.insert(out.samples.end(), clip.samples.begin() + start,
                         clip.samples.begin() + start + len);
    }
  }
  if (out.samples.empty()) throw EmptyAfterVad("no frame above the VAD threshold");
  return out;
}

int frame_count(std::size_t n_samples, int frame_len, int shift) {
  if (frame_len <= 0 || shift <= 0) throw InvalidRange("frame_len and shift must be positive");
  if (n_samples < static_cast<std::size_t>(frame_len)) return 0;
  return 1 + static_cast<int>((n_samples - static_cast<std::size_t>(frame_len)) /
                              static_cast<std::size_t>(shift));
}

FrameMatrix compute_mfcc(const AudioClip& clip, const FrontendConfig& cfg) {
  cfg.validate(clip.sample_rate);
  const int frame_len = cfg.frame_length_samples(clip.sample_rate);
  const int shift = cfg.frame_shift_samples(clip.sample_rate);
  const int n_frames = frame_count(clip.samples.size(), frame_len, shift);
  if (n_frames < 1) throw TooShort("clip shorter than one frame");

  const std::size_t nfft = next_pow2(static_cast<std::size_t>(frame_len));
  const std::size_t n_bins = nfft / 2 + 1;
  const int n_filters = cfg.n_mel_filters;
  const double fmax = cfg.resolved_fmax(clip.sample_rate);

  // Hamming window
  std::vector<double> window(frame_len);
  for (int i = 0; i < frame_len; ++i) {
    window[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (frame_len - 1));
  }

  // triangular mel filterbank over FFT bins
  std::vector<double> mel_points(n_filters + 2);
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(fmax);
  for (int i = 0; i < n_filters + 2; ++i) {
    mel_points[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_filters + 1));
  }
  const double bin_hz = static_cast<double>(clip.sample_rate) / static_cast<double>(nfft);
  Eigen::MatrixXd filterbank = Eigen::MatrixXd::Zero(n_filters, static_cast<Eigen::Index>(n_bins));
  for (int m = 0; m < n_filters; ++m) {
    const double lo = mel_points[m], mid = mel_points[m + 1], hi = mel_points[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      if (f > lo && f < mid) {
        filterbank(m, static_cast<Eigen::Index>(k)) = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        filterbank(m, static_cast<Eigen::Index>(k)) = (hi - f) / (hi - mid);
      }
    }
  }

  // orthonormal DCT-II, n_mfcc x n_filters
  Eigen::MatrixXd dct(cfg.n_mfcc, n_filters);
  for (int i = 0; i < cfg.n_mfcc; ++i) {
    const double scale = i == 0 ? std::sqrt(1.0 / n_filters) : std::sqrt(2.0 / n_filters);
    for (int j = 0; j < n_filters; ++j) {
      dct(i, j) = scale * std::cos(kPi * i * (j + 0.5) / n_filters);
    }
  }

  FrameMatrix out;
  out.frame_length_s = cfg.frame_length_s;
  out.frame_shift_s = cfg.frame_shift_s;
  out.values.resize(n_frames, cfg.n_mfcc);

  std::vector<std::complex<double>> buf(nfft);
  Eigen::VectorXd power(static_cast<Eigen::Index>(n_bins));
  for (int f = 0; f < n_frames; ++f) {
    const double* x = clip.samples.data() + static_cast<std::size_t>(f) * shift;
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    buf[0] = x[0] * (1.0 - kPreEmphasis) * window[0];
    for (int i = 1; i < frame_len; ++i) {
      buf[i] = (x[i] - kPreEmphasis * x[i - 1]) * window[i];
    }
    fft_radix2(buf);
    for (std::size_t k = 0; k < n_bins; ++k) {
      power(static_cast<Eigen::Index>(k)) = std::norm(buf[k]);
    }
    Eigen::VectorXd mel = filterbank * power;
    for (int m = 0; m < n_filters; ++m) {
      mel(m) = std::log(std::max(mel(m), cfg.energy_floor));
    }
    out.values.row(f) = (dct * mel).transpose();
  }
  return out;
}

FrameMatrix apply_cmvn(const FrameMatrix& frames) {
  const Eigen::Index t = frames.values.rows();
  if (t < 2) throw InsufficientFrames("CMVN needs at least 2 frames");
  FrameMatrix out = frames;
  for (Eigen::Index c = 0; c < frames.values.cols(); ++c) {
    const double mean = frames.values.col(c).mean();
    out.values.col(c).array() -= mean;
    const double var = out.values.col(c).squaredNorm() / static_cast<double>(t);
    if (var >= 1e-10) {
      out.values.col(c) /= std::sqrt(var);
    }
  }
  return out;
}

std::vector<double> erb_center_frequencies(int n, double fmin, double fmax) {
  if (n < 1 || !(fmin > 0.0) || fmin > fmax) throw InvalidRange("need n >= 1, 0 < fmin <= fmax");
  if (n == 1) return {fmin};
  if (!(fmin < fmax)) throw InvalidRange("need fmin < fmax for n >= 2");
  const double lo = erb_rate(fmin), hi = erb_rate(fmax);
  std::vector<double> freqs(n);
  for (int i = 0; i < n; ++i) {
    freqs[i] = erb_rate_inverse(lo + (hi - lo) * i / (n - 1));
  }
  freqs.front() = fmin;  // exact endpoints
  freqs.back() = fmax;
  return freqs;
}

double erb_bandwidth_hz(double f) { return 24.7 * (4.37 * f / 1000.0 + 1.0); }

std::vector<double> gammatone_envelope(const std::vector<double>& samples, int sample_rate,
                                       double center_freq) {
  const double bandwidth = kGammatoneBandwidthScale * erb_bandwidth_hz(center_freq);
  const double r = std::exp(-2.0 * kPi * bandwidth / sample_rate);
  const double theta = 2.0 * kPi * center_freq / sample_rate;
  const std::complex<double> pole = r * std::complex<double>(std::cos(theta), std::sin(theta));
  // unit gain at the center frequency for a real sinusoid: per-stage center
  // gain is 1/(1-r), and the analytic split halves the amplitude
  const double gain = 2.0 * std::pow(1.0 - r, 4.0);

  std::vector<double> envelope(samples.size());
  std::complex<double> s1(0, 0), s2(0, 0), s3(0, 0), s4(0, 0);
  for (std::size_t n = 0; n < samples.size(); ++n) {
    s1 = samples[n] + pole * s1;
    s2 = s1 + pole * s2;
    s3 = s2 + pole * s3;
    s4 = s3 + pole * s4;
    envelope[n] = gain * std::abs(s4);
  }
  return envelope;
}

Gammatonegram compute_gammatonegram(const AudioClip& clip, const FrontendConfig& cfg) {
  cfg.validate(clip.sample_rate);
  const int frame_len = cfg.frame_length_samples(clip.sample_rate);
  const int shift = cfg.frame_shift_samples(clip.sample_rate);
  const int n_frames = frame_count(clip.samples.size(), frame_len, shift);
  if (n_frames < 1) throw TooShort("clip shorter than one frame");

  Gammatonegram out;
  out.floor_db = kGammatoneFloorDb;
  out.center_freqs =
      erb_center_frequencies(cfg.n_gt_channels, cfg.fmin_hz, cfg.resolved_fmax(clip.sample_rate));
  out.values.resize(cfg.n_gt_channels, n_frames);

  for (int ch = 0; ch < cfg.n_gt_channels; ++ch) {
    const std::vector<double> env =
        gammatone_envelope(clip.samples, clip.sample_rate, out.center_freqs[ch]);
    for (int f = 0; f < n_frames; ++f) {
      const std::size_t start = static_cast<std::size_t>(f) * shift;
      double acc = 0.0;
      for (int i = 0; i < frame_len; ++i) {
        acc += env[start + i] * env[start + i];
      }
      const double mean_power = acc / frame_len;
      const double db = 10.0 * std::log10(std::max(mean_power, cfg.energy_floor));
      out.values(ch, f) = std::max(db, out.floor_db);
    }
  }
  return out;
}

GrayImage render_gammatonegram_image(const Gammatonegram& gtg, int width, int height) {
  if (width < 8 || height < 8) throw InvalidRange("image must be at least 8x8");
  const Eigen::Index n_ch = gtg.n_channels();
  const Eigen::Index n_fr = gtg.n_frames();
  const double vmax = gtg.values.maxCoeff();
  const double vmin = gtg.values.minCoeff();

  GrayImage img(width, height);
  if (vmax == vmin) {
    std::fill(img.pixels.begin(), img.pixels.end(), std::uint8_t{128});
    return img;
  }
  const double scale = 255.0 / (vmax - gtg.floor_db);
  for (int y = 0; y < height; ++y) {
    // low frequencies at the bottom of the image
    Eigen::Index ch = n_ch - 1 - static_cast<Eigen::Index>((y + 0.5) * n_ch / height);
    ch = std::clamp<Eigen::Index>(ch, 0, n_ch - 1);
    for (int x = 0; x < width; ++x) {
      Eigen::Index fr = static_cast<Eigen::Index>((x + 0.5) * n_fr / width);
      fr = std::clamp<Eigen::Index>(fr, 0, n_fr - 1);
      const double v = (gtg.values(ch, fr) - gtg.floor_db) * scale;
      img.at(y, x) = static_cast<std::uint8_t>(std::clamp(std::lrint(v), 0L, 255L));
    }
  }
  return img;
}

const char kMagicFrameMatrix[4] = {'F', 'B', 'F', 'M'};
const char kMagicGammatonegram[4] = {'F', 'B', 'G', 'T'};

void save_feature_matrix(const std::string& path, const Eigen::MatrixXd& m, const char magic[4]) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_magic(os, magic);
  write_u32(os, static_cast<std::uint32_t>(m.rows()));
  write_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      write_f32(os, static_cast<float>(m(r, c)));
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

Eigen::MatrixXd load_feature_matrix(const std::string& path, const char magic[4]) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  expect_magic(is, magic);
  const std::uint32_t rows = read_u32(is);
  const std::uint32_t cols = read_u32(is);
  if (rows == 0 || cols == 0) throw CorruptFile("empty matrix: " + path);
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      m(r, c) = read_f32(is);
    }
  }
  return m;
}

}  // namespace fusebio
