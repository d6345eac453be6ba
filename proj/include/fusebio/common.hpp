// Shared plumbing: error types, deterministic RNG, little-endian binary I/O.
#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fusebio {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// audio_frontend
struct UnsupportedFormat : Error { using Error::Error; };
struct CorruptHeader : Error { using Error::Error; };
struct EmptyAudio : Error { using Error::Error; };
struct EmptyAfterVad : Error { using Error::Error; };
struct TooShort : Error { using Error::Error; };
struct InsufficientFrames : Error { using Error::Error; };
struct InvalidRange : Error { using Error::Error; };

// neural_core
struct ShapeMismatch : Error { using Error::Error; };
struct InvalidLabel : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };

// embeddings
struct InvalidSpec : Error { using Error::Error; };
struct CorruptFile : Error { using Error::Error; };
struct DimMismatch : Error { using Error::Error; };
struct InvalidConfig : Error { using Error::Error; };

// fusion
struct UtteranceMismatch : Error { using Error::Error; };
struct EmptyVector : Error { using Error::Error; };
struct NotAPosterior : Error { using Error::Error; };
struct InvalidLayout : Error { using Error::Error; };
struct OutOfConfiguredRange : Error { using Error::Error; };

// verification
struct DegenerateClasses : Error { using Error::Error; };
struct SingularCovariance : Error { using Error::Error; };
struct EmptyPopulation : Error { using Error::Error; };

// evaluation
struct InsufficientUtterances : Error { using Error::Error; };
struct EmptyMatrix : Error { using Error::Error; };

// cli / io
struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// Deterministic RNG. std::mt19937_64 output is fully specified by the
// standard; the distributions here are hand-rolled because the standard
// library distributions are implementation-defined and would break
// bit-exact reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via the polar method
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // [0, n)
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(eng_() % n);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64; used to derive independent sub-seeds (per fold, per class, ...)
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Little-endian binary I/O. Throws CorruptFile on short reads.
void write_u32(std::ostream& os, std::uint32_t v);
void write_f32(std::ostream& os, float v);
std::uint32_t read_u32(std::istream& is);
float read_f32(std::istream& is);
void write_magic(std::ostream& os, const char magic[4]);
void expect_magic(std::istream& is, const char magic[4]);

}  // namespace fusebio
