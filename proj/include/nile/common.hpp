#pragma once

#include <cstdint>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nile {

// --- Error taxonomy; maps to CLI exit codes (config=1, data=2, numeric=3) ---
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- Labels ---
enum class Label : int { Entail = 0, Contradict = 1, Neutral = 2 };

inline constexpr int kNumLabels = 3;

inline const char* to_string(Label l) {
  switch (l) {
    case Label::Entail: return "entailment";
    case Label::Contradict: return "contradiction";
    case Label::Neutral: return "neutral";
  }
  return "?";
}

// Accepts the e-SNLI gold_label strings; anything else is not a label.
inline bool parse_label(std::string_view s, Label& out) {
  if (s == "entailment") { out = Label::Entail; return true; }
  if (s == "contradiction") { out = Label::Contradict; return true; }
  if (s == "neutral") { out = Label::Neutral; return true; }
  return false;
}

inline const std::array<Label, 3>& all_labels() {
  static const std::array<Label, 3> ls = {Label::Entail, Label::Contradict,
                                          Label::Neutral};
  return ls;
}

// Real-valued label scores before softmax.
struct LabelScores {
  double entail = 0.0;
  double contradict = 0.0;
  double neutral = 0.0;

  double& operator[](Label l) {
    switch (l) {
      case Label::Entail: return entail;
      case Label::Contradict: return contradict;
      default: return neutral;
    }
  }
  double operator[](Label l) const {
    switch (l) {
      case Label::Entail: return entail;
      case Label::Contradict: return contradict;
      default: return neutral;
    }
  }
  bool finite() const {
    return std::isfinite(entail) && std::isfinite(contradict) &&
           std::isfinite(neutral);
  }
};

// --- Deterministic PRNG (splitmix64) ---
class Rng {
  std::uint64_t state_;

 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return (next() >> 11) * 0x1.0p-53; }

  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * z;
  }

  // uniform in [0, n)
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(next() % n);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }
};

// --- Hashing and seed derivation ---
inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One global seed fans out to labeled per-module streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  return mix64(base ^ fnv1a64(label));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t index) {
  return mix64(derive_seed(base, label) ^ mix64(index + 0x9e3779b97f4a7c15ULL));
}

// --- Minimal dense matrix, row-major ---
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  std::size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// --- ASCII folding; the corpora here are ASCII-clean ---
inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline bool contains_substring(std::string_view haystack,
                               std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

// --- Execution mode for the batch kernels ---
// Every parallel kernel keeps a serial twin; tests assert bit-identical
// results and tools/bench compares wall time.
enum class ExecMode { Serial, Parallel };

template <class Fn>
void for_each_index(std::size_t n, ExecMode mode, Fn&& fn) {
#ifdef _OPENMP
  if (mode == ExecMode::Parallel) {
    #pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
      fn(static_cast<std::size_t>(i));
    return;
  }
#else
  (void)mode;
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace nile
