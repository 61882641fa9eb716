#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sigsurv/timeseries.hpp"

namespace sigsurv {

inline constexpr int kMaxSignatureDepth = 6;

/// Number of signature coefficients of levels 1..depth over d letters.
std::size_t sig_dim(int d, int depth);

/// Offset of the first level-k coefficient in the flat layout (k >= 1).
std::size_t level_offset(int d, int k);

/// A word over the alphabet {1..d}; letters are 1-based.
struct Word {
  std::vector<int> letters;

  std::size_t length() const noexcept { return letters.size(); }
  bool operator==(const Word&) const = default;
};

/// Position of w in the level-then-lexicographic layout.
std::size_t word_index(const Word& w, int d, int depth);
Word word_at(std::size_t index, int d, int depth);

/// Dotted form, e.g. "1.3.2".
std::string to_string(const Word& w);
Word parse_word(const std::string& text);

/// Truncated signature with implicit unit level-0 term. Coefficients are
/// grouped by level, lexicographic within a level.
class SigVector {
 public:
  SigVector() = default;
  SigVector(int d, int depth);

  int alphabet() const noexcept { return d_; }
  int depth() const noexcept { return depth_; }
  std::size_t size() const noexcept { return coeffs_.size(); }

  std::span<double> coefficients() noexcept { return coeffs_; }
  std::span<const double> coefficients() const noexcept { return coeffs_; }
  double operator[](std::size_t i) const { return coeffs_[i]; }
  double& operator[](std::size_t i) { return coeffs_[i]; }
  double at(const Word& w) const { return coeffs_[word_index(w, d_, depth_)]; }

  std::span<const double> level(int k) const;
  std::span<double> level(int k);

  /// In-place right multiplication by the tensor exponential of a segment
  /// increment: this <- this (x) exp(increment).
  void append_segment(std::span<const double> increment);

  /// In-place right multiplication by exp(u e_d) (pure time-channel move).
  void append_time(double u);

  void set_zero();

 private:
  int d_ = 0;
  int depth_ = 0;
  std::vector<double> coeffs_;
  std::vector<double> scratch_;
};

SigVector segment_signature(std::span<const double> increment, int depth);

/// Truncated tensor product; level k is sum_{j=0..k} a_j (x) b_{k-j}.
SigVector chen_concat(const SigVector& a, const SigVector& b);

/// Signature of the embedded path on [0, t].
SigVector path_signature(const EmbeddedPath& p, double t, int depth);

/// Signatures at ascending evaluation times with one pass over the segments.
std::vector<SigVector> stream_signatures(const EmbeddedPath& p,
                                         std::span<const double> eval_times, int depth);

/// For each j = 0..depth, the pairs (v, w) with v = w followed by j copies of
/// the last letter d. w is kEmptyWord when v consists of time letters only.
/// Used to expand a <alpha, S(x) (x) exp(u e_d)> as a polynomial in u.
struct TimeSuffixTable {
  static constexpr std::size_t kEmptyWord = static_cast<std::size_t>(-1);
  struct Pair {
    std::size_t word;
    std::size_t prefix;
  };
  int d = 0;
  int depth = 0;
  std::vector<std::vector<Pair>> by_power;  // by_power[j]
  std::vector<std::size_t> time_words;      // indices of (d), (d,d), ...

  static TimeSuffixTable build(int d, int depth);
};

}  // namespace sigsurv
