#include "sigsurv/signature.hpp"

#include <algorithm>
#include <sstream>

#include "sigsurv/error.hpp"

namespace sigsurv {
namespace {

void check_shape(int d, int depth) {
  if (d < 1) throw ValidationError("signature: alphabet size must be >= 1");
  if (depth < 1 || depth > kMaxSignatureDepth)
    throw ValidationError("signature: depth must be in [1, " +
                          std::to_string(kMaxSignatureDepth) + "]");
}

std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

std::size_t sig_dim(int d, int depth) {
  if (d < 1 || depth < 1) throw ValidationError("sig_dim: d and depth must be >= 1");
  std::size_t total = 0;
  for (int k = 1; k <= depth; ++k) total += ipow(static_cast<std::size_t>(d), k);
  return total;
}

std::size_t level_offset(int d, int k) {
  std::size_t off = 0;
  for (int j = 1; j < k; ++j) off += ipow(static_cast<std::size_t>(d), j);
  return off;
}

std::size_t word_index(const Word& w, int d, int depth) {
  if (w.letters.empty()) throw ValidationError("word_index: empty word");
  if (static_cast<int>(w.length()) > depth)
    throw ValidationError("word_index: word longer than depth");
  std::size_t rank = 0;
  for (int letter : w.letters) {
    if (letter < 1 || letter > d) throw ValidationError("word_index: letter out of range");
    rank = rank * static_cast<std::size_t>(d) + static_cast<std::size_t>(letter - 1);
  }
  return level_offset(d, static_cast<int>(w.length())) + rank;
}

Word word_at(std::size_t index, int d, int depth) {
  if (index >= sig_dim(d, depth)) throw ValidationError("word_at: index out of range");
  int k = 1;
  std::size_t width = static_cast<std::size_t>(d);
  while (index >= width) {
    index -= width;
    width *= static_cast<std::size_t>(d);
    ++k;
  }
  Word w;
  w.letters.assign(static_cast<std::size_t>(k), 1);
  for (int pos = k - 1; pos >= 0; --pos) {
    w.letters[static_cast<std::size_t>(pos)] = static_cast<int>(index % d) + 1;
    index /= static_cast<std::size_t>(d);
  }
  return w;
}

std::string to_string(const Word& w) {
  std::string out;
  for (std::size_t i = 0; i < w.letters.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(w.letters[i]);
  }
  return out;
}

Word parse_word(const std::string& text) {
  Word w;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, '.')) {
    if (part.empty()) throw ValidationError("parse_word: malformed word '" + text + "'");
    std::size_t used = 0;
    int letter = 0;
    try {
      letter = std::stoi(part, &used);
    } catch (const std::exception&) {
      throw ValidationError("parse_word: malformed word '" + text + "'");
    }
    if (used != part.size()) throw ValidationError("parse_word: malformed word '" + text + "'");
    w.letters.push_back(letter);
  }
  if (w.letters.empty()) throw ValidationError("parse_word: empty word");
  return w;
}

SigVector::SigVector(int d, int depth) : d_(d), depth_(depth) {
  check_shape(d, depth);
  coeffs_.assign(sig_dim(d, depth), 0.0);
}

std::span<const double> SigVector::level(int k) const {
  return {coeffs_.data() + level_offset(d_, k), ipow(static_cast<std::size_t>(d_), k)};
}

std::span<double> SigVector::level(int k) {
  return {coeffs_.data() + level_offset(d_, k), ipow(static_cast<std::size_t>(d_), k)};
}

void SigVector::set_zero() { std::fill(coeffs_.begin(), coeffs_.end(), 0.0); }

void SigVector::append_segment(std::span<const double> inc) {
  if (static_cast<int>(inc.size()) != d_)
    throw ValidationError("append_segment: increment dimension mismatch");
  const std::size_t d = static_cast<std::size_t>(d_);
  // Level k of the product is sum_j S_{k-j} inc^j / j!, evaluated by Horner:
  // B <- S_m + B (x) inc / (k - m + 1), top level first so lower levels are
  // still the old values when read.
  scratch_.resize(ipow(d, depth_) * 2);
  for (int k = depth_; k >= 1; --k) {
    double* buf = scratch_.data();
    double* next = scratch_.data() + ipow(d, depth_);
    // B_0 = 1 (level 0)
    std::size_t width = 1;
    buf[0] = 1.0;
    for (int m = 1; m <= k; ++m) {
      const double scale = 1.0 / static_cast<double>(k - m + 1);
      auto sm = level(m);
      for (std::size_t a = 0; a < width; ++a) {
        const double ba = buf[a] * scale;
        for (std::size_t b = 0; b < d; ++b) next[a * d + b] = ba * inc[b];
      }
      width *= d;
      if (m < k) {
        for (std::size_t a = 0; a < width; ++a) next[a] += sm[a];
      }
      std::swap(buf, next);
    }
    auto sk = level(k);
    for (std::size_t a = 0; a < width; ++a) sk[a] += buf[a];
  }
}

void SigVector::append_time(double u) {
  if (u == 0.0) return;
  const std::size_t d = static_cast<std::size_t>(d_);
  // Only words whose trailing letters are d pick up contributions:
  // new S_{w d^j} = sum_{i<=j} S_{w d^{j-i}} u^i / i!, processed top level first.
  for (int k = depth_; k >= 1; --k) {
    auto sk = level(k);
    // Index of word (w, d^j) at level k: rank(w) * d^j + (d^j - 1).
    for (int j = 1; j <= k; ++j) {
      const std::size_t dj = ipow(d, j);
      const std::size_t prefixes = ipow(d, k - j);
      for (std::size_t w = 0; w < prefixes; ++w) {
        // contribution S_w * u^j / j! where S_w is level k-j (or 1 if k==j)
        double coeff = 1.0;
        for (int i = 1; i <= j; ++i) coeff *= u / static_cast<double>(i);
        const double base = (k == j) ? 1.0 : level(k - j)[w];
        sk[w * dj + (dj - 1)] += base * coeff;
      }
    }
  }
}

SigVector segment_signature(std::span<const double> increment, int depth) {
  SigVector s(static_cast<int>(increment.size()), depth);
  s.append_segment(increment);
  return s;
}

SigVector chen_concat(const SigVector& a, const SigVector& b) {
  if (a.alphabet() != b.alphabet() || a.depth() != b.depth())
    throw ValidationError("chen_concat: shape mismatch");
  const int depth = a.depth();
  const std::size_t d = static_cast<std::size_t>(a.alphabet());
  SigVector out(a.alphabet(), depth);
  for (int k = 1; k <= depth; ++k) {
    auto ok = out.level(k);
    auto ak = a.level(k);
    auto bk = b.level(k);
    for (std::size_t i = 0; i < ok.size(); ++i) ok[i] = ak[i] + bk[i];
    for (int j = 1; j < k; ++j) {
      auto aj = a.level(j);
      auto bkj = b.level(k - j);
      const std::size_t wb = ipow(d, k - j);
      for (std::size_t x = 0; x < aj.size(); ++x) {
        const double ax = aj[x];
        if (ax == 0.0) continue;
        double* dst = ok.data() + x * wb;
        for (std::size_t y = 0; y < wb; ++y) dst[y] += ax * bkj[y];
      }
    }
  }
  return out;
}

namespace {

// Applies the part of `seg` that lies in [.., t] to `sig`.
void apply_segment_until(SigVector& sig, const Segment& seg, double t) {
  if (seg.kind == SegmentKind::kFeatureJump) {
    sig.append_segment(seg.increment);
    return;
  }
  const double frac =
      seg.end_time <= t ? 1.0 : (t - seg.start_time) / (seg.end_time - seg.start_time);
  const std::size_t last = seg.increment.size() - 1;
  bool time_only = true;
  for (std::size_t j = 0; j < last; ++j)
    if (seg.increment[j] != 0.0) time_only = false;
  if (time_only) {
    sig.append_time(frac * seg.increment[last]);
  } else {
    std::vector<double> inc(seg.increment);
    for (double& v : inc) v *= frac;
    sig.append_segment(inc);
  }
}

}  // namespace

SigVector path_signature(const EmbeddedPath& p, double t, int depth) {
  if (t < 0.0 || t > p.horizon())
    throw ValidationError("path_signature: time outside [0, horizon]");
  SigVector sig(static_cast<int>(p.dim()), depth);
  for (const auto& seg : p.segments()) {
    if (seg.start_time > t) break;
    if (seg.kind == SegmentKind::kTimeAdvance && seg.start_time == t) break;
    apply_segment_until(sig, seg, t);
  }
  return sig;
}

std::vector<SigVector> stream_signatures(const EmbeddedPath& p,
                                         std::span<const double> eval_times, int depth) {
  for (std::size_t i = 1; i < eval_times.size(); ++i)
    if (eval_times[i] < eval_times[i - 1])
      throw ValidationError("stream_signatures: evaluation times must be ascending");
  std::vector<SigVector> out;
  out.reserve(eval_times.size());
  if (eval_times.empty()) return out;
  if (eval_times.front() < 0.0 || eval_times.back() > p.horizon())
    throw ValidationError("stream_signatures: time outside [0, horizon]");

  SigVector sig(static_cast<int>(p.dim()), depth);  // signature up to `reached`
  const auto& segs = p.segments();
  std::size_t next = 0;
  for (double t : eval_times) {
    // Consume whole segments that end at or before t (jumps at time <= t).
    while (next < segs.size()) {
      const auto& seg = segs[next];
      const bool whole = seg.kind == SegmentKind::kFeatureJump ? seg.start_time <= t
                                                               : seg.end_time <= t;
      if (!whole) break;
      apply_segment_until(sig, seg, t);
      ++next;
    }
    SigVector at_t = sig;
    if (next < segs.size()) {
      const auto& seg = segs[next];
      if (seg.kind == SegmentKind::kTimeAdvance && seg.start_time < t)
        apply_segment_until(at_t, seg, t);
    }
    out.push_back(std::move(at_t));
  }
  return out;
}

TimeSuffixTable TimeSuffixTable::build(int d, int depth) {
  check_shape(d, depth);
  TimeSuffixTable table;
  table.d = d;
  table.depth = depth;
  table.by_power.resize(static_cast<std::size_t>(depth) + 1);
  const std::size_t q = sig_dim(d, depth);
  for (std::size_t v = 0; v < q; ++v) {
    Word w = word_at(v, d, depth);
    table.by_power[0].push_back({v, v});
    std::size_t j = 0;
    while (j < w.length() && w.letters[w.length() - 1 - j] == d) {
      ++j;
      if (j == w.length()) {
        table.by_power[j].push_back({v, kEmptyWord});
      } else {
        Word prefix{std::vector<int>(w.letters.begin(), w.letters.end() - static_cast<long>(j))};
        table.by_power[j].push_back({v, word_index(prefix, d, depth)});
      }
    }
  }
  for (int k = 1; k <= depth; ++k)
    table.time_words.push_back(word_index(Word{std::vector<int>(static_cast<std::size_t>(k), d)}, d, depth));
  return table;
}

}  // namespace sigsurv
