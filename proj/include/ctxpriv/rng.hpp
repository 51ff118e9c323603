#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "ctxpriv/error.hpp"

namespace ctxpriv {

namespace detail {

constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Labelled random stream. The same (master_seed, stream_label) always yields
// the same sequence; distinct labels give unrelated streams. Bounded draws use
// rejection sampling on the raw engine output instead of the <random>
// distributions, whose output is implementation-defined.
class SimRng {
 public:
  SimRng(std::uint64_t master_seed, std::string stream_label)
      : master_seed_(master_seed),
        label_(std::move(stream_label)),
        engine_(detail::splitmix64(master_seed_ ^ detail::fnv1a64(label_))) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  const std::string& stream_label() const noexcept { return label_; }

  // Independent child stream; the label is nested under this one.
  SimRng fork(std::string_view child) const {
    return SimRng(master_seed_, label_ + "/" + std::string(child));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, bound).
  std::uint64_t uniform(std::uint64_t bound) {
    if (bound == 0) throw Error(Errc::invalid_argument, "uniform bound must be positive");
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % bound;
  }

  // Uniform in [lo, hi].
  std::uint64_t uniform_between(std::uint64_t lo, std::uint64_t hi) {
    if (hi < lo) throw Error(Errc::invalid_argument, "empty range");
    if (hi - lo == UINT64_MAX) return engine_();
    return lo + uniform(hi - lo + 1);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform_real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  void fill_bytes(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
      std::uint64_t word = engine_();
      for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
        out[i] = static_cast<std::uint8_t>(word & 0xff);
        word >>= 8;
      }
    }
  }

 private:
  std::uint64_t master_seed_;
  std::string label_;
  std::mt19937_64 engine_;
};

}  // namespace ctxpriv
