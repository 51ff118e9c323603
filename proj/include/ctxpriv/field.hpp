#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>

#include "ctxpriv/error.hpp"

namespace ctxpriv {

struct FieldElem {
  std::uint64_t value = 0;
  friend constexpr auto operator<=>(FieldElem, FieldElem) = default;
};

namespace detail {

constexpr std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

constexpr std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1 % m;
  base %= m;
  while (exp) {
    if (exp & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1;
  }
  return result;
}

// Deterministic Miller-Rabin; these bases are exact for all 64-bit inputs.
constexpr bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  constexpr std::array<std::uint64_t, 12> bases{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (std::uint64_t p : bases) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : bases) {
    std::uint64_t x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

}  // namespace detail

inline constexpr std::uint64_t kDefaultModulus = (1ULL << 31) - 1;

// Prime field Z_p. Primality is checked once at construction.
class Field {
 public:
  explicit Field(std::uint64_t modulus = kDefaultModulus) : p_(modulus) {
    if (!detail::is_prime_u64(modulus)) {
      throw Error(Errc::invalid_argument, "field modulus " + std::to_string(modulus) + " is not prime");
    }
  }

  std::uint64_t modulus() const noexcept { return p_; }

  FieldElem elem(std::uint64_t v) const noexcept { return {v % p_}; }
  FieldElem from_signed(std::int64_t v) const noexcept {
    const auto m = static_cast<__int128>(p_);
    __int128 r = static_cast<__int128>(v) % m;
    if (r < 0) r += m;
    return {static_cast<std::uint64_t>(r)};
  }

  FieldElem add(FieldElem a, FieldElem b) const noexcept {
    const std::uint64_t s = a.value + b.value;
    return {(s >= p_ || s < a.value) ? s - p_ : s};
  }
  FieldElem sub(FieldElem a, FieldElem b) const noexcept {
    return {a.value >= b.value ? a.value - b.value : a.value + (p_ - b.value)};
  }
  FieldElem neg(FieldElem a) const noexcept { return {a.value == 0 ? 0 : p_ - a.value}; }
  FieldElem mul(FieldElem a, FieldElem b) const noexcept { return {detail::mulmod(a.value, b.value, p_)}; }
  FieldElem pow(FieldElem a, std::uint64_t e) const noexcept { return {detail::powmod(a.value, e, p_)}; }

  FieldElem inv(FieldElem a) const {
    if (a.value == 0) throw Error(Errc::singular_system, "zero has no inverse");
    return pow(a, p_ - 2);
  }

 private:
  std::uint64_t p_;
};

}  // namespace ctxpriv
