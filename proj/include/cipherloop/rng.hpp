#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "cipherloop/bigint.hpp"

namespace cipherloop {

/// ChaCha20 keystream generator.
///
/// A seeded instance reproduces its full output stream; `from_entropy`
/// draws the key from the operating system. Instances are single-owner;
/// use `split` to hand independent streams to other parties or threads.
class Rng {
 public:
  static constexpr std::size_t kKeyBytes = 32;

  static Rng from_seed(std::uint64_t seed);
  static Rng from_entropy();
  explicit Rng(const std::array<std::uint8_t, kKeyBytes>& key);

  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;
  Rng(Rng&&) noexcept = default;
  Rng& operator=(Rng&&) noexcept = default;

  /// Child generator whose stream is independent of this one and of
  /// children derived under different labels.
  Rng split(std::string_view label) const;

  void fill(std::span<std::uint8_t> out);
  std::uint64_t next_u64();
  bool next_bit();
  /// Uniform integer with exactly `bits` random bits (value < 2^bits).
  BigUint bits(std::size_t bits);

 private:
  void refill();

  std::array<std::uint8_t, kKeyBytes> key_{};
  std::uint64_t block_counter_ = 0;
  std::array<std::uint8_t, 1024> buffer_{};
  std::size_t buffer_pos_ = 1024;
};

}  // namespace cipherloop
