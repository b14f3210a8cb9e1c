#include "cipherloop/rng.hpp"

#include <sodium.h>

#include "cipherloop/error.hpp"

namespace cipherloop {
namespace {

void ensure_sodium() {
  static const int init = sodium_init();
  if (init < 0) throw Error(ErrorCode::InvalidArgument, "libsodium initialisation failed");
}

std::array<std::uint8_t, Rng::kKeyBytes> derive_key(std::span<const std::uint8_t> material) {
  std::array<std::uint8_t, Rng::kKeyBytes> key{};
  crypto_hash_sha256(key.data(), material.data(), material.size());
  return key;
}

}  // namespace

Rng::Rng(const std::array<std::uint8_t, kKeyBytes>& key) : key_(key) { ensure_sodium(); }

Rng Rng::from_seed(std::uint64_t seed) {
  ByteWriter w;
  w.str("cipherloop.rng.seed");
  w.u64(seed);
  return Rng(derive_key(w.bytes()));
}

Rng Rng::from_entropy() {
  ensure_sodium();
  std::array<std::uint8_t, kKeyBytes> key{};
  randombytes_buf(key.data(), key.size());
  return Rng(key);
}

Rng Rng::split(std::string_view label) const {
  ByteWriter w;
  w.str("cipherloop.rng.split");
  w.raw(key_);
  w.str(label);
  return Rng(derive_key(w.bytes()));
}

void Rng::refill() {
  // 64-byte ChaCha20 blocks, nonce fixed at zero, counter advances across refills.
  constexpr std::size_t kBlocks = 1024 / 64;
  std::array<std::uint8_t, crypto_stream_chacha20_NONCEBYTES> nonce{};
  buffer_.fill(0);
  crypto_stream_chacha20_xor_ic(buffer_.data(), buffer_.data(), buffer_.size(), nonce.data(),
                                block_counter_, key_.data());
  block_counter_ += kBlocks;
  buffer_pos_ = 0;
}

void Rng::fill(std::span<std::uint8_t> out) {
  for (auto& b : out) {
    if (buffer_pos_ == buffer_.size()) refill();
    b = buffer_[buffer_pos_++];
  }
}

std::uint64_t Rng::next_u64() {
  std::array<std::uint8_t, 8> b{};
  fill(b);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

bool Rng::next_bit() { return (next_u64() & 1u) != 0; }

BigUint Rng::bits(std::size_t nbits) {
  if (nbits == 0) return BigUint(0);
  Bytes buf((nbits + 7) / 8);
  fill(buf);
  const std::size_t excess = buf.size() * 8 - nbits;
  buf[0] &= static_cast<std::uint8_t>(0xffu >> excess);
  return BigUint::from_be_bytes(buf);
}

}  // namespace cipherloop
