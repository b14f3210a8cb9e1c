#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>

#include "cipherloop/bigint.hpp"
#include "cipherloop/rng.hpp"

namespace cipherloop::paillier {

/// 8-byte tag derived from the modulus; ciphertexts carry it so that
/// operations across different keys are rejected.
std::uint64_t fingerprint_of(const BigUint& modulus);

struct PublicKey {
  BigUint n;
  BigUint n_squared;
  BigUint g;  // always n + 1
  std::uint64_t fingerprint = 0;

  static PublicKey from_modulus(const BigUint& n);
  std::size_t bits() const noexcept { return n.bit_length(); }
};

struct PrivateKey {
  PublicKey pk;
  BigUint p, q;
  BigUint lambda;  // lcm(p-1, q-1)
  BigUint mu;      // lambda^-1 mod n
  // CRT decryption constants.
  BigUint p_squared, q_squared, hp, hq, q_inv_p;

  static PrivateKey from_primes(const BigUint& p, const BigUint& q);
};

struct Ciphertext {
  BigUint value;
  std::uint64_t fingerprint = 0;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

/// Fresh key pair with a modulus of exactly `bits` bits.
std::pair<PublicKey, PrivateKey> keygen(std::size_t bits, Rng& rng);

Ciphertext encrypt(const PublicKey& pk, const BigUint& m, Rng& rng);
/// Encryption with caller-chosen randomness r (test hook; r must be a unit mod n).
Ciphertext encrypt_with_nonce(const PublicKey& pk, const BigUint& m, const BigUint& r);
/// g^m mod n^2 with unit randomness. Only safe when the result is later
/// combined with a randomized ciphertext.
Ciphertext encrypt_trivial(const PublicKey& pk, const BigUint& m);

/// CRT decryption.
BigUint decrypt(const PrivateKey& sk, const Ciphertext& c);
/// Textbook L(c^lambda mod n^2) * mu mod n.
BigUint decrypt_textbook(const PrivateKey& sk, const Ciphertext& c);

Ciphertext add(const PublicKey& pk, const Ciphertext& c1, const Ciphertext& c2);
Ciphertext sub(const PublicKey& pk, const Ciphertext& c1, const Ciphertext& c2);
/// Encryption of k * m, k taken mod n.
Ciphertext cmlt(const PublicKey& pk, const BigUint& k, const Ciphertext& c);
/// Encryption of m + k without fresh randomness.
Ciphertext add_plain(const PublicKey& pk, const Ciphertext& c, const BigUint& k);
/// Same plaintext, fresh randomness.
Ciphertext refresh(const PublicKey& pk, const Ciphertext& c, Rng& rng);

/// Length-prefixed value followed by the 8-byte key fingerprint.
void write(ByteWriter& w, const Ciphertext& c);
Ciphertext read(ByteReader& r);

}  // namespace cipherloop::paillier

namespace cipherloop {
using AhePublicKey = paillier::PublicKey;
using AhePrivateKey = paillier::PrivateKey;
using AheCiphertext = paillier::Ciphertext;
}  // namespace cipherloop
