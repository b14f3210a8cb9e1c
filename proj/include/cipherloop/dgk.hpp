#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>

#include "cipherloop/bigint.hpp"
#include "cipherloop/rng.hpp"

namespace cipherloop::dgk {

/// Key sizes. `u_bits` sizes the prime plaintext modulus u; `t_bits` sizes the
/// hidden subgroup orders v_p, v_q.
struct Params {
  std::size_t n_bits = 512;
  std::size_t t_bits = 160;
  std::size_t u_bits = 16;
};

struct PublicKey {
  BigUint n, g, h;
  BigUint u;  // prime plaintext modulus
  std::size_t t_bits = 0;
  std::uint64_t fingerprint = 0;
};

struct PrivateKey {
  PublicKey pk;
  BigUint p, q, vp, vq;
  BigUint vpvq;
};

struct Ciphertext {
  BigUint value;
  std::uint64_t fingerprint = 0;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

std::pair<PublicKey, PrivateKey> keygen(const Params& params, Rng& rng);

/// g^m h^r mod n with r of 2.5 * t_bits random bits. m must be < u.
Ciphertext encrypt(const PublicKey& pk, const BigUint& m, Rng& rng);
Ciphertext encrypt_with_nonce(const PublicKey& pk, const BigUint& m, const BigUint& r);

Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
Ciphertext sub(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
/// Encryption of k * m mod u.
Ciphertext cmlt(const PublicKey& pk, const BigUint& k, const Ciphertext& c);

/// True iff the plaintext is 0 mod u: c^(v_p v_q) is 1 modulo both primes.
bool is_zero(const PrivateKey& sk, const Ciphertext& c);

/// Full decryption by table lookup over Z_u. Test-only; the table is built
/// on first use and costs O(u) memory.
class Decryptor {
 public:
  explicit Decryptor(const PrivateKey& sk);
  BigUint decrypt(const Ciphertext& c) const;

 private:
  const PrivateKey* sk_;
  std::unordered_map<std::string, std::uint64_t> table_;
};

void write(ByteWriter& w, const Ciphertext& c);
Ciphertext read(ByteReader& r);

}  // namespace cipherloop::dgk

namespace cipherloop {
using DgkPublicKey = dgk::PublicKey;
using DgkPrivateKey = dgk::PrivateKey;
using DgkCiphertext = dgk::Ciphertext;
}  // namespace cipherloop
