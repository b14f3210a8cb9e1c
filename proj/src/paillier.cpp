#include "cipherloop/paillier.hpp"

#include <array>

#include <sodium.h>

#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"

namespace cipherloop::paillier {
namespace {

void check_key(const PublicKey& pk, const Ciphertext& c) {
  if (c.fingerprint != pk.fingerprint) throw Error(ErrorCode::KeyMismatch, "ciphertext under a different key");
}

// L_d(u) = (u - 1) / d
BigUint ell(const BigUint& u, const BigUint& d) { return (u - BigUint(1)) / d; }

}  // namespace

std::uint64_t fingerprint_of(const BigUint& modulus) {
  const auto bytes = modulus.to_be_bytes();
  std::array<std::uint8_t, crypto_hash_sha256_BYTES> h{};
  crypto_hash_sha256(h.data(), bytes.data(), bytes.size());
  std::uint64_t f = 0;
  for (int i = 0; i < 8; ++i) f = (f << 8) | h[static_cast<std::size_t>(i)];
  return f;
}

PublicKey PublicKey::from_modulus(const BigUint& n) {
  if (n <= BigUint(2)) throw Error(ErrorCode::InvalidArgument, "paillier modulus too small");
  PublicKey pk;
  pk.n = n;
  pk.n_squared = n * n;
  pk.g = n + BigUint(1);
  pk.fingerprint = fingerprint_of(n);
  return pk;
}

PrivateKey PrivateKey::from_primes(const BigUint& p, const BigUint& q) {
  if (p == q) throw Error(ErrorCode::InvalidArgument, "paillier primes must differ");
  const BigUint one(1);
  PrivateKey sk;
  sk.pk = PublicKey::from_modulus(p * q);
  sk.p = p;
  sk.q = q;
  const BigUint phi = (p - one) * (q - one);
  if (gcd(sk.pk.n, phi) != one) throw Error(ErrorCode::InvalidArgument, "gcd(n, phi(n)) != 1");
  sk.lambda = lcm(p - one, q - one);
  sk.mu = modinv(sk.lambda, sk.pk.n);
  sk.p_squared = p * p;
  sk.q_squared = q * q;
  // h_p = L_p(g^(p-1) mod p^2)^-1 mod p
  sk.hp = modinv(ell(modexp(sk.pk.g, p - one, sk.p_squared), p), p);
  sk.hq = modinv(ell(modexp(sk.pk.g, q - one, sk.q_squared), q), q);
  sk.q_inv_p = modinv(q, p);
  return sk;
}

std::pair<PublicKey, PrivateKey> keygen(std::size_t bits, Rng& rng) {
  if (bits < 8) throw Error(ErrorCode::InvalidArgument, "paillier modulus needs at least 8 bits");
  const std::size_t half = bits / 2;
  for (;;) {
    const BigUint p = gen_prime(half, rng);
    const BigUint q = gen_prime(bits - half, rng);
    if (p == q) continue;
    const BigUint n = p * q;
    if (n.bit_length() != bits) continue;
    if (gcd(n, (p - BigUint(1)) * (q - BigUint(1))) != BigUint(1)) continue;
    auto sk = PrivateKey::from_primes(p, q);
    return {sk.pk, std::move(sk)};
  }
}

Ciphertext encrypt_with_nonce(const PublicKey& pk, const BigUint& m, const BigUint& r) {
  if (m >= pk.n) throw Error(ErrorCode::MessageOutOfRange, "plaintext must lie in [0, n)");
  // (1 + n)^m = 1 + m n (mod n^2)
  const BigUint gm = (BigUint(1) + m * pk.n) % pk.n_squared;
  const BigUint rn = modexp(r, pk.n, pk.n_squared);
  return Ciphertext{mod_mul(gm, rn, pk.n_squared), pk.fingerprint};
}

Ciphertext encrypt(const PublicKey& pk, const BigUint& m, Rng& rng) {
  return encrypt_with_nonce(pk, m, sample_unit(pk.n, rng));
}

Ciphertext encrypt_trivial(const PublicKey& pk, const BigUint& m) {
  return Ciphertext{(BigUint(1) + (m % pk.n) * pk.n) % pk.n_squared, pk.fingerprint};
}

BigUint decrypt_textbook(const PrivateKey& sk, const Ciphertext& c) {
  check_key(sk.pk, c);
  const BigUint u = modexp(c.value, sk.lambda, sk.pk.n_squared);
  return mod_mul(ell(u, sk.pk.n), sk.mu, sk.pk.n);
}

BigUint decrypt(const PrivateKey& sk, const Ciphertext& c) {
  check_key(sk.pk, c);
  const BigUint one(1);
  const BigUint mp = mod_mul(ell(modexp(c.value % sk.p_squared, sk.p - one, sk.p_squared), sk.p), sk.hp, sk.p);
  const BigUint mq = mod_mul(ell(modexp(c.value % sk.q_squared, sk.q - one, sk.q_squared), sk.q), sk.hq, sk.q);
  // m = mq + q * ((mp - mq) * q^-1 mod p)
  const BigUint h = mod_mul(mod_sub(mp, mq % sk.p, sk.p), sk.q_inv_p, sk.p);
  return (mq + h * sk.q) % sk.pk.n;
}

Ciphertext add(const PublicKey& pk, const Ciphertext& c1, const Ciphertext& c2) {
  check_key(pk, c1);
  check_key(pk, c2);
  return Ciphertext{mod_mul(c1.value, c2.value, pk.n_squared), pk.fingerprint};
}

Ciphertext sub(const PublicKey& pk, const Ciphertext& c1, const Ciphertext& c2) {
  check_key(pk, c1);
  check_key(pk, c2);
  return Ciphertext{mod_mul(c1.value, modinv(c2.value, pk.n_squared), pk.n_squared), pk.fingerprint};
}

Ciphertext cmlt(const PublicKey& pk, const BigUint& k, const Ciphertext& c) {
  check_key(pk, c);
  return Ciphertext{modexp(c.value, k % pk.n, pk.n_squared), pk.fingerprint};
}

Ciphertext add_plain(const PublicKey& pk, const Ciphertext& c, const BigUint& k) {
  check_key(pk, c);
  return add(pk, c, encrypt_trivial(pk, k));
}

Ciphertext refresh(const PublicKey& pk, const Ciphertext& c, Rng& rng) {
  check_key(pk, c);
  return add(pk, c, encrypt(pk, BigUint(0), rng));
}

void write(ByteWriter& w, const Ciphertext& c) {
  w.big(c.value);
  w.u64(c.fingerprint);
}

Ciphertext read(ByteReader& r) {
  Ciphertext c;
  c.value = r.big();
  c.fingerprint = r.u64();
  return c;
}

}  // namespace cipherloop::paillier
