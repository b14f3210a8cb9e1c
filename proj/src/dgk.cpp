#include "cipherloop/dgk.hpp"

#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"
#include "cipherloop/paillier.hpp"

namespace cipherloop::dgk {
namespace {

void check_key(const PublicKey& pk, const Ciphertext& c) {
  if (c.fingerprint != pk.fingerprint) throw Error(ErrorCode::KeyMismatch, "DGK ciphertext under a different key");
}

// Prime p = 2 * u * v * x + 1 in [sqrt(2) 2^(bits-1), 2^bits), so that the
// product of two such primes has exactly the combined bit length.
BigUint structured_prime(std::size_t bits, const BigUint& u, const BigUint& v, Rng& rng) {
  const BigUint uv2 = BigUint(2) * u * v;
  if (bits <= uv2.bit_length() + 1) throw Error(ErrorCode::InvalidArgument, "DGK modulus too small for u and t");
  mpz_class floor_root;
  mpz_sqrt(floor_root.get_mpz_t(), pow2(2 * bits - 1).mpz().get_mpz_t());
  const BigUint lo = (BigUint(std::move(floor_root)) + uv2) / uv2;
  const BigUint hi = (pow2(bits) - BigUint(2)) / uv2;
  if (hi < lo) throw Error(ErrorCode::InvalidArgument, "DGK modulus too small for u and t");
  for (;;) {
    const BigUint p = uv2 * (lo + sample_below(hi - lo + BigUint(1), rng)) + BigUint(1);
    if (is_probable_prime(p, rng)) return p;
  }
}

// Element of Z_p* whose order is exactly the product of the given distinct primes.
BigUint element_of_order(const BigUint& p, const BigUint& f1, const BigUint* f2, Rng& rng) {
  const BigUint one(1);
  const BigUint order = f2 ? f1 * *f2 : f1;
  const BigUint cofactor = (p - one) / order;
  for (;;) {
    const BigUint a = sample_below(p - BigUint(2), rng) + BigUint(2);
    const BigUint e = modexp(a, cofactor, p);
    if (e == one) continue;
    if (f2) {
      if (modexp(e, f1, p) == one || modexp(e, *f2, p) == one) continue;
    }
    return e;
  }
}

BigUint crt(const BigUint& xp, const BigUint& p, const BigUint& xq, const BigUint& q) {
  const BigUint h = mod_mul(mod_sub(xp, xq % p, p), modinv(q, p), p);
  return xq + h * q;
}

}  // namespace

std::pair<PublicKey, PrivateKey> keygen(const Params& params, Rng& rng) {
  if (params.u_bits < 3 || params.t_bits < 8) throw Error(ErrorCode::InvalidArgument, "DGK parameters too small");
  const BigUint u = gen_prime(params.u_bits, rng);
  BigUint vp, vq;
  do {
    vp = gen_prime(params.t_bits, rng);
    vq = gen_prime(params.t_bits, rng);
  } while (vp == vq || vp == u || vq == u);

  const std::size_t half = params.n_bits / 2;
  BigUint p, q;
  do {
    p = structured_prime(half, u, vp, rng);
    q = structured_prime(params.n_bits - half, u, vq, rng);
  } while (p == q || (p * q).bit_length() != params.n_bits);

  const BigUint gp = element_of_order(p, u, &vp, rng);
  const BigUint gq = element_of_order(q, u, &vq, rng);
  const BigUint hp = element_of_order(p, vp, nullptr, rng);
  const BigUint hq = element_of_order(q, vq, nullptr, rng);

  PrivateKey sk;
  sk.pk.n = p * q;
  sk.pk.g = crt(gp, p, gq, q);
  sk.pk.h = crt(hp, p, hq, q);
  sk.pk.u = u;
  sk.pk.t_bits = params.t_bits;
  sk.pk.fingerprint = paillier::fingerprint_of(sk.pk.n);
  sk.p = p;
  sk.q = q;
  sk.vp = vp;
  sk.vq = vq;
  sk.vpvq = vp * vq;
  return {sk.pk, std::move(sk)};
}

Ciphertext encrypt_with_nonce(const PublicKey& pk, const BigUint& m, const BigUint& r) {
  if (m >= pk.u) throw Error(ErrorCode::MessageOutOfRange, "DGK plaintext must lie in [0, u)");
  const BigUint c = mod_mul(modexp(pk.g, m, pk.n), modexp(pk.h, r, pk.n), pk.n);
  return Ciphertext{c, pk.fingerprint};
}

Ciphertext encrypt(const PublicKey& pk, const BigUint& m, Rng& rng) {
  const std::size_t r_bits = (5 * pk.t_bits + 1) / 2;
  return encrypt_with_nonce(pk, m, rng.bits(r_bits));
}

Ciphertext add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  check_key(pk, a);
  check_key(pk, b);
  return Ciphertext{mod_mul(a.value, b.value, pk.n), pk.fingerprint};
}

Ciphertext sub(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  check_key(pk, a);
  check_key(pk, b);
  return Ciphertext{mod_mul(a.value, modinv(b.value, pk.n), pk.n), pk.fingerprint};
}

Ciphertext cmlt(const PublicKey& pk, const BigUint& k, const Ciphertext& c) {
  check_key(pk, c);
  return Ciphertext{modexp(c.value, k, pk.n), pk.fingerprint};
}

bool is_zero(const PrivateKey& sk, const Ciphertext& c) {
  check_key(sk.pk, c);
  const BigUint one(1);
  return modexp(c.value % sk.p, sk.vpvq, sk.p) == one && modexp(c.value % sk.q, sk.vpvq, sk.q) == one;
}

Decryptor::Decryptor(const PrivateKey& sk) : sk_(&sk) {
  if (sk.pk.u.bit_length() > 24) throw Error(ErrorCode::InvalidArgument, "plaintext space too large for table decryption");
  // c^(v_p) mod p = (g^(v_p))^m mod p
  const BigUint base = modexp(sk.pk.g % sk.p, sk.vp, sk.p);
  BigUint acc(1);
  const std::uint64_t u = sk.pk.u.low_u64();
  table_.reserve(u);
  for (std::uint64_t m = 0; m < u; ++m) {
    table_.emplace(acc.to_hex(), m);
    acc = mod_mul(acc, base, sk.p);
  }
}

BigUint Decryptor::decrypt(const Ciphertext& c) const {
  check_key(sk_->pk, c);
  const BigUint key = modexp(c.value % sk_->p, sk_->vp, sk_->p);
  const auto it = table_.find(key.to_hex());
  if (it == table_.end()) throw Error(ErrorCode::InvalidArgument, "not a valid DGK ciphertext");
  return BigUint(it->second);
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

}  // namespace cipherloop::dgk
