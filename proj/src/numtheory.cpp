#include "cipherloop/numtheory.hpp"

#include <array>

#include "cipherloop/error.hpp"

namespace cipherloop {
namespace {

constexpr std::array<unsigned, 54> kSmallPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,  59,  61,
    67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
    157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251};

}  // namespace

BigUint modexp(const BigUint& base, const BigUint& exp, const BigUint& m) {
  if (m.is_zero()) throw Error(ErrorCode::InvalidArgument, "modexp with zero modulus");
  mpz_class r;
  mpz_powm(r.get_mpz_t(), base.mpz().get_mpz_t(), exp.mpz().get_mpz_t(), m.mpz().get_mpz_t());
  return BigUint(std::move(r));
}

BigUint modinv(const BigUint& a, const BigUint& m) {
  if (m.is_zero()) throw Error(ErrorCode::InvalidArgument, "modinv with zero modulus");
  mpz_class r;
  if (mpz_invert(r.get_mpz_t(), a.mpz().get_mpz_t(), m.mpz().get_mpz_t()) == 0) {
    throw Error(ErrorCode::NotInvertible, "gcd(a, m) != 1");
  }
  return BigUint(std::move(r));
}

BigUint sample_below(const BigUint& bound, Rng& rng) {
  if (bound.is_zero()) throw Error(ErrorCode::InvalidArgument, "sample_below(0)");
  if (bound == BigUint(1)) return BigUint(0);
  const std::size_t nbits = (bound - BigUint(1)).bit_length();
  for (;;) {
    auto v = rng.bits(nbits);
    if (v < bound) return v;
  }
}

BigUint sample_unit(const BigUint& m, Rng& rng) {
  for (;;) {
    auto v = sample_below(m, rng);
    if (!v.is_zero() && gcd(v, m) == BigUint(1)) return v;
  }
}

bool is_probable_prime(const BigUint& n, Rng& rng, int rounds) {
  if (n < BigUint(2)) return false;
  for (unsigned p : kSmallPrimes) {
    if (n == BigUint(p)) return true;
    if ((n % BigUint(p)).is_zero()) return false;
  }
  const BigUint one(1);
  const BigUint n1 = n - one;
  std::size_t s = 0;
  while (!n1.bit(s)) ++s;
  const BigUint d = n1 >> s;
  const BigUint base_span = n - BigUint(3);  // bases drawn from [2, n-2]
  for (int round = 0; round < rounds; ++round) {
    const BigUint a = sample_below(base_span, rng) + BigUint(2);
    BigUint x = modexp(a, d, n);
    if (x == one || x == n1) continue;
    bool witness = true;
    for (std::size_t r = 1; r < s; ++r) {
      x = mod_mul(x, x, n);
      if (x == n1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

BigUint gen_prime(std::size_t bits, Rng& rng) {
  if (bits < 3) throw Error(ErrorCode::InvalidArgument, "gen_prime needs at least 3 bits");
  for (;;) {
    mpz_class c = rng.bits(bits).mpz();
    mpz_setbit(c.get_mpz_t(), bits - 1);
    mpz_setbit(c.get_mpz_t(), 0);
    BigUint candidate(std::move(c));
    if (is_probable_prime(candidate, rng)) return candidate;
  }
}

BigUint mod_add(const BigUint& a, const BigUint& b, const BigUint& m) { return (a + b) % m; }

BigUint mod_sub(const BigUint& a, const BigUint& b, const BigUint& m) {
  mpz_class r = a.mpz() - b.mpz();
  mpz_mod(r.get_mpz_t(), r.get_mpz_t(), m.mpz().get_mpz_t());
  return BigUint(std::move(r));
}

BigUint mod_mul(const BigUint& a, const BigUint& b, const BigUint& m) { return (a * b) % m; }

ModRing::ModRing(BigUint modulus) : m_(std::move(modulus)) {
  if (m_ <= BigUint(1)) throw Error(ErrorCode::InvalidArgument, "ring modulus must exceed 1");
}

}  // namespace cipherloop
