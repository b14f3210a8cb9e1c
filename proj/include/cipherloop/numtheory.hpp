#pragma once

#include <cstddef>

#include "cipherloop/bigint.hpp"
#include "cipherloop/rng.hpp"

namespace cipherloop {

/// base^exp mod m. Throws InvalidArgument on a zero modulus.
BigUint modexp(const BigUint& base, const BigUint& exp, const BigUint& m);

/// Inverse of a modulo m. Throws NotInvertible when gcd(a, m) != 1.
BigUint modinv(const BigUint& a, const BigUint& m);

/// Uniform draw from [0, bound) by rejection sampling.
BigUint sample_below(const BigUint& bound, Rng& rng);

/// Uniform draw from the units of Z_m.
BigUint sample_unit(const BigUint& m, Rng& rng);

inline constexpr int kMillerRabinRounds = 40;

/// Miller-Rabin with `rounds` random bases, preceded by trial division.
bool is_probable_prime(const BigUint& n, Rng& rng, int rounds = kMillerRabinRounds);

/// Probable prime with exactly `bits` bits.
BigUint gen_prime(std::size_t bits, Rng& rng);

/// (a + b) mod m, (a - b) mod m, (a * b) mod m for residues a, b < m.
BigUint mod_add(const BigUint& a, const BigUint& b, const BigUint& m);
BigUint mod_sub(const BigUint& a, const BigUint& b, const BigUint& m);
BigUint mod_mul(const BigUint& a, const BigUint& b, const BigUint& m);

/// Residue ring Z_m; all produced residues are reduced into [0, m).
class ModRing {
 public:
  explicit ModRing(BigUint modulus);

  const BigUint& modulus() const noexcept { return m_; }
  BigUint reduce(const BigUint& a) const { return a % m_; }
  BigUint add(const BigUint& a, const BigUint& b) const { return mod_add(a, b, m_); }
  BigUint sub(const BigUint& a, const BigUint& b) const { return mod_sub(a, b, m_); }
  BigUint mul(const BigUint& a, const BigUint& b) const { return mod_mul(a, b, m_); }
  BigUint neg(const BigUint& a) const { return mod_sub(BigUint(0), a, m_); }
  BigUint pow(const BigUint& a, const BigUint& e) const { return modexp(a, e, m_); }
  BigUint inv(const BigUint& a) const { return modinv(a, m_); }
  BigUint sample(Rng& rng) const { return sample_below(m_, rng); }

 private:
  BigUint m_;
};

}  // namespace cipherloop
