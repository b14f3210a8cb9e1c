#pragma once

#include <cstddef>

#include <gmpxx.h>

#include "cipherloop/bigint.hpp"

// Signed fixed-point numbers embedded in Z_N: one sign bit, l_i integer bits
// and l_f fractional bits. Negative values occupy the upper half of Z_N.
namespace cipherloop::fixedpoint {

struct FpParams {
  int int_bits = 16;
  int frac_bits = 16;
  int stat_bits = 40;

  int total_bits() const noexcept { return 1 + int_bits + frac_bits; }
  /// Throws BudgetExceeded unless 2^(l + stat_bits + 1) < modulus.
  void check_budget(const BigUint& modulus) const;
  /// Throws InvalidArgument on non-positive widths.
  void validate() const;
};

struct FpValue {
  BigUint raw;
  int scale = 0;  // power-of-two exponent: frac_bits, or 2 * frac_bits after a product
};

/// Signed integer <-> Z_N residue (values >= ceil(N/2) are negative).
BigUint to_residue(const mpz_class& v, const BigUint& modulus);
mpz_class to_signed(const BigUint& residue, const BigUint& modulus);

/// round(x * 2^frac_bits), halves away from zero. Overflow when |x| >= 2^int_bits.
mpz_class encode_int(double x, const FpParams& p);
double decode_int(const mpz_class& v, int scale);

FpValue encode(double x, const FpParams& p, const BigUint& modulus);
double decode(const FpValue& v, const FpParams& p, const BigUint& modulus);

/// Product of two scale-l_f values; the result carries scale 2 l_f.
FpValue multiply(const FpValue& a, const FpValue& b, const BigUint& modulus);

/// floor(v / 2^l_f) on the signed value, back to scale l_f. Overflow when
/// the result leaves the l-bit range; InvalidArgument unless scale = 2 l_f.
FpValue rescale_after_product(const FpValue& v, const FpParams& p, const BigUint& modulus);

/// Floor division by 2^shift for signed integers.
mpz_class floor_shift(const mpz_class& v, int shift);

/// True when |v| < 2^(l-1), i.e. v is representable in l signed bits.
bool fits_signed(const mpz_class& v, int bits);

}  // namespace cipherloop::fixedpoint

namespace cipherloop {
using fixedpoint::FpParams;
using fixedpoint::FpValue;
}  // namespace cipherloop
