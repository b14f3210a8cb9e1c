#include "cipherloop/fixedpoint.hpp"

#include <cmath>
#include <string>

#include "cipherloop/error.hpp"

namespace cipherloop::fixedpoint {

void FpParams::validate() const {
  if (int_bits < 1 || frac_bits < 0 || stat_bits < 1) {
    throw Error(ErrorCode::InvalidArgument, "fixed-point widths must be positive");
  }
  if (total_bits() > 62) throw Error(ErrorCode::InvalidArgument, "fixed-point width above 62 bits");
}

void FpParams::check_budget(const BigUint& modulus) const {
  validate();
  if (!(pow2(static_cast<std::size_t>(total_bits() + stat_bits + 1)) < modulus)) {
    throw Error(ErrorCode::BudgetExceeded, "2^(l + lambda + 1) must stay below the modulus (l=" +
                                               std::to_string(total_bits()) + ", lambda=" +
                                               std::to_string(stat_bits) + ")");
  }
}

BigUint to_residue(const mpz_class& v, const BigUint& modulus) {
  mpz_class r = v % modulus.mpz();
  if (r < 0) r += modulus.mpz();
  return BigUint(std::move(r));
}

mpz_class to_signed(const BigUint& residue, const BigUint& modulus) {
  mpz_class r = residue.mpz() % modulus.mpz();
  const mpz_class half = (modulus.mpz() + 1) / 2;
  if (r >= half) r -= modulus.mpz();
  return r;
}

mpz_class encode_int(double x, const FpParams& p) {
  if (!std::isfinite(x) || std::fabs(x) >= std::ldexp(1.0, p.int_bits)) {
    throw Error(ErrorCode::Overflow, "value out of fixed-point range");
  }
  const double scaled = std::ldexp(x, p.frac_bits);
  // std::round rounds halves away from zero; scaled is exact for frac_bits small.
  return mpz_class(std::round(scaled));
}

double decode_int(const mpz_class& v, int scale) { return std::ldexp(v.get_d(), -scale); }

FpValue encode(double x, const FpParams& p, const BigUint& modulus) {
  return FpValue{to_residue(encode_int(x, p), modulus), p.frac_bits};
}

double decode(const FpValue& v, const FpParams& p, const BigUint& modulus) {
  (void)p;
  return decode_int(to_signed(v.raw, modulus), v.scale);
}

FpValue multiply(const FpValue& a, const FpValue& b, const BigUint& modulus) {
  return FpValue{(a.raw * b.raw) % modulus, a.scale + b.scale};
}

mpz_class floor_shift(const mpz_class& v, int shift) {
  mpz_class out;
  mpz_fdiv_q_2exp(out.get_mpz_t(), v.get_mpz_t(), static_cast<mp_bitcnt_t>(shift));
  return out;
}

bool fits_signed(const mpz_class& v, int bits) {
  mpz_class bound;
  mpz_ui_pow_ui(bound.get_mpz_t(), 2, static_cast<unsigned long>(bits - 1));
  return abs(v) < bound;
}

FpValue rescale_after_product(const FpValue& v, const FpParams& p, const BigUint& modulus) {
  if (v.scale != 2 * p.frac_bits) throw Error(ErrorCode::InvalidArgument, "rescale expects a product scale");
  const mpz_class t = floor_shift(to_signed(v.raw, modulus), p.frac_bits);
  if (!fits_signed(t, p.total_bits())) throw Error(ErrorCode::Overflow, "rescaled value escapes l bits");
  return FpValue{to_residue(t, modulus), p.frac_bits};
}

}  // namespace cipherloop::fixedpoint
