#include <cmath>

#include "cipherloop/error.hpp"
#include "cipherloop/fixedpoint.hpp"
#include "cipherloop/numtheory.hpp"
#include "cipherloop/rng.hpp"
#include "doctest.h"

using namespace cipherloop;
using namespace cipherloop::fixedpoint;

namespace {

const BigUint& modulus() {
  static const BigUint n = BigUint::from_dec(
      "13407807929942597099574024998205846127479365820592393377723561443721764030073546976801874298166903427690031"
      "858186486050853753882811946569946433649006084171");
  return n;
}

}  // namespace

TEST_CASE("encode examples") {
  const FpParams p{16, 4, 40};
  CHECK(encode(1.5, p, modulus()).raw == BigUint(24));
  CHECK(encode(-1.25, p, modulus()).raw == modulus() - BigUint(20));
  CHECK(encode(0.03125, p, modulus()).raw == BigUint(1));   // 0.5 ulp rounds away from zero
  CHECK(encode(-0.03125, p, modulus()).raw == modulus() - BigUint(1));
  CHECK(decode(encode(-1.25, p, modulus()), p, modulus()) == -1.25);
  try {
    encode(65536.0, p, modulus());
    FAIL("expected Overflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Overflow);
  }
}

TEST_CASE("round trip error is at most half an ulp") {
  const FpParams p;
  auto rng = Rng::from_seed(400);
  const double bound = std::ldexp(1.0, -p.frac_bits - 1);
  for (int i = 0; i < 10000; ++i) {
    const double x = (static_cast<double>(rng.next_u64() >> 11) / 9007199254740992.0 * 2.0 - 1.0) * 65535.0;
    REQUIRE(std::fabs(decode(encode(x, p, modulus()), p, modulus()) - x) <= bound);
  }
}

TEST_CASE("rescale after product") {
  const FpParams p;
  const auto& n = modulus();
  const auto six = rescale_after_product(multiply(encode(2.0, p, n), encode(3.0, p, n), n), p, n);
  CHECK(six.scale == p.frac_bits);
  CHECK(decode(six, p, n) == 6.0);
  const auto hundredth = rescale_after_product(multiply(encode(0.1, p, n), encode(0.1, p, n), n), p, n);
  CHECK(std::fabs(decode(hundredth, p, n) - 0.01) <= std::ldexp(1.0, -p.frac_bits));
  const auto neg = rescale_after_product(multiply(encode(-1.5, p, n), encode(2.25, p, n), n), p, n);
  CHECK(decode(neg, p, n) == -3.375);
  CHECK_THROWS_AS(rescale_after_product(encode(1.0, p, n), p, n), Error);
  const auto big = multiply(encode(300.0, p, n), encode(300.0, p, n), n);
  CHECK_THROWS_AS(rescale_after_product(big, p, n), Error);
}

TEST_CASE("floor shift is arithmetic") {
  CHECK(floor_shift(mpz_class(7), 1) == 3);
  CHECK(floor_shift(mpz_class(-7), 1) == -4);
  CHECK(floor_shift(mpz_class(-8), 2) == -2);
  auto rng = Rng::from_seed(401);
  for (int i = 0; i < 1000; ++i) {
    const long long v = static_cast<long long>(rng.next_u64() >> 20) - (1ll << 43);
    const int s = static_cast<int>(rng.next_u64() % 20);
    const long long expect = static_cast<long long>(std::floor(static_cast<double>(v) / std::ldexp(1.0, s)));
    REQUIRE(floor_shift(mpz_class(static_cast<long>(v)), s) == mpz_class(static_cast<long>(expect)));
  }
}

TEST_CASE("signed residues") {
  const auto& n = modulus();
  CHECK(to_signed(to_residue(-5, n), n) == -5);
  CHECK(to_signed(to_residue(5, n), n) == 5);
  CHECK(to_residue(-1, n) == n - BigUint(1));
}

TEST_CASE("budget check") {
  FpParams p;
  CHECK_NOTHROW(p.check_budget(modulus()));
  try {
    p.check_budget(pow2(74));
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BudgetExceeded);
  }
  CHECK_NOTHROW(p.check_budget(pow2(74) + BigUint(1)));
}
