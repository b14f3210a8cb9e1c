#include <cstdint>
#include <set>
#include <vector>

#include "cipherloop/bigint.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"
#include "cipherloop/rng.hpp"
#include "doctest.h"

using namespace cipherloop;

namespace {

std::uint64_t naive_pow(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  for (std::uint64_t i = 0; i < e; ++i) r = (r * b) % m;
  return r;
}

std::uint64_t naive_inv(std::uint64_t a, std::uint64_t m) {
  for (std::uint64_t x = 1; x < m; ++x) {
    if ((a * x) % m == 1) return x;
  }
  return 0;
}

bool trial_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("modexp small cases") {
  CHECK(modexp(2, 10, 1000) == BigUint(24));
  CHECK(modexp(123456, 0, 97) == BigUint(1));
  CHECK(modexp(7, 560, 561) == BigUint(1));
  CHECK_THROWS_AS(modexp(2, 3, 0), Error);
}

TEST_CASE("modexp and modinv agree with schoolbook oracle below 2^16") {
  auto rng = Rng::from_seed(1);
  for (int i = 0; i < 300; ++i) {
    const std::uint64_t m = 2 + rng.next_u64() % 65534;
    const std::uint64_t b = rng.next_u64() % 65536;
    const std::uint64_t e = rng.next_u64() % 400;
    CHECK(modexp(b, e, m) == BigUint(naive_pow(b % m, e, m)));
    const std::uint64_t a = rng.next_u64() % m;
    const std::uint64_t inv = naive_inv(a, m);
    if (inv != 0) {
      CHECK(modinv(a, m) == BigUint(inv));
    } else {
      CHECK_THROWS_AS(modinv(a, m), Error);
    }
  }
}

TEST_CASE("modinv") {
  CHECK(modinv(1, 97) == BigUint(1));
  CHECK(modinv(3, 35) == BigUint(12));
  try {
    modinv(5, 35);
    FAIL("expected NotInvertible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotInvertible);
  }
  auto rng = Rng::from_seed(2);
  const BigUint m = rng.bits(511) + pow2(511);
  for (int i = 0; i < 50; ++i) {
    const BigUint a = sample_unit(m, rng);
    CHECK(mod_mul(a, modinv(a, m), m) == BigUint(1));
  }
}

TEST_CASE("gen_prime") {
  auto rng = Rng::from_seed(3);
  for (int i = 0; i < 20; ++i) {
    const BigUint p = gen_prime(16, rng);
    CHECK(p.bit_length() == 16);
    CHECK(trial_prime(p.low_u64()));
  }
  std::set<std::uint64_t> eight_bit;
  for (std::uint64_t n = 128; n < 256; ++n) {
    if (trial_prime(n)) eight_bit.insert(n);
  }
  for (int i = 0; i < 20; ++i) CHECK(eight_bit.count(gen_prime(8, rng).low_u64()) == 1);

  auto a = Rng::from_seed(99);
  auto b = Rng::from_seed(99);
  const BigUint p1 = gen_prime(512, a);
  CHECK(p1 == gen_prime(512, b));
  CHECK(p1.bit_length() == 512);
}

TEST_CASE("is_probable_prime matches trial division below 2^16") {
  auto rng = Rng::from_seed(4);
  for (std::uint64_t n = 0; n < 65536; n += 7) CHECK(is_probable_prime(n, rng, 8) == trial_prime(n));
  CHECK_FALSE(is_probable_prime(561, rng));
}

TEST_CASE("sample_below") {
  auto rng = Rng::from_seed(5);
  CHECK(sample_below(1, rng) == BigUint(0));
  const int l = 12;
  const int draws = 100000;
  std::vector<int> ones(l, 0);
  for (int i = 0; i < draws; ++i) {
    const BigUint v = sample_below(pow2(l), rng);
    REQUIRE(v < pow2(l));
    for (int b = 0; b < l; ++b) ones[b] += v.bit(b) ? 1 : 0;
  }
  for (int b = 0; b < l; ++b) CHECK(std::abs(ones[b] / double(draws) - 0.5) < 0.02);

  auto a = Rng::from_seed(6);
  auto c = Rng::from_seed(6);
  const BigUint bound = BigUint::from_dec("1000000000000000000000007");
  CHECK(sample_below(bound, a) == sample_below(bound, c));
}

TEST_CASE("rng streams") {
  auto a = Rng::from_seed(7);
  auto b = Rng::from_seed(7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  auto c1 = a.split("x");
  auto c2 = a.split("y");
  CHECK(c1.next_u64() != c2.next_u64());
}

TEST_CASE("BigUint byte encoding round-trips") {
  auto rng = Rng::from_seed(8);
  for (int i = 0; i < 10000; ++i) {
    const BigUint x = rng.bits(1 + rng.next_u64() % 4096);
    ByteWriter w;
    w.big(x);
    ByteReader r(w.bytes());
    CHECK(r.big() == x);
    CHECK(r.done());
  }
  ByteWriter w;
  w.big(BigUint(0x0102));
  CHECK(w.bytes() == Bytes{0, 0, 0, 2, 1, 2});
  const Bytes non_minimal{0, 0, 0, 2, 0, 5};
  ByteReader r(non_minimal);
  CHECK_THROWS_AS(r.big(), Error);
}

TEST_CASE("ModRing residues stay reduced") {
  const ModRing z(BigUint(97));
  auto rng = Rng::from_seed(9);
  for (int i = 0; i < 200; ++i) {
    const BigUint a = z.sample(rng), b = z.sample(rng);
    CHECK(z.add(a, b) < BigUint(97));
    CHECK(z.sub(a, b) < BigUint(97));
    CHECK(z.mul(a, b) < BigUint(97));
    CHECK(z.add(z.sub(a, b), b) == a);
  }
}
