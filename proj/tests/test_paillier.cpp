#include <set>

#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"
#include "cipherloop/paillier.hpp"
#include "doctest.h"

using namespace cipherloop;

namespace {

const paillier::PrivateKey& test_key() {
  static const paillier::PrivateKey sk = [] {
    auto rng = Rng::from_seed(100);
    return paillier::keygen(512, rng).second;
  }();
  return sk;
}

}  // namespace

TEST_CASE("exhaustive homomorphism over N = 35") {
  const auto sk = paillier::PrivateKey::from_primes(5, 7);
  const auto& pk = sk.pk;
  CHECK(pk.n == BigUint(35));
  CHECK(pk.g == BigUint(36));
  auto rng = Rng::from_seed(101);
  for (std::uint64_t a = 0; a < 35; ++a) {
    const auto ca = paillier::encrypt(pk, a, rng);
    CHECK(paillier::decrypt(sk, ca) == BigUint(a));
    CHECK(paillier::decrypt_textbook(sk, ca) == BigUint(a));
    for (std::uint64_t b = 0; b < 35; ++b) {
      const auto cb = paillier::encrypt(pk, b, rng);
      CHECK(paillier::decrypt(sk, paillier::add(pk, ca, cb)) == BigUint((a + b) % 35));
      CHECK(paillier::decrypt(sk, paillier::sub(pk, ca, cb)) == BigUint((a + 35 - b) % 35));
      CHECK(paillier::decrypt(sk, paillier::cmlt(pk, b, ca)) == BigUint((a * b) % 35));
    }
  }
  CHECK_THROWS_AS(paillier::PrivateKey::from_primes(7, 7), Error);
}

TEST_CASE("encryption basics") {
  const auto& sk = test_key();
  const auto& pk = sk.pk;
  auto rng = Rng::from_seed(102);
  CHECK(pk.n.bit_length() == 512);
  CHECK(pk.g == pk.n + BigUint(1));
  CHECK(paillier::encrypt_with_nonce(pk, 0, 1).value == BigUint(1));
  CHECK(paillier::decrypt(sk, paillier::Ciphertext{BigUint(1), pk.fingerprint}) == BigUint(0));
  CHECK(paillier::decrypt(sk, paillier::encrypt(pk, 2, rng)) == BigUint(2));
  CHECK(paillier::encrypt(pk, 2, rng) != paillier::encrypt(pk, 2, rng));
  CHECK_THROWS_AS(paillier::encrypt(pk, pk.n, rng), Error);
  for (int i = 0; i < 1000; ++i) {
    const BigUint m = sample_below(pk.n, rng);
    const auto c = paillier::encrypt(pk, m, rng);
    REQUIRE(paillier::decrypt(sk, c) == m);
  }
}

TEST_CASE("crt decryption equals textbook decryption") {
  const auto& sk = test_key();
  auto rng = Rng::from_seed(103);
  for (int i = 0; i < 200; ++i) {
    const auto c = paillier::encrypt(sk.pk, sample_below(sk.pk.n, rng), rng);
    CHECK(paillier::decrypt(sk, c) == paillier::decrypt_textbook(sk, c));
  }
}

TEST_CASE("keygen is reproducible from a seed") {
  auto a = Rng::from_seed(104);
  auto b = Rng::from_seed(104);
  CHECK(paillier::keygen(512, a).first.n == paillier::keygen(512, b).first.n);
}

TEST_CASE("add, sub, cmlt") {
  const auto& sk = test_key();
  const auto& pk = sk.pk;
  auto rng = Rng::from_seed(105);
  const auto e2 = paillier::encrypt(pk, 2, rng);
  const auto e3 = paillier::encrypt(pk, 3, rng);
  CHECK(paillier::decrypt(sk, paillier::add(pk, e2, e3)) == BigUint(5));
  CHECK(paillier::decrypt(sk, paillier::sub(pk, e2, e3)) == pk.n - BigUint(1));
  CHECK(paillier::decrypt(sk, paillier::cmlt(pk, 0, e3)) == BigUint(0));
  CHECK(paillier::decrypt(sk, paillier::cmlt(pk, 1, e3)) == BigUint(3));
  CHECK(paillier::decrypt(sk, paillier::cmlt(pk, 7, paillier::encrypt(pk, 6, rng))) == BigUint(42));

  BigUint sum = 0;
  auto acc = paillier::encrypt(pk, 0, rng);
  for (int i = 0; i < 100; ++i) {
    const BigUint m = sample_below(pk.n, rng);
    sum = mod_add(sum, m, pk.n);
    acc = paillier::add(pk, acc, paillier::encrypt(pk, m, rng));
  }
  CHECK(paillier::decrypt(sk, acc) == sum);
}

TEST_CASE("refresh") {
  const auto& sk = test_key();
  const auto& pk = sk.pk;
  auto rng = Rng::from_seed(106);
  const auto c = paillier::encrypt(pk, 77, rng);
  std::set<std::string> seen{c.value.to_hex()};
  for (int i = 0; i < 1000; ++i) {
    const auto r = paillier::refresh(pk, c, rng);
    REQUIRE(paillier::decrypt(sk, r) == BigUint(77));
    seen.insert(r.value.to_hex());
  }
  CHECK(seen.size() == 1001);
}

TEST_CASE("key mismatch is rejected") {
  const auto& sk = test_key();
  auto rng = Rng::from_seed(107);
  const auto other = paillier::keygen(256, rng).second;
  const auto c = paillier::encrypt(other.pk, 5, rng);
  try {
    paillier::decrypt(sk, c);
    FAIL("expected KeyMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::KeyMismatch);
  }
  CHECK_THROWS_AS(paillier::add(sk.pk, c, paillier::encrypt(sk.pk, 1, rng)), Error);
}

TEST_CASE("wire format round-trips") {
  const auto& sk = test_key();
  auto rng = Rng::from_seed(108);
  const auto c = paillier::encrypt(sk.pk, 9, rng);
  ByteWriter w;
  paillier::write(w, c);
  ByteReader r(w.bytes());
  CHECK(paillier::read(r) == c);
  CHECK(r.done());
}
