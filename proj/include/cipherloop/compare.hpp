#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cipherloop/bigint.hpp"
#include "cipherloop/dgk.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/rng.hpp"

// Two-party comparison with DGK. Party A holds public keys only; party B
// holds the DGK (and, for encrypted inputs, the Paillier) secret key. Each
// session is single-use and its methods must be called in protocol order.
namespace cipherloop::compare {

/// Plaintext inputs, B side: owns beta and the DGK secret key.
class PlainCmpB {
 public:
  PlainCmpB(const dgk::PrivateKey& sk, std::size_t bits);

  /// [beta_i], most significant bit first.
  std::vector<dgk::Ciphertext> encrypt_bits(const BigUint& beta, Rng& rng);
  /// delta_B: 1 iff one of the received values decrypts to zero.
  bool finish(std::span<const dgk::Ciphertext> masked);

 private:
  enum class Step { Start, SentBits, Done };
  const dgk::PrivateKey* sk_;
  std::size_t bits_;
  Step step_ = Step::Start;
};

/// Plaintext inputs, A side: owns alpha and the DGK public key.
class PlainCmpA {
 public:
  PlainCmpA(const dgk::PublicKey& pk, std::size_t bits);

  /// Consumes B's encrypted bits and returns bits + 1 masked, shuffled values.
  std::vector<dgk::Ciphertext> respond(const BigUint& alpha, std::span<const dgk::Ciphertext> beta_bits, Rng& rng);
  bool delta() const;

 private:
  enum class Step { Start, Done };
  const dgk::PublicKey* pk_;
  std::size_t bits_;
  Step step_ = Step::Start;
  bool delta_a_ = false;
};

/// Encrypted inputs, A side: holds [[a]], [[b]] and public keys.
class EncCmpA {
 public:
  EncCmpA(const paillier::PublicKey& ahe, const dgk::PublicKey& dgk, std::size_t bits, std::size_t stat_bits);

  /// [[z]] = [[b]] - [[a]] + [[2^l + r]] with r of l + 1 + lambda bits.
  paillier::Ciphertext blind(const paillier::Ciphertext& a, const paillier::Ciphertext& b, Rng& rng);
  std::vector<dgk::Ciphertext> respond(std::span<const dgk::Ciphertext> beta_bits, Rng& rng);
  /// [[delta]] = [[z div 2^l]] - [[r div 2^l]] - [[beta < alpha]], delta = (a <= b).
  paillier::Ciphertext finish(const paillier::Ciphertext& z_high, const paillier::Ciphertext& delta_b);

 private:
  enum class Step { Start, Blinded, Responded, Done };
  const paillier::PublicKey* ahe_;
  std::size_t bits_;
  std::size_t stat_bits_;
  BigUint r_;
  PlainCmpA inner_;
  Step step_ = Step::Start;
};

/// Encrypted inputs, B side: holds the Paillier and DGK secret keys.
class EncCmpB {
 public:
  EncCmpB(const paillier::PrivateKey& ahe, const dgk::PrivateKey& dgk, std::size_t bits);

  struct Decomposed {
    paillier::Ciphertext z_high;            // [[z div 2^l]]
    std::vector<dgk::Ciphertext> beta_bits;  // [beta_i], beta = z mod 2^l
  };
  Decomposed decompose(const paillier::Ciphertext& z, Rng& rng);
  /// [[delta_B]].
  paillier::Ciphertext report(std::span<const dgk::Ciphertext> masked, Rng& rng);
  /// Decrypts A's [[delta]].
  bool reveal(const paillier::Ciphertext& delta);

 private:
  enum class Step { Start, Decomposed, Reported, Done };
  const paillier::PrivateKey* ahe_;
  std::size_t bits_;
  PlainCmpB inner_;
  Step step_ = Step::Start;
};

/// Both sides of the plaintext-input comparison in one call: (delta_A, delta_B)
/// with delta_A xor delta_B = (alpha <= beta).
std::pair<bool, bool> dgk_compare_plain(const BigUint& alpha, const BigUint& beta, std::size_t bits,
                                        const dgk::PrivateKey& sk, Rng& rng);

/// Both sides of the encrypted-input comparison. a and b are signed values
/// with |b - a| < 2^bits encoded in Z_N; returns delta = (a <= b).
bool dgk_compare_encrypted(const paillier::Ciphertext& a, const paillier::Ciphertext& b, std::size_t bits,
                           std::size_t stat_bits, const paillier::PrivateKey& ahe_sk, const dgk::PrivateKey& dgk_sk,
                           Rng& rng);

}  // namespace cipherloop::compare
