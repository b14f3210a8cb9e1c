#pragma once

#include <span>
#include <vector>

#include "cipherloop/compare.hpp"
#include "cipherloop/dgk.hpp"
#include "cipherloop/fixedpoint.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/rng.hpp"

// Interactive truncation [[T]] -> [[floor(T / 2^f)]] between the key-less
// party (Cloud) and the key holder (Actuator). Cloud adds C = 2^(W-1) + B
// with W = l + 2 l_f and B of W + lambda bits; the Actuator splits the
// decrypted w = T + C into w div 2^f and w mod 2^f, and one plaintext DGK
// comparison of the low parts supplies the borrow, so the result is the exact
// floor.
namespace cipherloop::engine {

/// Bits of the signed pre-truncation range: l + 2 l_f.
int truncation_width(const FpParams& fp);
/// BudgetExceeded unless 2^(l + 2 l_f + lambda + 1) < N.
void check_truncation_budget(const FpParams& fp, const BigUint& modulus);

class TruncationCloud {
 public:
  TruncationCloud(const paillier::PublicKey& ahe, const dgk::PublicKey& dgk, const FpParams& fp);
  /// [[value + C]]. `value` may be offset by a secret the Actuator removes.
  paillier::Ciphertext blind(const paillier::Ciphertext& value, Rng& rng);
  std::vector<dgk::Ciphertext> respond(std::span<const dgk::Ciphertext> low_bits, Rng& rng);
  /// [[w div 2^f]] - (C div 2^f) - 1 + [C mod 2^f <= w mod 2^f].
  paillier::Ciphertext finish(const paillier::Ciphertext& high, const paillier::Ciphertext& delta_b);

 private:
  enum class Step { Start, Blinded, Responded, Done };
  const paillier::PublicKey* ahe_;
  FpParams fp_;
  BigUint c_;
  compare::PlainCmpA cmp_;
  Step step_ = Step::Start;
};

class TruncationActuator {
 public:
  TruncationActuator(const paillier::PrivateKey& ahe, const dgk::PrivateKey& dgk, const FpParams& fp);
  struct Split {
    paillier::Ciphertext high;
    std::vector<dgk::Ciphertext> low_bits;
  };
  /// `w` is the decrypted blinded value.
  Split split(const BigUint& w, Rng& rng);
  paillier::Ciphertext carry(std::span<const dgk::Ciphertext> masked, Rng& rng);

 private:
  enum class Step { Start, Split, Done };
  const paillier::PrivateKey* ahe_;
  FpParams fp_;
  compare::PlainCmpB cmp_;
  Step step_ = Step::Start;
};

/// Both sides in one call with no program secret.
paillier::Ciphertext interactive_truncate(const paillier::Ciphertext& value, const paillier::PrivateKey& ahe_sk,
                                          const dgk::PrivateKey& dgk_sk, const FpParams& fp, Rng& rng);

}  // namespace cipherloop::engine
