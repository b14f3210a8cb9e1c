#pragma once

#include "cipherloop/bigint.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/rng.hpp"

// 1-out-of-2 oblivious transfer over Paillier. The sender holds [[s_0]],
// [[s_1]]; the chooser holds the index i and the secret key.
//   Plain:  the chooser learns s_i.
//   Prime:  the sender obtains a fresh [[s_i]] without learning i.
namespace cipherloop::ot {

enum class Variant { Plain, Prime };

struct Offer {
  paillier::Ciphertext v0;  // [[s_0 + r_0]]
  paillier::Ciphertext v1;  // [[s_1 + r_1]]
};

struct Choice {
  paillier::Ciphertext index;     // [[i]]
  paillier::Ciphertext forwarded;  // refreshed [[v_i]] (Prime only)
};

class OtSender {
 public:
  OtSender(const paillier::PublicKey& pk, Variant variant);

  Offer offer(const paillier::Ciphertext& s0, const paillier::Ciphertext& s1, Rng& rng);
  /// Plain: [[r_i]] = r_0 [[1 - i]] + r_1 [[i]], refreshed.
  paillier::Ciphertext reveal_mask(const Choice& choice, Rng& rng);
  /// Prime: [[v_i]] + r_0 ([[i]] - [[1]]) - r_1 [[i]].
  paillier::Ciphertext reconstruct(const Choice& choice);

 private:
  enum class Step { Start, Offered, Done };
  const paillier::PublicKey* pk_;
  Variant variant_;
  BigUint r0_, r1_;
  Step step_ = Step::Start;
};

class OtChooser {
 public:
  OtChooser(const paillier::PrivateKey& sk, Variant variant, bool index);

  Choice choose(const Offer& offer, Rng& rng);
  /// Plain: s_i = v_i - r_i.
  BigUint receive(const paillier::Ciphertext& mask);

 private:
  enum class Step { Start, Chosen, Done };
  const paillier::PrivateKey* sk_;
  Variant variant_;
  bool index_;
  BigUint v_;
  Step step_ = Step::Start;
};

/// Both sides in one call.
BigUint ot_choose(const paillier::Ciphertext& s0, const paillier::Ciphertext& s1, bool index,
                  const paillier::PrivateKey& sk, Rng& rng);
paillier::Ciphertext ot_prime(const paillier::Ciphertext& s0, const paillier::Ciphertext& s1, bool index,
                              const paillier::PrivateKey& sk, Rng& rng);

}  // namespace cipherloop::ot
