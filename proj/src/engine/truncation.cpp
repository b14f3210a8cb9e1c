#include "cipherloop/engine/truncation.hpp"

#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"

namespace cipherloop::engine {

namespace {

void order(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ProtocolOrderViolation, what);
}

std::size_t frac(const FpParams& fp) { return static_cast<std::size_t>(fp.frac_bits); }

}  // namespace

int truncation_width(const FpParams& fp) { return fp.total_bits() + 2 * fp.frac_bits; }

void check_truncation_budget(const FpParams& fp, const BigUint& modulus) {
  fp.validate();
  const auto need = static_cast<std::size_t>(truncation_width(fp) + fp.stat_bits + 1);
  if (pow2(need) >= modulus) {
    throw Error(ErrorCode::BudgetExceeded, "truncation blinding needs " + std::to_string(need) +
                                               " bits but the modulus has " + std::to_string(modulus.bit_length()));
  }
}

TruncationCloud::TruncationCloud(const paillier::PublicKey& ahe, const dgk::PublicKey& dgk, const FpParams& fp)
    : ahe_(&ahe), fp_(fp), cmp_(dgk, frac(fp)) {
  check_truncation_budget(fp, ahe.n);
}

paillier::Ciphertext TruncationCloud::blind(const paillier::Ciphertext& value, Rng& rng) {
  order(step_ == Step::Start, "truncation already blinded");
  const auto w = static_cast<std::size_t>(truncation_width(fp_));
  c_ = pow2(w - 1) + rng.bits(w + static_cast<std::size_t>(fp_.stat_bits));
  step_ = Step::Blinded;
  return paillier::add_plain(*ahe_, value, c_);
}

std::vector<dgk::Ciphertext> TruncationCloud::respond(std::span<const dgk::Ciphertext> low_bits, Rng& rng) {
  order(step_ == Step::Blinded, "truncation bits before blinding");
  auto out = cmp_.respond(c_ % pow2(frac(fp_)), low_bits, rng);
  step_ = Step::Responded;
  return out;
}

paillier::Ciphertext TruncationCloud::finish(const paillier::Ciphertext& high, const paillier::Ciphertext& delta_b) {
  order(step_ == Step::Responded, "truncation carry before the comparison");
  const auto& pk = *ahe_;
  // [c_l <= w_l] = delta_A xor delta_B
  const auto le = cmp_.delta() ? paillier::sub(pk, paillier::encrypt_trivial(pk, BigUint(1)), delta_b) : delta_b;
  const BigUint offset = (c_ >> frac(fp_)) + BigUint(1);
  step_ = Step::Done;
  return paillier::add_plain(pk, paillier::add(pk, high, le), mod_sub(BigUint(0), offset % pk.n, pk.n));
}

TruncationActuator::TruncationActuator(const paillier::PrivateKey& ahe, const dgk::PrivateKey& dgk,
                                       const FpParams& fp)
    : ahe_(&ahe), fp_(fp), cmp_(dgk, frac(fp)) {
  check_truncation_budget(fp, ahe.pk.n);
}

TruncationActuator::Split TruncationActuator::split(const BigUint& w, Rng& rng) {
  order(step_ == Step::Start, "truncation already split");
  Split s;
  s.high = paillier::encrypt(ahe_->pk, w >> frac(fp_), rng);
  s.low_bits = cmp_.encrypt_bits(w % pow2(frac(fp_)), rng);
  step_ = Step::Split;
  return s;
}

paillier::Ciphertext TruncationActuator::carry(std::span<const dgk::Ciphertext> masked, Rng& rng) {
  order(step_ == Step::Split, "truncation carry before split");
  const bool delta_b = cmp_.finish(masked);
  step_ = Step::Done;
  return paillier::encrypt(ahe_->pk, BigUint(delta_b ? 1 : 0), rng);
}

paillier::Ciphertext interactive_truncate(const paillier::Ciphertext& value, const paillier::PrivateKey& ahe_sk,
                                          const dgk::PrivateKey& dgk_sk, const FpParams& fp, Rng& rng) {
  TruncationCloud cloud(ahe_sk.pk, dgk_sk.pk, fp);
  TruncationActuator act(ahe_sk, dgk_sk, fp);
  const auto blinded = cloud.blind(value, rng);
  auto split = act.split(paillier::decrypt(ahe_sk, blinded), rng);
  const auto masked = cloud.respond(split.low_bits, rng);
  const auto delta_b = act.carry(masked, rng);
  return cloud.finish(split.high, delta_b);
}

}  // namespace cipherloop::engine
