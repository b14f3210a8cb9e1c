#include "cipherloop/ot.hpp"

#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"

namespace cipherloop::ot {
namespace {

void order(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ProtocolOrderViolation, what);
}

}  // namespace

OtSender::OtSender(const paillier::PublicKey& pk, Variant variant) : pk_(&pk), variant_(variant) {}

Offer OtSender::offer(const paillier::Ciphertext& s0, const paillier::Ciphertext& s1, Rng& rng) {
  order(step_ == Step::Start, "offer already made");
  r0_ = sample_below(pk_->n, rng);
  r1_ = sample_below(pk_->n, rng);
  step_ = Step::Offered;
  return Offer{paillier::refresh(*pk_, paillier::add_plain(*pk_, s0, r0_), rng),
               paillier::refresh(*pk_, paillier::add_plain(*pk_, s1, r1_), rng)};
}

paillier::Ciphertext OtSender::reveal_mask(const Choice& choice, Rng& rng) {
  order(step_ == Step::Offered && variant_ == Variant::Plain, "mask reveal out of order");
  step_ = Step::Done;
  const auto& pk = *pk_;
  const auto not_i = paillier::sub(pk, paillier::encrypt_trivial(pk, BigUint(1)), choice.index);
  auto out = paillier::add(pk, paillier::cmlt(pk, r0_, not_i), paillier::cmlt(pk, r1_, choice.index));
  return paillier::refresh(pk, out, rng);
}

paillier::Ciphertext OtSender::reconstruct(const Choice& choice) {
  order(step_ == Step::Offered && variant_ == Variant::Prime, "reconstruction out of order");
  step_ = Step::Done;
  const auto& pk = *pk_;
  const auto i_minus_one = paillier::sub(pk, choice.index, paillier::encrypt_trivial(pk, BigUint(1)));
  auto out = paillier::add(pk, choice.forwarded, paillier::cmlt(pk, r0_, i_minus_one));
  return paillier::add(pk, out, paillier::cmlt(pk, mod_sub(BigUint(0), r1_, pk.n), choice.index));
}

OtChooser::OtChooser(const paillier::PrivateKey& sk, Variant variant, bool index)
    : sk_(&sk), variant_(variant), index_(index) {}

Choice OtChooser::choose(const Offer& offer, Rng& rng) {
  order(step_ == Step::Start, "choice already made");
  step_ = Step::Chosen;
  const auto& pk = sk_->pk;
  const auto& picked = index_ ? offer.v1 : offer.v0;
  Choice c;
  c.index = paillier::encrypt(pk, BigUint(index_ ? 1 : 0), rng);
  if (variant_ == Variant::Prime) {
    c.forwarded = paillier::refresh(pk, picked, rng);
    step_ = Step::Done;
  } else {
    v_ = paillier::decrypt(*sk_, picked);
  }
  return c;
}

BigUint OtChooser::receive(const paillier::Ciphertext& mask) {
  order(step_ == Step::Chosen && variant_ == Variant::Plain, "receive out of order");
  step_ = Step::Done;
  return mod_sub(v_, paillier::decrypt(*sk_, mask), sk_->pk.n);
}

BigUint ot_choose(const paillier::Ciphertext& s0, const paillier::Ciphertext& s1, bool index,
                  const paillier::PrivateKey& sk, Rng& rng) {
  OtSender sender(sk.pk, Variant::Plain);
  OtChooser chooser(sk, Variant::Plain, index);
  const auto choice = chooser.choose(sender.offer(s0, s1, rng), rng);
  return chooser.receive(sender.reveal_mask(choice, rng));
}

paillier::Ciphertext ot_prime(const paillier::Ciphertext& s0, const paillier::Ciphertext& s1, bool index,
                              const paillier::PrivateKey& sk, Rng& rng) {
  OtSender sender(sk.pk, Variant::Prime);
  OtChooser chooser(sk, Variant::Prime, index);
  return sender.reconstruct(chooser.choose(sender.offer(s0, s1, rng), rng));
}

}  // namespace cipherloop::ot
