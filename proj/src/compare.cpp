#include "cipherloop/compare.hpp"

#include <algorithm>

#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"

namespace cipherloop::compare {
namespace {

void check_width(std::size_t bits, const dgk::PublicKey& pk) {
  if (bits == 0) throw Error(ErrorCode::BitWidthMismatch, "comparison width must be positive");
  // Values 1 + S_i reach bits + 1 and must stay nonzero mod u.
  if (!(BigUint(bits + 2) < pk.u)) throw Error(ErrorCode::BitWidthMismatch, "comparison width too large for DGK u");
}

void order(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ProtocolOrderViolation, what);
}

dgk::Ciphertext rerandomize(const dgk::PublicKey& pk, const dgk::Ciphertext& c, Rng& rng) {
  return dgk::add(pk, c, dgk::encrypt(pk, BigUint(0), rng));
}

// Uniform mask of exactly 2t bits that is a unit mod u.
BigUint draw_mask(const dgk::PublicKey& pk, Rng& rng) {
  const std::size_t w = 2 * pk.t_bits;
  for (;;) {
    BigUint r = rng.bits(w - 1) + pow2(w - 1);
    if (!(r % pk.u).is_zero()) return r;
  }
}

}  // namespace

PlainCmpB::PlainCmpB(const dgk::PrivateKey& sk, std::size_t bits) : sk_(&sk), bits_(bits) {
  check_width(bits, sk.pk);
}

std::vector<dgk::Ciphertext> PlainCmpB::encrypt_bits(const BigUint& beta, Rng& rng) {
  order(step_ == Step::Start, "comparison bits already sent");
  if (beta.bit_length() > bits_) throw Error(ErrorCode::BitWidthMismatch, "beta wider than the comparison width");
  std::vector<dgk::Ciphertext> out;
  out.reserve(bits_);
  for (std::size_t i = bits_; i-- > 0;) out.push_back(dgk::encrypt(sk_->pk, BigUint(beta.bit(i) ? 1 : 0), rng));
  step_ = Step::SentBits;
  return out;
}

bool PlainCmpB::finish(std::span<const dgk::Ciphertext> masked) {
  order(step_ == Step::SentBits, "masked values before bits were sent");
  if (masked.size() != bits_ + 1) throw Error(ErrorCode::BitWidthMismatch, "unexpected number of masked values");
  step_ = Step::Done;
  bool any_zero = false;
  for (const auto& c : masked) any_zero = dgk::is_zero(*sk_, c) || any_zero;
  return any_zero;
}

PlainCmpA::PlainCmpA(const dgk::PublicKey& pk, std::size_t bits) : pk_(&pk), bits_(bits) { check_width(bits, pk); }

// Bits are indexed MSB first. S_i is the number of differing positions
// strictly above i. For every i with alpha_i = delta_A, c_i = 1 + S_i -
// (alpha_i xor beta_i) is zero exactly at the first differing position, which
// witnesses alpha < beta when delta_A = 0 and alpha > beta when delta_A = 1.
// The extra value S over all bits is zero iff alpha = beta and is only kept
// for delta_A = 0, so B sees a zero iff delta_B = delta_A xor (alpha <= beta).
// Positions outside L and the unused extra slot carry random nonzero values.
std::vector<dgk::Ciphertext> PlainCmpA::respond(const BigUint& alpha, std::span<const dgk::Ciphertext> beta_bits,
                                                Rng& rng) {
  order(step_ == Step::Start, "comparison session already used");
  if (beta_bits.size() != bits_) throw Error(ErrorCode::BitWidthMismatch, "unexpected number of encrypted bits");
  if (alpha.bit_length() > bits_) throw Error(ErrorCode::BitWidthMismatch, "alpha wider than the comparison width");
  const auto& pk = *pk_;
  delta_a_ = rng.next_bit();
  const auto one = dgk::encrypt(pk, BigUint(1), rng);

  std::vector<dgk::Ciphertext> out;
  out.reserve(bits_ + 1);
  auto prefix = dgk::encrypt(pk, BigUint(0), rng);
  for (std::size_t j = 0; j < bits_; ++j) {
    const bool a_i = alpha.bit(bits_ - 1 - j);
    const auto x = a_i ? dgk::sub(pk, one, beta_bits[j]) : beta_bits[j];
    if (a_i == delta_a_) {
      auto c = dgk::sub(pk, dgk::add(pk, one, prefix), x);
      out.push_back(rerandomize(pk, dgk::cmlt(pk, draw_mask(pk, rng), c), rng));
    } else {
      out.push_back(dgk::encrypt(pk, draw_mask(pk, rng) % pk.u, rng));
    }
    prefix = dgk::add(pk, prefix, x);
  }
  if (!delta_a_) {
    out.push_back(rerandomize(pk, dgk::cmlt(pk, draw_mask(pk, rng), prefix), rng));
  } else {
    out.push_back(dgk::encrypt(pk, draw_mask(pk, rng) % pk.u, rng));
  }
  // Fisher-Yates with rejection-sampled indices.
  for (std::size_t i = out.size(); i > 1; --i) {
    const auto j = sample_below(BigUint(i), rng).low_u64();
    std::swap(out[i - 1], out[j]);
  }
  step_ = Step::Done;
  return out;
}

bool PlainCmpA::delta() const {
  order(step_ == Step::Done, "delta requested before the comparison ran");
  return delta_a_;
}

EncCmpA::EncCmpA(const paillier::PublicKey& ahe, const dgk::PublicKey& dgk, std::size_t bits, std::size_t stat_bits)
    : ahe_(&ahe), bits_(bits), stat_bits_(stat_bits), inner_(dgk, bits) {
  if (!(pow2(bits + stat_bits + 2) < ahe.n)) {
    throw Error(ErrorCode::BlindingOverflow, "blinded difference would wrap around the Paillier modulus");
  }
}

paillier::Ciphertext EncCmpA::blind(const paillier::Ciphertext& a, const paillier::Ciphertext& b, Rng& rng) {
  order(step_ == Step::Start, "blind called twice");
  r_ = rng.bits(bits_ + 1 + stat_bits_);
  step_ = Step::Blinded;
  return paillier::add_plain(*ahe_, paillier::sub(*ahe_, b, a), pow2(bits_) + r_);
}

std::vector<dgk::Ciphertext> EncCmpA::respond(std::span<const dgk::Ciphertext> beta_bits, Rng& rng) {
  order(step_ == Step::Blinded, "respond before blind");
  step_ = Step::Responded;
  return inner_.respond(r_ % pow2(bits_), beta_bits, rng);
}

paillier::Ciphertext EncCmpA::finish(const paillier::Ciphertext& z_high, const paillier::Ciphertext& delta_b) {
  order(step_ == Step::Responded, "finish before respond");
  step_ = Step::Done;
  const auto& pk = *ahe_;
  // beta < alpha  <=>  not (alpha <= beta)  <=>  delta_A xor delta_B xor 1.
  const auto lt = inner_.delta() ? delta_b : paillier::sub(pk, paillier::encrypt_trivial(pk, BigUint(1)), delta_b);
  const BigUint r_high = (r_ >> bits_) % pk.n;
  auto out = paillier::add_plain(pk, z_high, mod_sub(BigUint(0), r_high, pk.n));
  return paillier::sub(pk, out, lt);
}

EncCmpB::EncCmpB(const paillier::PrivateKey& ahe, const dgk::PrivateKey& dgk, std::size_t bits)
    : ahe_(&ahe), bits_(bits), inner_(dgk, bits) {}

EncCmpB::Decomposed EncCmpB::decompose(const paillier::Ciphertext& z, Rng& rng) {
  order(step_ == Step::Start, "decompose called twice");
  const BigUint zz = paillier::decrypt(*ahe_, z);
  Decomposed d;
  d.z_high = paillier::encrypt(ahe_->pk, zz >> bits_, rng);
  d.beta_bits = inner_.encrypt_bits(zz % pow2(bits_), rng);
  step_ = Step::Decomposed;
  return d;
}

paillier::Ciphertext EncCmpB::report(std::span<const dgk::Ciphertext> masked, Rng& rng) {
  order(step_ == Step::Decomposed, "report before decompose");
  step_ = Step::Reported;
  return paillier::encrypt(ahe_->pk, BigUint(inner_.finish(masked) ? 1 : 0), rng);
}

bool EncCmpB::reveal(const paillier::Ciphertext& delta) {
  order(step_ == Step::Reported, "reveal before report");
  step_ = Step::Done;
  const BigUint d = paillier::decrypt(*ahe_, delta);
  if (d > BigUint(1)) throw Error(ErrorCode::InvalidArgument, "comparison result is not a bit");
  return d == BigUint(1);
}

std::pair<bool, bool> dgk_compare_plain(const BigUint& alpha, const BigUint& beta, std::size_t bits,
                                        const dgk::PrivateKey& sk, Rng& rng) {
  PlainCmpB b(sk, bits);
  PlainCmpA a(sk.pk, bits);
  const auto enc = b.encrypt_bits(beta, rng);
  const auto masked = a.respond(alpha, enc, rng);
  const bool db = b.finish(masked);
  return {a.delta(), db};
}

bool dgk_compare_encrypted(const paillier::Ciphertext& a, const paillier::Ciphertext& b, std::size_t bits,
                           std::size_t stat_bits, const paillier::PrivateKey& ahe_sk, const dgk::PrivateKey& dgk_sk,
                           Rng& rng) {
  EncCmpA pa(ahe_sk.pk, dgk_sk.pk, bits, stat_bits);
  EncCmpB pb(ahe_sk, dgk_sk, bits);
  const auto z = pa.blind(a, b, rng);
  const auto dec = pb.decompose(z, rng);
  const auto masked = pa.respond(dec.beta_bits, rng);
  const auto db = pb.report(masked, rng);
  return pb.reveal(pa.finish(dec.z_high, db));
}

}  // namespace cipherloop::compare
