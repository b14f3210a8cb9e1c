#include "cipherloop/engine/parties.hpp"

#include <bit>
#include <cstring>

#include <spdlog/spdlog.h>

#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"

namespace cipherloop::engine {

namespace {

using fixedpoint::to_residue;

void order(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ProtocolOrderViolation, what);
}

void expect_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected " + std::to_string(want) + " entries, got " + std::to_string(got));
  }
}

PartyMessage make(PartyId from, PartyId to, MsgType type, RoundTag tag, Payload payload = {}) {
  PartyMessage m;
  m.from = from;
  m.to = to;
  m.type = type;
  m.tag = tag;
  m.payload = std::move(payload);
  return m;
}

RoundTag tag_of(std::uint32_t t, std::size_t k, std::uint8_t ph) { return {t, static_cast<std::uint16_t>(k), ph}; }

std::uint16_t uniform_margin(const BigUint& n, const FpParams& fp) {
  return static_cast<std::uint16_t>(n.bit_length() - 1 - static_cast<std::size_t>(fp.total_bits()));
}

std::size_t subsystem_index(PartyId id, const Layout& layout) {
  if (id < party::kFirstSubsystem || id - party::kFirstSubsystem >= static_cast<int>(layout.subsystems())) {
    throw Error(ErrorCode::ProtocolOrderViolation, "message from unknown party " + party_name(id));
  }
  return id - party::kFirstSubsystem;
}

std::pair<paillier::PublicKey, dgk::PublicKey> read_keys(const Payload& p) {
  ByteReader r(p.blob);
  auto ahe = read_paillier_public_key(r);
  auto dgk = read_dgk_public_key(r);
  return {std::move(ahe), std::move(dgk)};
}

}  // namespace

BigUint zigzag(const mpz_class& v) {
  if (v >= 0) return BigUint(mpz_class(v * 2));
  return BigUint(mpz_class(-v * 2 - 1));
}

mpz_class unzigzag(const BigUint& v) {
  const mpz_class& z = v.mpz();
  if (mpz_odd_p(z.get_mpz_t())) return mpz_class(-(z + 1) / 2);
  return mpz_class(z / 2);
}

void check_key_budget(const FpParams& fp, const KeySizes& keys) {
  fp.validate();
  const int l = fp.total_bits();
  if (keys.ahe_bits < 256) throw Error(ErrorCode::ConfigInvalid, "AHE modulus below 256 bits");
  // The modulus has exactly ahe_bits bits, so N >= 2^(ahe_bits - 1).
  const auto floor_n = pow2(keys.ahe_bits - 1);
  check_truncation_budget(fp, floor_n);
  if (pow2(static_cast<std::size_t>(l + fp.stat_bits + 2)) >= floor_n) {
    throw Error(ErrorCode::BlindingOverflow, "comparison blinding exceeds the AHE modulus");
  }
  if (keys.dgk.u_bits < 3 || pow2(keys.dgk.u_bits - 1) <= BigUint(static_cast<std::uint64_t>(l + 2))) {
    throw Error(ErrorCode::BitWidthMismatch, "DGK plaintext space too small for l-bit comparisons");
  }
}

// ---------------------------------------------------------------- Setup

SetupParty::SetupParty(Layout layout, FpParams fp, qp::SystemModel model, Rng rng, LabelLedger* ledger)
    : layout_(std::move(layout)), fp_(fp), model_(std::move(model)), rng_(std::move(rng)), ledger_(ledger) {
  model_.validate();
  const auto qpd = qp::condense(model_, layout_.horizon);
  const auto zero = qp::Vector::Zero(static_cast<Eigen::Index>(layout_.m));
  fq_ = qp::encode_qp(qpd, qp::BoxConstraints::repeat(zero, zero, layout_.horizon), fp_);
}

std::vector<PartyMessage> SetupParty::handle(const PartyMessage& msg) {
  order(msg.type == MsgType::PublicKeys && msg.from == party::kActuator && !done_,
        "setup expects the public keys once");
  done_ = true;
  const auto mpk = read_keys(msg.payload).first;
  const auto key = labhe::keygen(mpk, rng_);

  Payload inputs;
  const auto push = [&](const labhe::Label& label, const mpz_class& value) {
    const auto off = labhe::encrypt_offline(mpk, key.usk, label, rng_);
    if (ledger_) ledger_->record("setup", label);
    inputs.lab.push_back(labhe::encrypt_online(mpk, off, to_residue(value, mpk.n)));
  };
  const std::size_t d = layout_.dim();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) push(layout_.hm_label(i, j), fq_.hm[i * d + j]);
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) push(layout_.he_label(i, j), fq_.he[i * d + j]);
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < layout_.n; ++j) push(layout_.fl_label(i, j), fq_.fl[i * layout_.n + j]);
  }
  push(layout_.eta_label(), fq_.e);

  Payload upk;
  upk.ahe.push_back(key.upk);
  std::vector<PartyMessage> out;
  out.push_back(make(id(), party::kActuator, MsgType::UserKey, tag_of(0, 0, phase::kUserKeys), std::move(upk)));
  out.push_back(make(id(), party::kCloud, MsgType::SetupInputs, tag_of(0, 0, phase::kInputs), std::move(inputs)));
  return out;
}

// ------------------------------------------------------------ Subsystem

SubsystemParty::SubsystemParty(Layout layout, std::size_t index, FpParams fp, qp::Vector lower, qp::Vector upper,
                               Rng rng, LabelLedger* ledger)
    : layout_(std::move(layout)),
      index_(index),
      fp_(fp),
      lower_(std::move(lower)),
      upper_(std::move(upper)),
      rng_(std::move(rng)),
      ledger_(ledger) {
  const auto q = static_cast<Eigen::Index>(layout_.horizon * layout_.m_parts.at(index_));
  if (lower_.size() != q || upper_.size() != q) {
    throw Error(ErrorCode::DimensionMismatch, "bound slice does not match the subsystem's inputs");
  }
}

std::vector<PartyMessage> SubsystemParty::handle(const PartyMessage& msg) {
  std::vector<PartyMessage> out;
  if (msg.type == MsgType::PublicKeys) {
    order(msg.from == party::kActuator && !mpk_, "subsystem expects the public keys once");
    mpk_ = read_keys(msg.payload).first;
    const auto& mpk = *mpk_;
    key_ = labhe::keygen(mpk, rng_);
    const std::string owner = subsystem_name(index_);

    const auto coords = layout_.input_coords(index_);
    Payload bounds;
    bounds.lab.reserve(2 * coords.size());
    for (int pass = 0; pass < 2; ++pass) {
      const bool up = pass == 0;
      for (std::size_t idx = 0; idx < coords.size(); ++idx) {
        const auto label = layout_.bound_label(up, coords[idx]);
        const auto off = labhe::encrypt_offline(mpk, key_.usk, label, rng_);
        if (ledger_) ledger_->record(owner, label);
        const double v = up ? upper_[static_cast<Eigen::Index>(idx)] : lower_[static_cast<Eigen::Index>(idx)];
        bounds.lab.push_back(labhe::encrypt_online(mpk, off, to_residue(fixedpoint::encode_int(v, fp_), mpk.n)));
      }
    }
    const std::size_t ni = layout_.n_parts.at(index_);
    const std::size_t off0 = layout_.state_offset(index_);
    x_offline_.resize(layout_.steps);
    for (std::size_t t = 0; t < layout_.steps; ++t) {
      for (std::size_t j = 0; j < ni; ++j) {
        const auto label = layout_.state_label(static_cast<std::uint32_t>(t), off0 + j);
        x_offline_[t].push_back(labhe::encrypt_offline(mpk, key_.usk, label, rng_));
        if (ledger_) ledger_->record(owner, label);
      }
    }

    Payload upk;
    upk.ahe.push_back(key_.upk);
    out.push_back(make(id(), party::kActuator, MsgType::UserKey, tag_of(0, 0, phase::kUserKeys), std::move(upk)));
    out.push_back(make(id(), party::kCloud, MsgType::BoundInputs, tag_of(0, 0, phase::kInputs), std::move(bounds)));
    return out;
  }

  order(msg.type == MsgType::Measure && msg.from == party::kDriver, "subsystem got an unexpected message");
  order(mpk_.has_value(), "measurement before key distribution");
  const std::uint32_t t = msg.tag.t;
  order(t < layout_.steps && (!last_t_ || t > *last_t_), "measurement for an invalid step");
  last_t_ = t;
  const std::size_t ni = layout_.n_parts.at(index_);
  expect_size(msg.payload.ints.size(), ni, "measurement");
  Payload x;
  for (std::size_t j = 0; j < ni; ++j) {
    const double v = std::bit_cast<double>(msg.payload.ints[j].low_u64());
    x.lab.push_back(
        labhe::encrypt_online(*mpk_, x_offline_[t][j], to_residue(fixedpoint::encode_int(v, fp_), mpk_->n)));
  }
  out.push_back(make(id(), party::kCloud, MsgType::Measurement, tag_of(t, 0, phase::kMeasurement), std::move(x)));
  return out;
}

// ---------------------------------------------------------------- Cloud

CloudParty::CloudParty(Layout layout, FpParams fp, Rng rng)
    : layout_(std::move(layout)), fp_(fp), rng_(std::move(rng)) {
  bounds_received_.assign(layout_.subsystems(), false);
  x_.assign(layout_.n, std::nullopt);
  x_received_.assign(layout_.subsystems(), false);
}

const LabCiphertext& CloudParty::setup_input(const labhe::Label& label) const {
  const auto it = setup_.find(label);
  if (it == setup_.end()) throw Error(ErrorCode::LabelMismatch, "no setup input for " + labhe::to_string(label));
  return it->second;
}

const LabCiphertext& CloudParty::resolve(const labhe::Label& label) const {
  if (label.party == "setup") return setup_input(label);
  if (label.party == "actuator") {
    const std::size_t d = layout_.dim();
    const std::size_t k = label.index / d;
    const std::size_t j = label.index % d;
    if (label.time == t_ && k == k_) return cur_.at(j);
    if (label.time == t_ && k + 1 == k_) return prev_.at(j);
  } else if (label.signal == "x" && label.time == t_) {
    const std::size_t i = std::stoul(label.party.substr(std::strlen("subsystem")));
    const auto& x = x_.at(layout_.state_offset(i) + label.index);
    if (x) return *x;
  }
  throw Error(ErrorCode::LabelMismatch, "cloud holds no ciphertext for " + labhe::to_string(label));
}

PartyMessage CloudParty::to_actuator(MsgType type, std::uint8_t ph, Payload payload) const {
  return make(id(), party::kActuator, type, tag_of(t_, k_, ph), std::move(payload));
}

void CloudParty::expect(const PartyMessage& msg, MsgType type, std::uint8_t ph) const {
  order(msg.from == party::kActuator && msg.type == type && msg.tag == tag_of(t_, k_, ph) &&
            stage_ == Stage::Iterating,
        "cloud: unexpected " + to_string(msg.type) + " at t=" + std::to_string(msg.tag.t) +
            " k=" + std::to_string(msg.tag.k));
}

ot::Variant CloudParty::variant_for(std::size_t coord, bool lower) const {
  return lower && last_iteration() && coord < layout_.m ? ot::Variant::Plain : ot::Variant::Prime;
}

std::vector<PartyMessage> CloudParty::maybe_init_done() {
  if (init_done_sent_ || !setup_received_) return {};
  for (bool b : bounds_received_) {
    if (!b) return {};
  }
  init_done_sent_ = true;
  stage_ = Stage::Ready;
  std::vector<PartyMessage> out;
  out.push_back(make(id(), party::kDriver, MsgType::InitDone, tag_of(0, 0, phase::kInitDone)));
  auto more = maybe_start_step();
  out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  return out;
}

std::vector<PartyMessage> CloudParty::maybe_start_step() {
  if (stage_ != Stage::Ready && stage_ != Stage::StepDone) return {};
  for (bool b : x_received_) {
    if (!b) return {};
  }
  const auto& pk = *mpk_;
  const std::size_t d = layout_.dim();
  if (stage_ == Stage::Ready) {
    warm_.clear();
    for (std::size_t j = 0; j < d; ++j) warm_.push_back(paillier::encrypt(pk, BigUint(0), rng_));
  }
  stage_ = Stage::InitIterate;
  t_ = next_t_;
  k_ = 0;
  masks_.clear();
  Payload p;
  p.blind_bits = uniform_margin(pk.n, fp_);
  for (std::size_t j = 0; j < d; ++j) {
    masks_.push_back(sample_below(pk.n, rng_));
    p.ahe.push_back(paillier::add_plain(pk, warm_[j], mod_sub(BigUint(0), masks_[j], pk.n)));
  }
  std::vector<PartyMessage> out;
  out.push_back(to_actuator(MsgType::InitMasked, phase::kInitMasked, std::move(p)));
  return out;
}

std::vector<PartyMessage> CloudParty::begin_iteration() {
  const auto& pk = *mpk_;
  const std::size_t d = layout_.dim();
  trunc_.clear();
  trunc_.reserve(d);
  Payload p;
  p.blind_bits = static_cast<std::uint16_t>(fp_.stat_bits);
  for (std::size_t i = 0; i < d; ++i) {
    const auto program = build_iteration_program(layout_, t_, k_, i, fp_.frac_bits);
    std::vector<LabCiphertext> inputs;
    inputs.reserve(program.labels().size());
    for (const auto& label : program.labels()) inputs.push_back(resolve(label));
    const auto value = labhe::to_ahe(pk, program.evaluate(pk, inputs));
    trunc_.emplace_back(pk, *dgk_, fp_);
    p.ahe.push_back(trunc_.back().blind(value, rng_));
  }
  std::vector<PartyMessage> out;
  out.push_back(to_actuator(MsgType::TruncBlinded, phase::kTruncBlinded, std::move(p)));
  return out;
}

std::vector<PartyMessage> CloudParty::start_comparisons(bool upper, std::vector<paillier::Ciphertext> values) {
  const auto& pk = *mpk_;
  const std::size_t d = layout_.dim();
  const auto& bounds = upper ? hu_ : lu_;
  cmp_.clear();
  cmp_.reserve(d);
  pairs_.clear();
  Payload p;
  p.blind_bits = static_cast<std::uint16_t>(fp_.stat_bits);
  for (std::size_t i = 0; i < d; ++i) {
    const bool swap = rng_.next_bit();
    swaps_ += swap ? 1 : 0;
    ++swap_draws_;
    auto pair = swap ? std::make_pair(values[i], bounds[i]) : std::make_pair(bounds[i], values[i]);
    cmp_.emplace_back(pk, *dgk_, static_cast<std::size_t>(fp_.total_bits()), static_cast<std::size_t>(fp_.stat_bits));
    // delta = (b <= a): index delta picks min(a, b), index !delta picks max(a, b).
    p.ahe.push_back(cmp_.back().blind(pair.second, pair.first, rng_));
    pairs_.push_back(std::move(pair));
  }
  std::vector<PartyMessage> out;
  out.push_back(
      to_actuator(MsgType::CmpBlinded, upper ? phase::kUpperBlinded : phase::kLowerBlinded, std::move(p)));
  return out;
}

std::vector<PartyMessage> CloudParty::handle(const PartyMessage& msg) {
  const std::size_t d = layout_.dim();
  const auto l = static_cast<std::size_t>(fp_.total_bits());
  const auto f = static_cast<std::size_t>(fp_.frac_bits);
  const Payload& in = msg.payload;
  std::vector<PartyMessage> out;

  switch (msg.type) {
    case MsgType::PublicKeys: {
      order(stage_ == Stage::Keys && msg.from == party::kActuator, "cloud expects the public keys once");
      auto [ahe, dgk] = read_keys(in);
      mpk_ = std::move(ahe);
      dgk_ = std::move(dgk);
      check_truncation_budget(fp_, mpk_->n);
      stage_ = Stage::Inputs;
      return out;
    }
    case MsgType::SetupInputs: {
      order(stage_ == Stage::Inputs && msg.from == party::kSetup && !setup_received_, "unexpected setup inputs");
      expect_size(in.lab.size(), layout_.setup_label_count(), "setup inputs");
      std::size_t q = 0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) setup_[layout_.hm_label(i, j)] = in.lab[q++];
      }
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) setup_[layout_.he_label(i, j)] = in.lab[q++];
      }
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < layout_.n; ++j) setup_[layout_.fl_label(i, j)] = in.lab[q++];
      }
      setup_[layout_.eta_label()] = in.lab[q++];
      setup_received_ = true;
      return maybe_init_done();
    }
    case MsgType::BoundInputs: {
      const std::size_t i = subsystem_index(msg.from, layout_);
      order(stage_ == Stage::Inputs && !bounds_received_[i], "unexpected bound inputs");
      const auto coords = layout_.input_coords(i);
      expect_size(in.lab.size(), 2 * coords.size(), "bound inputs");
      if (hu_.empty()) {
        hu_.resize(d);
        lu_.resize(d);
      }
      for (std::size_t idx = 0; idx < coords.size(); ++idx) {
        hu_[coords[idx]] = labhe::to_ahe(*mpk_, in.lab[idx]);
        lu_[coords[idx]] = labhe::to_ahe(*mpk_, in.lab[coords.size() + idx]);
      }
      bounds_received_[i] = true;
      return maybe_init_done();
    }
    case MsgType::Measurement: {
      const std::size_t i = subsystem_index(msg.from, layout_);
      order((stage_ == Stage::Ready || stage_ == Stage::StepDone) && msg.tag.t == next_t_ && !x_received_[i],
            "measurement out of order");
      expect_size(in.lab.size(), layout_.n_parts[i], "measurement");
      const std::size_t off = layout_.state_offset(i);
      for (std::size_t j = 0; j < in.lab.size(); ++j) x_[off + j] = in.lab[j];
      x_received_[i] = true;
      return maybe_start_step();
    }
    case MsgType::InitLab: {
      order(stage_ == Stage::InitIterate && msg.from == party::kActuator &&
                msg.tag == tag_of(t_, 0, phase::kInitLab),
            "unexpected initial iterate");
      expect_size(in.lab.size(), d, "initial iterate");
      cur_.clear();
      for (std::size_t j = 0; j < d; ++j) cur_.push_back(labhe::add_plain(*mpk_, in.lab[j], masks_[j]));
      prev_ = cur_;
      x_received_.assign(layout_.subsystems(), false);
      stage_ = Stage::Iterating;
      return begin_iteration();
    }
    case MsgType::TruncBits: {
      expect(msg, MsgType::TruncBits, phase::kTruncBits);
      expect_size(in.ahe.size(), d, "truncation highs");
      expect_size(in.dgk.size(), d * f, "truncation bits");
      z_high_ = in.ahe;
      Payload p;
      for (std::size_t i = 0; i < d; ++i) {
        auto masked = trunc_[i].respond(std::span(in.dgk).subspan(i * f, f), rng_);
        p.dgk.insert(p.dgk.end(), masked.begin(), masked.end());
      }
      out.push_back(to_actuator(MsgType::TruncMasked, phase::kTruncMasked, std::move(p)));
      return out;
    }
    case MsgType::TruncCarry: {
      expect(msg, MsgType::TruncCarry, phase::kTruncCarry);
      expect_size(in.ahe.size(), d, "truncation carries");
      std::vector<paillier::Ciphertext> values;
      for (std::size_t i = 0; i < d; ++i) values.push_back(trunc_[i].finish(z_high_[i], in.ahe[i]));
      return start_comparisons(true, std::move(values));
    }
    case MsgType::CmpBits: {
      const bool upper = msg.tag.phase == phase::kUpperBits;
      expect(msg, MsgType::CmpBits, upper ? phase::kUpperBits : phase::kLowerBits);
      expect_size(in.ahe.size(), d, "comparison highs");
      expect_size(in.dgk.size(), d * l, "comparison bits");
      z_high_ = in.ahe;
      Payload p;
      for (std::size_t i = 0; i < d; ++i) {
        auto masked = cmp_[i].respond(std::span(in.dgk).subspan(i * l, l), rng_);
        p.dgk.insert(p.dgk.end(), masked.begin(), masked.end());
      }
      out.push_back(to_actuator(MsgType::CmpMasked, upper ? phase::kUpperMasked : phase::kLowerMasked, std::move(p)));
      return out;
    }
    case MsgType::CmpCarry: {
      const bool upper = msg.tag.phase == phase::kUpperCarry;
      expect(msg, MsgType::CmpCarry, upper ? phase::kUpperCarry : phase::kLowerCarry);
      expect_size(in.ahe.size(), d, "comparison carries");
      ot_.clear();
      ot_.reserve(d);
      Payload p;
      p.blind_bits = std::min<std::uint16_t>(uniform_margin(mpk_->n, fp_), 0xffff);
      for (std::size_t i = 0; i < d; ++i) {
        p.ahe.push_back(cmp_[i].finish(z_high_[i], in.ahe[i]));
        ot_.emplace_back(*mpk_, variant_for(i, !upper));
        const auto offer = ot_.back().offer(pairs_[i].first, pairs_[i].second, rng_);
        p.ahe.push_back(offer.v0);
        p.ahe.push_back(offer.v1);
      }
      out.push_back(to_actuator(MsgType::CmpDelta, upper ? phase::kUpperDelta : phase::kLowerDelta, std::move(p)));
      return out;
    }
    case MsgType::OtChoice: {
      const bool upper = msg.tag.phase == phase::kUpperChoice;
      expect(msg, MsgType::OtChoice, upper ? phase::kUpperChoice : phase::kLowerChoice);
      expect_size(in.ahe.size(), 2 * d, "OT choices");
      const auto choice = [&](std::size_t i) { return ot::Choice{in.ahe[2 * i], in.ahe[2 * i + 1]}; };
      if (upper) {
        std::vector<paillier::Ciphertext> mid;
        for (std::size_t i = 0; i < d; ++i) mid.push_back(ot_[i].reconstruct(choice(i)));
        return start_comparisons(false, std::move(mid));
      }
      const auto& pk = *mpk_;
      if (!last_iteration()) {
        masks_.clear();
        Payload p;
        p.blind_bits = uniform_margin(pk.n, fp_);
        for (std::size_t i = 0; i < d; ++i) {
          const auto u = ot_[i].reconstruct(choice(i));
          masks_.push_back(sample_below(pk.n, rng_));
          p.ahe.push_back(paillier::add_plain(pk, u, mod_sub(BigUint(0), masks_[i], pk.n)));
        }
        out.push_back(to_actuator(MsgType::RefreshMasked, phase::kRefreshOrReveal, std::move(p)));
        return out;
      }
      Payload reveal;
      std::vector<paillier::Ciphertext> tail;
      for (std::size_t i = 0; i < d; ++i) {
        if (i < layout_.m) {
          reveal.ahe.push_back(ot_[i].reveal_mask(choice(i), rng_));
        } else {
          tail.push_back(ot_[i].reconstruct(choice(i)));
        }
      }
      out.push_back(to_actuator(MsgType::OtReveal, phase::kRefreshOrReveal, std::move(reveal)));
      // Warm start: [[U_K]] shifted by m, zero-padded.
      warm_ = std::move(tail);
      for (std::size_t j = 0; j < layout_.m; ++j) warm_.push_back(paillier::encrypt(pk, BigUint(0), rng_));
      stage_ = Stage::StepDone;
      next_t_ = t_ + 1;
      auto more = maybe_start_step();
      out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
      return out;
    }
    case MsgType::RefreshLab: {
      expect(msg, MsgType::RefreshLab, phase::kRefreshLab);
      expect_size(in.lab.size(), d, "refreshed iterate");
      prev_ = std::move(cur_);
      cur_.clear();
      for (std::size_t j = 0; j < d; ++j) cur_.push_back(labhe::add_plain(*mpk_, in.lab[j], masks_[j]));
      ++k_;
      return begin_iteration();
    }
    default:
      break;
  }
  throw Error(ErrorCode::ProtocolOrderViolation, "cloud cannot handle " + to_string(msg.type));
}

// ------------------------------------------------------------- Actuator

ActuatorParty::ActuatorParty(Layout layout, FpParams fp, KeySizes keys, Rng rng, LabelLedger* ledger)
    : layout_(std::move(layout)), fp_(fp), sizes_(keys), rng_(std::move(rng)), ledger_(ledger) {
  check_key_budget(fp_, sizes_);
  master_ = labhe::init(sizes_.ahe_bits, rng_);
  auto [dpk, dsk] = dgk::keygen(sizes_.dgk, rng_);
  dgk_pk_ = std::move(dpk);
  dgk_sk_ = std::move(dsk);
  fp_.check_budget(master_.mpk.n);
  check_truncation_budget(fp_, master_.mpk.n);
}

PartyMessage ActuatorParty::to_cloud(MsgType type, const RoundTag& tag, Payload payload) const {
  return make(id(), party::kCloud, type, tag, std::move(payload));
}

const BigUint& ActuatorParty::take_secret(std::uint32_t t, std::size_t k, std::size_t i) {
  const std::size_t idx = (static_cast<std::size_t>(t) * layout_.iterations + k) * layout_.dim() + i;
  order(idx < secrets_.size(), "program secret out of range");
  order(!secret_used_[idx], "program secret consumed twice");
  secret_used_[idx] = true;
  ++secrets_used_;
  return secrets_[idx];
}

std::vector<PartyMessage> ActuatorParty::precompute() {
  const auto& mpk = master_.mpk;
  const std::size_t d = layout_.dim();
  own_key_ = labhe::keygen(mpk, rng_);
  keyring_["actuator"] = own_key_.usk;
  offline_.clear();
  offline_.reserve(layout_.actuator_label_count());
  secrets_.clear();
  secrets_.reserve(layout_.actuator_label_count());
  for (std::size_t t = 0; t < layout_.steps; ++t) {
    const auto tt = static_cast<std::uint32_t>(t);
    for (std::size_t k = 0; k < layout_.iterations; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        const auto label = layout_.iterate_label(tt, k, j);
        offline_.push_back(labhe::encrypt_offline(mpk, own_key_.usk, label, rng_));
        if (ledger_) ledger_->record("actuator", label);
      }
      for (std::size_t i = 0; i < d; ++i) {
        const auto program = build_iteration_program(layout_, tt, k, i, fp_.frac_bits);
        secrets_.push_back(labhe::decrypt_offline(master_.msk, keyring_, program).secret);
      }
    }
  }
  secret_used_.assign(secrets_.size(), false);
  spdlog::debug("actuator: {} iterate labels, {} program secrets", offline_.size(), secrets_.size());
  std::vector<PartyMessage> out;
  out.push_back(make(id(), party::kDriver, MsgType::InitDone, tag_of(0, 0, phase::kInitDone)));
  return out;
}

std::vector<PartyMessage> ActuatorParty::lab_encrypt(MsgType type, const RoundTag& tag, std::size_t k,
                                                     const std::vector<paillier::Ciphertext>& masked) {
  const std::size_t d = layout_.dim();
  expect_size(masked.size(), d, "masked iterate");
  order(tag.t < layout_.steps && k < layout_.iterations, "iterate label out of range");
  Payload p;
  for (std::size_t j = 0; j < d; ++j) {
    const auto& off = offline_.at((static_cast<std::size_t>(tag.t) * layout_.iterations + k) * d + j);
    p.lab.push_back(labhe::encrypt_online(master_.mpk, off, paillier::decrypt(*master_.msk, masked[j])));
  }
  std::vector<PartyMessage> out;
  out.push_back(to_cloud(type, tag, std::move(p)));
  return out;
}

std::vector<PartyMessage> ActuatorParty::handle(const PartyMessage& msg) {
  const std::size_t d = layout_.dim();
  const auto l = static_cast<std::size_t>(fp_.total_bits());
  const auto f = static_cast<std::size_t>(fp_.frac_bits);
  const Payload& in = msg.payload;
  const RoundTag& tag = msg.tag;
  const auto reply_tag = [&](std::uint8_t ph) { return tag_of(tag.t, tag.k, ph); };
  std::vector<PartyMessage> out;

  if (msg.type == MsgType::Start) {
    order(msg.from == party::kDriver, "start must come from the driver");
    ByteWriter w;
    write_public_key(w, master_.mpk);
    write_public_key(w, dgk_pk_);
    const Bytes blob = std::move(w).take();
    std::vector<PartyId> to = {party::kSetup, party::kCloud};
    for (std::size_t i = 0; i < layout_.subsystems(); ++i) to.push_back(subsystem_id(i));
    for (PartyId p : to) {
      Payload keys;
      keys.blob = blob;
      out.push_back(make(id(), p, MsgType::PublicKeys, tag_of(0, 0, phase::kKeys), std::move(keys)));
    }
    return out;
  }
  if (msg.type != MsgType::UserKey) order(msg.from == party::kCloud, "actuator: unexpected sender");

  switch (msg.type) {
    case MsgType::UserKey: {
      const std::string who = party_name(msg.from);
      order(msg.from == party::kSetup || msg.from >= party::kFirstSubsystem, "user key from an unexpected party");
      if (msg.from != party::kSetup) subsystem_index(msg.from, layout_);
      order(!keyring_.contains(who), "duplicate user key");
      expect_size(in.ahe.size(), 1, "user key");
      keyring_[who] = labhe::recover_user_key(*master_.msk, in.ahe[0]);
      if (keyring_.size() == layout_.subsystems() + 1) return precompute();
      return out;
    }
    case MsgType::InitMasked:
      return lab_encrypt(MsgType::InitLab, reply_tag(phase::kInitLab), 0, in.ahe);
    case MsgType::RefreshMasked:
      order(!last_iteration(tag.k), "refresh after the last iteration");
      return lab_encrypt(MsgType::RefreshLab, reply_tag(phase::kRefreshLab), tag.k + 1u, in.ahe);
    case MsgType::TruncBlinded: {
      expect_size(in.ahe.size(), d, "blinded truncation inputs");
      trunc_.clear();
      trunc_.reserve(d);
      Payload p;
      const auto& n = master_.mpk.n;
      for (std::size_t i = 0; i < d; ++i) {
        const BigUint w = mod_add(paillier::decrypt(*master_.msk, in.ahe[i]), take_secret(tag.t, tag.k, i), n);
        trunc_.emplace_back(*master_.msk, dgk_sk_, fp_);
        auto split = trunc_.back().split(w, rng_);
        p.ahe.push_back(std::move(split.high));
        p.dgk.insert(p.dgk.end(), split.low_bits.begin(), split.low_bits.end());
      }
      out.push_back(to_cloud(MsgType::TruncBits, reply_tag(phase::kTruncBits), std::move(p)));
      return out;
    }
    case MsgType::TruncMasked: {
      expect_size(in.dgk.size(), d * (f + 1), "masked truncation values");
      order(trunc_.size() == d, "truncation carry without a session");
      Payload p;
      for (std::size_t i = 0; i < d; ++i) {
        p.ahe.push_back(trunc_[i].carry(std::span(in.dgk).subspan(i * (f + 1), f + 1), rng_));
      }
      out.push_back(to_cloud(MsgType::TruncCarry, reply_tag(phase::kTruncCarry), std::move(p)));
      return out;
    }
    case MsgType::CmpBlinded: {
      const bool upper = tag.phase == phase::kUpperBlinded;
      expect_size(in.ahe.size(), d, "blinded comparison inputs");
      cmp_.clear();
      cmp_.reserve(d);
      Payload p;
      for (std::size_t i = 0; i < d; ++i) {
        cmp_.emplace_back(*master_.msk, dgk_sk_, l);
        auto dec = cmp_.back().decompose(in.ahe[i], rng_);
        p.ahe.push_back(std::move(dec.z_high));
        p.dgk.insert(p.dgk.end(), dec.beta_bits.begin(), dec.beta_bits.end());
      }
      out.push_back(to_cloud(MsgType::CmpBits, reply_tag(upper ? phase::kUpperBits : phase::kLowerBits), std::move(p)));
      return out;
    }
    case MsgType::CmpMasked: {
      const bool upper = tag.phase == phase::kUpperMasked;
      expect_size(in.dgk.size(), d * (l + 1), "masked comparison values");
      order(cmp_.size() == d, "comparison report without a session");
      Payload p;
      for (std::size_t i = 0; i < d; ++i) {
        p.ahe.push_back(cmp_[i].report(std::span(in.dgk).subspan(i * (l + 1), l + 1), rng_));
      }
      out.push_back(
          to_cloud(MsgType::CmpCarry, reply_tag(upper ? phase::kUpperCarry : phase::kLowerCarry), std::move(p)));
      return out;
    }
    case MsgType::CmpDelta: {
      const bool upper = tag.phase == phase::kUpperDelta;
      expect_size(in.ahe.size(), 3 * d, "comparison results and offers");
      order(cmp_.size() == d, "comparison result without a session");
      ot_.clear();
      ot_.reserve(d);
      plain_ot_.assign(d, false);
      Payload p;
      for (std::size_t i = 0; i < d; ++i) {
        const bool delta = cmp_[i].reveal(in.ahe[3 * i]);
        const bool plain = !upper && last_iteration(tag.k) && i < layout_.m;
        plain_ot_[i] = plain;
        ot_.emplace_back(*master_.msk, plain ? ot::Variant::Plain : ot::Variant::Prime, upper ? delta : !delta);
        auto choice = ot_.back().choose(ot::Offer{in.ahe[3 * i + 1], in.ahe[3 * i + 2]}, rng_);
        p.ahe.push_back(std::move(choice.index));
        p.ahe.push_back(std::move(choice.forwarded));
      }
      out.push_back(
          to_cloud(MsgType::OtChoice, reply_tag(upper ? phase::kUpperChoice : phase::kLowerChoice), std::move(p)));
      return out;
    }
    case MsgType::OtReveal: {
      order(last_iteration(tag.k), "output reveal before the last iteration");
      expect_size(in.ahe.size(), layout_.m, "output reveal");
      Payload p;
      for (std::size_t i = 0; i < layout_.m; ++i) {
        order(plain_ot_.at(i), "output reveal on a non-revealing transfer");
        const BigUint u = ot_[i].receive(in.ahe[i]);
        p.ints.push_back(zigzag(fixedpoint::to_signed(u, master_.mpk.n)));
      }
      out.push_back(make(id(), party::kDriver, MsgType::Output, reply_tag(phase::kOutput), std::move(p)));
      return out;
    }
    default:
      break;
  }
  throw Error(ErrorCode::ProtocolOrderViolation, "actuator cannot handle " + to_string(msg.type));
}

}  // namespace cipherloop::engine
