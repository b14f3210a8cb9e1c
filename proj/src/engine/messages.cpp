#include "cipherloop/engine/messages.hpp"

#include "cipherloop/error.hpp"

namespace cipherloop::engine {

std::string party_name(PartyId id) {
  switch (id) {
    case party::kSetup: return "setup";
    case party::kCloud: return "cloud";
    case party::kActuator: return "actuator";
    case party::kDriver: return "driver";
    default: return "subsystem" + std::to_string(id - party::kFirstSubsystem);
  }
}

std::string to_string(MsgType type) {
  switch (type) {
    case MsgType::Start: return "Start";
    case MsgType::PublicKeys: return "PublicKeys";
    case MsgType::UserKey: return "UserKey";
    case MsgType::SetupInputs: return "SetupInputs";
    case MsgType::BoundInputs: return "BoundInputs";
    case MsgType::InitDone: return "InitDone";
    case MsgType::Measure: return "Measure";
    case MsgType::Measurement: return "Measurement";
    case MsgType::InitMasked: return "InitMasked";
    case MsgType::InitLab: return "InitLab";
    case MsgType::TruncBlinded: return "TruncBlinded";
    case MsgType::TruncBits: return "TruncBits";
    case MsgType::TruncMasked: return "TruncMasked";
    case MsgType::TruncCarry: return "TruncCarry";
    case MsgType::CmpBlinded: return "CmpBlinded";
    case MsgType::CmpBits: return "CmpBits";
    case MsgType::CmpMasked: return "CmpMasked";
    case MsgType::CmpCarry: return "CmpCarry";
    case MsgType::CmpDelta: return "CmpDelta";
    case MsgType::OtChoice: return "OtChoice";
    case MsgType::OtReveal: return "OtReveal";
    case MsgType::RefreshMasked: return "RefreshMasked";
    case MsgType::RefreshLab: return "RefreshLab";
    case MsgType::Output: return "Output";
  }
  return "Unknown";
}

Bytes encode_payload(const Payload& payload) {
  ByteWriter w;
  w.u16(payload.blind_bits);
  w.u32(static_cast<std::uint32_t>(payload.ahe.size()));
  for (const auto& c : payload.ahe) paillier::write(w, c);
  w.u32(static_cast<std::uint32_t>(payload.dgk.size()));
  for (const auto& c : payload.dgk) dgk::write(w, c);
  w.u32(static_cast<std::uint32_t>(payload.lab.size()));
  for (const auto& c : payload.lab) labhe::write(w, c);
  w.u32(static_cast<std::uint32_t>(payload.ints.size()));
  for (const auto& v : payload.ints) w.big(v);
  w.blob(payload.blob);
  return std::move(w).take();
}

namespace {

std::uint32_t read_count(ByteReader& r) {
  const std::uint32_t n = r.u32();
  // Every element takes at least four bytes on the wire.
  if (n > r.remaining() / 4) throw Error(ErrorCode::ParseError, "element count exceeds frame size");
  return n;
}

}  // namespace

Payload decode_payload(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Payload p;
  p.blind_bits = r.u16();
  for (std::uint32_t i = 0, n = read_count(r); i < n; ++i) p.ahe.push_back(paillier::read(r));
  for (std::uint32_t i = 0, n = read_count(r); i < n; ++i) p.dgk.push_back(dgk::read(r));
  for (std::uint32_t i = 0, n = read_count(r); i < n; ++i) p.lab.push_back(labhe::read(r));
  for (std::uint32_t i = 0, n = read_count(r); i < n; ++i) p.ints.push_back(r.big());
  p.blob = r.blob();
  if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after payload");
  return p;
}

Bytes encode_frame(const PartyMessage& msg) {
  const Bytes body = encode_payload(msg.payload);
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(1 + 4 + 2 + 1 + body.size()));
  w.u8(static_cast<std::uint8_t>(msg.type));
  w.u32(msg.tag.t);
  w.u16(msg.tag.k);
  w.u8(msg.tag.phase);
  w.raw(body);
  return std::move(w).take();
}

PartyMessage decode_frame(std::span<const std::uint8_t> frame, PartyId from, PartyId to) {
  ByteReader r(frame);
  const std::uint32_t len = r.u32();
  if (len != r.remaining() || len < 8) throw Error(ErrorCode::ParseError, "frame length mismatch");
  PartyMessage msg;
  msg.from = from;
  msg.to = to;
  const std::uint8_t type = r.u8();
  if (type < static_cast<std::uint8_t>(MsgType::Start) || type > static_cast<std::uint8_t>(MsgType::Output)) {
    throw Error(ErrorCode::ParseError, "unknown message type " + std::to_string(type));
  }
  msg.type = static_cast<MsgType>(type);
  msg.tag.t = r.u32();
  msg.tag.k = r.u16();
  msg.tag.phase = r.u8();
  msg.payload = decode_payload(r.raw(r.remaining()));
  return msg;
}

void write_public_key(ByteWriter& w, const paillier::PublicKey& pk) { w.big(pk.n); }

paillier::PublicKey read_paillier_public_key(ByteReader& r) { return paillier::PublicKey::from_modulus(r.big()); }

void write_public_key(ByteWriter& w, const dgk::PublicKey& pk) {
  w.big(pk.n);
  w.big(pk.g);
  w.big(pk.h);
  w.big(pk.u);
  w.u32(static_cast<std::uint32_t>(pk.t_bits));
}

dgk::PublicKey read_dgk_public_key(ByteReader& r) {
  dgk::PublicKey pk;
  pk.n = r.big();
  pk.g = r.big();
  pk.h = r.big();
  pk.u = r.big();
  pk.t_bits = r.u32();
  pk.fingerprint = paillier::fingerprint_of(pk.n);
  return pk;
}

}  // namespace cipherloop::engine
