#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cipherloop/bigint.hpp"
#include "cipherloop/dgk.hpp"
#include "cipherloop/labhe.hpp"
#include "cipherloop/paillier.hpp"

namespace cipherloop::engine {

using PartyId = std::uint8_t;

namespace party {
inline constexpr PartyId kSetup = 0;
inline constexpr PartyId kCloud = 1;
inline constexpr PartyId kActuator = 2;
inline constexpr PartyId kFirstSubsystem = 3;
/// The simulation harness: feeds measurements, collects outputs.
inline constexpr PartyId kDriver = 255;
}  // namespace party

inline PartyId subsystem_id(std::size_t i) { return static_cast<PartyId>(party::kFirstSubsystem + i); }
std::string party_name(PartyId id);

enum class MsgType : std::uint8_t {
  Start = 1,          // driver -> actuator
  PublicKeys = 2,     // actuator -> all: mpk, DGK public key
  UserKey = 3,        // setup / subsystem -> actuator: upk
  SetupInputs = 4,    // setup -> cloud: E(-H/L), E(-eta H/L), E(F^T/L), E(eta)
  BoundInputs = 5,    // subsystem -> cloud: E(h_u^i), E(l_u^i)
  InitDone = 6,       // cloud / actuator -> driver
  Measure = 7,        // driver -> subsystem: x^i(t)
  Measurement = 8,    // subsystem -> cloud: E(x^i(t))
  InitMasked = 9,     // cloud -> actuator: [[U_0 - r_0]]
  InitLab = 10,       // actuator -> cloud: E(U_0 - r_0)
  TruncBlinded = 11,  // cloud -> actuator: [[T - rho + C]]
  TruncBits = 12,     // actuator -> cloud: [[w div 2^f]], [w mod 2^f] bits
  TruncMasked = 13,   // cloud -> actuator: masked DGK values
  TruncCarry = 14,    // actuator -> cloud: [[delta_B]]
  CmpBlinded = 15,    // cloud -> actuator: [[z]]
  CmpBits = 16,       // actuator -> cloud: [[z div 2^l]], [z mod 2^l] bits
  CmpMasked = 17,     // cloud -> actuator
  CmpCarry = 18,      // actuator -> cloud: [[delta_B]]
  CmpDelta = 19,      // cloud -> actuator: [[delta]], OT offers
  OtChoice = 20,      // actuator -> cloud: [[i]], forwarded [[v_i]]
  OtReveal = 21,      // cloud -> actuator: [[r_i]] for the first m coordinates
  RefreshMasked = 22, // cloud -> actuator: [[U_{k+1} - r_k]]
  RefreshLab = 23,    // actuator -> cloud: E(U_{k+1} - r_k)
  Output = 24,        // actuator -> driver: u(t)
};

std::string to_string(MsgType type);

/// Protocol phases; together with (t, k) they order every message on a channel.
namespace phase {
inline constexpr std::uint8_t kKeys = 0;
inline constexpr std::uint8_t kUserKeys = 1;
inline constexpr std::uint8_t kInputs = 2;
inline constexpr std::uint8_t kMeasurement = 3;
inline constexpr std::uint8_t kInitDone = 4;
inline constexpr std::uint8_t kInitMasked = 5;
inline constexpr std::uint8_t kInitLab = 6;
inline constexpr std::uint8_t kTruncBlinded = 10;
inline constexpr std::uint8_t kTruncBits = 11;
inline constexpr std::uint8_t kTruncMasked = 12;
inline constexpr std::uint8_t kTruncCarry = 13;
inline constexpr std::uint8_t kUpperBlinded = 14;
inline constexpr std::uint8_t kUpperBits = 15;
inline constexpr std::uint8_t kUpperMasked = 16;
inline constexpr std::uint8_t kUpperCarry = 17;
inline constexpr std::uint8_t kUpperDelta = 18;
inline constexpr std::uint8_t kUpperChoice = 19;
inline constexpr std::uint8_t kLowerBlinded = 20;
inline constexpr std::uint8_t kLowerBits = 21;
inline constexpr std::uint8_t kLowerMasked = 22;
inline constexpr std::uint8_t kLowerCarry = 23;
inline constexpr std::uint8_t kLowerDelta = 24;
inline constexpr std::uint8_t kLowerChoice = 25;
inline constexpr std::uint8_t kRefreshOrReveal = 26;
inline constexpr std::uint8_t kRefreshLab = 27;
inline constexpr std::uint8_t kOutput = 28;
}  // namespace phase

struct RoundTag {
  std::uint32_t t = 0;
  std::uint16_t k = 0;
  std::uint8_t phase = 0;
  friend auto operator<=>(const RoundTag&, const RoundTag&) = default;
};

struct Payload {
  std::vector<paillier::Ciphertext> ahe;
  std::vector<dgk::Ciphertext> dgk;
  std::vector<LabCiphertext> lab;
  /// Plain integers. Only key material and driver traffic carry these.
  std::vector<BigUint> ints;
  /// Opaque bytes (serialized public keys).
  Bytes blob;
  /// Statistical margin of the additive blinding on the ahe entries, in bits;
  /// 0 when the entries are not blinded values.
  std::uint16_t blind_bits = 0;
};

struct PartyMessage {
  PartyId from = 0;
  PartyId to = 0;
  MsgType type = MsgType::Start;
  RoundTag tag;
  Payload payload;
};

/// Length prefix, type and round tag.
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 4 + 2 + 1;

/// 4-byte big-endian length, 1-byte type, tag (t: 4, k: 2, phase: 1), payload.
/// The sender and receiver are not part of the frame; channels carry them.
Bytes encode_frame(const PartyMessage& msg);
/// ParseError on malformed input.
PartyMessage decode_frame(std::span<const std::uint8_t> frame, PartyId from, PartyId to);

Bytes encode_payload(const Payload& payload);
Payload decode_payload(std::span<const std::uint8_t> bytes);

void write_public_key(ByteWriter& w, const paillier::PublicKey& pk);
paillier::PublicKey read_paillier_public_key(ByteReader& r);
void write_public_key(ByteWriter& w, const dgk::PublicKey& pk);
dgk::PublicKey read_dgk_public_key(ByteReader& r);

}  // namespace cipherloop::engine
