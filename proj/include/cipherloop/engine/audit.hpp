#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cipherloop/engine/messages.hpp"
#include "cipherloop/labhe.hpp"

namespace cipherloop::engine {

struct TraceRecord {
  RoundTag tag;
  PartyId from = 0;
  PartyId to = 0;
  MsgType type = MsgType::Start;
  std::size_t bytes = 0;  // payload bytes, frame header excluded
};

/// Every delivered frame, in delivery order.
class Trace {
 public:
  void record(const PartyMessage& msg, std::size_t payload_bytes);
  std::vector<TraceRecord> records() const;
  std::size_t frames() const;
  std::size_t bytes() const;

 private:
  mutable std::mutex mu_;
  std::vector<TraceRecord> records_;
  std::size_t bytes_ = 0;
};

/// What a payload may reveal to its receiver.
enum class Taint {
  Control,       // driver traffic and acknowledgments
  KeyMaterial,   // public keys and encrypted user keys
  Ciphertext,    // opaque to the receiver
  Blinded,       // decryptable by the receiver, additively masked
  MaskedDgk,     // DGK values the receiver only zero-tests
  SelectionBit,  // comparison result under a uniform swap, with blinded OT offers
  Output,        // the control input u(t)
};

Taint taint_of(MsgType type);

/// Structural confidentiality check applied to every delivered message.
///
/// Cloud may only receive key material and ciphertexts, never plain
/// integers. The Actuator may receive key material, blinded values whose
/// declared margin is at least lambda bits, masked DGK values, swap-masked
/// comparison bits and the final output reveal. Round tags must increase
/// strictly on every channel.
class TaintAudit {
 public:
  explicit TaintAudit(int stat_bits) : stat_bits_(stat_bits) {}
  void inspect(const PartyMessage& msg);

  std::size_t inspected() const;
  std::size_t cloud_violations() const;
  std::size_t actuator_violations() const;
  std::size_t order_violations() const;
  std::size_t violations() const { return cloud_violations() + actuator_violations() + order_violations(); }
  std::vector<std::string> details() const;

 private:
  void flag(std::size_t& counter, const PartyMessage& msg, const std::string& why);

  int stat_bits_;
  mutable std::mutex mu_;
  std::size_t inspected_ = 0;
  std::size_t cloud_ = 0;
  std::size_t actuator_ = 0;
  std::size_t order_ = 0;
  std::map<std::pair<PartyId, PartyId>, RoundTag> last_tag_;
  std::vector<std::string> details_;
};

/// Records every offline label allocation together with the user key that
/// will encrypt under it.
class LabelLedger {
 public:
  void record(const std::string& owner, const labhe::Label& label);
  std::size_t count(const std::string& owner) const;
  std::size_t total() const;
  /// (owner, label) pairs allocated more than once.
  std::size_t duplicates() const;

 private:
  mutable std::mutex mu_;
  std::set<std::pair<std::string, labhe::Label>> seen_;
  std::map<std::string, std::size_t> counts_;
  std::size_t duplicates_ = 0;
};

}  // namespace cipherloop::engine
