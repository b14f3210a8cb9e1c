#include "cipherloop/engine/audit.hpp"

namespace cipherloop::engine {

void Trace::record(const PartyMessage& msg, std::size_t payload_bytes) {
  std::lock_guard lock(mu_);
  records_.push_back({msg.tag, msg.from, msg.to, msg.type, payload_bytes});
  bytes_ += payload_bytes;
}

std::vector<TraceRecord> Trace::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t Trace::frames() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::size_t Trace::bytes() const {
  std::lock_guard lock(mu_);
  return bytes_;
}

Taint taint_of(MsgType type) {
  switch (type) {
    case MsgType::Start:
    case MsgType::InitDone:
    case MsgType::Measure:
      return Taint::Control;
    case MsgType::PublicKeys:
    case MsgType::UserKey:
      return Taint::KeyMaterial;
    case MsgType::SetupInputs:
    case MsgType::BoundInputs:
    case MsgType::Measurement:
    case MsgType::InitLab:
    case MsgType::TruncBits:
    case MsgType::TruncCarry:
    case MsgType::CmpBits:
    case MsgType::CmpCarry:
    case MsgType::OtChoice:
    case MsgType::RefreshLab:
      return Taint::Ciphertext;
    case MsgType::InitMasked:
    case MsgType::TruncBlinded:
    case MsgType::CmpBlinded:
    case MsgType::RefreshMasked:
      return Taint::Blinded;
    case MsgType::TruncMasked:
    case MsgType::CmpMasked:
      return Taint::MaskedDgk;
    case MsgType::CmpDelta:
      return Taint::SelectionBit;
    case MsgType::OtReveal:
    case MsgType::Output:
      return Taint::Output;
  }
  return Taint::Control;
}

void TaintAudit::flag(std::size_t& counter, const PartyMessage& msg, const std::string& why) {
  ++counter;
  details_.push_back(party_name(msg.from) + " -> " + party_name(msg.to) + " " + to_string(msg.type) + " (t=" +
                     std::to_string(msg.tag.t) + ", k=" + std::to_string(msg.tag.k) + "): " + why);
}

void TaintAudit::inspect(const PartyMessage& msg) {
  std::lock_guard lock(mu_);
  ++inspected_;
  if (msg.from != party::kDriver && msg.to != party::kDriver) {
    auto [it, fresh] = last_tag_.try_emplace({msg.from, msg.to}, msg.tag);
    if (!fresh) {
      if (!(it->second < msg.tag)) flag(order_, msg, "round tag does not increase");
      it->second = msg.tag;
    }
  }

  const Taint taint = taint_of(msg.type);
  const Payload& p = msg.payload;
  if (msg.to == party::kCloud) {
    if (taint != Taint::KeyMaterial && taint != Taint::Ciphertext) {
      flag(cloud_, msg, "message class not admissible at the cloud");
    }
    if (!p.ints.empty()) flag(cloud_, msg, "plain integers in a cloud payload");
    if (!p.blob.empty() && msg.type != MsgType::PublicKeys) flag(cloud_, msg, "opaque bytes in a cloud payload");
    return;
  }
  if (msg.to == party::kActuator) {
    switch (taint) {
      case Taint::Control:
        if (!p.ahe.empty() || !p.dgk.empty() || !p.lab.empty() || !p.ints.empty()) {
          flag(actuator_, msg, "control message with data");
        }
        break;
      case Taint::KeyMaterial:
        if (!p.ints.empty() || !p.dgk.empty() || !p.lab.empty()) flag(actuator_, msg, "key message with data");
        break;
      case Taint::Blinded:
      case Taint::SelectionBit:
        if (p.blind_bits < stat_bits_) {
          flag(actuator_, msg,
               "blinding margin " + std::to_string(p.blind_bits) + " < " + std::to_string(stat_bits_) + " bits");
        }
        if (!p.ints.empty() || !p.lab.empty()) flag(actuator_, msg, "unblinded data next to blinded values");
        break;
      case Taint::MaskedDgk:
        if (!p.ahe.empty() || !p.ints.empty() || !p.lab.empty()) flag(actuator_, msg, "unexpected data");
        break;
      case Taint::Output:
        if (!p.ints.empty() || !p.lab.empty()) flag(actuator_, msg, "plain data in the output reveal");
        break;
      case Taint::Ciphertext:
        flag(actuator_, msg, "party input ciphertexts must not reach the actuator");
        break;
    }
  }
}

std::size_t TaintAudit::inspected() const {
  std::lock_guard lock(mu_);
  return inspected_;
}

std::size_t TaintAudit::cloud_violations() const {
  std::lock_guard lock(mu_);
  return cloud_;
}

std::size_t TaintAudit::actuator_violations() const {
  std::lock_guard lock(mu_);
  return actuator_;
}

std::size_t TaintAudit::order_violations() const {
  std::lock_guard lock(mu_);
  return order_;
}

std::vector<std::string> TaintAudit::details() const {
  std::lock_guard lock(mu_);
  return details_;
}

void LabelLedger::record(const std::string& owner, const labhe::Label& label) {
  std::lock_guard lock(mu_);
  if (!seen_.emplace(owner, label).second) ++duplicates_;
  ++counts_[owner];
}

std::size_t LabelLedger::count(const std::string& owner) const {
  std::lock_guard lock(mu_);
  const auto it = counts_.find(owner);
  return it == counts_.end() ? 0 : it->second;
}

std::size_t LabelLedger::total() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, c] : counts_) n += c;
  return n;
}

std::size_t LabelLedger::duplicates() const {
  std::lock_guard lock(mu_);
  return duplicates_;
}

}  // namespace cipherloop::engine
