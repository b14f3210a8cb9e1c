#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "cipherloop/compare.hpp"
#include "cipherloop/dgk.hpp"
#include "cipherloop/engine/audit.hpp"
#include "cipherloop/engine/layout.hpp"
#include "cipherloop/engine/messages.hpp"
#include "cipherloop/engine/truncation.hpp"
#include "cipherloop/fixedpoint.hpp"
#include "cipherloop/labhe.hpp"
#include "cipherloop/ot.hpp"
#include "cipherloop/qp.hpp"
#include "cipherloop/rng.hpp"

namespace cipherloop::engine {

/// Signed integer <-> non-negative wire integer (0, -1, 1, -2, ... -> 0, 1, 2, 3, ...).
BigUint zigzag(const mpz_class& v);
mpz_class unzigzag(const BigUint& v);

/// Isolated state machine: consumes one inbound message at a time and
/// returns the messages it sends in response.
class Party {
 public:
  virtual ~Party() = default;
  virtual PartyId id() const = 0;
  virtual std::vector<PartyMessage> handle(const PartyMessage& msg) = 0;
};

struct KeySizes {
  std::size_t ahe_bits = 512;
  dgk::Params dgk;
};

/// BudgetExceeded / BlindingOverflow / BitWidthMismatch / ConfigInvalid when
/// the fixed-point widths do not fit the key sizes.
void check_key_budget(const FpParams& fp, const KeySizes& keys);

class SetupParty final : public Party {
 public:
  SetupParty(Layout layout, FpParams fp, qp::SystemModel model, Rng rng, LabelLedger* ledger = nullptr);
  PartyId id() const override { return party::kSetup; }
  std::vector<PartyMessage> handle(const PartyMessage& msg) override;

  /// Integer coefficients shipped to the cloud (plaintext, for tests).
  const qp::FixedQP& fixed_qp() const { return fq_; }

 private:
  Layout layout_;
  FpParams fp_;
  qp::SystemModel model_;
  qp::FixedQP fq_;
  Rng rng_;
  LabelLedger* ledger_;
  bool done_ = false;
};

class SubsystemParty final : public Party {
 public:
  /// `lower` / `upper`: this subsystem's slice of the stacked box, N m_i entries.
  SubsystemParty(Layout layout, std::size_t index, FpParams fp, qp::Vector lower, qp::Vector upper, Rng rng,
                 LabelLedger* ledger = nullptr);
  PartyId id() const override { return subsystem_id(index_); }
  std::vector<PartyMessage> handle(const PartyMessage& msg) override;

 private:
  Layout layout_;
  std::size_t index_;
  FpParams fp_;
  qp::Vector lower_, upper_;
  Rng rng_;
  LabelLedger* ledger_;
  std::optional<paillier::PublicKey> mpk_;
  labhe::UserKey key_;
  std::vector<std::vector<labhe::OfflinePart>> x_offline_;  // [t][j]
  std::optional<std::uint32_t> last_t_;
};

class CloudParty final : public Party {
 public:
  CloudParty(Layout layout, FpParams fp, Rng rng);
  PartyId id() const override { return party::kCloud; }
  std::vector<PartyMessage> handle(const PartyMessage& msg) override;

  /// Fraction bookkeeping for the per-coordinate swaps.
  std::size_t swaps() const noexcept { return swaps_; }
  std::size_t swap_draws() const noexcept { return swap_draws_; }
  /// Stored setup ciphertext for a label (tests).
  const LabCiphertext& setup_input(const labhe::Label& label) const;
  const std::vector<paillier::Ciphertext>& upper_bounds() const { return hu_; }
  const std::vector<paillier::Ciphertext>& lower_bounds() const { return lu_; }
  /// Current iterate E(U_k) (tests).
  const std::vector<LabCiphertext>& iterate() const { return cur_; }

 private:
  enum class Stage { Keys, Inputs, Ready, InitIterate, Iterating, StepDone };

  std::vector<PartyMessage> maybe_init_done();
  std::vector<PartyMessage> maybe_start_step();
  std::vector<PartyMessage> begin_iteration();
  std::vector<PartyMessage> start_comparisons(bool upper, std::vector<paillier::Ciphertext> values);
  const LabCiphertext& resolve(const labhe::Label& label) const;
  PartyMessage to_actuator(MsgType type, std::uint8_t ph, Payload payload) const;
  void expect(const PartyMessage& msg, MsgType type, std::uint8_t ph) const;
  bool last_iteration() const { return k_ + 1 == layout_.iterations; }
  ot::Variant variant_for(std::size_t coord, bool lower) const;

  Layout layout_;
  FpParams fp_;
  Rng rng_;
  Stage stage_ = Stage::Keys;
  std::optional<paillier::PublicKey> mpk_;
  std::optional<dgk::PublicKey> dgk_;

  std::map<labhe::Label, LabCiphertext> setup_;
  std::vector<paillier::Ciphertext> hu_, lu_;
  std::vector<bool> bounds_received_;
  bool setup_received_ = false;
  bool init_done_sent_ = false;

  std::uint32_t t_ = 0;
  std::uint32_t next_t_ = 0;
  std::size_t k_ = 0;
  std::vector<std::optional<LabCiphertext>> x_;
  std::vector<bool> x_received_;
  std::vector<paillier::Ciphertext> warm_;
  std::vector<BigUint> masks_;
  std::vector<LabCiphertext> cur_, prev_;

  std::vector<TruncationCloud> trunc_;
  std::vector<compare::EncCmpA> cmp_;
  std::vector<paillier::Ciphertext> z_high_;
  std::vector<std::pair<paillier::Ciphertext, paillier::Ciphertext>> pairs_;  // (a, b) after the swap
  std::vector<ot::OtSender> ot_;
  std::size_t swaps_ = 0;
  std::size_t swap_draws_ = 0;
};

class ActuatorParty final : public Party {
 public:
  ActuatorParty(Layout layout, FpParams fp, KeySizes keys, Rng rng, LabelLedger* ledger = nullptr);
  PartyId id() const override { return party::kActuator; }
  std::vector<PartyMessage> handle(const PartyMessage& msg) override;

  const labhe::MasterKeys& master_keys() const { return master_; }
  const dgk::PrivateKey& dgk_key() const { return dgk_sk_; }
  const labhe::UserKeyring& keyring() const { return keyring_; }
  /// Number of program secrets consumed so far.
  std::size_t secrets_used() const noexcept { return secrets_used_; }

 private:
  std::vector<PartyMessage> precompute();
  PartyMessage to_cloud(MsgType type, const RoundTag& tag, Payload payload) const;
  std::vector<PartyMessage> lab_encrypt(MsgType type, const RoundTag& tag, std::size_t k,
                                        const std::vector<paillier::Ciphertext>& masked);
  const BigUint& take_secret(std::uint32_t t, std::size_t k, std::size_t i);
  bool last_iteration(std::size_t k) const { return k + 1 == layout_.iterations; }

  Layout layout_;
  FpParams fp_;
  KeySizes sizes_;
  Rng rng_;
  LabelLedger* ledger_;
  labhe::MasterKeys master_;
  dgk::PublicKey dgk_pk_;
  dgk::PrivateKey dgk_sk_;
  labhe::UserKeyring keyring_;
  labhe::UserKey own_key_;
  std::vector<labhe::OfflinePart> offline_;  // [(t K + k) dim + j]
  std::vector<BigUint> secrets_;             // [(t K + k) dim + i]
  std::vector<bool> secret_used_;
  std::size_t secrets_used_ = 0;

  std::vector<TruncationActuator> trunc_;
  std::vector<compare::EncCmpB> cmp_;
  std::vector<ot::OtChooser> ot_;
  std::vector<bool> plain_ot_;
};

}  // namespace cipherloop::engine
