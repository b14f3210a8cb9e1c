#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cipherloop/bigint.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/rng.hpp"

// Labeled homomorphic encryption layered over Paillier: messages are split
// into a public share m - b and an encrypted secret [[b]], where b is derived
// from the sender's key and a unique label. One ciphertext-ciphertext
// multiplication is supported.
namespace cipherloop::labhe {

struct Label {
  std::string party;
  std::string signal;
  std::uint32_t time = 0;
  std::uint32_t index = 0;

  /// party | signal | time | index, each field length-prefixed.
  Bytes serialize() const;
  /// 64-bit digest of the serialized label.
  std::uint64_t id() const;

  friend auto operator<=>(const Label&, const Label&) = default;
};

std::string to_string(const Label& label);

using UserSecretKey = std::array<std::uint8_t, 32>;
/// Party id -> user secret key, as held by the master-key owner.
using UserKeyring = std::map<std::string, UserSecretKey>;

struct MasterKeys {
  paillier::PublicKey mpk;
  std::shared_ptr<const paillier::PrivateKey> msk;
};

struct UserKey {
  UserSecretKey usk{};
  /// usk encrypted under mpk; only the master-key holder can open it.
  paillier::Ciphertext upk;
};

MasterKeys init(std::size_t modulus_bits, Rng& rng);
UserKey keygen(const paillier::PublicKey& mpk, Rng& rng);
UserSecretKey recover_user_key(const paillier::PrivateKey& msk, const paillier::Ciphertext& upk);

/// Keyed pseudorandom function into Z_modulus: HMAC-SHA256 in counter mode,
/// rejection-sampled below the modulus.
BigUint prf(const UserSecretKey& usk, const Label& label, const BigUint& modulus);

struct OfflinePart {
  Label label;
  BigUint secret;          // b = F(usk, label)
  paillier::Ciphertext beta;  // [[b]]
};

struct Pair {
  BigUint a;
  paillier::Ciphertext beta;
};

struct Collapsed {
  paillier::Ciphertext alpha;
};

class LabCiphertext {
 public:
  LabCiphertext() = default;
  LabCiphertext(Pair p, std::vector<std::uint64_t> provenance = {});
  LabCiphertext(Collapsed c, std::vector<std::uint64_t> provenance = {});

  bool is_pair() const noexcept { return std::holds_alternative<Pair>(body_); }
  const Pair& pair() const;
  const Collapsed& collapsed() const;
  /// Sorted ids of the labels this ciphertext was computed from. Empty when
  /// unknown (e.g. after decoding from the wire).
  const std::vector<std::uint64_t>& provenance() const noexcept { return provenance_; }

 private:
  std::variant<Pair, Collapsed> body_;
  std::vector<std::uint64_t> provenance_;
};

OfflinePart encrypt_offline(const paillier::PublicKey& mpk, const UserSecretKey& usk, const Label& label, Rng& rng);
/// (m - b, [[b]]): one subtraction in Z_N.
LabCiphertext encrypt_online(const paillier::PublicKey& mpk, const OfflinePart& offline, const BigUint& m);
LabCiphertext encrypt(const paillier::PublicKey& mpk, const UserSecretKey& usk, const Label& label,
                      const BigUint& m, Rng& rng);

/// Plaintext constant as a ciphertext with zero secret.
LabCiphertext constant(const paillier::PublicKey& mpk, const BigUint& c);

LabCiphertext eval_add(const paillier::PublicKey& mpk, const LabCiphertext& c1, const LabCiphertext& c2);
LabCiphertext eval_sub(const paillier::PublicKey& mpk, const LabCiphertext& c1, const LabCiphertext& c2);
LabCiphertext eval_cmlt(const paillier::PublicKey& mpk, const BigUint& k, const LabCiphertext& c);
/// Pair x Pair -> Collapsed [[m1 m2 - b1 b2]]. DepthExceeded on a Collapsed input.
LabCiphertext eval_mlt(const paillier::PublicKey& mpk, const LabCiphertext& c1, const LabCiphertext& c2);
/// Adds a plaintext constant; the secret is unchanged.
LabCiphertext add_plain(const paillier::PublicKey& mpk, const LabCiphertext& c, const BigUint& k);
/// Pair: [[a]] + beta = [[m]]. Collapsed: alpha itself, i.e. [[m - b]] where
/// b is the program secret.
paillier::Ciphertext to_ahe(const paillier::PublicKey& mpk, const LabCiphertext& c);

/// Admissible function of degree <= 2 over labeled inputs, kept as an
/// arithmetic circuit so that constant offsets stay out of the secret.
class LabeledProgram {
 public:
  enum class Op : std::uint8_t { Input, Const, Add, Sub, Scale, Mul };
  struct Node {
    Op op = Op::Const;
    std::size_t lhs = 0;  // Input: index into labels()
    std::size_t rhs = 0;
    BigUint constant;     // Const value or Scale factor
    int degree = 0;
  };

  const std::vector<Label>& labels() const noexcept { return labels_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  int degree() const noexcept { return nodes_.empty() ? 0 : nodes_.back().degree; }
  std::vector<std::uint64_t> label_ids() const;

  /// f(m_1..m_n) mod modulus; inputs ordered as labels().
  BigUint evaluate_plain(std::span<const BigUint> inputs, const BigUint& modulus) const;
  /// The program secret: the circuit run on the input secrets with every
  /// constant replaced by zero.
  BigUint evaluate_secret(std::span<const BigUint> secrets, const BigUint& modulus) const;
  LabCiphertext evaluate(const paillier::PublicKey& mpk, std::span<const LabCiphertext> inputs) const;

 private:
  friend class ProgramBuilder;
  std::vector<Label> labels_;
  std::vector<Node> nodes_;  // topological order; last node is the output
};

class ProgramBuilder {
 public:
  using NodeRef = std::size_t;

  /// Repeated labels map to the same input.
  NodeRef input(const Label& label);
  NodeRef constant(const BigUint& c);
  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef scale(const BigUint& k, NodeRef a);
  NodeRef mul(NodeRef a, NodeRef b);
  /// Inlines another program; its labels merge with the ones already present.
  NodeRef embed(const LabeledProgram& program);

  LabeledProgram build(NodeRef output) const;

 private:
  NodeRef push(LabeledProgram::Node node);
  std::vector<Label> labels_;
  std::map<Label, std::size_t> label_index_;
  std::vector<LabeledProgram::Node> nodes_;
};

LabeledProgram identity_program(const Label& label);

struct ProgramSecret {
  std::shared_ptr<const paillier::PrivateKey> msk;
  BigUint secret;
  std::vector<std::uint64_t> label_ids;
};

ProgramSecret decrypt_offline(std::shared_ptr<const paillier::PrivateKey> msk, const UserKeyring& keys,
                              const LabeledProgram& program);

enum class DecryptPath {
  Secret,      // a + b
  Ciphertext,  // a + D(beta)
};

BigUint decrypt_online(const ProgramSecret& ps, const LabCiphertext& c, DecryptPath path = DecryptPath::Secret);

/// 1-byte variant tag, then (a, beta) or (alpha).
void write(ByteWriter& w, const LabCiphertext& c);
LabCiphertext read(ByteReader& r);

}  // namespace cipherloop::labhe

namespace cipherloop {
using labhe::LabCiphertext;
}
