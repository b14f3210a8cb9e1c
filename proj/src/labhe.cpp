#include "cipherloop/labhe.hpp"

#include <algorithm>
#include <iterator>

#include <sodium.h>

#include "cipherloop/error.hpp"
#include "cipherloop/numtheory.hpp"

namespace cipherloop::labhe {
namespace {

std::vector<std::uint64_t> merge(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::vector<std::uint64_t> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// [[m - b]] for either variant.
paillier::Ciphertext shifted(const paillier::PublicKey& mpk, const LabCiphertext& c) {
  if (c.is_pair()) return paillier::encrypt_trivial(mpk, c.pair().a);
  return c.collapsed().alpha;
}

BigUint modmath(const BigUint& v, const BigUint& n) { return v % n; }

}  // namespace

Bytes Label::serialize() const {
  ByteWriter w;
  w.str(party);
  w.str(signal);
  w.u32(4);
  w.u32(time);
  w.u32(4);
  w.u32(index);
  return std::move(w).take();
}

std::uint64_t Label::id() const {
  const auto bytes = serialize();
  std::array<std::uint8_t, crypto_hash_sha256_BYTES> h{};
  crypto_hash_sha256(h.data(), bytes.data(), bytes.size());
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | h[i];
  return v;
}

std::string to_string(const Label& label) {
  return label.party + "/" + label.signal + "/" + std::to_string(label.time) + "/" + std::to_string(label.index);
}

MasterKeys init(std::size_t modulus_bits, Rng& rng) {
  auto [pk, sk] = paillier::keygen(modulus_bits, rng);
  return MasterKeys{pk, std::make_shared<const paillier::PrivateKey>(std::move(sk))};
}

UserKey keygen(const paillier::PublicKey& mpk, Rng& rng) {
  if (mpk.n.bit_length() <= 8 * sizeof(UserSecretKey)) {
    throw Error(ErrorCode::InvalidArgument, "master modulus too small to wrap a user key");
  }
  UserKey k;
  rng.fill(k.usk);
  k.upk = paillier::encrypt(mpk, BigUint::from_be_bytes(k.usk), rng);
  return k;
}

UserSecretKey recover_user_key(const paillier::PrivateKey& msk, const paillier::Ciphertext& upk) {
  const auto bytes = paillier::decrypt(msk, upk).to_be_bytes();
  if (bytes.size() > sizeof(UserSecretKey)) throw Error(ErrorCode::InvalidArgument, "malformed user public key");
  UserSecretKey usk{};
  std::copy(bytes.begin(), bytes.end(), usk.end() - static_cast<std::ptrdiff_t>(bytes.size()));
  return usk;
}

BigUint prf(const UserSecretKey& usk, const Label& label, const BigUint& modulus) {
  if (modulus.is_zero()) throw Error(ErrorCode::InvalidArgument, "zero modulus");
  const std::size_t nbits = modulus.bit_length();
  const std::size_t nbytes = (nbits + 7) / 8;
  const auto label_bytes = label.serialize();
  std::uint32_t counter = 0;
  for (;;) {
    Bytes stream;
    stream.reserve(nbytes + crypto_auth_hmacsha256_BYTES);
    while (stream.size() < nbytes) {
      ByteWriter w;
      w.str("cipherloop.labhe.prf");
      w.blob(label_bytes);
      w.u32(counter++);
      std::array<std::uint8_t, crypto_auth_hmacsha256_BYTES> block{};
      crypto_auth_hmacsha256_state st;
      crypto_auth_hmacsha256_init(&st, usk.data(), usk.size());
      crypto_auth_hmacsha256_update(&st, w.bytes().data(), w.bytes().size());
      crypto_auth_hmacsha256_final(&st, block.data());
      stream.insert(stream.end(), block.begin(), block.end());
    }
    stream.resize(nbytes);
    stream[0] &= static_cast<std::uint8_t>(0xffu >> (nbytes * 8 - nbits));
    auto v = BigUint::from_be_bytes(stream);
    if (v < modulus) return v;
  }
}

LabCiphertext::LabCiphertext(Pair p, std::vector<std::uint64_t> provenance)
    : body_(std::move(p)), provenance_(std::move(provenance)) {}

LabCiphertext::LabCiphertext(Collapsed c, std::vector<std::uint64_t> provenance)
    : body_(std::move(c)), provenance_(std::move(provenance)) {}

const Pair& LabCiphertext::pair() const {
  if (!is_pair()) throw Error(ErrorCode::InvalidArgument, "ciphertext is collapsed");
  return std::get<Pair>(body_);
}

const Collapsed& LabCiphertext::collapsed() const {
  if (is_pair()) throw Error(ErrorCode::InvalidArgument, "ciphertext is a pair");
  return std::get<Collapsed>(body_);
}

OfflinePart encrypt_offline(const paillier::PublicKey& mpk, const UserSecretKey& usk, const Label& label, Rng& rng) {
  OfflinePart off;
  off.label = label;
  off.secret = prf(usk, label, mpk.n);
  off.beta = paillier::encrypt(mpk, off.secret, rng);
  return off;
}

LabCiphertext encrypt_online(const paillier::PublicKey& mpk, const OfflinePart& offline, const BigUint& m) {
  if (m >= mpk.n) throw Error(ErrorCode::MessageOutOfRange, "plaintext must lie in [0, N)");
  return LabCiphertext(Pair{mod_sub(m, offline.secret, mpk.n), offline.beta}, {offline.label.id()});
}

LabCiphertext encrypt(const paillier::PublicKey& mpk, const UserSecretKey& usk, const Label& label,
                      const BigUint& m, Rng& rng) {
  return encrypt_online(mpk, encrypt_offline(mpk, usk, label, rng), m);
}

LabCiphertext constant(const paillier::PublicKey& mpk, const BigUint& c) {
  return LabCiphertext(Pair{modmath(c, mpk.n), paillier::encrypt_trivial(mpk, BigUint(0))});
}

LabCiphertext eval_add(const paillier::PublicKey& mpk, const LabCiphertext& c1, const LabCiphertext& c2) {
  auto prov = merge(c1.provenance(), c2.provenance());
  if (c1.is_pair() && c2.is_pair()) {
    const auto& p1 = c1.pair();
    const auto& p2 = c2.pair();
    return LabCiphertext(Pair{mod_add(p1.a, p2.a, mpk.n), paillier::add(mpk, p1.beta, p2.beta)}, std::move(prov));
  }
  return LabCiphertext(Collapsed{paillier::add(mpk, shifted(mpk, c1), shifted(mpk, c2))}, std::move(prov));
}

LabCiphertext eval_sub(const paillier::PublicKey& mpk, const LabCiphertext& c1, const LabCiphertext& c2) {
  auto prov = merge(c1.provenance(), c2.provenance());
  if (c1.is_pair() && c2.is_pair()) {
    const auto& p1 = c1.pair();
    const auto& p2 = c2.pair();
    return LabCiphertext(Pair{mod_sub(p1.a, p2.a, mpk.n), paillier::sub(mpk, p1.beta, p2.beta)}, std::move(prov));
  }
  return LabCiphertext(Collapsed{paillier::sub(mpk, shifted(mpk, c1), shifted(mpk, c2))}, std::move(prov));
}

LabCiphertext eval_cmlt(const paillier::PublicKey& mpk, const BigUint& k, const LabCiphertext& c) {
  const BigUint kk = modmath(k, mpk.n);
  if (c.is_pair()) {
    const auto& p = c.pair();
    return LabCiphertext(Pair{mod_mul(kk, p.a, mpk.n), paillier::cmlt(mpk, kk, p.beta)}, c.provenance());
  }
  return LabCiphertext(Collapsed{paillier::cmlt(mpk, kk, c.collapsed().alpha)}, c.provenance());
}

LabCiphertext eval_mlt(const paillier::PublicKey& mpk, const LabCiphertext& c1, const LabCiphertext& c2) {
  if (!c1.is_pair() || !c2.is_pair()) {
    throw Error(ErrorCode::DepthExceeded, "multiplication needs two degree-one ciphertexts");
  }
  const auto& p1 = c1.pair();
  const auto& p2 = c2.pair();
  auto alpha = paillier::encrypt_trivial(mpk, mod_mul(p1.a, p2.a, mpk.n));
  alpha = paillier::add(mpk, alpha, paillier::cmlt(mpk, p1.a, p2.beta));
  alpha = paillier::add(mpk, alpha, paillier::cmlt(mpk, p2.a, p1.beta));
  return LabCiphertext(Collapsed{std::move(alpha)}, merge(c1.provenance(), c2.provenance()));
}

LabCiphertext add_plain(const paillier::PublicKey& mpk, const LabCiphertext& c, const BigUint& k) {
  const BigUint kk = modmath(k, mpk.n);
  if (c.is_pair()) {
    const auto& p = c.pair();
    return LabCiphertext(Pair{mod_add(p.a, kk, mpk.n), p.beta}, c.provenance());
  }
  return LabCiphertext(Collapsed{paillier::add_plain(mpk, c.collapsed().alpha, kk)}, c.provenance());
}

paillier::Ciphertext to_ahe(const paillier::PublicKey& mpk, const LabCiphertext& c) {
  if (c.is_pair()) return paillier::add_plain(mpk, c.pair().beta, c.pair().a);
  return c.collapsed().alpha;
}

std::vector<std::uint64_t> LabeledProgram::label_ids() const {
  std::vector<std::uint64_t> ids;
  ids.reserve(labels_.size());
  for (const auto& l : labels_) ids.push_back(l.id());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

namespace {

template <typename T, typename Leaf, typename Konst, typename AddF, typename SubF, typename ScaleF, typename MulF>
T run_circuit(const std::vector<LabeledProgram::Node>& nodes, Leaf leaf, Konst konst, AddF addf, SubF subf,
              ScaleF scalef, MulF mulf) {
  if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "empty program");
  std::vector<T> vals;
  vals.reserve(nodes.size());
  using Op = LabeledProgram::Op;
  for (const auto& n : nodes) {
    switch (n.op) {
      case Op::Input: vals.push_back(leaf(n.lhs)); break;
      case Op::Const: vals.push_back(konst(n.constant)); break;
      case Op::Add: vals.push_back(addf(vals[n.lhs], vals[n.rhs])); break;
      case Op::Sub: vals.push_back(subf(vals[n.lhs], vals[n.rhs])); break;
      case Op::Scale: vals.push_back(scalef(n.constant, vals[n.lhs])); break;
      case Op::Mul: vals.push_back(mulf(vals[n.lhs], vals[n.rhs])); break;
    }
  }
  return std::move(vals.back());
}

}  // namespace

BigUint LabeledProgram::evaluate_plain(std::span<const BigUint> inputs, const BigUint& modulus) const {
  if (inputs.size() != labels_.size()) throw Error(ErrorCode::DimensionMismatch, "program input count");
  const ModRing zn(modulus);
  return run_circuit<BigUint>(
      nodes_, [&](std::size_t i) { return zn.reduce(inputs[i]); }, [&](const BigUint& c) { return zn.reduce(c); },
      [&](const BigUint& a, const BigUint& b) { return zn.add(a, b); },
      [&](const BigUint& a, const BigUint& b) { return zn.sub(a, b); },
      [&](const BigUint& k, const BigUint& a) { return zn.mul(zn.reduce(k), a); },
      [&](const BigUint& a, const BigUint& b) { return zn.mul(a, b); });
}

BigUint LabeledProgram::evaluate_secret(std::span<const BigUint> secrets, const BigUint& modulus) const {
  if (secrets.size() != labels_.size()) throw Error(ErrorCode::DimensionMismatch, "program input count");
  const ModRing zn(modulus);
  return run_circuit<BigUint>(
      nodes_, [&](std::size_t i) { return zn.reduce(secrets[i]); }, [](const BigUint&) { return BigUint(0); },
      [&](const BigUint& a, const BigUint& b) { return zn.add(a, b); },
      [&](const BigUint& a, const BigUint& b) { return zn.sub(a, b); },
      [&](const BigUint& k, const BigUint& a) { return zn.mul(zn.reduce(k), a); },
      [&](const BigUint& a, const BigUint& b) { return zn.mul(a, b); });
}

LabCiphertext LabeledProgram::evaluate(const paillier::PublicKey& mpk, std::span<const LabCiphertext> inputs) const {
  if (inputs.size() != labels_.size()) throw Error(ErrorCode::DimensionMismatch, "program input count");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& prov = inputs[i].provenance();
    if (!prov.empty() && (prov.size() != 1 || prov[0] != labels_[i].id())) {
      throw Error(ErrorCode::LabelMismatch, "input " + std::to_string(i) + " does not carry label " +
                                                to_string(labels_[i]));
    }
  }
  auto out = run_circuit<LabCiphertext>(
      nodes_, [&](std::size_t i) { return inputs[i]; }, [&](const BigUint& c) { return constant(mpk, c); },
      [&](const LabCiphertext& a, const LabCiphertext& b) { return eval_add(mpk, a, b); },
      [&](const LabCiphertext& a, const LabCiphertext& b) { return eval_sub(mpk, a, b); },
      [&](const BigUint& k, const LabCiphertext& a) { return eval_cmlt(mpk, k, a); },
      [&](const LabCiphertext& a, const LabCiphertext& b) { return eval_mlt(mpk, a, b); });
  if (out.is_pair()) return LabCiphertext(out.pair(), label_ids());
  return LabCiphertext(out.collapsed(), label_ids());
}

ProgramBuilder::NodeRef ProgramBuilder::push(LabeledProgram::Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

ProgramBuilder::NodeRef ProgramBuilder::input(const Label& label) {
  auto [it, inserted] = label_index_.try_emplace(label, labels_.size());
  if (inserted) labels_.push_back(label);
  LabeledProgram::Node n;
  n.op = LabeledProgram::Op::Input;
  n.lhs = it->second;
  n.degree = 1;
  return push(std::move(n));
}

ProgramBuilder::NodeRef ProgramBuilder::constant(const BigUint& c) {
  LabeledProgram::Node n;
  n.op = LabeledProgram::Op::Const;
  n.constant = c;
  return push(std::move(n));
}

ProgramBuilder::NodeRef ProgramBuilder::add(NodeRef a, NodeRef b) {
  if (a >= nodes_.size() || b >= nodes_.size()) throw Error(ErrorCode::InvalidArgument, "unknown node");
  LabeledProgram::Node n;
  n.op = LabeledProgram::Op::Add;
  n.lhs = a;
  n.rhs = b;
  n.degree = std::max(nodes_[a].degree, nodes_[b].degree);
  return push(std::move(n));
}

ProgramBuilder::NodeRef ProgramBuilder::sub(NodeRef a, NodeRef b) {
  if (a >= nodes_.size() || b >= nodes_.size()) throw Error(ErrorCode::InvalidArgument, "unknown node");
  LabeledProgram::Node n;
  n.op = LabeledProgram::Op::Sub;
  n.lhs = a;
  n.rhs = b;
  n.degree = std::max(nodes_[a].degree, nodes_[b].degree);
  return push(std::move(n));
}

ProgramBuilder::NodeRef ProgramBuilder::scale(const BigUint& k, NodeRef a) {
  if (a >= nodes_.size()) throw Error(ErrorCode::InvalidArgument, "unknown node");
  LabeledProgram::Node n;
  n.op = LabeledProgram::Op::Scale;
  n.lhs = a;
  n.constant = k;
  n.degree = nodes_[a].degree;
  return push(std::move(n));
}

ProgramBuilder::NodeRef ProgramBuilder::mul(NodeRef a, NodeRef b) {
  if (a >= nodes_.size() || b >= nodes_.size()) throw Error(ErrorCode::InvalidArgument, "unknown node");
  if (nodes_[a].degree > 1 || nodes_[b].degree > 1) {
    throw Error(ErrorCode::DepthExceeded, "program degree would exceed two");
  }
  LabeledProgram::Node n;
  n.op = LabeledProgram::Op::Mul;
  n.lhs = a;
  n.rhs = b;
  n.degree = nodes_[a].degree + nodes_[b].degree;
  return push(std::move(n));
}

ProgramBuilder::NodeRef ProgramBuilder::embed(const LabeledProgram& program) {
  if (program.nodes().empty()) throw Error(ErrorCode::InvalidArgument, "empty program");
  std::vector<NodeRef> map;
  map.reserve(program.nodes().size());
  using Op = LabeledProgram::Op;
  for (const auto& n : program.nodes()) {
    switch (n.op) {
      case Op::Input: map.push_back(input(program.labels()[n.lhs])); break;
      case Op::Const: map.push_back(constant(n.constant)); break;
      case Op::Add: map.push_back(add(map[n.lhs], map[n.rhs])); break;
      case Op::Sub: map.push_back(sub(map[n.lhs], map[n.rhs])); break;
      case Op::Scale: map.push_back(scale(n.constant, map[n.lhs])); break;
      case Op::Mul: map.push_back(mul(map[n.lhs], map[n.rhs])); break;
    }
  }
  return map.back();
}

LabeledProgram ProgramBuilder::build(NodeRef output) const {
  if (output >= nodes_.size()) throw Error(ErrorCode::InvalidArgument, "unknown node");
  // Keep only nodes reachable from the output, then renumber inputs.
  std::vector<bool> live(nodes_.size(), false);
  live[output] = true;
  for (std::size_t i = output + 1; i-- > 0;) {
    if (!live[i]) continue;
    const auto& n = nodes_[i];
    using Op = LabeledProgram::Op;
    if (n.op == Op::Add || n.op == Op::Sub || n.op == Op::Mul) {
      live[n.lhs] = true;
      live[n.rhs] = true;
    } else if (n.op == Op::Scale) {
      live[n.lhs] = true;
    }
  }
  LabeledProgram p;
  std::vector<std::size_t> node_map(nodes_.size(), 0);
  std::map<std::size_t, std::size_t> input_map;
  for (std::size_t i = 0; i <= output; ++i) {
    if (!live[i]) continue;
    auto n = nodes_[i];
    using Op = LabeledProgram::Op;
    if (n.op == Op::Input) {
      auto [it, inserted] = input_map.try_emplace(n.lhs, p.labels_.size());
      if (inserted) p.labels_.push_back(labels_[n.lhs]);
      n.lhs = it->second;
    } else if (n.op == Op::Add || n.op == Op::Sub || n.op == Op::Mul) {
      n.lhs = node_map[n.lhs];
      n.rhs = node_map[n.rhs];
    } else if (n.op == Op::Scale) {
      n.lhs = node_map[n.lhs];
    }
    node_map[i] = p.nodes_.size();
    p.nodes_.push_back(std::move(n));
  }
  return p;
}

LabeledProgram identity_program(const Label& label) {
  ProgramBuilder b;
  return b.build(b.input(label));
}

ProgramSecret decrypt_offline(std::shared_ptr<const paillier::PrivateKey> msk, const UserKeyring& keys,
                              const LabeledProgram& program) {
  if (!msk) throw Error(ErrorCode::InvalidArgument, "missing master secret key");
  std::vector<BigUint> secrets;
  secrets.reserve(program.labels().size());
  for (const auto& l : program.labels()) {
    auto it = keys.find(l.party);
    if (it == keys.end()) throw Error(ErrorCode::KeyMismatch, "no user key for party " + l.party);
    secrets.push_back(prf(it->second, l, msk->pk.n));
  }
  ProgramSecret ps;
  ps.secret = program.evaluate_secret(secrets, msk->pk.n);
  ps.label_ids = program.label_ids();
  ps.msk = std::move(msk);
  return ps;
}

BigUint decrypt_online(const ProgramSecret& ps, const LabCiphertext& c, DecryptPath path) {
  if (!ps.msk) throw Error(ErrorCode::InvalidArgument, "missing master secret key");
  if (!c.provenance().empty() && c.provenance() != ps.label_ids) {
    throw Error(ErrorCode::LabelMismatch, "ciphertext was not produced by this program");
  }
  const auto& n = ps.msk->pk.n;
  if (c.is_pair()) {
    const auto& p = c.pair();
    if (path == DecryptPath::Secret) return mod_add(p.a, ps.secret, n);
    return mod_add(p.a, paillier::decrypt(*ps.msk, p.beta), n);
  }
  return mod_add(paillier::decrypt(*ps.msk, c.collapsed().alpha), ps.secret, n);
}

void write(ByteWriter& w, const LabCiphertext& c) {
  if (c.is_pair()) {
    w.u8(0);
    w.big(c.pair().a);
    paillier::write(w, c.pair().beta);
  } else {
    w.u8(1);
    paillier::write(w, c.collapsed().alpha);
  }
}

LabCiphertext read(ByteReader& r) {
  const auto tag = r.u8();
  if (tag == 0) {
    Pair p;
    p.a = r.big();
    p.beta = paillier::read(r);
    return LabCiphertext(std::move(p));
  }
  if (tag == 1) return LabCiphertext(Collapsed{paillier::read(r)});
  throw Error(ErrorCode::ParseError, "unknown labeled ciphertext tag");
}

}  // namespace cipherloop::labhe
