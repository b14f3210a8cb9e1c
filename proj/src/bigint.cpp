#include "cipherloop/bigint.hpp"

#include "cipherloop/error.hpp"

namespace cipherloop {

BigUint::BigUint(std::uint64_t v) {
  mpz_import(v_.get_mpz_t(), 1, 1, sizeof(v), 0, 0, &v);
}

BigUint::BigUint(const mpz_class& v) : v_(v) {
  if (sgn(v_) < 0) throw Error(ErrorCode::InvalidArgument, "negative value for BigUint");
}

BigUint::BigUint(mpz_class&& v) : v_(std::move(v)) {
  if (sgn(v_) < 0) throw Error(ErrorCode::InvalidArgument, "negative value for BigUint");
}

BigUint BigUint::from_hex(std::string_view hex) {
  mpz_class v;
  if (hex.empty() || v.set_str(std::string(hex), 16) != 0) {
    throw Error(ErrorCode::ParseError, "bad hex integer");
  }
  return BigUint(std::move(v));
}

BigUint BigUint::from_dec(std::string_view dec) {
  mpz_class v;
  if (dec.empty() || v.set_str(std::string(dec), 10) != 0) {
    throw Error(ErrorCode::ParseError, "bad decimal integer");
  }
  return BigUint(std::move(v));
}

BigUint BigUint::from_be_bytes(std::span<const std::uint8_t> bytes) {
  mpz_class v;
  if (!bytes.empty()) mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 0, 0, bytes.data());
  return BigUint(std::move(v));
}

std::string BigUint::to_hex() const { return v_.get_str(16); }
std::string BigUint::to_dec() const { return v_.get_str(10); }

Bytes BigUint::to_be_bytes() const {
  if (is_zero()) return {};
  Bytes out((mpz_sizeinbase(v_.get_mpz_t(), 2) + 7) / 8);
  std::size_t written = 0;
  mpz_export(out.data(), &written, 1, 1, 0, 0, v_.get_mpz_t());
  out.resize(written);
  return out;
}

std::size_t BigUint::bit_length() const noexcept {
  return is_zero() ? 0 : mpz_sizeinbase(v_.get_mpz_t(), 2);
}

bool BigUint::bit(std::size_t i) const noexcept { return mpz_tstbit(v_.get_mpz_t(), i) != 0; }

std::uint64_t BigUint::low_u64() const noexcept {
  static_assert(sizeof(mp_limb_t) == sizeof(std::uint64_t));
  return static_cast<std::uint64_t>(mpz_getlimbn(v_.get_mpz_t(), 0));
}

bool BigUint::fits_u64() const noexcept { return bit_length() <= 64; }

BigUint operator-(const BigUint& a, const BigUint& b) {
  if (a.v_ < b.v_) throw Error(ErrorCode::InvalidArgument, "BigUint subtraction underflow");
  return BigUint(mpz_class(a.v_ - b.v_));
}

BigUint operator/(const BigUint& a, const BigUint& b) {
  if (b.is_zero()) throw Error(ErrorCode::InvalidArgument, "division by zero");
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), a.v_.get_mpz_t(), b.v_.get_mpz_t());
  return BigUint(std::move(q));
}

BigUint operator%(const BigUint& a, const BigUint& b) {
  if (b.is_zero()) throw Error(ErrorCode::InvalidArgument, "modulo by zero");
  mpz_class r;
  mpz_fdiv_r(r.get_mpz_t(), a.v_.get_mpz_t(), b.v_.get_mpz_t());
  return BigUint(std::move(r));
}

BigUint pow2(std::size_t k) {
  mpz_class v;
  mpz_setbit(v.get_mpz_t(), k);
  return BigUint(std::move(v));
}

BigUint gcd(const BigUint& a, const BigUint& b) {
  mpz_class g;
  mpz_gcd(g.get_mpz_t(), a.mpz().get_mpz_t(), b.mpz().get_mpz_t());
  return BigUint(std::move(g));
}

BigUint lcm(const BigUint& a, const BigUint& b) {
  mpz_class l;
  mpz_lcm(l.get_mpz_t(), a.mpz().get_mpz_t(), b.mpz().get_mpz_t());
  return BigUint(std::move(l));
}

// ---- wire helpers ----

void ByteWriter::u16(std::uint16_t v) {
  out_.push_back(static_cast<std::uint8_t>(v >> 8));
  out_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::blob(std::span<const std::uint8_t> bytes) {
  if (bytes.size() > 0xffffffffu) throw Error(ErrorCode::InvalidArgument, "blob too large");
  u32(static_cast<std::uint32_t>(bytes.size()));
  raw(bytes);
}

void ByteWriter::str(std::string_view s) {
  blob(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

void ByteWriter::big(const BigUint& v) { blob(v.to_be_bytes()); }

void ByteReader::need(std::size_t n) const {
  if (in_.size() - pos_ < n) throw Error(ErrorCode::ParseError, "truncated input");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return in_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  const auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
  return v;
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

Bytes ByteReader::blob() {
  const auto n = u32();
  auto s = raw(n);
  return Bytes(s.begin(), s.end());
}

std::string ByteReader::str() {
  const auto b = blob();
  return std::string(b.begin(), b.end());
}

BigUint ByteReader::big() {
  const auto n = u32();
  auto s = raw(n);
  if (!s.empty() && s.front() == 0) throw Error(ErrorCode::ParseError, "non-minimal integer encoding");
  return BigUint::from_be_bytes(s);
}

Bytes encode_biguint(const BigUint& v) {
  ByteWriter w;
  w.big(v);
  return std::move(w).take();
}

BigUint decode_biguint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto v = r.big();
  if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after integer");
  return v;
}

}  // namespace cipherloop
