#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <gmpxx.h>

namespace cipherloop {

using Bytes = std::vector<std::uint8_t>;

/// Arbitrary-precision non-negative integer.
///
/// Thin value wrapper over a GMP integer that keeps the magnitude >= 0.
/// Operations that would produce a negative value throw.
class BigUint {
 public:
  BigUint() = default;
  BigUint(std::uint64_t v);  // NOLINT(google-explicit-constructor)
  explicit BigUint(const mpz_class& v);
  explicit BigUint(mpz_class&& v);

  static BigUint from_hex(std::string_view hex);
  static BigUint from_dec(std::string_view dec);
  /// Minimal big-endian magnitude (no length prefix).
  static BigUint from_be_bytes(std::span<const std::uint8_t> bytes);

  std::string to_hex() const;
  std::string to_dec() const;
  Bytes to_be_bytes() const;

  const mpz_class& mpz() const noexcept { return v_; }
  std::size_t bit_length() const noexcept;
  bool bit(std::size_t i) const noexcept;
  bool is_zero() const noexcept { return sgn(v_) == 0; }
  bool is_odd() const noexcept { return mpz_odd_p(v_.get_mpz_t()) != 0; }
  /// Low 64 bits.
  std::uint64_t low_u64() const noexcept;
  bool fits_u64() const noexcept;

  friend BigUint operator+(const BigUint& a, const BigUint& b) { return BigUint(mpz_class(a.v_ + b.v_)); }
  friend BigUint operator-(const BigUint& a, const BigUint& b);
  friend BigUint operator*(const BigUint& a, const BigUint& b) { return BigUint(mpz_class(a.v_ * b.v_)); }
  friend BigUint operator/(const BigUint& a, const BigUint& b);
  friend BigUint operator%(const BigUint& a, const BigUint& b);
  friend BigUint operator<<(const BigUint& a, std::size_t s) { return BigUint(mpz_class(a.v_ << s)); }
  friend BigUint operator>>(const BigUint& a, std::size_t s) { return BigUint(mpz_class(a.v_ >> s)); }

  BigUint& operator+=(const BigUint& o) { v_ += o.v_; return *this; }
  BigUint& operator*=(const BigUint& o) { v_ *= o.v_; return *this; }

  friend bool operator==(const BigUint& a, const BigUint& b) { return cmp(a.v_, b.v_) == 0; }
  friend std::strong_ordering operator<=>(const BigUint& a, const BigUint& b) {
    const int c = cmp(a.v_, b.v_);
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

 private:
  mpz_class v_{0};
};

/// 2^k
BigUint pow2(std::size_t k);
BigUint gcd(const BigUint& a, const BigUint& b);
BigUint lcm(const BigUint& a, const BigUint& b);

/// Append-only buffer for the big-endian wire encoding shared by every module.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  /// 4-byte big-endian length prefix followed by the raw bytes.
  void blob(std::span<const std::uint8_t> bytes);
  void str(std::string_view s);
  /// 4-byte length prefix, then the minimal big-endian magnitude.
  void big(const BigUint& v);
  void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

  const Bytes& bytes() const& noexcept { return out_; }
  Bytes take() && noexcept { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  Bytes blob();
  std::string str();
  BigUint big();
  std::span<const std::uint8_t> raw(std::size_t n);

  bool done() const noexcept { return pos_ == in_.size(); }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

/// Length-prefixed encoding of a single integer.
Bytes encode_biguint(const BigUint& v);
BigUint decode_biguint(std::span<const std::uint8_t> bytes);

}  // namespace cipherloop
