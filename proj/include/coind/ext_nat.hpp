#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace coind {

// Natural numbers extended with a top element.
class ExtNat {
 public:
  constexpr ExtNat() = default;
  constexpr ExtNat(std::uint64_t n) : v_(n) {
    if (n == kInf) throw std::overflow_error("ExtNat: value too large");
  }

  static constexpr ExtNat inf() {
    ExtNat r;
    r.v_ = kInf;
    return r;
  }

  constexpr bool is_inf() const { return v_ == kInf; }
  constexpr bool finite() const { return v_ != kInf; }

  constexpr std::uint64_t value() const {
    if (is_inf()) throw std::logic_error("ExtNat: value() of infinity");
    return v_;
  }

  constexpr auto operator<=>(const ExtNat&) const = default;

  // n + inf = inf
  friend constexpr ExtNat operator+(ExtNat a, ExtNat b) {
    if (a.is_inf() || b.is_inf()) return inf();
    if (b.v_ >= kInf - a.v_) throw std::overflow_error("ExtNat: overflow");
    return ExtNat(a.v_ + b.v_);
  }

  // truncated subtraction; inf - n = inf
  constexpr ExtNat monus(std::uint64_t k) const {
    if (is_inf()) return inf();
    return ExtNat(v_ > k ? v_ - k : 0);
  }

  std::string str() const { return is_inf() ? "inf" : std::to_string(v_); }

  static ExtNat parse(const std::string& s) {
    if (s == "inf" || s == "oo" || s == "∞") return inf();
    std::size_t used = 0;
    unsigned long long n = 0;
    try {
      n = std::stoull(s, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("ExtNat: cannot parse '" + s + "'");
    }
    if (used != s.size() || s.empty() || s[0] == '-')
      throw std::invalid_argument("ExtNat: cannot parse '" + s + "'");
    return ExtNat(n);
  }

 private:
  static constexpr std::uint64_t kInf = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t v_ = 0;
};

inline constexpr ExtNat min(ExtNat a, ExtNat b) { return a < b ? a : b; }
inline constexpr ExtNat max(ExtNat a, ExtNat b) { return a < b ? b : a; }

inline std::ostream& operator<<(std::ostream& os, const ExtNat& n) { return os << n.str(); }

}  // namespace coind
