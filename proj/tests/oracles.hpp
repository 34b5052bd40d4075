#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

// integers whose prime factors are among 2, 3, 5, ascending
inline std::vector<std::int64_t> smooth5(std::size_t count) {
  std::vector<std::int64_t> out;
  for (std::int64_t k = 1; out.size() < count; ++k) {
    std::int64_t m = k;
    for (int p : {2, 3, 5})
      while (m % p == 0) m /= p;
    if (m == 1) out.push_back(k);
  }
  return out;
}

// H with a merge that keeps ties: x appears once per factorisation path,
// mult(x) = [x=1] + mult(x/2) + mult(x/3) + mult(x/5)
inline std::vector<std::int64_t> smooth5_with_paths(std::size_t count) {
  std::map<std::int64_t, std::int64_t> mult;
  std::vector<std::int64_t> out;
  for (std::int64_t k = 1; out.size() < count; ++k) {
    std::int64_t m = k == 1 ? 1 : 0;
    for (int p : {2, 3, 5})
      if (k % p == 0 && mult.count(k / p)) m += mult[k / p];
    if (m == 0) continue;
    mult[k] = m;
    for (std::int64_t i = 0; i < m && out.size() < count; ++i) out.push_back(k);
  }
  return out;
}

// D = 0 : 1 : 1 : zip(add(tl D, tl tl D), even(tl D)) by index:
// zip(a,b)(2j) = a(j), zip(a,b)(2j+1) = b(j), add(...)(j) = D(j+1)+D(j+2), even(tl D)(j) = D(2j+1)
class DIndex {
 public:
  std::int64_t at(std::size_t i) {
    if (i < 3) return i == 0 ? 0 : 1;
    auto it = memo_.find(i);
    if (it != memo_.end()) return it->second;
    std::size_t j = i - 3;
    std::int64_t v = j % 2 == 0 ? at(j / 2 + 1) + at(j / 2 + 2) : at(2 * ((j - 1) / 2) + 1);
    memo_[i] = v;
    return v;
  }

 private:
  std::map<std::size_t, std::int64_t> memo_;
};

inline std::uint64_t ceil_half(std::uint64_t n) { return (n + 1) / 2; }
inline std::uint64_t zip_closed(std::uint64_t n, std::uint64_t m) { return std::min(2 * n, 2 * m + 1); }

// D's prefix function: 3 + zip(add(n-1, n-2), even(n-1))
inline std::uint64_t d_xi(std::uint64_t n) {
  if (n < 2) return 3;
  return 3 + std::min(2 * (n - 2), 2 * ceil_half(n - 1) + 1);
}

}  // namespace oracle
