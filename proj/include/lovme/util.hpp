#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace lovme {

// Kahan compensated summation.
template <typename T>
struct KahanSum {
  T sum = 0;
  T comp = 0;

  void add(T x) {
    const T y = x - comp;
    const T t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }

  T value() const { return sum; }
};

// log(sum_i exp(x_i)) with max subtraction, accumulated in extended
// precision. Empty input yields -inf.
long double log_sum_exp(std::span<const double> xs);

// FNV-1a 64-bit over raw bytes; used for output content hashes in manifests.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64_file(const std::string& path);

// Shortest-round-trip decimal text for a double ("%.17g" fallback form);
// used by CSV writers so that reloading reproduces the exact value.
std::string format_double(double x);

}  // namespace lovme
