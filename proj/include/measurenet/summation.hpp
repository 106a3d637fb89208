#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace measurenet {

// Neumaier compensated sum over a fixed iteration order.
inline double compensated_sum(const double* v, std::size_t n) {
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = v[i];
    const double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  return s + c;
}

// Sum that depends only on the multiset of values: the input is sorted into
// a canonical order before compensated summation, so permuting the caller's
// buffer cannot change the result bit for bit.
inline double multiset_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return compensated_sum(v.data(), v.size());
}

// Mean that depends only on the underlying distribution of values: after
// sorting, equal values are grouped and the multiplicities are divided by
// their gcd, so duplicating the whole multiset k times reproduces the same
// canonical form and therefore the same result bit for bit, for every k.
inline double multiset_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> vals;
  std::vector<unsigned long long> mult;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    vals.push_back(v[i]);
    mult.push_back(j - i);
    i = j;
  }
  unsigned long long g = 0;
  for (unsigned long long m : mult) g = std::gcd(g, m);
  double s = 0.0, c = 0.0;
  unsigned long long total = 0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const unsigned long long w = mult[i] / g;
    total += w;
    const double x = static_cast<double>(w) * vals[i];
    const double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  return (s + c) / static_cast<double>(total);
}

}  // namespace measurenet
