#pragma once

// Independent reference implementations used as test oracles.

#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <vector>

namespace oracle {

// Weighted kappa in the disagreement form: 1 - sum(v*o) / sum(v*e) with
// v_ij = |i-j|/5, computed with plain double loops.
inline double weighted_kappa(const std::array<std::array<long long, 6>, 6>& counts) {
  double n = 0;
  std::array<double, 6> rows{}, cols{};
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      n += counts[i][j];
      rows[i] += counts[i][j];
      cols[j] += counts[i][j];
    }
  }
  double observed = 0, expected = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      const double v = std::abs(i - j) / 5.0;
      observed += v * counts[i][j] / n;
      expected += v * (rows[i] / n) * (cols[j] / n);
    }
  }
  return 1.0 - observed / expected;
}

// Two-sided exact Mann-Whitney p by enumerating every split of the pooled
// sample; U counts pairwise wins with ties worth one half.
inline double mwu_exact_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n1 = a.size();
  const auto u_of = [](const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0;
    for (double xi : x) {
      for (double yj : y) u += xi > yj ? 1.0 : (xi == yj ? 0.5 : 0.0);
    }
    return u;
  };
  const double mean = static_cast<double>(n1 * b.size()) / 2.0;
  const double observed = std::abs(u_of(a, b) - mean);
  long extreme = 0, total = 0;
  std::vector<bool> in_a(pooled.size(), false);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t chosen) {
    if (chosen == n1) {
      std::vector<double> x, y;
      for (std::size_t k = 0; k < pooled.size(); ++k) (in_a[k] ? x : y).push_back(pooled[k]);
      ++total;
      if (std::abs(u_of(x, y) - mean) >= observed - 1e-9) ++extreme;
      return;
    }
    if (pos == pooled.size()) return;
    in_a[pos] = true;
    rec(pos + 1, chosen + 1);
    in_a[pos] = false;
    rec(pos + 1, chosen);
  };
  rec(0, 0);
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace oracle
