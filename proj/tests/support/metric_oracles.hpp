#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "fieldmatch/metrics.hpp"

namespace fieldmatch::testing {

// Direct-from-definition metric evaluation, kept independent of the
// production implementation on purpose.
struct BruteForceMetrics {
  double ap = 0.0;
  double auc = 0.0;
  double p_at[3] = {0.0, 0.0, 0.0};
  double r_at[3] = {0.0, 0.0, 0.0};
};

inline BruteForceMetrics brute_force_metrics(std::vector<RankedCandidate> pool) {
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.company_id < b.company_id;
  });
  BruteForceMetrics out;
  int total_pos = 0;
  for (const auto& c : pool) total_pos += c.label;

  double ap_sum = 0.0;
  for (std::size_t r = 0; r < pool.size(); ++r) {
    if (pool[r].label != 1) continue;
    int count = 0;
    for (std::size_t q = 0; q <= r; ++q) count += pool[q].label;
    ap_sum += static_cast<double>(count) / static_cast<double>(r + 1);
  }
  out.ap = ap_sum / total_pos;

  // Probability a random positive outranks a random negative, ties half.
  double wins = 0.0;
  int pairs = 0;
  for (const auto& p : pool) {
    if (p.label != 1) continue;
    for (const auto& n : pool) {
      if (n.label != 0) continue;
      ++pairs;
      if (p.score > n.score) wins += 1.0;
      else if (p.score == n.score) wins += 0.5;
    }
  }
  out.auc = pairs > 0 ? wins / pairs : 1.0;

  for (int i = 0; i < 3; ++i) {
    const int k = kMetricCutoffs[i];
    const int k_eff = std::min<int>(k, static_cast<int>(pool.size()));
    int hits = 0;
    for (int r = 0; r < k_eff; ++r) hits += pool[static_cast<std::size_t>(r)].label;
    out.p_at[i] = static_cast<double>(hits) / k_eff;
    out.r_at[i] = static_cast<double>(hits) / total_pos;
  }
  return out;
}

}  // namespace fieldmatch::testing
