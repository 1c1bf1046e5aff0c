#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fieldmatch {

struct RankedCandidate {
  std::string company_id;
  double score = 0.0;
  int label = 0;
};

// Ranking metrics for one solution's candidate list. k values clip to the
// pool size. AUC is the tie-aware rank-sum formulation (ties count 1/2).
struct RankingMetrics {
  double ap = 0.0;
  double auc = 0.0;
  std::map<int, double> precision_at;  // k in {10, 100, 500}
  std::map<int, double> recall_at;
  int positives = 0;
  int candidates = 0;
};

extern const int kMetricCutoffs[3];

// Sorts candidates by (score desc, company_id asc) internally. Requires at
// least one positive and one negative for AUC; AP requires one positive.
RankingMetrics ranking_metrics(std::vector<RankedCandidate> candidates);

struct MetricsReport {
  std::map<std::string, double> summary;  // MAP, AUC, P@k, R@k
  struct PerSolution {
    std::string solution_id;
    RankingMetrics metrics;
  };
  std::vector<PerSolution> per_solution;
  std::vector<std::string> warnings;  // e.g. solutions skipped for lacking positives
  std::string config_fingerprint;
  std::uint64_t seed = 0;
};

// Line-delimited key-value serialization; round-trips exactly.
void save_metrics_report(const MetricsReport& report, const std::string& path);
MetricsReport load_metrics_report(const std::string& path);

}  // namespace fieldmatch
