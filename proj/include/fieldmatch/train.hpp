#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fieldmatch/dataset.hpp"
#include "fieldmatch/match_model.hpp"
#include "fieldmatch/metrics.hpp"
#include "fieldmatch/vocab.hpp"

namespace fieldmatch {

// Lookup maps over a corpus; records are owned elsewhere.
struct RecordIndex {
  std::map<std::string, const SolutionRecord*> solutions;
  std::map<std::string, const CompanyRecord*> companies;

  static RecordIndex build(const std::vector<SolutionRecord>& solutions,
                           const std::vector<CompanyRecord>& companies);
  const SolutionRecord& solution(const std::string& id) const;
  const CompanyRecord& company(const std::string& id) const;
};

struct TrainConfig {
  int batch_size = 32;
  int epochs = 4;
  std::map<ParamGroup, double> learning_rates = default_group_learning_rates();
  std::uint64_t seed = 1;
  bool keep_best = true;  // retain the best-validation-MAP parameters
};

struct TrainResult {
  std::vector<std::pair<int, double>> loss_history;  // (step, joint loss)
  std::vector<double> epoch_validation_map;
  int best_epoch = -1;
};

// Mini-batch training with the joint loss; per-epoch validation MAP; the
// best-validation parameters are restored into the model when keep_best.
TrainResult train(MatchModel& model, const RecordIndex& index,
                  const std::vector<MatchExample>& train_examples,
                  const std::vector<MatchExample>& validation_examples, const Vocab& vocab,
                  const TrainConfig& config);

// Descending combined score, ties broken by ascending company id.
std::vector<std::pair<std::string, double>> rank_companies(
    MatchModel& model, const SolutionRecord& solution,
    const std::vector<const CompanyRecord*>& companies, const Vocab& vocab);

// Per-solution metrics over each solution's labeled candidates, averaged
// across solutions with at least one positive.
MetricsReport evaluate(MatchModel& model, const RecordIndex& index,
                       const std::vector<MatchExample>& examples, const Vocab& vocab);

// Ranks every solution's pool by seeded uniform random scores.
MetricsReport random_ranking_baseline(const std::vector<MatchExample>& examples,
                                      std::uint64_t seed);

}  // namespace fieldmatch
