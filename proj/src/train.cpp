#include "fieldmatch/train.hpp"

#include <algorithm>
#include <stdexcept>

#include "fieldmatch/rng.hpp"
#include "fieldmatch/scale_encoder.hpp"

namespace fieldmatch {

RecordIndex RecordIndex::build(const std::vector<SolutionRecord>& solutions,
                               const std::vector<CompanyRecord>& companies) {
  RecordIndex index;
  for (const auto& s : solutions) {
    if (!index.solutions.emplace(s.id, &s).second) {
      throw std::invalid_argument("RecordIndex: duplicate solution id '" + s.id + "'");
    }
  }
  for (const auto& c : companies) {
    if (!index.companies.emplace(c.id, &c).second) {
      throw std::invalid_argument("RecordIndex: duplicate company id '" + c.id + "'");
    }
  }
  return index;
}

const SolutionRecord& RecordIndex::solution(const std::string& id) const {
  auto it = solutions.find(id);
  if (it == solutions.end()) throw std::out_of_range("unknown solution id '" + id + "'");
  return *it->second;
}

const CompanyRecord& RecordIndex::company(const std::string& id) const {
  auto it = companies.find(id);
  if (it == companies.end()) throw std::out_of_range("unknown company id '" + id + "'");
  return *it->second;
}

namespace {

// Candidate examples per solution, in solution-id order so evaluation is
// independent of the input ordering.
std::map<std::string, std::vector<const MatchExample*>> group_by_solution(
    const std::vector<MatchExample>& examples) {
  std::map<std::string, std::vector<const MatchExample*>> groups;
  for (const auto& ex : examples) groups[ex.solution_id].push_back(&ex);
  return groups;
}

MetricsReport summarize(std::vector<MetricsReport::PerSolution> per_solution,
                        std::vector<std::string> warnings) {
  MetricsReport report;
  report.per_solution = std::move(per_solution);
  report.warnings = std::move(warnings);
  if (report.per_solution.empty()) {
    throw std::invalid_argument("evaluate: no solution had a positive candidate");
  }
  const double n = static_cast<double>(report.per_solution.size());
  double map = 0.0, auc = 0.0;
  std::map<int, double> p_at, r_at;
  for (const auto& ps : report.per_solution) {
    map += ps.metrics.ap;
    auc += ps.metrics.auc;
    for (const auto& [k, v] : ps.metrics.precision_at) p_at[k] += v;
    for (const auto& [k, v] : ps.metrics.recall_at) r_at[k] += v;
  }
  report.summary["MAP"] = map / n;
  report.summary["AUC"] = auc / n;
  for (const auto& [k, v] : p_at) report.summary["P@" + std::to_string(k)] = v / n;
  for (const auto& [k, v] : r_at) report.summary["R@" + std::to_string(k)] = v / n;
  return report;
}

}  // namespace

TrainResult train(MatchModel& model, const RecordIndex& index,
                  const std::vector<MatchExample>& train_examples,
                  const std::vector<MatchExample>& validation_examples, const Vocab& vocab,
                  const TrainConfig& config) {
  if (train_examples.empty()) throw std::invalid_argument("train: empty training set");
  if (config.batch_size < 1 || config.epochs < 0) {
    throw std::invalid_argument("train: bad batch size or epoch count");
  }

  TrainResult result;
  if (config.epochs == 0) return result;

  if (!model.flags().no_scale) {
    std::vector<const CompanyRecord*> train_companies;
    std::map<std::string, bool> seen;
    for (const auto& ex : train_examples) {
      if (seen.emplace(ex.company_id, true).second) {
        train_companies.push_back(&index.company(ex.company_id));
      }
    }
    fit_standardization(model.store(), model.schema(), train_companies);
  }

  // Sequences depend only on the pair, so assemble once.
  std::vector<std::vector<TokenSequence>> sequences;
  std::vector<double> labels;
  sequences.reserve(train_examples.size());
  labels.reserve(train_examples.size());
  for (const auto& ex : train_examples) {
    sequences.push_back(
        model.assemble(index.solution(ex.solution_id), index.company(ex.company_id), vocab));
    labels.push_back(static_cast<double>(ex.label));
  }

  Rng rng(config.seed);
  ParamStore best_params;
  double best_map = -1.0;
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(train_examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      Tape tape;
      std::vector<MatchModel::Forward> batch;
      std::vector<double> batch_labels;
      for (std::size_t k = begin; k < end; ++k) {
        batch.push_back(model.forward(tape, sequences[order[k]],
                                      index.company(train_examples[order[k]].company_id)));
        batch_labels.push_back(labels[order[k]]);
      }
      const int loss = joint_loss(tape, batch, batch_labels);
      model.store().zero_grads();
      tape.backward(loss);
      adam_step(model.store(), config.learning_rates);
      result.loss_history.emplace_back(step, tape.value(loss).item());
      ++step;
    }

    if (!validation_examples.empty()) {
      const auto report = evaluate(model, index, validation_examples, vocab);
      const double val_map = report.summary.at("MAP");
      result.epoch_validation_map.push_back(val_map);
      if (config.keep_best && val_map > best_map) {
        best_map = val_map;
        best_params = model.store();
        result.best_epoch = epoch;
      }
    }
  }

  if (config.keep_best && result.best_epoch >= 0) {
    model.store() = std::move(best_params);
  }
  return result;
}

std::vector<std::pair<std::string, double>> rank_companies(
    MatchModel& model, const SolutionRecord& solution,
    const std::vector<const CompanyRecord*>& companies, const Vocab& vocab) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(companies.size());
  for (const auto* c : companies) {
    out.emplace_back(c->id, model.match(solution, *c, vocab).combined);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

MetricsReport evaluate(MatchModel& model, const RecordIndex& index,
                       const std::vector<MatchExample>& examples, const Vocab& vocab) {
  if (examples.empty()) throw std::invalid_argument("evaluate: no examples");
  std::vector<MetricsReport::PerSolution> per_solution;
  std::vector<std::string> warnings;
  for (const auto& [solution_id, candidates] : group_by_solution(examples)) {
    int positives = 0;
    for (const auto* ex : candidates) positives += ex->label;
    if (positives == 0) {
      warnings.push_back("solution '" + solution_id + "' has no positive candidates; skipped");
      continue;
    }
    const SolutionRecord& solution = index.solution(solution_id);
    std::vector<RankedCandidate> pool;
    pool.reserve(candidates.size());
    for (const auto* ex : candidates) {
      const CompanyRecord& company = index.company(ex->company_id);
      pool.push_back({ex->company_id, model.match(solution, company, vocab).combined, ex->label});
    }
    per_solution.push_back({solution_id, ranking_metrics(std::move(pool))});
  }
  return summarize(std::move(per_solution), std::move(warnings));
}

MetricsReport random_ranking_baseline(const std::vector<MatchExample>& examples,
                                      std::uint64_t seed) {
  if (examples.empty()) throw std::invalid_argument("random_ranking_baseline: no examples");
  Rng rng(seed);
  std::vector<MetricsReport::PerSolution> per_solution;
  std::vector<std::string> warnings;
  for (const auto& [solution_id, candidates] : group_by_solution(examples)) {
    int positives = 0;
    for (const auto* ex : candidates) positives += ex->label;
    if (positives == 0) {
      warnings.push_back("solution '" + solution_id + "' has no positive candidates; skipped");
      continue;
    }
    std::vector<RankedCandidate> pool;
    for (const auto* ex : candidates) {
      pool.push_back({ex->company_id, rng.uniform(), ex->label});
    }
    per_solution.push_back({solution_id, ranking_metrics(std::move(pool))});
  }
  return summarize(std::move(per_solution), std::move(warnings));
}

}  // namespace fieldmatch
