#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unistd.h>

#include "fieldmatch/metrics.hpp"
#include "fieldmatch/pipeline.hpp"
#include "fieldmatch/rng.hpp"
#include "fieldmatch/train.hpp"
#include "support/metric_oracles.hpp"

using namespace fieldmatch;

namespace {

std::vector<RankedCandidate> labeled_in_rank_order(const std::vector<int>& labels) {
  // Strictly decreasing scores so the given order is the ranking.
  std::vector<RankedCandidate> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.push_back({"C" + std::to_string(i), 1.0 - 0.01 * static_cast<double>(i), labels[i]});
  }
  return out;
}

}  // namespace

TEST_CASE("AP on the worked example") {
  const auto m = ranking_metrics(labeled_in_rank_order({1, 0, 1, 0}));
  CHECK(m.ap == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("AUC extremes") {
  const auto perfect = ranking_metrics(labeled_in_rank_order({1, 1, 0, 0, 0}));
  CHECK(perfect.auc == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<RankedCandidate> tied;
  for (int i = 0; i < 10; ++i) tied.push_back({"C" + std::to_string(i), 0.5, i < 4 ? 1 : 0});
  CHECK(ranking_metrics(tied).auc == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("precision and recall cutoffs clip to the pool size") {
  const auto m = ranking_metrics(labeled_in_rank_order({1, 0, 1, 0}));
  CHECK(m.precision_at.at(10) == doctest::Approx(0.5).epsilon(1e-12));  // k_eff = 4
  CHECK(m.recall_at.at(10) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.precision_at.at(500) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("metrics match the brute-force definitional oracle on 200 random rankings") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 20));
    std::vector<RankedCandidate> pool;
    int positives = 0;
    for (int i = 0; i < n; ++i) {
      const int label = rng.bernoulli(0.35) ? 1 : 0;
      positives += label;
      // Coarse scores so ties happen often.
      const double score = static_cast<double>(rng.uniform_int(0, 5)) / 5.0;
      pool.push_back({"C" + std::to_string(i), score, label});
    }
    if (positives == 0) {
      pool[0].label = 1;
    }
    const auto ours = ranking_metrics(pool);
    const auto oracle = fieldmatch::testing::brute_force_metrics(pool);
    CHECK(std::abs(ours.ap - oracle.ap) < 1e-12);
    CHECK(std::abs(ours.auc - oracle.auc) < 1e-12);
    for (int i = 0; i < 3; ++i) {
      const int k = kMetricCutoffs[i];
      CHECK(std::abs(ours.precision_at.at(k) - oracle.p_at[i]) < 1e-12);
      CHECK(std::abs(ours.recall_at.at(k) - oracle.r_at[i]) < 1e-12);
    }
  }
}

TEST_CASE("oracle scores give perfect metrics; empty pools are rejected") {
  std::vector<RankedCandidate> pool;
  for (int i = 0; i < 12; ++i) pool.push_back({"C" + std::to_string(i), i < 3 ? 1.0 : 0.0, i < 3});
  const auto m = ranking_metrics(pool);
  CHECK(m.ap == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.auc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(ranking_metrics({}));
  CHECK_THROWS(ranking_metrics(labeled_in_rank_order({0, 0})));
}

TEST_CASE("random ranking stays near one half AUC on a balanced pool") {
  std::vector<MatchExample> examples;
  for (int i = 0; i < 1000; ++i) examples.push_back({"S0", "C" + std::to_string(i), i % 2});
  const auto report = random_ranking_baseline(examples, 11);
  CHECK(report.summary.at("AUC") > 0.45);
  CHECK(report.summary.at("AUC") < 0.55);
}

TEST_CASE("metrics reports round-trip through their file format") {
  MetricsReport report;
  report.summary["MAP"] = 0.625;
  report.summary["AUC"] = 0.8125;
  MetricsReport::PerSolution ps;
  ps.solution_id = "S1";
  ps.metrics = ranking_metrics(labeled_in_rank_order({1, 0, 1}));
  report.per_solution.push_back(ps);
  report.warnings.push_back("solution 'S9' has no positive candidates; skipped");
  report.config_fingerprint = "deadbeef00112233";
  report.seed = 17;

  const std::string path = "/tmp/fieldmatch_report_" + std::to_string(::getpid());
  save_metrics_report(report, path);
  const auto loaded = load_metrics_report(path);
  CHECK(loaded.summary == report.summary);
  REQUIRE(loaded.per_solution.size() == 1);
  CHECK(loaded.per_solution[0].solution_id == "S1");
  CHECK(loaded.per_solution[0].metrics.ap == ps.metrics.ap);
  CHECK(loaded.warnings == report.warnings);
  CHECK(loaded.config_fingerprint == report.config_fingerprint);
  CHECK(loaded.seed == 17);
  std::remove(path.c_str());
}

namespace {

ExperimentData tiny_experiment() {
  RunConfig cfg;
  cfg.set("n_solutions", "6");
  cfg.set("n_companies", "60");
  cfg.set("n_industries", "3");
  cfg.set("vocab_seed_words", "300");
  cfg.set("positives_per_solution", "4");
  cfg.set("negatives_per_positive", "3");
  cfg.set("missing_field_rate", "0.05");
  cfg.set("missing_token_rate", "0.02");
  cfg.set("seed", "5");
  return generate_experiment_data(cfg);
}

ModelConfig tiny_model_config() {
  ModelConfig mc;
  mc.d_e = 16;
  mc.token_layers = 1;
  mc.heads = 2;
  mc.ff = 24;
  mc.max_len = 64;
  mc.field_layers = 1;
  mc.scale.d_s = 8;
  mc.scale.buckets = 3;
  return mc;
}

}  // namespace

TEST_CASE("zero epochs leave the model untouched") {
  const auto data = tiny_experiment();
  const auto index = RecordIndex::build(data.solutions, data.companies);
  MatchModel model(data.schema, tiny_model_config(), AblationFlags{}, data.vocab.size(), 3);
  const ParamStore before = model.store();

  TrainConfig tc;
  tc.epochs = 0;
  const auto result = train(model, index, data.train_examples, data.validation_examples,
                            data.vocab, tc);
  CHECK(result.loss_history.empty());
  for (const auto& [name, e] : before.entries()) {
    CHECK(model.store().entry(name).value.values() == e.value.values());
  }
}

TEST_CASE("training reduces the joint loss on most seeds") {
  const auto data = tiny_experiment();
  const auto index = RecordIndex::build(data.solutions, data.companies);

  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    MatchModel model(data.schema, tiny_model_config(), AblationFlags{}, data.vocab.size(), seed);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 16;
    tc.seed = seed;
    tc.keep_best = false;
    tc.learning_rates = {{ParamGroup::token_level, 1e-3},
                         {ParamGroup::scale, 1e-3},
                         {ParamGroup::field_level, 1e-3}};
    const auto result = train(model, index, data.train_examples, data.validation_examples,
                              data.vocab, tc);
    REQUIRE_FALSE(result.loss_history.empty());
    const std::size_t per_epoch = result.loss_history.size() / 3;
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < per_epoch; ++i) {
      first += result.loss_history[i].second;
      last += result.loss_history[result.loss_history.size() - 1 - i].second;
    }
    if (last < first) ++improved;
  }
  CHECK(improved >= 4);
}

TEST_CASE("training is deterministic given the seed") {
  const auto data = tiny_experiment();
  const auto index = RecordIndex::build(data.solutions, data.companies);
  auto run = [&] {
    MatchModel model(data.schema, tiny_model_config(), AblationFlags{}, data.vocab.size(), 3);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 16;
    tc.seed = 9;
    train(model, index, data.train_examples, data.validation_examples, data.vocab, tc);
    return evaluate(model, index, data.test_examples, data.vocab).summary;
  };
  CHECK(run() == run());
}

TEST_CASE("rank_companies orders by score then id and matches single scoring") {
  const auto data = tiny_experiment();
  const auto index = RecordIndex::build(data.solutions, data.companies);
  MatchModel model(data.schema, tiny_model_config(), AblationFlags{}, data.vocab.size(), 7);

  std::vector<const CompanyRecord*> pool;
  for (std::size_t i = 0; i < 12; ++i) pool.push_back(&data.companies[i]);
  const auto ranking = rank_companies(model, data.solutions[0], pool, data.vocab);
  REQUIRE(ranking.size() == 12);
  for (std::size_t i = 1; i < ranking.size(); ++i) {
    const bool ordered = ranking[i - 1].second > ranking[i].second ||
                         (ranking[i - 1].second == ranking[i].second &&
                          ranking[i - 1].first < ranking[i].first);
    CHECK(ordered);
  }
  for (const auto& [id, score] : ranking) {
    CHECK(model.match(data.solutions[0], index.company(id), data.vocab).combined == score);
  }
  CHECK(rank_companies(model, data.solutions[0], {}, data.vocab).empty());
}

TEST_CASE("evaluate is invariant to candidate order and skips positive-free solutions") {
  const auto data = tiny_experiment();
  const auto index = RecordIndex::build(data.solutions, data.companies);
  MatchModel model(data.schema, tiny_model_config(), AblationFlags{}, data.vocab.size(), 9);

  auto examples = data.test_examples;
  const auto a = evaluate(model, index, examples, data.vocab);
  std::reverse(examples.begin(), examples.end());
  const auto b = evaluate(model, index, examples, data.vocab);
  CHECK(a.summary == b.summary);

  // A solution with only negatives is skipped with a warning.
  auto with_orphan = data.test_examples;
  with_orphan.push_back({data.solutions[5].id + "_orphan", data.companies[0].id, 0});
  // Orphan solution id is unknown to the index, so use a real one: drop its
  // positives instead.
  with_orphan.pop_back();
  std::vector<MatchExample> filtered;
  const std::string victim = with_orphan[0].solution_id;
  for (const auto& ex : with_orphan) {
    if (ex.solution_id == victim && ex.label == 1) continue;
    filtered.push_back(ex);
  }
  const auto c = evaluate(model, index, filtered, data.vocab);
  bool warned = false;
  for (const auto& w : c.warnings) warned |= w.find(victim) != std::string::npos;
  CHECK(warned);
}
