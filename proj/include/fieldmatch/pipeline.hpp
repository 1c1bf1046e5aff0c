#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fieldmatch/dataset.hpp"
#include "fieldmatch/match_model.hpp"
#include "fieldmatch/metrics.hpp"
#include "fieldmatch/pretrain.hpp"
#include "fieldmatch/run_config.hpp"
#include "fieldmatch/synth.hpp"
#include "fieldmatch/train.hpp"
#include "fieldmatch/vocab.hpp"

namespace fieldmatch {

// Everything a training/evaluation run consumes.
struct ExperimentData {
  FieldSchema schema;
  std::vector<SolutionRecord> solutions;
  std::vector<CompanyRecord> companies;
  std::vector<MatchExample> train_examples;
  std::vector<MatchExample> validation_examples;
  std::vector<MatchExample> test_examples;
  Vocab vocab;
};

// Synthetic corpus + pairwise examples + splits + vocabulary, all in memory.
ExperimentData generate_experiment_data(const RunConfig& config);

ModelConfig model_config_from(const RunConfig& config);
TrainConfig train_config_from(const RunConfig& config);
PretrainConfig pretrain_config_from(const RunConfig& config, TextGroup group);

// Stable sub-seed derivation for pipeline stages.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage);

struct ExperimentOutcome {
  MetricsReport report;
  TrainResult train_log;
  std::vector<PretrainResult> pretrain_logs;  // aligned with model groups when pretrained
};

// Full in-memory pipeline: init -> (optional contrastive pretraining) ->
// supervised training -> test evaluation. The ablation/sweep harnesses and
// the acceptance suite run through this single path.
ExperimentOutcome run_experiment(const ExperimentData& data, const RunConfig& config,
                                 const AblationFlags& flags, std::optional<MatchModel>* model_out = nullptr);

// ---- Stage commands behind the CLI (and the python module). Every stage is
// re-runnable: identical inputs produce byte-identical outputs; checkpoints
// are immutable and content-addressed by config fingerprint + stage tag.

struct StagePaths {
  std::string data_dir;
  std::string out_dir;
};

std::string schema_path(const std::string& dir);
std::string corpus_path(const std::string& dir);
std::string split_path(const std::string& dir, Split split);
std::string vocab_path(const std::string& dir);
std::string pretrained_checkpoint_path(const std::string& dir, const std::string& group,
                                       const std::string& fingerprint);
std::string trained_checkpoint_path(const std::string& dir, const std::string& fingerprint);
std::string metrics_path(const std::string& dir, const std::string& fingerprint);

void cmd_gen_data(const RunConfig& config, const std::string& out_dir);
void cmd_build_vocab(const RunConfig& config, const StagePaths& paths);
void cmd_pretrain(const RunConfig& config, const StagePaths& paths, const AblationFlags& flags);
void cmd_train(const RunConfig& config, const StagePaths& paths, const AblationFlags& flags);
MetricsReport cmd_eval(const RunConfig& config, const StagePaths& paths,
                       const AblationFlags& flags);
std::vector<std::pair<std::string, double>> cmd_rank(const RunConfig& config,
                                                     const StagePaths& paths,
                                                     const std::string& solution_id, int top,
                                                     bool labeled_pool_only);
// One variant per flag name, plus the unablated base; returns rows of
// (variant name, report).
std::vector<std::pair<std::string, MetricsReport>> cmd_ablate(
    const RunConfig& config, const StagePaths& paths, const std::vector<std::string>& flag_names);
// (value, MAP) per grid point for a parameter in {d_s, tau_d, tau_a, r_t, r_f}.
std::vector<std::pair<double, double>> cmd_sweep(const RunConfig& config, const StagePaths& paths,
                                                 const std::string& parameter,
                                                 const std::vector<double>& grid);

ExperimentData load_experiment_data(const std::string& data_dir);

// Writes `store` to `path` unless an identical file already exists; an
// existing file with different bytes is an error (checkpoints are immutable).
void write_checkpoint_immutable(const ParamStore& store, const std::string& path);

// Copies checkpoint values into matching entries of the model store.
void load_parameters_into(MatchModel& model, const std::string& path,
                          const std::string& required_prefix);

}  // namespace fieldmatch
