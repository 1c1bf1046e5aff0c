#include "fieldmatch/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fieldmatch {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage) {
  return Rng(seed).fork(stage).next_u64();
}

ExperimentData generate_experiment_data(const RunConfig& config) {
  SynthConfig synth;
  synth.n_solutions = config.int_of("n_solutions");
  synth.n_companies = config.int_of("n_companies");
  synth.n_industries = config.int_of("n_industries");
  synth.vocab_seed_words = config.int_of("vocab_seed_words");
  synth.positives_per_solution = config.int_of("positives_per_solution");
  synth.text_signal_strength = config.double_of("text_signal_strength");
  synth.scale_signal_strength = config.double_of("scale_signal_strength");
  synth.missing_field_rate = config.double_of("missing_field_rate");
  synth.missing_token_rate = config.double_of("missing_token_rate");
  synth.seed = derive_seed(config.seed(), 11);

  SynthCorpus corpus = generate_corpus(synth);

  ExperimentData data;
  data.schema = std::move(corpus.schema);
  data.solutions = std::move(corpus.solutions);
  data.companies = std::move(corpus.companies);

  const auto examples =
      build_examples(corpus.positives, data.companies, config.int_of("negatives_per_positive"),
                     derive_seed(config.seed(), 12));
  auto [train_set, val_set, test_set] =
      split_dataset(examples, config.double_of("train_ratio"),
                    config.double_of("validation_ratio"), config.double_of("test_ratio"),
                    derive_seed(config.seed(), 13));
  data.train_examples = std::move(train_set);
  data.validation_examples = std::move(val_set);
  data.test_examples = std::move(test_set);

  std::vector<std::string> texts;
  for (const auto& s : data.solutions) {
    for (const auto& [k, v] : s.desc) texts.push_back(v);
    for (const auto& [k, tags] : s.attr) {
      for (const auto& t : tags) texts.push_back(t);
    }
  }
  for (const auto& c : data.companies) {
    for (const auto& [k, v] : c.desc) texts.push_back(v);
    for (const auto& [k, tags] : c.attr) {
      for (const auto& t : tags) texts.push_back(t);
    }
  }
  data.vocab = build_vocab(texts, config.int_of("min_count"));
  return data;
}

ModelConfig model_config_from(const RunConfig& config) {
  ModelConfig m;
  m.d_e = config.int_of("d_e");
  m.token_layers = config.int_of("token_layers");
  m.heads = config.int_of("heads");
  m.ff = config.int_of("ff");
  m.max_len = config.int_of("max_len");
  m.field_layers = config.int_of("field_layers");
  m.scale.d_s = config.int_of("d_s");
  m.scale.buckets = config.int_of("autodis_buckets");
  m.scale.alpha = config.double_of("autodis_alpha");
  m.check();
  return m;
}

TrainConfig train_config_from(const RunConfig& config) {
  TrainConfig t;
  t.batch_size = config.int_of("batch_size");
  t.epochs = config.int_of("epochs");
  t.learning_rates = {{ParamGroup::token_level, config.double_of("lr_token")},
                      {ParamGroup::scale, config.double_of("lr_scale")},
                      {ParamGroup::field_level, config.double_of("lr_field")}};
  t.seed = derive_seed(config.seed(), 31);
  return t;
}

PretrainConfig pretrain_config_from(const RunConfig& config, TextGroup group) {
  PretrainConfig p;
  // The combined-text ablation reuses the description temperature.
  p.tau = group == TextGroup::attribute ? config.double_of("tau_a") : config.double_of("tau_d");
  p.r_t = config.double_of("r_t");
  p.r_f = config.double_of("r_f");
  p.epochs = config.int_of("pretrain_epochs");
  p.batch_pairs = config.int_of("pretrain_batch");
  p.learning_rate = config.double_of("lr_pretrain");
  p.seed = derive_seed(config.seed(), 21 + static_cast<std::uint64_t>(group));
  return p;
}

namespace {

std::string flags_salt(const AblationFlags& flags) {
  if (!flags.any()) return "base";
  std::string joined = "flags:";
  for (const auto& n : flags.names()) joined += n + ",";
  return joined;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentData& data, const RunConfig& config,
                                 const AblationFlags& flags,
                                 std::optional<MatchModel>* model_out) {
  const auto index = RecordIndex::build(data.solutions, data.companies);
  MatchModel model(data.schema, model_config_from(config), flags, data.vocab.size(),
                   derive_seed(config.seed(), 41));

  ExperimentOutcome outcome;
  const bool pretrain_stage = config.bool_of("use_pretrained") && !flags.no_pretrain;
  if (pretrain_stage) {
    SimilarityIndex sim;
    const bool need_index = !flags.no_company_replacing;
    if (need_index) sim = build_similarity_index(data.companies);
    for (std::size_t gi = 0; gi < model.groups().size(); ++gi) {
      outcome.pretrain_logs.push_back(pretrain_encoder(
          model, gi, data.train_examples, index.solutions, index.companies, data.vocab,
          need_index ? &sim : nullptr, pretrain_config_from(config, model.groups()[gi].group)));
    }
  }

  outcome.train_log = train(model, index, data.train_examples, data.validation_examples,
                            data.vocab, train_config_from(config));
  outcome.report = evaluate(model, index, data.test_examples, data.vocab);
  outcome.report.config_fingerprint = config.fingerprint_with(flags_salt(flags));
  outcome.report.seed = config.seed();
  if (model_out != nullptr) model_out->emplace(std::move(model));
  return outcome;
}

std::string schema_path(const std::string& dir) { return dir + "/schema.jsonl"; }
std::string corpus_path(const std::string& dir) { return dir + "/corpus.jsonl"; }
std::string split_path(const std::string& dir, Split split) {
  return dir + "/" + split_name(split) + ".jsonl";
}
std::string vocab_path(const std::string& dir) { return dir + "/vocab.txt"; }
std::string pretrained_checkpoint_path(const std::string& dir, const std::string& group,
                                       const std::string& fingerprint) {
  return dir + "/pretrained-" + group + "-" + fingerprint + ".ckpt";
}
std::string trained_checkpoint_path(const std::string& dir, const std::string& fingerprint) {
  return dir + "/trained-" + fingerprint + ".ckpt";
}
std::string metrics_path(const std::string& dir, const std::string& fingerprint) {
  return dir + "/metrics-" + fingerprint + ".jsonl";
}

namespace {

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw std::invalid_argument("empty directory path");
  fs::create_directories(dir);
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_curve(const std::string& path, const std::vector<std::pair<int, double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "step\tloss\n";
  char buf[64];
  for (const auto& [step, loss] : rows) {
    std::snprintf(buf, sizeof buf, "%d\t%.17g\n", step, loss);
    out << buf;
  }
}

}  // namespace

void write_checkpoint_immutable(const ParamStore& store, const std::string& path) {
  const std::string tmp = path + ".tmp";
  save_checkpoint(store, tmp);
  if (fs::exists(path)) {
    const bool identical = read_file_bytes(tmp) == read_file_bytes(path);
    fs::remove(tmp);
    if (!identical) {
      throw std::runtime_error("checkpoint '" + path +
                               "' already exists with different contents; checkpoints are "
                               "immutable (change the config or output directory)");
    }
    return;
  }
  fs::rename(tmp, path);
}

void load_parameters_into(MatchModel& model, const std::string& path,
                          const std::string& required_prefix) {
  const ParamStore loaded = load_checkpoint(path);
  for (const auto& [name, entry] : loaded.entries()) {
    if (!required_prefix.empty() && name.rfind(required_prefix, 0) != 0) {
      throw std::runtime_error("checkpoint '" + path + "' contains parameter '" + name +
                               "' outside expected prefix '" + required_prefix + "'");
    }
    if (!model.store().contains(name)) {
      throw std::runtime_error("checkpoint '" + path + "' parameter '" + name +
                               "' does not exist in the model");
    }
    auto& target = model.store().entry(name);
    if (!(target.value.shape() == entry.value.shape())) {
      throw std::runtime_error("checkpoint '" + path + "' parameter '" + name +
                               "' has mismatched shape");
    }
    target.value = entry.value;
  }
}

void cmd_gen_data(const RunConfig& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  const ExperimentData data = generate_experiment_data(config);
  store_schema(data.schema, schema_path(out_dir));

  Dataset corpus;
  corpus.solutions = data.solutions;
  corpus.companies = data.companies;
  store_dataset(corpus, corpus_path(out_dir));

  const std::pair<Split, const std::vector<MatchExample>*> splits[3] = {
      {Split::train, &data.train_examples},
      {Split::validation, &data.validation_examples},
      {Split::test, &data.test_examples}};
  for (const auto& [split, examples] : splits) {
    Dataset ds;
    ds.examples = *examples;
    ds.split_tag = split;
    store_dataset(ds, split_path(out_dir, split));
  }
}

ExperimentData load_experiment_data(const std::string& data_dir) {
  ExperimentData data;
  data.schema = load_schema(schema_path(data_dir));
  Dataset corpus = load_dataset(corpus_path(data_dir));
  data.solutions = std::move(corpus.solutions);
  data.companies = std::move(corpus.companies);
  data.train_examples = load_dataset(split_path(data_dir, Split::train)).examples;
  data.validation_examples = load_dataset(split_path(data_dir, Split::validation)).examples;
  data.test_examples = load_dataset(split_path(data_dir, Split::test)).examples;
  const std::string vp = vocab_path(data_dir);
  if (fs::exists(vp)) data.vocab = Vocab::load(vp);
  return data;
}

void cmd_build_vocab(const RunConfig& config, const StagePaths& paths) {
  Dataset corpus = load_dataset(corpus_path(paths.data_dir));
  std::vector<std::string> texts;
  for (const auto& s : corpus.solutions) {
    for (const auto& [k, v] : s.desc) texts.push_back(v);
    for (const auto& [k, tags] : s.attr) {
      for (const auto& t : tags) texts.push_back(t);
    }
  }
  for (const auto& c : corpus.companies) {
    for (const auto& [k, v] : c.desc) texts.push_back(v);
    for (const auto& [k, tags] : c.attr) {
      for (const auto& t : tags) texts.push_back(t);
    }
  }
  const Vocab vocab = build_vocab(texts, config.int_of("min_count"));
  ensure_dir(paths.out_dir);
  vocab.save(vocab_path(paths.out_dir));
}

namespace {

MatchModel build_model(const ExperimentData& data, const RunConfig& config,
                       const AblationFlags& flags) {
  return MatchModel(data.schema, model_config_from(config), flags, data.vocab.size(),
                    derive_seed(config.seed(), 41));
}

ParamStore subset(const ParamStore& store, const std::string& prefix) {
  ParamStore out;
  for (const auto& [name, e] : store.entries()) {
    if (name.rfind(prefix, 0) == 0) out.create(name, e.value, e.group, e.trainable);
  }
  return out;
}

}  // namespace

void cmd_pretrain(const RunConfig& config, const StagePaths& paths, const AblationFlags& flags) {
  const ExperimentData data = load_experiment_data(paths.data_dir);
  if (data.vocab.size() <= kNumReserved) {
    throw std::runtime_error("pretrain: vocabulary missing; run build-vocab first");
  }
  ensure_dir(paths.out_dir);
  MatchModel model = build_model(data, config, flags);
  const auto index = RecordIndex::build(data.solutions, data.companies);

  SimilarityIndex sim;
  const bool need_index = !flags.no_company_replacing;
  if (need_index) sim = build_similarity_index(data.companies);

  const std::string fp = config.fingerprint_with(flags_salt(flags));
  for (std::size_t gi = 0; gi < model.groups().size(); ++gi) {
    const auto& spec = model.groups()[gi];
    const auto result = pretrain_encoder(model, gi, data.train_examples, index.solutions,
                                         index.companies, data.vocab, need_index ? &sim : nullptr,
                                         pretrain_config_from(config, spec.group));
    const std::string group_name = MatchModel::group_param_prefix(spec);
    write_checkpoint_immutable(subset(model.store(), group_name + "."),
                               pretrained_checkpoint_path(paths.out_dir, group_name, fp));
    write_curve(paths.out_dir + "/pretrain-" + group_name + "-" + fp + ".tsv",
                result.loss_history);
  }
}

void cmd_train(const RunConfig& config, const StagePaths& paths, const AblationFlags& flags) {
  const ExperimentData data = load_experiment_data(paths.data_dir);
  if (data.vocab.size() <= kNumReserved) {
    throw std::runtime_error("train: vocabulary missing; run build-vocab first");
  }
  ensure_dir(paths.out_dir);
  MatchModel model = build_model(data, config, flags);
  const auto index = RecordIndex::build(data.solutions, data.companies);
  const std::string fp = config.fingerprint_with(flags_salt(flags));

  if (config.bool_of("use_pretrained") && !flags.no_pretrain) {
    for (const auto& spec : model.groups()) {
      const std::string group_name = MatchModel::group_param_prefix(spec);
      const std::string path = pretrained_checkpoint_path(paths.out_dir, group_name, fp);
      if (!fs::exists(path)) {
        throw std::runtime_error("train: pretrained checkpoint '" + path +
                                 "' not found; run pretrain first or set use_pretrained=0");
      }
      load_parameters_into(model, path, group_name + ".");
    }
  }

  const auto result = train(model, index, data.train_examples, data.validation_examples,
                            data.vocab, train_config_from(config));
  write_checkpoint_immutable(model.store(), trained_checkpoint_path(paths.out_dir, fp));
  write_curve(paths.out_dir + "/train-loss-" + fp + ".tsv", result.loss_history);

  std::ofstream log(paths.out_dir + "/train-log-" + fp + ".tsv", std::ios::binary);
  log << "epoch\tvalidation_map\n";
  char buf[64];
  for (std::size_t e = 0; e < result.epoch_validation_map.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", e, result.epoch_validation_map[e]);
    log << buf;
  }
  if (result.best_epoch >= 0) log << "best\t" << result.best_epoch << "\n";
}

MetricsReport cmd_eval(const RunConfig& config, const StagePaths& paths,
                       const AblationFlags& flags) {
  const ExperimentData data = load_experiment_data(paths.data_dir);
  const std::string fp = config.fingerprint_with(flags_salt(flags));
  const std::string ckpt = trained_checkpoint_path(paths.out_dir, fp);
  if (!fs::exists(ckpt)) {
    throw std::runtime_error("eval: trained checkpoint '" + ckpt + "' not found");
  }
  MatchModel model(data.schema, model_config_from(config), flags, data.vocab.size(),
                   load_checkpoint(ckpt));
  const auto index = RecordIndex::build(data.solutions, data.companies);
  MetricsReport report = evaluate(model, index, data.test_examples, data.vocab);
  report.config_fingerprint = fp;
  report.seed = config.seed();
  save_metrics_report(report, metrics_path(paths.out_dir, fp));
  return report;
}

std::vector<std::pair<std::string, double>> cmd_rank(const RunConfig& config,
                                                     const StagePaths& paths,
                                                     const std::string& solution_id, int top,
                                                     bool labeled_pool_only) {
  if (top < 1) throw std::invalid_argument("rank: top must be >= 1");
  const ExperimentData data = load_experiment_data(paths.data_dir);
  const std::string fp = config.fingerprint_with("base");
  const std::string ckpt = trained_checkpoint_path(paths.out_dir, fp);
  if (!fs::exists(ckpt)) {
    throw std::runtime_error("rank: trained checkpoint '" + ckpt + "' not found");
  }
  MatchModel model(data.schema, model_config_from(config), AblationFlags{}, data.vocab.size(),
                   load_checkpoint(ckpt));
  const auto index = RecordIndex::build(data.solutions, data.companies);
  const SolutionRecord& solution = index.solution(solution_id);

  std::vector<const CompanyRecord*> pool;
  if (labeled_pool_only) {
    std::set<std::string> ids;
    for (const auto& ex : data.test_examples) {
      if (ex.solution_id == solution_id) ids.insert(ex.company_id);
    }
    if (ids.empty()) {
      throw std::runtime_error("rank: solution '" + solution_id + "' has no labeled test pool");
    }
    for (const auto& id : ids) pool.push_back(&index.company(id));
  } else {
    for (const auto& c : data.companies) pool.push_back(&c);
  }
  auto ranking = rank_companies(model, solution, pool, data.vocab);
  if (static_cast<int>(ranking.size()) > top) ranking.resize(static_cast<std::size_t>(top));
  return ranking;
}

std::vector<std::pair<std::string, MetricsReport>> cmd_ablate(
    const RunConfig& config, const StagePaths& paths,
    const std::vector<std::string>& flag_names) {
  const ExperimentData data = load_experiment_data(paths.data_dir);
  if (data.vocab.size() <= kNumReserved) {
    throw std::runtime_error("ablate: vocabulary missing; run build-vocab first");
  }
  std::vector<std::pair<std::string, MetricsReport>> rows;
  rows.emplace_back("full", run_experiment(data, config, AblationFlags{}).report);
  for (const auto& name : flag_names) {
    const AblationFlags flags = AblationFlags::from_names({name});
    rows.emplace_back(name, run_experiment(data, config, flags).report);
  }
  if (!paths.out_dir.empty()) {
    ensure_dir(paths.out_dir);
    std::ofstream out(paths.out_dir + "/ablate-" + config.fingerprint() + ".tsv",
                      std::ios::binary);
    out << "variant\tMAP\tAUC\tP@10\tR@10\n";
    char buf[160];
    for (const auto& [name, report] : rows) {
      std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\t%.6f\t%.6f\n", name.c_str(),
                    report.summary.at("MAP"), report.summary.at("AUC"),
                    report.summary.at("P@10"), report.summary.at("R@10"));
      out << buf;
    }
  }
  return rows;
}

std::vector<std::pair<double, double>> cmd_sweep(const RunConfig& config, const StagePaths& paths,
                                                 const std::string& parameter,
                                                 const std::vector<double>& grid) {
  static const std::set<std::string> kSweepable = {"d_s", "tau_d", "tau_a", "r_t", "r_f"};
  if (kSweepable.find(parameter) == kSweepable.end()) {
    throw std::invalid_argument("sweep: parameter '" + parameter +
                                "' is not sweepable (use d_s, tau_d, tau_a, r_t, r_f)");
  }
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  const ExperimentData data = load_experiment_data(paths.data_dir);
  if (data.vocab.size() <= kNumReserved) {
    throw std::runtime_error("sweep: vocabulary missing; run build-vocab first");
  }
  std::vector<std::pair<double, double>> curve;
  for (const double value : grid) {
    RunConfig point = config;
    std::ostringstream v;
    if (parameter == "d_s") {
      v << static_cast<int>(value);
    } else {
      v << value;
    }
    point.set(parameter, v.str());
    const auto outcome = run_experiment(data, point, AblationFlags{});
    curve.emplace_back(value, outcome.report.summary.at("MAP"));
  }
  if (!paths.out_dir.empty()) {
    ensure_dir(paths.out_dir);
    std::ofstream out(paths.out_dir + "/sweep-" + parameter + "-" + config.fingerprint() + ".tsv",
                      std::ios::binary);
    out << parameter << "\tMAP\n";
    char buf[80];
    for (const auto& [value, map] : curve) {
      std::snprintf(buf, sizeof buf, "%.17g\t%.6f\n", value, map);
      out << buf;
    }
  }
  return curve;
}

}  // namespace fieldmatch
