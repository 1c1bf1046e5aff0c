#include "fieldmatch/match_model.hpp"

#include <cmath>
#include <stdexcept>

namespace fieldmatch {

AblationFlags AblationFlags::from_names(const std::vector<std::string>& names) {
  AblationFlags f;
  for (const auto& n : names) {
    if (n == "no_desc") f.no_desc = true;
    else if (n == "no_attr") f.no_attr = true;
    else if (n == "no_text_grouping") f.no_text_grouping = true;
    else if (n == "no_field_embeddings") f.no_field_embeddings = true;
    else if (n == "no_scale") f.no_scale = true;
    else if (n == "no_field_level") f.no_field_level = true;
    else if (n == "no_pretrain") f.no_pretrain = true;
    else if (n == "no_token_masking") f.no_token_masking = true;
    else if (n == "no_field_masking") f.no_field_masking = true;
    else if (n == "no_company_replacing") f.no_company_replacing = true;
    else throw std::invalid_argument("unknown ablation flag '" + n + "'");
  }
  if (f.no_desc && f.no_attr) {
    throw std::invalid_argument("ablation cannot drop both text groups");
  }
  if (f.no_text_grouping && (f.no_desc || f.no_attr)) {
    throw std::invalid_argument("no_text_grouping conflicts with no_desc/no_attr");
  }
  return f;
}

std::vector<std::string> AblationFlags::names() const {
  std::vector<std::string> out;
  if (no_desc) out.push_back("no_desc");
  if (no_attr) out.push_back("no_attr");
  if (no_text_grouping) out.push_back("no_text_grouping");
  if (no_field_embeddings) out.push_back("no_field_embeddings");
  if (no_scale) out.push_back("no_scale");
  if (no_field_level) out.push_back("no_field_level");
  if (no_pretrain) out.push_back("no_pretrain");
  if (no_token_masking) out.push_back("no_token_masking");
  if (no_field_masking) out.push_back("no_field_masking");
  if (no_company_replacing) out.push_back("no_company_replacing");
  return out;
}

bool AblationFlags::any() const { return !names().empty(); }

void ModelConfig::check() const {
  if (d_e < 1 || token_layers < 0 || heads < 1 || ff < 1 || max_len < 8 || field_layers < 0) {
    throw std::invalid_argument("ModelConfig: bad dimensions");
  }
  if (d_e % heads != 0) {
    throw std::invalid_argument("ModelConfig: d_e must be divisible by the head count");
  }
}

std::string MatchModel::group_param_prefix(const GroupSpec& spec) {
  switch (spec.group) {
    case TextGroup::description: return "desc";
    case TextGroup::attribute: return "attr";
    case TextGroup::combined: return "text";
  }
  throw std::logic_error("group_param_prefix: bad group");
}

namespace {

Tensor random_tensor(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t.at(i) = rng.normal(0.0, stddev);
  return t;
}

Tensor ones(int n) {
  Tensor t({n});
  t.fill(1.0);
  return t;
}

void init_transformer_layers(ParamStore& store, const std::string& prefix, int layers, int d,
                             int heads, int ff, ParamGroup group, Rng& rng) {
  const int dh = d / heads;
  const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < layers; ++l) {
    const std::string lp = prefix + ".layer" + std::to_string(l);
    for (int h = 0; h < heads; ++h) {
      const std::string hp = lp + ".h" + std::to_string(h);
      store.create(hp + ".wq", random_tensor({d, dh}, w_std, rng), group);
      store.create(hp + ".wk", random_tensor({d, dh}, w_std, rng), group);
      store.create(hp + ".wv", random_tensor({d, dh}, w_std, rng), group);
    }
    store.create(lp + ".attn_out.w", random_tensor({d, d}, w_std, rng), group);
    store.create(lp + ".attn_out.b", Tensor({d}), group);
    store.create(lp + ".ln1.gamma", ones(d), group);
    store.create(lp + ".ln1.beta", Tensor({d}), group);
    store.create(lp + ".ff1.w", random_tensor({d, ff}, w_std, rng), group);
    store.create(lp + ".ff1.b", Tensor({ff}), group);
    store.create(lp + ".ff2.w", random_tensor({ff, d}, 1.0 / std::sqrt(static_cast<double>(ff)), rng),
                 group);
    store.create(lp + ".ff2.b", Tensor({d}), group);
    store.create(lp + ".ln2.gamma", ones(d), group);
    store.create(lp + ".ln2.beta", Tensor({d}), group);
  }
}

// Post-norm Transformer stack with a ReLU feed-forward.
int run_transformer_layers(Tape& tape, ParamStore& store, const std::string& prefix, int layers,
                           int heads, int x, const std::vector<std::uint8_t>& key_mask) {
  for (int l = 0; l < layers; ++l) {
    const std::string lp = prefix + ".layer" + std::to_string(l);
    std::vector<std::array<int, 3>> head_params;
    for (int h = 0; h < heads; ++h) {
      const std::string hp = lp + ".h" + std::to_string(h);
      head_params.push_back({tape.param(store, hp + ".wq"), tape.param(store, hp + ".wk"),
                             tape.param(store, hp + ".wv")});
    }
    const int attn = multi_head_attention(tape, x, head_params,
                                          tape.param(store, lp + ".attn_out.w"),
                                          tape.param(store, lp + ".attn_out.b"), key_mask);
    x = tape.layer_norm(tape.add(x, attn), tape.param(store, lp + ".ln1.gamma"),
                        tape.param(store, lp + ".ln1.beta"));
    const int ff = tape.affine(
        tape.leaky_relu(
            tape.affine(x, tape.param(store, lp + ".ff1.w"), tape.param(store, lp + ".ff1.b")),
            0.0),
        tape.param(store, lp + ".ff2.w"), tape.param(store, lp + ".ff2.b"));
    x = tape.layer_norm(tape.add(x, ff), tape.param(store, lp + ".ln2.gamma"),
                        tape.param(store, lp + ".ln2.beta"));
  }
  return x;
}

}  // namespace

MatchModel::MatchModel(FieldSchema schema, ModelConfig config, AblationFlags flags,
                       int vocab_size, std::uint64_t seed)
    : schema_(std::move(schema)), config_(config), flags_(flags), vocab_size_(vocab_size) {
  schema_.check();
  config_.check();
  if (flags_.no_text_grouping) {
    groups_.push_back(GroupSpec::combined(schema_));
  } else {
    if (!flags_.no_desc) groups_.push_back(GroupSpec::description(schema_));
    if (!flags_.no_attr) groups_.push_back(GroupSpec::attribute(schema_));
  }
  if (groups_.empty()) throw std::invalid_argument("MatchModel: no text groups left");
  init_params(seed);
}

MatchModel::MatchModel(FieldSchema schema, ModelConfig config, AblationFlags flags,
                       int vocab_size, ParamStore store)
    : schema_(std::move(schema)),
      config_(config),
      flags_(flags),
      vocab_size_(vocab_size),
      store_(std::move(store)) {
  schema_.check();
  config_.check();
  if (flags_.no_text_grouping) {
    groups_.push_back(GroupSpec::combined(schema_));
  } else {
    if (!flags_.no_desc) groups_.push_back(GroupSpec::description(schema_));
    if (!flags_.no_attr) groups_.push_back(GroupSpec::attribute(schema_));
  }
  if (groups_.empty()) throw std::invalid_argument("MatchModel: no text groups left");
  check_store();
}

void MatchModel::init_params(std::uint64_t seed) {
  Rng rng(seed);
  const int d = config_.d_e;
  for (const auto& spec : groups_) {
    const std::string g = group_param_prefix(spec);
    store_.create(g + ".word_emb", random_tensor({vocab_size_, d}, 0.02, rng),
                  ParamGroup::token_level);
    store_.create(g + ".pos_emb", random_tensor({config_.max_len, d}, 0.02, rng),
                  ParamGroup::token_level);
    if (!flags_.no_field_embeddings) {
      store_.create(g + ".fe", random_tensor({spec.field_count() + 1, d}, 0.02, rng),
                    ParamGroup::token_level);
    }
    init_transformer_layers(store_, g, config_.token_layers, d, config_.heads, config_.ff,
                            ParamGroup::token_level, rng);
    store_.create(g + ".head.w", random_tensor({d, 1}, 0.2, rng), ParamGroup::token_level);
    store_.create(g + ".head.b", Tensor({1}), ParamGroup::token_level);
  }

  if (!flags_.no_scale) {
    Rng scale_rng = rng.fork(101);
    init_scale_encoder(store_, schema_, config_.scale, scale_rng);
  }

  if (!flags_.no_field_level) {
    Rng field_rng = rng.fork(102);
    int n_slots = 1;  // pooling vector p
    if (!flags_.no_scale) ++n_slots;
    for (const auto& spec : groups_) n_slots += spec.field_count();
    store_.create("field.pool_p", random_tensor({1, d}, 0.2, field_rng), ParamGroup::field_level);
    if (!flags_.no_scale) {
      store_.create("field.scale_proj.w",
                    random_tensor({config_.scale.d_s, d},
                                  1.0 / std::sqrt(static_cast<double>(config_.scale.d_s)),
                                  field_rng),
                    ParamGroup::field_level);
      store_.create("field.scale_proj.b", Tensor({d}), ParamGroup::field_level);
    }
    store_.create("field.slot_emb", random_tensor({n_slots, d}, 0.02, field_rng),
                  ParamGroup::field_level);
    init_transformer_layers(store_, "field", config_.field_layers, d, config_.heads, config_.ff,
                            ParamGroup::field_level, field_rng);
    store_.create("field.head.w", random_tensor({d, 1}, 0.2, field_rng), ParamGroup::field_level);
    store_.create("field.head.b", Tensor({1}), ParamGroup::field_level);
  }
}

void MatchModel::check_store() const {
  for (const auto& spec : groups_) {
    const std::string g = group_param_prefix(spec);
    const Tensor& we = store_.value(g + ".word_emb");
    if (we.rows() != vocab_size_ || we.cols() != config_.d_e) {
      throw std::invalid_argument("MatchModel: checkpoint word embeddings for '" + g +
                                  "' do not match the configuration");
    }
    if (!flags_.no_field_embeddings) {
      const Tensor& fe = store_.value(g + ".fe");
      if (fe.rows() != spec.field_count() + 1) {
        throw std::invalid_argument("MatchModel: field-aware embeddings for '" + g +
                                    "' do not match the schema");
      }
    }
  }
}

MatchModel::TokenEncoding MatchModel::encode_tokens(Tape& tape, std::size_t group_index,
                                                    const TokenSequence& seq) {
  const GroupSpec& spec = groups_.at(group_index);
  const std::string g = group_param_prefix(spec);
  if (seq.n_fields != spec.field_count()) {
    throw std::invalid_argument("encode_tokens: sequence does not match the group schema");
  }
  const int T = seq.size();
  if (T > config_.max_len) {
    throw std::invalid_argument("encode_tokens: sequence longer than max_len");
  }

  std::vector<int> positions(static_cast<std::size_t>(T));
  for (int p = 0; p < T; ++p) positions[static_cast<std::size_t>(p)] = p;

  const int words = tape.embedding_gather(tape.param(store_, g + ".word_emb"), seq.token_ids);
  const int pos = tape.embedding_gather(tape.param(store_, g + ".pos_emb"), positions);
  int x = tape.add(words, pos);
  if (!flags_.no_field_embeddings) {
    const int fe_rows = spec.field_count() + 1;
    std::vector<int> fe_ids(static_cast<std::size_t>(T));
    for (int p = 0; p < T; ++p) {
      const int fid = seq.field_ids[static_cast<std::size_t>(p)];
      if (fid == seq.pad_field_id()) {
        fe_ids[static_cast<std::size_t>(p)] = -1;  // zero row, masked anyway
      } else if (fid < 0 || fid >= fe_rows) {
        throw std::out_of_range("encode_tokens: field id " + std::to_string(fid) +
                                " outside the field-aware embedding range");
      } else {
        fe_ids[static_cast<std::size_t>(p)] = fid;
      }
    }
    x = tape.add(x, tape.embedding_gather(tape.param(store_, g + ".fe"), fe_ids));
  }

  std::vector<std::uint8_t> key_mask(static_cast<std::size_t>(T));
  for (int p = 0; p < T; ++p) key_mask[static_cast<std::size_t>(p)] = p < seq.real_len ? 1 : 0;

  x = run_transformer_layers(tape, store_, g, config_.token_layers, config_.heads, x, key_mask);

  TokenEncoding out;
  out.cls = tape.embedding_gather(x, {0});
  out.seps = tape.embedding_gather(x, seq.sep_positions);
  return out;
}

int MatchModel::encode_cls(Tape& tape, std::size_t group_index, const TokenSequence& seq) {
  return encode_tokens(tape, group_index, seq).cls;
}

int MatchModel::token_score(Tape& tape, std::size_t group_index, int cls) {
  const std::string g = group_param_prefix(groups_.at(group_index));
  return tape.logistic(
      tape.affine(cls, tape.param(store_, g + ".head.w"), tape.param(store_, g + ".head.b")));
}

int MatchModel::field_score(Tape& tape, int scale_vector, const std::vector<int>& group_seps) {
  if (flags_.no_field_level) throw std::logic_error("field_score: field level is ablated");
  auto& store = store_;
  std::vector<int> slots;
  slots.push_back(tape.param(store, "field.pool_p"));
  if (!flags_.no_scale) {
    if (scale_vector < 0) throw std::invalid_argument("field_score: missing scale slot");
    slots.push_back(tape.affine(scale_vector, tape.param(store, "field.scale_proj.w"),
                                tape.param(store, "field.scale_proj.b")));
  }
  for (int seps : group_seps) slots.push_back(seps);

  int x = slots.size() == 1 ? slots[0] : tape.concat_rows(slots);
  const int slot_emb = tape.param(store, "field.slot_emb");
  if (tape.value(slot_emb).rows() != tape.value(x).rows()) {
    throw std::invalid_argument("field_score: slot count mismatch (" +
                                std::to_string(tape.value(x).rows()) + " slots vs " +
                                std::to_string(tape.value(slot_emb).rows()) + " embeddings)");
  }
  x = tape.add(x, slot_emb);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(tape.value(x).rows()), 1);
  x = run_transformer_layers(tape, store, "field", config_.field_layers, config_.heads, x, mask);
  const int y = tape.embedding_gather(x, {0});
  return tape.logistic(
      tape.affine(y, tape.param(store, "field.head.w"), tape.param(store, "field.head.b")));
}

MatchModel::Forward MatchModel::forward(Tape& tape, const std::vector<TokenSequence>& sequences,
                                        const CompanyRecord& company) {
  if (sequences.size() != groups_.size()) {
    throw std::invalid_argument("forward: expected one sequence per text group");
  }
  auto& store = store_;
  Forward out;

  int scale_vec = -1;
  if (!flags_.no_scale) {
    scale_vec = encode_company_scale(tape, store, schema_, config_.scale, company);
    const int p = scale_score(tape, store, scale_vec);
    out.head_nodes.emplace_back("scale", p);
    out.scores.p_scale = tape.value(p).at(0);
  }

  std::vector<int> group_seps;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const auto enc = encode_tokens(tape, gi, sequences[gi]);
    group_seps.push_back(enc.seps);
    const int p = token_score(tape, gi, enc.cls);
    const std::string name = group_param_prefix(groups_[gi]);
    out.head_nodes.emplace_back(name, p);
    const double v = tape.value(p).at(0);
    if (groups_[gi].group == TextGroup::description) out.scores.p_desc = v;
    else if (groups_[gi].group == TextGroup::attribute) out.scores.p_attr = v;
    else out.scores.p_text = v;
  }

  if (!flags_.no_field_level) {
    const int p = field_score(tape, scale_vec, group_seps);
    out.head_nodes.emplace_back("field", p);
    out.scores.p_field = tape.value(p).at(0);
  }

  double sum = 0.0;
  for (const auto& [name, node] : out.head_nodes) sum += tape.value(node).at(0);
  out.scores.combined = sum / static_cast<double>(out.head_nodes.size());
  return out;
}

std::vector<TokenSequence> MatchModel::assemble(const SolutionRecord& s, const CompanyRecord& c,
                                                const Vocab& vocab) const {
  std::vector<TokenSequence> out;
  for (const auto& spec : groups_) {
    out.push_back(assemble_sequence(spec, s, c, vocab, config_.max_len));
  }
  return out;
}

MatchScores MatchModel::match(const SolutionRecord& s, const CompanyRecord& c,
                              const Vocab& vocab) {
  Tape tape;
  return forward(tape, assemble(s, c, vocab), c).scores;
}

int joint_loss(Tape& tape, const std::vector<MatchModel::Forward>& batch,
               const std::vector<double>& labels) {
  if (batch.empty()) throw std::invalid_argument("joint_loss: empty batch");
  if (batch.size() != labels.size()) throw std::invalid_argument("joint_loss: label count");
  const std::size_t heads = batch[0].head_nodes.size();
  int loss = -1;
  for (std::size_t h = 0; h < heads; ++h) {
    std::vector<int> pieces;
    for (const auto& fwd : batch) {
      if (fwd.head_nodes.size() != heads) {
        throw std::invalid_argument("joint_loss: inconsistent head sets in batch");
      }
      pieces.push_back(fwd.head_nodes[h].second);
    }
    const int p = pieces.size() == 1 ? pieces[0] : tape.concat_rows(pieces);
    const int head_loss = tape.binary_cross_entropy(p, labels);
    loss = loss < 0 ? head_loss : tape.add(loss, head_loss);
  }
  return loss;
}

}  // namespace fieldmatch
