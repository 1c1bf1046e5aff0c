#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fieldmatch/param_store.hpp"
#include "fieldmatch/rng.hpp"
#include "fieldmatch/scale_encoder.hpp"
#include "fieldmatch/schema.hpp"
#include "fieldmatch/sequence.hpp"
#include "fieldmatch/tape.hpp"
#include "fieldmatch/vocab.hpp"

namespace fieldmatch {

struct AblationFlags {
  bool no_desc = false;
  bool no_attr = false;
  bool no_text_grouping = false;
  bool no_field_embeddings = false;
  bool no_scale = false;
  bool no_field_level = false;
  bool no_pretrain = false;
  bool no_token_masking = false;
  bool no_field_masking = false;
  bool no_company_replacing = false;

  static AblationFlags from_names(const std::vector<std::string>& names);  // unknown -> error
  std::vector<std::string> names() const;
  bool any() const;
};

struct ModelConfig {
  int d_e = 64;          // token embedding size (reference scale: BERT width)
  int token_layers = 2;  // reference scale: pretrained BERT depth
  int heads = 4;
  int ff = 128;
  int max_len = 128;
  int field_layers = 2;  // k; reference scale uses 6
  ScaleEncoderConfig scale;

  void check() const;
};

struct MatchScores {
  std::optional<double> p_scale;
  std::optional<double> p_desc;
  std::optional<double> p_attr;
  std::optional<double> p_text;  // ungrouped-text ablation only
  std::optional<double> p_field;
  double combined = 0.0;  // arithmetic mean of the active probabilities
};

// The hierarchical matcher: token-level encoders with field-aware
// embeddings, the scale encoder, and a field-level Transformer over per-field
// [SEP] representations plus the projected scale vector.
class MatchModel {
 public:
  MatchModel(FieldSchema schema, ModelConfig config, AblationFlags flags, int vocab_size,
             std::uint64_t seed);
  // Wraps existing parameters (e.g. loaded from a checkpoint).
  MatchModel(FieldSchema schema, ModelConfig config, AblationFlags flags, int vocab_size,
             ParamStore store);

  const FieldSchema& schema() const { return schema_; }
  const ModelConfig& config() const { return config_; }
  const AblationFlags& flags() const { return flags_; }
  const std::vector<GroupSpec>& groups() const { return groups_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

  struct TokenEncoding {
    int cls;   // [1, d_e]
    int seps;  // [F, d_e], one row per field in layout order
  };

  // Per-token embedding = word + position (+ field-aware unless ablated),
  // then the group's Transformer stack with [PAD] keys masked out.
  TokenEncoding encode_tokens(Tape& tape, std::size_t group_index, const TokenSequence& seq);

  // [CLS] output alone, for contrastive pretraining.
  int encode_cls(Tape& tape, std::size_t group_index, const TokenSequence& seq);

  // logistic(affine(cls)) for the group's score head.
  int token_score(Tape& tape, std::size_t group_index, int cls);

  // Eq-ordered slots [p; l(c^s); field slots...] through k Transformer
  // layers; returns the score node taken at p's slot. scale_vector is -1
  // when the scale component is ablated.
  int field_score(Tape& tape, int scale_vector, const std::vector<int>& group_seps);

  struct Forward {
    std::vector<std::pair<std::string, int>> head_nodes;  // head name -> [1,1] score node
    MatchScores scores;
  };

  // Runs every active component for one (solution, company) pair.
  Forward forward(Tape& tape, const std::vector<TokenSequence>& sequences,
                  const CompanyRecord& company);

  // Convenience: assemble + forward on a throwaway tape.
  MatchScores match(const SolutionRecord& s, const CompanyRecord& c, const Vocab& vocab);

  std::vector<TokenSequence> assemble(const SolutionRecord& s, const CompanyRecord& c,
                                      const Vocab& vocab) const;

  // Temperature used when pretraining this group's encoder.
  static std::string group_param_prefix(const GroupSpec& spec);

 private:
  void init_params(std::uint64_t seed);
  void check_store() const;

  FieldSchema schema_;
  ModelConfig config_;
  AblationFlags flags_;
  int vocab_size_;
  std::vector<GroupSpec> groups_;
  ParamStore store_;
};

// Joint loss over a batch: for every head, the batch-mean binary
// cross-entropy of its probabilities, summed across heads.
int joint_loss(Tape& tape, const std::vector<MatchModel::Forward>& batch,
               const std::vector<double>& labels);

}  // namespace fieldmatch
