#pragma once

#include <string>
#include <vector>

#include "fieldmatch/schema.hpp"
#include "fieldmatch/vocab.hpp"

namespace fieldmatch {

enum class TextGroup { description, attribute, combined };

std::string text_group_name(TextGroup g);

struct GroupField {
  enum class Entity { solution, company };
  enum class Kind { plain, tags };
  Entity entity;
  Kind kind;
  std::string name;
};

// Ordered field layout of one token-level input sequence.
struct GroupSpec {
  TextGroup group = TextGroup::description;
  std::vector<GroupField> fields;  // solution fields first, then company fields
  int n_solution_fields = 0;

  int field_count() const { return static_cast<int>(fields.size()); }

  static GroupSpec description(const FieldSchema& schema);
  static GroupSpec attribute(const FieldSchema& schema);
  // All text fields through one sequence (the ungrouped-text ablation).
  static GroupSpec combined(const FieldSchema& schema);
};

// A paired (solution, company) token sequence. Layout:
//   [CLS] f_1 [SEP] ... f_Fs [SEP] [SEP] g_1 [SEP] ... g_Fc [SEP] [SEP]
// with one [SEP] after every field and an extra one closing each entity
// block. Tag fields carry an [EOS] after every tag. Missing or empty fields
// render as the single token [field_mask].
//
// field_ids: 0 for [CLS], 1..F for fields in layout order (block-final extra
// [SEP]s carry the preceding field's id), F+1 for [PAD].
struct TokenSequence {
  std::vector<int> token_ids;
  std::vector<int> field_ids;
  TextGroup group = TextGroup::description;
  int n_fields = 0;
  int n_solution_fields = 0;
  int boundary = 0;                // index of the first company-block token
  std::vector<int> sep_positions;  // field index -> position of its trailing [SEP]
  int real_len = 0;                // tokens before padding

  int size() const { return static_cast<int>(token_ids.size()); }
  int cls_field_id() const { return 0; }
  int pad_field_id() const { return n_fields + 1; }
  bool is_content(int pos) const { return token_ids[static_cast<std::size_t>(pos)] >= kUnk; }
};

// Raw (unpadded, untruncated) assembly.
TokenSequence assemble_sequence(const GroupSpec& spec, const SolutionRecord& s,
                                const CompanyRecord& c, const Vocab& vocab);

// Assembly plus pad_or_truncate to exactly max_len.
TokenSequence assemble_sequence(const GroupSpec& spec, const SolutionRecord& s,
                                const CompanyRecord& c, const Vocab& vocab, int max_len);

TokenSequence assemble_description(const SolutionRecord& s, const CompanyRecord& c,
                                   const FieldSchema& schema, const Vocab& vocab, int max_len);
TokenSequence assemble_attribute(const SolutionRecord& s, const CompanyRecord& c,
                                 const FieldSchema& schema, const Vocab& vocab, int max_len);

// Returns a sequence of exactly max_len tokens. Shorter sequences are padded
// with [PAD]; longer ones lose content tokens from the longest fields first
// (ties resolved toward the earlier field), never structural tokens. Tag
// fields shrink a whole word at a time while keeping every tag [EOS]-framed;
// a field reduced below one token collapses to [field_mask]. Throws when the
// structural frame alone cannot fit.
TokenSequence pad_or_truncate(const TokenSequence& seq, int max_len);

// Collapses the content span of each listed field (internal [EOS] included)
// to the single token [field_mask], keeping the trailing [SEP] and field id.
// Padded sequences are re-padded to their original length; sep_positions and
// boundary are recomputed.
TokenSequence collapse_fields(const TokenSequence& seq, const std::vector<int>& field_indices);

// Checks every structural invariant of an assembled (possibly padded,
// possibly augmented) sequence; returns human-readable violations.
std::vector<std::string> sequence_violations(const TokenSequence& seq, const GroupSpec& spec);

}  // namespace fieldmatch
