#include "fieldmatch/sequence.hpp"

#include <algorithm>
#include <stdexcept>

namespace fieldmatch {

std::string text_group_name(TextGroup g) {
  switch (g) {
    case TextGroup::description: return "description";
    case TextGroup::attribute: return "attribute";
    case TextGroup::combined: return "combined";
  }
  throw std::logic_error("text_group_name: bad group");
}

GroupSpec GroupSpec::description(const FieldSchema& schema) {
  GroupSpec spec;
  spec.group = TextGroup::description;
  for (const auto& n : schema.desc_fields_solution) {
    spec.fields.push_back({GroupField::Entity::solution, GroupField::Kind::plain, n});
  }
  spec.n_solution_fields = static_cast<int>(spec.fields.size());
  for (const auto& n : schema.desc_fields_company) {
    spec.fields.push_back({GroupField::Entity::company, GroupField::Kind::plain, n});
  }
  return spec;
}

GroupSpec GroupSpec::attribute(const FieldSchema& schema) {
  GroupSpec spec;
  spec.group = TextGroup::attribute;
  for (const auto& n : schema.attr_fields_solution) {
    spec.fields.push_back({GroupField::Entity::solution, GroupField::Kind::tags, n});
  }
  spec.n_solution_fields = static_cast<int>(spec.fields.size());
  for (const auto& n : schema.attr_fields_company) {
    spec.fields.push_back({GroupField::Entity::company, GroupField::Kind::tags, n});
  }
  return spec;
}

GroupSpec GroupSpec::combined(const FieldSchema& schema) {
  GroupSpec spec;
  spec.group = TextGroup::combined;
  for (const auto& n : schema.desc_fields_solution) {
    spec.fields.push_back({GroupField::Entity::solution, GroupField::Kind::plain, n});
  }
  for (const auto& n : schema.attr_fields_solution) {
    spec.fields.push_back({GroupField::Entity::solution, GroupField::Kind::tags, n});
  }
  spec.n_solution_fields = static_cast<int>(spec.fields.size());
  for (const auto& n : schema.desc_fields_company) {
    spec.fields.push_back({GroupField::Entity::company, GroupField::Kind::plain, n});
  }
  for (const auto& n : schema.attr_fields_company) {
    spec.fields.push_back({GroupField::Entity::company, GroupField::Kind::tags, n});
  }
  return spec;
}

namespace {

// One field's content span in a workable form.
struct ParsedField {
  bool tags = false;
  bool mask = false;
  std::vector<int> words;                   // plain fields
  std::vector<std::vector<int>> tag_words;  // tag fields, every tag non-empty

  int content_len() const {
    if (mask) return 1;
    if (tags) {
      int n = 0;
      for (const auto& t : tag_words) n += static_cast<int>(t.size()) + 1;  // + [EOS]
      return n;
    }
    return static_cast<int>(words.size());
  }

  bool removable() const {
    if (mask) return false;
    if (tags) return true;  // a lone 1-word tag can still collapse to [field_mask]
    return words.size() >= 2;
  }

  // Drops one unit from the end, keeping tag fields [EOS]-framed.
  void remove_one() {
    if (tags) {
      auto& last = tag_words.back();
      if (last.size() >= 2) {
        last.pop_back();
      } else if (tag_words.size() >= 2) {
        tag_words.pop_back();
      } else {
        tags = false;
        tag_words.clear();
        mask = true;
      }
      return;
    }
    words.pop_back();
  }
};

int total_length(const std::vector<ParsedField>& fields) {
  int n = 3 + static_cast<int>(fields.size());  // [CLS] + per-field [SEP] + 2 block [SEP]s
  for (const auto& f : fields) n += f.content_len();
  return n;
}

TokenSequence rebuild(const std::vector<ParsedField>& fields, TextGroup group,
                      int n_solution_fields, int pad_to) {
  TokenSequence seq;
  seq.group = group;
  seq.n_fields = static_cast<int>(fields.size());
  seq.n_solution_fields = n_solution_fields;

  auto push = [&seq](int token, int fid) {
    seq.token_ids.push_back(token);
    seq.field_ids.push_back(fid);
  };

  push(kCls, 0);
  for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
    const ParsedField& f = fields[static_cast<std::size_t>(i)];
    const int fid = i + 1;
    if (f.mask) {
      push(kFieldMask, fid);
    } else if (f.tags) {
      for (const auto& tag : f.tag_words) {
        for (int w : tag) push(w, fid);
        push(kEos, fid);
      }
    } else {
      for (int w : f.words) push(w, fid);
    }
    seq.sep_positions.push_back(seq.size());
    push(kSep, fid);
    if (i + 1 == n_solution_fields) {
      push(kSep, fid);  // block-final extra [SEP], carries the preceding field's id
      seq.boundary = seq.size();
    }
  }
  push(kSep, static_cast<int>(fields.size()));  // company block-final extra [SEP]
  seq.real_len = seq.size();

  if (pad_to >= 0) {
    if (seq.real_len > pad_to) {
      throw std::logic_error("rebuild: sequence exceeds pad_to after truncation");
    }
    while (seq.size() < pad_to) push(kPad, seq.pad_field_id());
  }
  return seq;
}

std::vector<ParsedField> parse(const TokenSequence& seq) {
  std::vector<ParsedField> fields;
  for (int i = 0; i < seq.n_fields; ++i) {
    int start;
    if (i == 0) {
      start = 1;
    } else {
      start = seq.sep_positions[static_cast<std::size_t>(i) - 1] + 1;
      if (i == seq.n_solution_fields) ++start;  // skip the block-final extra [SEP]
    }
    const int end = seq.sep_positions[static_cast<std::size_t>(i)];  // exclusive
    if (end <= start) throw std::invalid_argument("TokenSequence: empty field span");

    ParsedField f;
    bool has_eos = false;
    for (int p = start; p < end; ++p) {
      if (seq.token_ids[static_cast<std::size_t>(p)] == kEos) has_eos = true;
    }
    if (end - start == 1 && seq.token_ids[static_cast<std::size_t>(start)] == kFieldMask) {
      f.mask = true;
    } else if (has_eos) {
      f.tags = true;
      std::vector<int> current;
      for (int p = start; p < end; ++p) {
        const int tok = seq.token_ids[static_cast<std::size_t>(p)];
        if (tok == kEos) {
          if (current.empty()) throw std::invalid_argument("TokenSequence: empty tag before [EOS]");
          f.tag_words.push_back(current);
          current.clear();
        } else {
          current.push_back(tok);
        }
      }
      if (!current.empty()) {
        throw std::invalid_argument("TokenSequence: tag field not terminated by [EOS]");
      }
    } else {
      for (int p = start; p < end; ++p) {
        f.words.push_back(seq.token_ids[static_cast<std::size_t>(p)]);
      }
    }
    fields.push_back(std::move(f));
  }
  return fields;
}

ParsedField render_plain(const SolutionRecord* s, const CompanyRecord* c,
                         const std::string& name, const Vocab& vocab) {
  ParsedField f;
  const std::map<std::string, std::string>& desc = s != nullptr ? s->desc : c->desc;
  auto it = desc.find(name);
  if (it == desc.end()) {
    f.mask = true;
    return f;
  }
  f.words = vocab.encode(it->second);
  if (f.words.empty()) f.mask = true;
  return f;
}

ParsedField render_tags(const SolutionRecord* s, const CompanyRecord* c,
                        const std::string& name, const Vocab& vocab) {
  ParsedField f;
  const std::map<std::string, std::vector<std::string>>& attr = s != nullptr ? s->attr : c->attr;
  auto it = attr.find(name);
  if (it == attr.end()) {
    f.mask = true;
    return f;
  }
  for (const auto& tag : it->second) {
    auto words = vocab.encode(tag);
    if (!words.empty()) f.tag_words.push_back(std::move(words));
  }
  if (f.tag_words.empty()) {
    f.mask = true;
  } else {
    f.tags = true;
  }
  return f;
}

}  // namespace

TokenSequence assemble_sequence(const GroupSpec& spec, const SolutionRecord& s,
                                const CompanyRecord& c, const Vocab& vocab) {
  std::vector<ParsedField> fields;
  for (const auto& gf : spec.fields) {
    const bool is_solution = gf.entity == GroupField::Entity::solution;
    if (gf.kind == GroupField::Kind::plain) {
      fields.push_back(render_plain(is_solution ? &s : nullptr, is_solution ? nullptr : &c,
                                    gf.name, vocab));
    } else {
      fields.push_back(render_tags(is_solution ? &s : nullptr, is_solution ? nullptr : &c,
                                   gf.name, vocab));
    }
  }
  return rebuild(fields, spec.group, spec.n_solution_fields, -1);
}

TokenSequence assemble_sequence(const GroupSpec& spec, const SolutionRecord& s,
                                const CompanyRecord& c, const Vocab& vocab, int max_len) {
  return pad_or_truncate(assemble_sequence(spec, s, c, vocab), max_len);
}

TokenSequence assemble_description(const SolutionRecord& s, const CompanyRecord& c,
                                   const FieldSchema& schema, const Vocab& vocab, int max_len) {
  return assemble_sequence(GroupSpec::description(schema), s, c, vocab, max_len);
}

TokenSequence assemble_attribute(const SolutionRecord& s, const CompanyRecord& c,
                                 const FieldSchema& schema, const Vocab& vocab, int max_len) {
  return assemble_sequence(GroupSpec::attribute(schema), s, c, vocab, max_len);
}

TokenSequence pad_or_truncate(const TokenSequence& seq, int max_len) {
  auto fields = parse(seq);
  int total = total_length(fields);
  while (total > max_len) {
    int best = -1;
    int best_len = 0;
    for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
      const auto& f = fields[static_cast<std::size_t>(i)];
      if (!f.removable()) continue;
      if (f.content_len() > best_len) {
        best_len = f.content_len();
        best = i;
      }
    }
    if (best < 0) {
      throw std::invalid_argument("pad_or_truncate: structural frame of " +
                                  std::to_string(total) + " tokens exceeds max_len " +
                                  std::to_string(max_len));
    }
    fields[static_cast<std::size_t>(best)].remove_one();
    total = total_length(fields);
  }
  return rebuild(fields, seq.group, seq.n_solution_fields, max_len);
}

TokenSequence collapse_fields(const TokenSequence& seq, const std::vector<int>& field_indices) {
  auto fields = parse(seq);
  for (int fi : field_indices) {
    if (fi < 0 || fi >= seq.n_fields) {
      throw std::out_of_range("collapse_fields: field index " + std::to_string(fi) +
                              " out of range");
    }
    auto& f = fields[static_cast<std::size_t>(fi)];
    f.mask = true;
    f.tags = false;
    f.words.clear();
    f.tag_words.clear();
  }
  const bool padded = seq.size() > seq.real_len;
  return rebuild(fields, seq.group, seq.n_solution_fields, padded ? seq.size() : -1);
}

std::vector<std::string> sequence_violations(const TokenSequence& seq, const GroupSpec& spec) {
  std::vector<std::string> bad;
  auto complain = [&bad](const std::string& msg) { bad.push_back(msg); };

  const int F = spec.field_count();
  if (seq.n_fields != F) complain("n_fields does not match the group spec");
  if (seq.n_solution_fields != spec.n_solution_fields) complain("n_solution_fields mismatch");
  if (seq.group != spec.group) complain("group tag mismatch");
  if (seq.token_ids.size() != seq.field_ids.size()) {
    complain("token_ids and field_ids lengths differ");
    return bad;
  }
  if (seq.real_len < 5 || seq.real_len > seq.size()) {
    complain("real_len out of range");
    return bad;
  }
  if (static_cast<int>(seq.sep_positions.size()) != F) {
    complain("sep_positions size != field count");
    return bad;
  }

  if (seq.token_ids[0] != kCls) complain("position 0 is not [CLS]");
  if (seq.field_ids[0] != 0) complain("[CLS] does not carry the dedicated field id 0");

  for (int p = 0; p < seq.size(); ++p) {
    const int tok = seq.token_ids[static_cast<std::size_t>(p)];
    const int fid = seq.field_ids[static_cast<std::size_t>(p)];
    if (p < seq.real_len) {
      if (tok == kPad) complain("[PAD] before real_len at position " + std::to_string(p));
    } else {
      if (tok != kPad) complain("non-[PAD] padding at position " + std::to_string(p));
      if (fid != seq.pad_field_id()) complain("padding without the pad field id");
    }
  }

  // Per-field spans.
  std::vector<bool> fid_seen(static_cast<std::size_t>(F) + 1, false);
  fid_seen[0] = true;
  for (int i = 0; i < F && bad.empty(); ++i) {
    const int sep = seq.sep_positions[static_cast<std::size_t>(i)];
    if (sep <= 0 || sep >= seq.real_len) {
      complain("sep position of field " + std::to_string(i) + " out of range");
      break;
    }
    if (seq.token_ids[static_cast<std::size_t>(sep)] != kSep) {
      complain("sep_positions[" + std::to_string(i) + "] does not point at [SEP]");
    }
    int start = i == 0 ? 1 : seq.sep_positions[static_cast<std::size_t>(i) - 1] + 1;
    if (i > 0 && i == seq.n_solution_fields) ++start;
    if (sep <= start) {
      complain("field " + std::to_string(i) + " contributes no content token");
      continue;
    }
    const int fid = i + 1;
    fid_seen[static_cast<std::size_t>(fid)] = true;
    for (int p = start; p <= sep; ++p) {
      if (seq.field_ids[static_cast<std::size_t>(p)] != fid) {
        complain("field id not constant across span of field " + std::to_string(i));
        break;
      }
    }
    bool has_eos = false;
    bool has_mask = false;
    for (int p = start; p < sep; ++p) {
      const int tok = seq.token_ids[static_cast<std::size_t>(p)];
      if (tok == kCls || tok == kSep || tok == kPad) {
        complain("structural token inside content span of field " + std::to_string(i));
      }
      if (tok == kEos) has_eos = true;
      if (tok == kFieldMask) has_mask = true;
    }
    if (has_mask && sep - start != 1) {
      complain("[field_mask] must be the whole span of field " + std::to_string(i));
    }
    const bool mask_span = has_mask && sep - start == 1;
    if (!mask_span) {
      if (spec.fields[static_cast<std::size_t>(i)].kind == GroupField::Kind::tags) {
        if (seq.token_ids[static_cast<std::size_t>(sep) - 1] != kEos) {
          complain("tag field " + std::to_string(i) + " does not end with [EOS]");
        }
        int prev = start - 1;
        for (int p = start; p < sep; ++p) {
          if (seq.token_ids[static_cast<std::size_t>(p)] == kEos) {
            if (p == prev + 1) complain("empty tag in field " + std::to_string(i));
            prev = p;
          }
        }
      } else if (has_eos) {
        complain("[EOS] inside plain field " + std::to_string(i));
      }
    }
  }

  if (bad.empty()) {
    // Block structure.
    const int sol_extra = seq.sep_positions[static_cast<std::size_t>(seq.n_solution_fields) - 1] + 1;
    if (seq.token_ids[static_cast<std::size_t>(sol_extra)] != kSep ||
        seq.field_ids[static_cast<std::size_t>(sol_extra)] != seq.n_solution_fields) {
      complain("solution block is not closed by an extra [SEP] carrying the last field id");
    }
    if (seq.boundary != sol_extra + 1) complain("boundary does not follow the solution block");
    const int end_extra = seq.sep_positions[static_cast<std::size_t>(F) - 1] + 1;
    if (end_extra + 1 != seq.real_len ||
        seq.token_ids[static_cast<std::size_t>(end_extra)] != kSep ||
        seq.field_ids[static_cast<std::size_t>(end_extra)] != F) {
      complain("company block is not closed by a final extra [SEP]");
    }
    int double_seps = 0;
    for (int p = 0; p + 1 < seq.real_len; ++p) {
      if (seq.token_ids[static_cast<std::size_t>(p)] == kSep &&
          seq.token_ids[static_cast<std::size_t>(p) + 1] == kSep) {
        ++double_seps;
      }
    }
    if (double_seps != 2) {
      complain("expected exactly 2 block-final [SEP][SEP] pairs, found " +
               std::to_string(double_seps));
    }
    for (int fid = 0; fid <= F; ++fid) {
      if (!fid_seen[static_cast<std::size_t>(fid)]) {
        complain("field id " + std::to_string(fid) + " never appears");
      }
    }
  }
  return bad;
}

}  // namespace fieldmatch
