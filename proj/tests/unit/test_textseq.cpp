#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <unistd.h>

#include "fieldmatch/sequence.hpp"
#include "fieldmatch/vocab.hpp"
#include "support/random_records.hpp"

using namespace fieldmatch;

namespace {

FieldSchema small_schema() {
  FieldSchema s;
  s.desc_fields_solution = {"name", "introduction"};
  s.desc_fields_company = {"name", "introduction", "business_scope"};
  s.attr_fields_solution = {"industry"};
  s.attr_fields_company = {"industry", "category"};
  s.categorical_fields = {{"status", 2}};
  s.numeric_fields = {"apps"};
  return s;
}

}  // namespace

TEST_CASE("reserved token ids are fixed") {
  Vocab v;
  CHECK(v.id("[PAD]") == 0);
  CHECK(v.id("[CLS]") == 1);
  CHECK(v.id("[SEP]") == 2);
  CHECK(v.id("[EOS]") == 3);
  CHECK(v.id("[token_mask]") == 4);
  CHECK(v.id("[field_mask]") == 5);
  CHECK(v.id("[UNK]") == 6);
  CHECK(v.size() == kNumReserved);
}

TEST_CASE("build_vocab on a single word") {
  const Vocab v = build_vocab({"cloud"}, 1);
  CHECK(v.size() == kNumReserved + 1);
  CHECK(v.id("cloud") == 7);
}

TEST_CASE("build_vocab is invariant to document order") {
  const std::vector<std::string> docs1 = {"alpha beta beta", "gamma alpha", "delta"};
  const std::vector<std::string> docs2 = {"delta", "gamma alpha", "alpha beta beta"};
  const Vocab v1 = build_vocab(docs1, 1);
  const Vocab v2 = build_vocab(docs2, 1);
  REQUIRE(v1.size() == v2.size());
  for (int i = 0; i < v1.size(); ++i) CHECK(v1.token(i) == v2.token(i));
  // Count-descending, then lexicographic: alpha(2) beta(2) delta(1) gamma(1).
  CHECK(v1.token(7) == "alpha");
  CHECK(v1.token(8) == "beta");
  CHECK(v1.token(9) == "delta");
  CHECK(v1.token(10) == "gamma");
}

TEST_CASE("min_count drops hapax tokens which then map to [UNK]") {
  // Hand count over five sentences: "cloud" appears 3x, "service" 2x,
  // "quantum" and "ledger" once each.
  const std::vector<std::string> docs = {"cloud service", "cloud", "service cloud", "quantum",
                                         "ledger"};
  const Vocab v = build_vocab(docs, 2);
  CHECK(v.size() == kNumReserved + 2);
  CHECK(v.contains("cloud"));
  CHECK(v.contains("service"));
  CHECK_FALSE(v.contains("quantum"));
  const auto ids = v.encode("quantum cloud");
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == kUnk);
  CHECK(ids[1] == v.id("cloud"));
}

TEST_CASE("vocab file round-trip with line number as id") {
  const Vocab v = build_vocab({"alpha beta", "alpha"}, 1);
  const std::string path = "/tmp/fieldmatch_vocab_" + std::to_string(::getpid());
  v.save(path);
  const Vocab loaded = Vocab::load(path);
  REQUIRE(loaded.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(loaded.token(i) == v.token(i));
  std::remove(path.c_str());
}

TEST_CASE("tokenize-decode identity up to whitespace normalization") {
  const Vocab v = build_vocab({"the cache layer scales"}, 1);
  CHECK(v.decode(v.encode("  The   cache LAYER scales ")) == "the cache layer scales");
}

TEST_CASE("description layout matches the hand-counted frame") {
  // Two solution fields and three company fields, one token each:
  // [CLS] w [SEP] w [SEP] [SEP] w [SEP] w [SEP] w [SEP] [SEP]  -> 13 tokens.
  FieldSchema schema = small_schema();
  const Vocab vocab = build_vocab({"a b c d e"}, 1);
  SolutionRecord s;
  s.id = "S1";
  s.desc["name"] = "a";
  s.desc["introduction"] = "b";
  CompanyRecord c;
  c.id = "C1";
  c.desc["name"] = "c";
  c.desc["introduction"] = "d";
  c.desc["business_scope"] = "e";

  const auto seq = assemble_sequence(GroupSpec::description(schema), s, c, vocab);
  CHECK(seq.size() == 13);
  CHECK(seq.real_len == 13);
  CHECK(seq.token_ids[0] == kCls);
  CHECK(seq.sep_positions == std::vector<int>{2, 4, 7, 9, 11});
  CHECK(seq.boundary == 6);
  CHECK(seq.field_ids == std::vector<int>{0, 1, 1, 2, 2, 2, 3, 3, 4, 4, 5, 5, 5});
  CHECK(sequence_violations(seq, GroupSpec::description(schema)).empty());
}

TEST_CASE("missing and empty fields render as [field_mask]") {
  FieldSchema schema = small_schema();
  const Vocab vocab = build_vocab({"a b c d e"}, 1);
  SolutionRecord s;
  s.id = "S1";
  s.desc["name"] = "a";  // introduction missing entirely
  CompanyRecord c;
  c.id = "C1";
  c.desc["name"] = "c";
  c.desc["introduction"] = "";  // present but empty
  c.desc["business_scope"] = "e";

  const auto seq = assemble_sequence(GroupSpec::description(schema), s, c, vocab);
  // Solution introduction span is exactly "[field_mask] [SEP]".
  const int sep1 = seq.sep_positions[1];
  CHECK(seq.token_ids[static_cast<std::size_t>(sep1) - 1] == kFieldMask);
  CHECK(seq.token_ids[static_cast<std::size_t>(sep1)] == kSep);
  const int sep3 = seq.sep_positions[3];
  CHECK(seq.token_ids[static_cast<std::size_t>(sep3) - 1] == kFieldMask);
  CHECK(sequence_violations(seq, GroupSpec::description(schema)).empty());
}

TEST_CASE("attribute sequences frame every tag with [EOS]") {
  FieldSchema schema = small_schema();
  const Vocab vocab = build_vocab({"skills training data cloud tools"}, 1);
  SolutionRecord s;
  s.id = "S1";
  s.attr["industry"] = {"skills training"};
  CompanyRecord c;
  c.id = "C1";
  c.attr["industry"] = {"data", "cloud", "tools"};
  c.attr["category"] = {};  // present but empty -> [field_mask]

  const auto spec = GroupSpec::attribute(schema);
  const auto seq = assemble_sequence(spec, s, c, vocab);
  CHECK(sequence_violations(seq, spec).empty());

  // Field 0: "skills training [EOS]" then [SEP].
  CHECK(seq.token_ids[1] == vocab.id("skills"));
  CHECK(seq.token_ids[2] == vocab.id("training"));
  CHECK(seq.token_ids[3] == kEos);
  CHECK(seq.sep_positions[0] == 4);

  // Field 1 (company industry, 3 tags) has exactly 3 [EOS] tokens.
  int start = seq.boundary;
  int eos = 0;
  for (int p = start; p < seq.sep_positions[1]; ++p) {
    if (seq.token_ids[static_cast<std::size_t>(p)] == kEos) ++eos;
  }
  CHECK(eos == 3);

  // Field 2 collapsed to [field_mask].
  CHECK(seq.token_ids[static_cast<std::size_t>(seq.sep_positions[2]) - 1] == kFieldMask);
}

TEST_CASE("assembly is deterministic") {
  Rng rng(5);
  auto rc = fieldmatch::testing::random_case(rng);
  const auto spec = GroupSpec::description(rc.schema);
  const auto a = assemble_sequence(spec, rc.solution, rc.company, rc.vocab);
  const auto b = assemble_sequence(spec, rc.solution, rc.company, rc.vocab);
  CHECK(a.token_ids == b.token_ids);
  CHECK(a.field_ids == b.field_ids);
}

TEST_CASE("pad_or_truncate pads with [PAD] and a dedicated field id") {
  FieldSchema schema = small_schema();
  const Vocab vocab = build_vocab({"a b c d e"}, 1);
  SolutionRecord s;
  s.id = "S1";
  s.desc["name"] = "a";
  s.desc["introduction"] = "b";
  CompanyRecord c;
  c.id = "C1";
  c.desc["name"] = "c";
  c.desc["introduction"] = "d";
  c.desc["business_scope"] = "e";

  const auto spec = GroupSpec::description(schema);
  const auto raw = assemble_sequence(spec, s, c, vocab);
  const auto padded = pad_or_truncate(raw, 20);
  CHECK(padded.size() == 20);
  CHECK(padded.real_len == 13);
  for (int p = 13; p < 20; ++p) {
    CHECK(padded.token_ids[static_cast<std::size_t>(p)] == kPad);
    CHECK(padded.field_ids[static_cast<std::size_t>(p)] == padded.pad_field_id());
  }
  CHECK(sequence_violations(padded, spec).empty());

  // Exact-length input is unchanged.
  const auto same = pad_or_truncate(raw, 13);
  CHECK(same.token_ids == raw.token_ids);
  CHECK(same.field_ids == raw.field_ids);
}

TEST_CASE("truncation removes from the longest field first") {
  // One solution desc field of 50 tokens, one company desc field of 10.
  FieldSchema schema;
  schema.desc_fields_solution = {"intro"};
  schema.desc_fields_company = {"scope"};
  schema.attr_fields_solution = {"x"};
  schema.attr_fields_company = {"y"};
  schema.categorical_fields = {{"c", 2}};
  schema.numeric_fields = {"n"};

  std::string long_text, short_text;
  for (int i = 0; i < 50; ++i) long_text += "a ";
  for (int i = 0; i < 10; ++i) short_text += "b ";
  const Vocab vocab = build_vocab({"a b"}, 1);
  SolutionRecord s;
  s.id = "S1";
  s.desc["intro"] = long_text;
  CompanyRecord c;
  c.id = "C1";
  c.desc["scope"] = short_text;

  const auto spec = GroupSpec::description(schema);
  const auto raw = assemble_sequence(spec, s, c, vocab);
  REQUIRE(raw.size() == 1 + 50 + 1 + 1 + 10 + 1 + 1);  // 65

  // Budget forces removal of 20 tokens; all come from the 50-token field.
  const auto cut = pad_or_truncate(raw, 45);
  CHECK(cut.size() == 45);
  CHECK(cut.real_len == 45);
  const int field0_len = cut.sep_positions[0] - 1;
  CHECK(field0_len == 30);
  const int field1_len = cut.sep_positions[1] - cut.boundary;
  CHECK(field1_len == 10);
  CHECK(sequence_violations(cut, spec).empty());
}

TEST_CASE("truncation keeps tag fields EOS-framed") {
  FieldSchema schema;
  schema.desc_fields_solution = {"d"};
  schema.desc_fields_company = {"e"};
  schema.attr_fields_solution = {"tags"};
  schema.attr_fields_company = {"cats"};
  schema.categorical_fields = {{"c", 2}};
  schema.numeric_fields = {"n"};
  const Vocab vocab = build_vocab({"a b c"}, 1);
  SolutionRecord s;
  s.id = "S1";
  s.attr["tags"] = {"a b c", "a b", "c"};
  CompanyRecord c;
  c.id = "C1";
  c.attr["cats"] = {"b"};

  const auto spec = GroupSpec::attribute(schema);
  const auto raw = assemble_sequence(spec, s, c, vocab);
  for (int budget = raw.size() - 1; budget >= 7; --budget) {
    const auto cut = pad_or_truncate(raw, budget);
    CHECK(cut.size() == budget);
    CHECK(sequence_violations(cut, spec).empty());
  }
  // Below the structural frame the call must fail.
  CHECK_THROWS(pad_or_truncate(raw, 6));
}

TEST_CASE("random sequences always satisfy the grammar") {
  Rng rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    auto rc = fieldmatch::testing::random_case(rng);
    for (const auto& spec : {GroupSpec::description(rc.schema), GroupSpec::attribute(rc.schema),
                             GroupSpec::combined(rc.schema)}) {
      const auto raw = assemble_sequence(spec, rc.solution, rc.company, rc.vocab);
      auto violations = sequence_violations(raw, spec);
      if (!violations.empty()) {
        CAPTURE(violations[0]);
        CHECK(violations.empty());
      }
      const auto padded = pad_or_truncate(raw, raw.size() + 9);
      CHECK(sequence_violations(padded, spec).empty());
      if (raw.size() > 3 + 2 * spec.field_count()) {
        const auto cut = pad_or_truncate(raw, std::max(3 + 2 * spec.field_count(), raw.size() - 5));
        CHECK(sequence_violations(cut, spec).empty());
      }
    }
  }
}
