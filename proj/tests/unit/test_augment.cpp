#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "fieldmatch/augment.hpp"
#include "support/random_records.hpp"

using namespace fieldmatch;

namespace {

FieldSchema schema_fixture() {
  FieldSchema s;
  s.desc_fields_solution = {"name"};
  s.desc_fields_company = {"name"};
  s.attr_fields_solution = {"industry", "target"};
  s.attr_fields_company = {"industry", "category"};
  s.categorical_fields = {{"status", 2}};
  s.numeric_fields = {"apps"};
  return s;
}

// Ten content tokens across the four attribute fields.
TokenSequence ten_content_attr_sequence(const FieldSchema& schema, const Vocab& vocab) {
  SolutionRecord s;
  s.id = "S1";
  s.attr["industry"] = {"a b", "c"};
  s.attr["target"] = {"d e"};
  CompanyRecord c;
  c.id = "C1";
  c.attr["industry"] = {"f g h"};
  c.attr["category"] = {"i j"};
  return assemble_sequence(GroupSpec::attribute(schema), s, c, vocab);
}

}  // namespace

TEST_CASE("token mask replaces exactly floor(r_t * W) content tokens") {
  const FieldSchema schema = schema_fixture();
  const Vocab vocab = build_vocab({"a b c d e f g h i j"}, 1);
  const auto seq = ten_content_attr_sequence(schema, vocab);
  REQUIRE(content_token_count(seq) == 10);

  Rng rng(3);
  const auto masked = token_mask(seq, 0.2, rng);
  int masked_count = 0;
  for (int p = 0; p < masked.size(); ++p) {
    if (masked.token_ids[static_cast<std::size_t>(p)] == kTokenMask) ++masked_count;
  }
  CHECK(masked_count == 2);
  CHECK(masked.field_ids == seq.field_ids);
  CHECK(masked.sep_positions == seq.sep_positions);
  CHECK(sequence_violations(masked, GroupSpec::attribute(schema)).empty());

  // [EOS] framing survives: the masked positions were words, never [EOS].
  for (int p = 0; p < masked.size(); ++p) {
    if (seq.token_ids[static_cast<std::size_t>(p)] == kEos) {
      CHECK(masked.token_ids[static_cast<std::size_t>(p)] == kEos);
    }
  }
}

TEST_CASE("token mask boundary ratios") {
  const FieldSchema schema = schema_fixture();
  const Vocab vocab = build_vocab({"a b c d e f g h i j"}, 1);
  const auto seq = ten_content_attr_sequence(schema, vocab);

  Rng rng(5);
  const auto zero = token_mask(seq, 0.0, rng);
  CHECK(zero.token_ids == seq.token_ids);

  const auto all = token_mask(seq, 1.0, rng);
  for (int p = 0; p < all.size(); ++p) {
    if (seq.is_content(p)) {
      CHECK(all.token_ids[static_cast<std::size_t>(p)] == kTokenMask);
    } else {
      CHECK(all.token_ids[static_cast<std::size_t>(p)] ==
            seq.token_ids[static_cast<std::size_t>(p)]);
    }
  }
  CHECK(sequence_violations(all, GroupSpec::attribute(schema)).empty());
}

TEST_CASE("field mask collapses exactly floor(r_f * F) fields") {
  const FieldSchema schema = schema_fixture();
  const Vocab vocab = build_vocab({"a b c d e f g h i j"}, 1);
  const auto seq = ten_content_attr_sequence(schema, vocab);
  REQUIRE(seq.n_fields == 4);

  Rng rng(7);
  const auto masked = field_mask(seq, 0.5, rng);
  int collapsed = 0;
  for (int i = 0; i < masked.n_fields; ++i) {
    const int sep = masked.sep_positions[static_cast<std::size_t>(i)];
    if (masked.token_ids[static_cast<std::size_t>(sep) - 1] == kFieldMask) ++collapsed;
  }
  CHECK(collapsed == 2);
  CHECK(sequence_violations(masked, GroupSpec::attribute(schema)).empty());

  const auto zero = field_mask(seq, 0.0, rng);
  CHECK(zero.token_ids == seq.token_ids);
}

TEST_CASE("masked sequences keep every grammar invariant (random draws)") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto rc = fieldmatch::testing::random_case(rng);
    const auto spec = GroupSpec::attribute(rc.schema);
    const auto base =
        pad_or_truncate(assemble_sequence(spec, rc.solution, rc.company, rc.vocab), 48);
    const auto t = token_mask(base, 0.3, rng);
    CHECK(sequence_violations(t, spec).empty());
    const auto f = field_mask(base, 0.5, rng);
    CHECK(sequence_violations(f, spec).empty());
    const auto both = field_mask(token_mask(base, 0.2, rng), 0.5, rng);
    CHECK(sequence_violations(both, spec).empty());
  }
}

TEST_CASE("masking commutes with padding") {
  const FieldSchema schema = schema_fixture();
  const Vocab vocab = build_vocab({"a b c d e f g h i j"}, 1);
  const auto raw = ten_content_attr_sequence(schema, vocab);

  Rng r1(13), r2(13);
  const auto mask_then_pad = pad_or_truncate(token_mask(raw, 0.4, r1), 40);
  const auto pad_then_mask = token_mask(pad_or_truncate(raw, 40), 0.4, r2);
  CHECK(mask_then_pad.token_ids == pad_then_mask.token_ids);
  CHECK(mask_then_pad.field_ids == pad_then_mask.field_ids);

  Rng r3(17), r4(17);
  const auto fm_then_pad = pad_or_truncate(field_mask(raw, 0.5, r3), 40);
  const auto pad_then_fm = field_mask(pad_or_truncate(raw, 40), 0.5, r4);
  CHECK(fm_then_pad.token_ids == pad_then_fm.token_ids);
  CHECK(fm_then_pad.field_ids == pad_then_fm.field_ids);
}

TEST_CASE("name similarity on hand-computed trigram sets") {
  // "abcd" -> {abc, bcd}; "abcde" -> {abc, bcd, cde}: cosine 2/sqrt(6).
  CHECK(name_similarity("abcd", "abcde") ==
        doctest::Approx(2.0 / std::sqrt(6.0)).epsilon(1e-12));
  CHECK(name_similarity("abcd", "abcd") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(name_similarity("abcd", "wxyz") == 0.0);
  CHECK(name_similarity("", "abcd") == 0.0);
  CHECK(name_similarity("ab", "ab") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(name_similarity("Machine Tools", "machine tools") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("similarity index ranks same-prefix names first") {
  std::vector<CompanyRecord> companies(6);
  const char* names[6] = {"dataworks one",  "dataworks two", "dataworks three",
                          "quarry mining",  "quarry mine",   "fishing boats"};
  for (int i = 0; i < 6; ++i) {
    companies[static_cast<std::size_t>(i)].id = "C" + std::to_string(i);
    companies[static_cast<std::size_t>(i)].desc["name"] = names[i];
  }
  const auto index = build_similarity_index(companies);
  REQUIRE(index.neighbors.size() == 6);
  for (const auto& [id, list] : index.neighbors) {
    CHECK(list.size() == 5);
    for (const auto& [nid, score] : list) CHECK(nid != id);
    for (std::size_t i = 1; i < list.size(); ++i) CHECK(list[i - 1].second >= list[i].second);
  }
  // The two closest neighbors of "dataworks one" are the other dataworks.
  const auto& top = index.neighbors.at("C0");
  const std::set<std::string> best = {top[0].first, top[1].first};
  CHECK(best == std::set<std::string>{"C1", "C2"});
  // "quarry mine" vs "quarry mining" beats anything cross-family.
  const auto& quarry = index.neighbors.at("C4");
  CHECK(quarry[0].first == "C3");
}

TEST_CASE("company_replace draws uniformly over the neighbor list") {
  SimilarityIndex index;
  index.neighbors["C0"] = {{"N0", 0.9}, {"N1", 0.8}, {"N2", 0.7}, {"N3", 0.6}, {"N4", 0.5}};
  index.neighbors["C1"] = {{"N9", 1.0}};

  Rng rng(19);
  // A single neighbor is chosen with probability one.
  for (int i = 0; i < 20; ++i) CHECK(company_replace("C1", index, rng) == "N9");

  std::map<std::string, int> counts;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) counts[company_replace("C0", index, rng)] += 1;
  // Binomial(10000, 0.2): sigma = sqrt(10000 * .2 * .8) = 40; 3 sigma = 120.
  for (const auto& [id, count] : counts) {
    CHECK(count >= 2000 - 120);
    CHECK(count <= 2000 + 120);
  }
  CHECK(counts.find("C0") == counts.end());

  CHECK_THROWS(company_replace("unknown", index, rng));
}

TEST_CASE("augment_pair availability and reproducibility") {
  const FieldSchema schema = schema_fixture();
  const Vocab vocab = build_vocab({"a b c d e f g h i j dataworks one two"}, 1);

  std::vector<CompanyRecord> companies(3);
  for (int i = 0; i < 3; ++i) {
    companies[static_cast<std::size_t>(i)].id = "C" + std::to_string(i);
    companies[static_cast<std::size_t>(i)].desc["name"] = "dataworks " + std::to_string(i);
    companies[static_cast<std::size_t>(i)].attr["industry"] = {"a"};
    companies[static_cast<std::size_t>(i)].attr["category"] = {"b"};
  }
  const auto index = build_similarity_index(companies);
  std::map<std::string, const CompanyRecord*> by_id;
  for (const auto& c : companies) by_id[c.id] = &c;

  const auto spec = GroupSpec::attribute(schema);
  SolutionRecord s;
  s.id = "S1";
  s.attr["industry"] = {"c d"};
  s.attr["target"] = {"e"};
  const auto base = assemble_sequence(spec, s, companies[0], vocab, 40);

  const Augmenter aug(spec, vocab, 40, 0.3, 0.5, &index, &by_id);

  // Negative pairs never see company replacement.
  CHECK(aug.available(false).size() == 2);
  CHECK(aug.available(true).size() == 3);
  for (int i = 0; i < 50; ++i) {
    Rng rng(static_cast<std::uint64_t>(i));
    const auto [v1, v2] = aug.views(s, companies[0], false, base, rng);
    CHECK(v1.strategy != AugmentStrategy::company_replace);
    CHECK(v2.strategy != AugmentStrategy::company_replace);
    CHECK(v1.strategy != v2.strategy);
    CHECK(sequence_violations(v1.sequence, spec).empty());
    CHECK(sequence_violations(v2.sequence, spec).empty());
  }

  // Positive pairs eventually use company replacement, which re-assembles.
  bool saw_replace = false;
  for (int i = 0; i < 60 && !saw_replace; ++i) {
    Rng rng(1000 + static_cast<std::uint64_t>(i));
    const auto [v1, v2] = aug.views(s, companies[0], true, base, rng);
    saw_replace = v1.strategy == AugmentStrategy::company_replace ||
                  v2.strategy == AugmentStrategy::company_replace;
  }
  CHECK(saw_replace);

  // Fixed rng state -> identical strategy assignment and views.
  Rng ra(77), rb(77);
  const auto [a1, a2] = aug.views(s, companies[0], true, base, ra);
  const auto [b1, b2] = aug.views(s, companies[0], true, base, rb);
  CHECK(a1.strategy == b1.strategy);
  CHECK(a2.strategy == b2.strategy);
  CHECK(a1.sequence.token_ids == b1.sequence.token_ids);
  CHECK(a2.sequence.token_ids == b2.sequence.token_ids);
}

TEST_CASE("augmented views differ from the original when ratios allow") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    auto rc = fieldmatch::testing::random_case(rng);
    const auto spec = GroupSpec::description(rc.schema);
    const auto base = assemble_sequence(spec, rc.solution, rc.company, rc.vocab);
    const int W = content_token_count(base);
    if (W < 4) continue;
    const auto masked = token_mask(base, 0.5, rng);  // floor(0.5 W) >= 2 masked
    CHECK(masked.token_ids != base.token_ids);
  }
}
