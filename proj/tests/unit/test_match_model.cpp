#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fieldmatch/match_model.hpp"
#include "fieldmatch/rng.hpp"

using namespace fieldmatch;

namespace {

FieldSchema tiny_schema() {
  FieldSchema s;
  s.desc_fields_solution = {"name"};
  s.desc_fields_company = {"name", "scope"};
  s.attr_fields_solution = {"industry"};
  s.attr_fields_company = {"industry", "category"};
  s.categorical_fields = {{"status", 2}};
  s.numeric_fields = {"apps"};
  return s;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d_e = 8;
  cfg.token_layers = 1;
  cfg.heads = 2;
  cfg.ff = 12;
  cfg.max_len = 40;
  cfg.field_layers = 1;
  cfg.scale.d_s = 6;
  cfg.scale.buckets = 3;
  return cfg;
}

Vocab tiny_vocab() {
  return build_vocab({"espresso machines portal retail data one two three four five"}, 1);
}

SolutionRecord solution_fixture() {
  SolutionRecord s;
  s.id = "S1";
  s.desc["name"] = "espresso portal";
  s.attr["industry"] = {"retail", "data"};
  return s;
}

CompanyRecord company_fixture() {
  CompanyRecord c;
  c.id = "C1";
  c.desc["name"] = "machines one";
  c.desc["scope"] = "two three four";
  c.attr["industry"] = {"retail"};
  c.attr["category"] = {"five"};
  c.categorical["status"] = 1;
  c.numeric["apps"] = 0.4;
  return c;
}

}  // namespace

TEST_CASE("forward is deterministic") {
  const Vocab vocab = tiny_vocab();
  MatchModel model(tiny_schema(), tiny_config(), AblationFlags{}, vocab.size(), 3);
  const auto a = model.match(solution_fixture(), company_fixture(), vocab);
  const auto b = model.match(solution_fixture(), company_fixture(), vocab);
  CHECK(a.combined == b.combined);
  CHECK(*a.p_desc == *b.p_desc);
  CHECK(*a.p_attr == *b.p_attr);
  CHECK(*a.p_scale == *b.p_scale);
  CHECK(*a.p_field == *b.p_field);
}

TEST_CASE("field-aware embeddings participate in the forward pass") {
  const Vocab vocab = tiny_vocab();
  MatchModel model(tiny_schema(), tiny_config(), AblationFlags{}, vocab.size(), 3);
  const auto before = model.match(solution_fixture(), company_fixture(), vocab);
  model.store().value("desc.fe").fill(0.0);
  const auto after = model.match(solution_fixture(), company_fixture(), vocab);
  CHECK(*before.p_desc != *after.p_desc);
}

TEST_CASE("swapping the embeddings of two same-length fields changes the encoding") {
  const Vocab vocab = tiny_vocab();
  MatchModel model(tiny_schema(), tiny_config(), AblationFlags{}, vocab.size(), 5);
  // Company name and scope both one token: field identity is the only
  // difference between the two encodings.
  SolutionRecord s = solution_fixture();
  CompanyRecord c = company_fixture();
  c.desc["name"] = "one";
  c.desc["scope"] = "two";

  const auto before = model.match(s, c, vocab);
  // Swap the field-aware embedding rows of company name (field 2) and
  // company scope (field 3) in the description group.
  Tensor& fe = model.store().value("desc.fe");
  for (int col = 0; col < fe.cols(); ++col) std::swap(fe.at(2, col), fe.at(3, col));
  const auto after = model.match(s, c, vocab);
  CHECK(*before.p_desc != *after.p_desc);
}

TEST_CASE("zeroed heads give one half everywhere") {
  const Vocab vocab = tiny_vocab();
  MatchModel model(tiny_schema(), tiny_config(), AblationFlags{}, vocab.size(), 7);
  for (const char* name : {"desc.head.w", "desc.head.b", "attr.head.w", "attr.head.b",
                           "scale.head.w", "scale.head.b", "field.head.w", "field.head.b"}) {
    model.store().value(name).fill(0.0);
  }
  const auto scores = model.match(solution_fixture(), company_fixture(), vocab);
  CHECK(*scores.p_desc == 0.5);
  CHECK(*scores.p_attr == 0.5);
  CHECK(*scores.p_scale == 0.5);
  CHECK(*scores.p_field == 0.5);
  CHECK(scores.combined == 0.5);
}

TEST_CASE("token score is monotone in the pre-activation") {
  Tape tape;
  ParamStore store;
  store.create("x.head.w", Tensor({1, 1}, {1.0}), ParamGroup::token_level);
  store.create("x.head.b", Tensor({1}, {0.0}), ParamGroup::token_level);
  double prev = 0.0;
  for (double pre : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
    const int p = tape.logistic(tape.affine(tape.constant(Tensor({1, 1}, {pre})),
                                            tape.param(store, "x.head.w"),
                                            tape.param(store, "x.head.b")));
    const double value = tape.value(p).item();
    if (pre > -3.0) CHECK(value > prev);
    prev = value;
  }
}

TEST_CASE("zero field-level layers reduce to the pooling slot identity") {
  const Vocab vocab = tiny_vocab();
  ModelConfig cfg = tiny_config();
  cfg.field_layers = 0;
  MatchModel model(tiny_schema(), cfg, AblationFlags{}, vocab.size(), 9);

  // With k=0 the score is logistic(affine(p + slot_emb[0])).
  const auto scores = model.match(solution_fixture(), company_fixture(), vocab);
  const Tensor& p = model.store().value("field.pool_p");
  const Tensor& slot = model.store().value("field.slot_emb");
  const Tensor& w = model.store().value("field.head.w");
  const Tensor& b = model.store().value("field.head.b");
  double pre = b.at(0);
  for (int i = 0; i < cfg.d_e; ++i) pre += (p.at(0, i) + slot.at(0, i)) * w.at(i, 0);
  const double expect = 1.0 / (1.0 + std::exp(-pre));
  CHECK(*scores.p_field == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("permuting company attribute slots changes the field score") {
  const Vocab vocab = tiny_vocab();
  MatchModel model(tiny_schema(), tiny_config(), AblationFlags{}, vocab.size(), 11);
  const auto seqs = model.assemble(solution_fixture(), company_fixture(), vocab);

  Tape tape;
  const auto desc = model.encode_tokens(tape, 0, seqs[0]);
  const auto attr = model.encode_tokens(tape, 1, seqs[1]);
  const int cs = encode_company_scale(tape, model.store(), model.schema(),
                                      model.config().scale, company_fixture());
  const double base = tape.value(model.field_score(tape, cs, {desc.seps, attr.seps})).item();

  // Swap the two company attribute slots (attr fields 1 and 2 of 3).
  const int swapped = tape.embedding_gather(attr.seps, {0, 2, 1});
  const double permuted = tape.value(model.field_score(tape, cs, {desc.seps, swapped})).item();
  CHECK(base != permuted);
}

TEST_CASE("joint loss equals four ln two at one half") {
  Tape tape;
  std::vector<MatchModel::Forward> batch(3);
  for (auto& fwd : batch) {
    for (const char* head : {"scale", "desc", "attr", "field"}) {
      fwd.head_nodes.emplace_back(head, tape.constant(Tensor({1, 1}, {0.5})));
    }
  }
  const int loss = joint_loss(tape, batch, {1.0, 0.0, 1.0});
  CHECK(tape.value(loss).item() == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("joint loss vanishes when every head matches the label") {
  Tape tape;
  std::vector<MatchModel::Forward> batch(2);
  const double targets[2] = {1.0, 0.0};
  for (int i = 0; i < 2; ++i) {
    for (const char* head : {"scale", "desc", "attr", "field"}) {
      const double p = targets[i] == 1.0 ? 1.0 - 1e-9 : 1e-9;
      batch[static_cast<std::size_t>(i)].head_nodes.emplace_back(
          head, tape.constant(Tensor({1, 1}, {p})));
    }
  }
  const int loss = joint_loss(tape, batch, {1.0, 0.0});
  CHECK(tape.value(loss).item() < 1e-5);
}

TEST_CASE("joint loss on two hand-set examples matches direct arithmetic") {
  Tape tape;
  std::vector<MatchModel::Forward> batch(2);
  const double p[2][4] = {{0.9, 0.7, 0.6, 0.8}, {0.2, 0.4, 0.35, 0.1}};
  for (int i = 0; i < 2; ++i) {
    const char* names[4] = {"scale", "desc", "attr", "field"};
    for (int h = 0; h < 4; ++h) {
      batch[static_cast<std::size_t>(i)].head_nodes.emplace_back(
          names[h], tape.constant(Tensor({1, 1}, {p[i][h]})));
    }
  }
  const std::vector<double> y = {1.0, 0.0};
  double expect = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int h = 0; h < 4; ++h) {
      expect += -(y[static_cast<std::size_t>(i)] * std::log(p[i][h]) +
                  (1.0 - y[static_cast<std::size_t>(i)]) * std::log(1.0 - p[i][h]));
    }
  }
  expect /= 2.0;
  const int loss = joint_loss(tape, batch, y);
  CHECK(tape.value(loss).item() == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("labels outside {0,1} are rejected") {
  Tape tape;
  std::vector<MatchModel::Forward> batch(1);
  batch[0].head_nodes.emplace_back("scale", tape.constant(Tensor({1, 1}, {0.5})));
  CHECK_THROWS(joint_loss(tape, batch, {0.5}));
}

TEST_CASE("appending masked padding never changes the scores") {
  const Vocab vocab = tiny_vocab();
  MatchModel model(tiny_schema(), tiny_config(), AblationFlags{}, vocab.size(), 13);
  const SolutionRecord s = solution_fixture();
  const CompanyRecord c = company_fixture();

  std::vector<TokenSequence> exact, padded;
  for (const auto& spec : model.groups()) {
    const auto raw = assemble_sequence(spec, s, c, vocab);
    exact.push_back(pad_or_truncate(raw, raw.size()));
    padded.push_back(pad_or_truncate(raw, raw.size() + 11));
  }
  Tape t1, t2;
  const auto f1 = model.forward(t1, exact, c);
  const auto f2 = model.forward(t2, padded, c);
  CHECK(std::abs(f1.scores.combined - f2.scores.combined) < 1e-6);
  CHECK(std::abs(*f1.scores.p_desc - *f2.scores.p_desc) < 1e-6);
  CHECK(std::abs(*f1.scores.p_attr - *f2.scores.p_attr) < 1e-6);
  CHECK(std::abs(*f1.scores.p_field - *f2.scores.p_field) < 1e-6);
}

TEST_CASE("batch scoring equals one-at-a-time scoring") {
  const Vocab vocab = tiny_vocab();
  MatchModel model(tiny_schema(), tiny_config(), AblationFlags{}, vocab.size(), 17);
  const SolutionRecord s = solution_fixture();
  CompanyRecord c1 = company_fixture();
  CompanyRecord c2 = company_fixture();
  c2.id = "C2";
  c2.desc["scope"] = "five four";
  c2.categorical["status"] = 0;

  Tape batch_tape;
  const auto fa = model.forward(batch_tape, model.assemble(s, c1, vocab), c1);
  const auto fb = model.forward(batch_tape, model.assemble(s, c2, vocab), c2);

  const auto alone_a = model.match(s, c1, vocab);
  const auto alone_b = model.match(s, c2, vocab);
  CHECK(fa.scores.combined == alone_a.combined);
  CHECK(fb.scores.combined == alone_b.combined);
}

TEST_CASE("ablation flags shape the active heads") {
  const Vocab vocab = tiny_vocab();
  AblationFlags no_scale;
  no_scale.no_scale = true;
  MatchModel m1(tiny_schema(), tiny_config(), no_scale, vocab.size(), 19);
  const auto s1 = m1.match(solution_fixture(), company_fixture(), vocab);
  CHECK_FALSE(s1.p_scale.has_value());
  CHECK(s1.p_desc.has_value());
  CHECK(s1.p_field.has_value());
  CHECK_FALSE(m1.store().contains("scale.head.w"));
  CHECK_FALSE(m1.store().contains("field.scale_proj.w"));

  AblationFlags no_field;
  no_field.no_field_level = true;
  MatchModel m2(tiny_schema(), tiny_config(), no_field, vocab.size(), 19);
  const auto s2 = m2.match(solution_fixture(), company_fixture(), vocab);
  CHECK_FALSE(s2.p_field.has_value());
  const double mean = (*s2.p_scale + *s2.p_desc + *s2.p_attr) / 3.0;
  CHECK(s2.combined == doctest::Approx(mean).epsilon(1e-12));

  AblationFlags combined;
  combined.no_text_grouping = true;
  MatchModel m3(tiny_schema(), tiny_config(), combined, vocab.size(), 19);
  const auto s3 = m3.match(solution_fixture(), company_fixture(), vocab);
  CHECK(s3.p_text.has_value());
  CHECK_FALSE(s3.p_desc.has_value());
  CHECK_FALSE(s3.p_attr.has_value());

  CHECK_THROWS(AblationFlags::from_names({"no_desc", "no_attr"}));
  CHECK_THROWS(AblationFlags::from_names({"bogus"}));
}

TEST_CASE("ranking by combined score is invariant under monotone transforms") {
  const Vocab vocab = tiny_vocab();
  MatchModel model(tiny_schema(), tiny_config(), AblationFlags{}, vocab.size(), 23);
  const SolutionRecord s = solution_fixture();
  Rng rng(5);
  std::vector<std::pair<std::string, double>> scored;
  for (int i = 0; i < 8; ++i) {
    CompanyRecord c = company_fixture();
    c.id = "C" + std::to_string(i);
    c.numeric["apps"] = rng.normal(0.0, 1.0);
    c.categorical["status"] = static_cast<int>(rng.uniform_int(0, 1));
    scored.emplace_back(c.id, model.match(s, c, vocab).combined);
  }
  auto by_score = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  auto original = scored;
  std::sort(original.begin(), original.end(), by_score);
  for (auto& [id, sc] : scored) sc = std::exp(3.0 * sc) + 1.0;  // strictly increasing
  std::sort(scored.begin(), scored.end(), by_score);
  for (std::size_t i = 0; i < scored.size(); ++i) CHECK(scored[i].first == original[i].first);
}
