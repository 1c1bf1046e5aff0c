#include "fieldmatch/gradient_suite.hpp"

#include <cmath>

#include "fieldmatch/grad_check.hpp"
#include "fieldmatch/match_model.hpp"
#include "fieldmatch/pretrain.hpp"
#include "fieldmatch/rng.hpp"
#include "fieldmatch/scale_encoder.hpp"
#include "fieldmatch/tape.hpp"

namespace fieldmatch {

double GradientSuiteReport::worst() const {
  double w = 0.0;
  for (const auto& c : components) w = std::max(w, c.max_relative_error);
  return w;
}

bool GradientSuiteReport::pass(double threshold) const {
  for (const auto& c : components) {
    if (!(c.max_relative_error < threshold)) return false;
  }
  return !components.empty();
}

namespace {

Tensor random_tensor(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t.at(i) = rng.normal(0.0, stddev);
  return t;
}

// Reduces an arbitrary output to a scalar through fixed random weights so
// every element influences the loss.
int weighted_sum(Tape& tape, int node, Rng& rng) {
  Tensor w(tape.value(node).shape());
  for (int i = 0; i < w.size(); ++i) w.at(i) = rng.normal(0.0, 1.0);
  return tape.sum_all(tape.mul(node, tape.constant(std::move(w))));
}

using BuildFn = std::function<int(Tape&, ParamStore&)>;

void check_component(GradientSuiteReport& report, const std::string& name,
                     const std::function<void(ParamStore&, Rng&)>& init, const BuildFn& build,
                     std::uint64_t seed = 7) {
  ParamStore params;
  Rng rng(seed);
  init(params, rng);
  const ScalarClosure closure = [&build](ParamStore& store, bool compute_grad) {
    Tape tape;
    const int loss = build(tape, store);
    if (compute_grad) tape.backward(loss);
    return tape.value(loss).item();
  };
  const auto result = grad_check(closure, params, 1e-5);
  report.components.push_back({name, result.max_relative_error});
}

void add_primitive_checks(GradientSuiteReport& report) {
  check_component(
      report, "add+mul+scale",
      [](ParamStore& p, Rng& rng) {
        p.create("a", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
        p.create("b", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(3);
        const int a = t.param(p, "a");
        const int b = t.param(p, "b");
        return weighted_sum(t, t.scale(t.mul(t.add(a, b), b), 0.7), mix);
      });
  check_component(
      report, "matmul+affine",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
        p.create("w", random_tensor({4, 5}, 0.7, rng), ParamGroup::token_level);
        p.create("b", random_tensor({5}, 0.5, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(4);
        return weighted_sum(t, t.affine(t.param(p, "x"), t.param(p, "w"), t.param(p, "b")), mix);
      });
  check_component(
      report, "matmul_nt",
      [](ParamStore& p, Rng& rng) {
        p.create("a", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
        p.create("b", random_tensor({5, 4}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(5);
        return weighted_sum(t, t.matmul_nt(t.param(p, "a"), t.param(p, "b")), mix);
      });
  check_component(
      report, "embedding_gather",
      [](ParamStore& p, Rng& rng) {
        p.create("table", random_tensor({6, 4}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(6);
        return weighted_sum(t, t.embedding_gather(t.param(p, "table"), {0, 2, 2, 5, -1}), mix);
      });
  check_component(
      report, "concat_rows+concat_cols+pick",
      [](ParamStore& p, Rng& rng) {
        p.create("a", random_tensor({2, 3}, 1.0, rng), ParamGroup::token_level);
        p.create("b", random_tensor({2, 3}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(8);
        const int rows = t.concat_rows({t.param(p, "a"), t.param(p, "b")});  // [4,3]
        const int cols = t.concat_cols({t.param(p, "a"), t.param(p, "b")});  // [2,6]
        const int picked = t.pick(cols, {1, 4});
        return t.add(weighted_sum(t, rows, mix), weighted_sum(t, picked, mix));
      });
  check_component(
      report, "softmax",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({3, 4}, 1.2, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(9);
        return weighted_sum(t, t.softmax(t.param(p, "x")), mix);
      });
  check_component(
      report, "masked_softmax",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({4, 4}, 1.2, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(10);
        return weighted_sum(t, t.masked_softmax(t.param(p, "x"), {1, 1, 1, 0}), mix);
      });
  check_component(
      report, "masked_softmax_full",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({3, 3}, 1.2, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(11);
        const std::vector<std::uint8_t> mask = {0, 1, 1, 1, 0, 1, 1, 1, 0};
        return weighted_sum(t, t.masked_softmax_full(t.param(p, "x"), mask), mix);
      });
  check_component(
      report, "leaky_relu",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(12);
        return weighted_sum(t, t.leaky_relu(t.param(p, "x"), 0.01), mix);
      });
  check_component(
      report, "layer_norm",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
        p.create("gamma", random_tensor({4}, 0.3, rng), ParamGroup::token_level);
        p.create("beta", random_tensor({4}, 0.3, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(13);
        return weighted_sum(
            t, t.layer_norm(t.param(p, "x"), t.param(p, "gamma"), t.param(p, "beta")), mix);
      });
  check_component(
      report, "logistic+log",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(14);
        return weighted_sum(t, t.log(t.logistic(t.param(p, "x"))), mix);
      });
  check_component(
      report, "row_l2_normalize",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(15);
        return weighted_sum(t, t.row_l2_normalize(t.param(p, "x")), mix);
      });
  check_component(
      report, "cosine_similarity",
      [](ParamStore& p, Rng& rng) {
        p.create("u", random_tensor({5}, 1.0, rng), ParamGroup::token_level);
        p.create("v", random_tensor({5}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        return t.cosine_similarity(t.param(p, "u"), t.param(p, "v"));
      });
  check_component(
      report, "binary_cross_entropy",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({4}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        return t.binary_cross_entropy(t.logistic(t.param(p, "x")), {1.0, 0.0, 1.0, 0.0});
      });
  check_component(
      report, "mean_all+sum_all",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({3, 4}, 1.0, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        const int x = t.param(p, "x");
        return t.add(t.mean_all(x), t.scale(t.sum_all(x), 0.25));
      });
  check_component(
      report, "multi_head_attention",
      [](ParamStore& p, Rng& rng) {
        p.create("x", random_tensor({5, 6}, 0.8, rng), ParamGroup::token_level);
        for (int h = 0; h < 2; ++h) {
          const std::string hp = "h" + std::to_string(h);
          p.create(hp + ".wq", random_tensor({6, 3}, 0.5, rng), ParamGroup::token_level);
          p.create(hp + ".wk", random_tensor({6, 3}, 0.5, rng), ParamGroup::token_level);
          p.create(hp + ".wv", random_tensor({6, 3}, 0.5, rng), ParamGroup::token_level);
        }
        p.create("wo", random_tensor({6, 6}, 0.5, rng), ParamGroup::token_level);
        p.create("bo", random_tensor({6}, 0.2, rng), ParamGroup::token_level);
      },
      [](Tape& t, ParamStore& p) {
        Rng mix(16);
        std::vector<std::array<int, 3>> heads;
        for (int h = 0; h < 2; ++h) {
          const std::string hp = "h" + std::to_string(h);
          heads.push_back({t.param(p, hp + ".wq"), t.param(p, hp + ".wk"),
                           t.param(p, hp + ".wv")});
        }
        const int out = multi_head_attention(t, t.param(p, "x"), heads, t.param(p, "wo"),
                                             t.param(p, "bo"), {1, 1, 1, 1, 0});
        return weighted_sum(t, out, mix);
      });
}

// FD checks divide by the gradient magnitude, so degenerate near-zero
// gradients drown in float roundoff. Drawing parameters at a healthy scale
// keeps every gradient well above the noise floor.
void rerandomize(ParamStore& store, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    const bool is_gamma = name.find("gamma") != std::string::npos;
    for (int i = 0; i < e.value.size(); ++i) {
      e.value.at(i) = is_gamma ? 1.0 + 0.2 * rng.normal() : scale * rng.normal();
    }
  }
}

FieldSchema tiny_schema() {
  FieldSchema s;
  s.desc_fields_solution = {"name"};
  s.desc_fields_company = {"name", "scope"};
  s.attr_fields_solution = {"industry"};
  s.attr_fields_company = {"industry", "category"};
  s.categorical_fields = {{"status", 2}, {"size_class", 3}};
  s.numeric_fields = {"apps", "capital"};
  return s;
}

SolutionRecord tiny_solution() {
  SolutionRecord s;
  s.id = "S1";
  s.desc["name"] = "vector search suite";
  s.attr["industry"] = {"retail", "data platforms"};
  return s;
}

CompanyRecord tiny_company(int variant) {
  CompanyRecord c;
  c.id = variant == 0 ? "C1" : "C2";
  c.desc["name"] = variant == 0 ? "retail metrics lab" : "harbor freight works";
  c.desc["scope"] = variant == 0 ? "search tools for retail data" : "logistics and freight";
  c.attr["industry"] = {variant == 0 ? "retail" : "logistics"};
  c.attr["category"] = {"platform"};
  c.categorical["status"] = variant;
  c.categorical["size_class"] = variant == 0 ? 2 : 1;
  c.numeric["apps"] = variant == 0 ? 0.8 : -0.4;
  c.numeric["capital"] = variant == 0 ? -0.2 : 1.1;
  return c;
}

Vocab tiny_vocab() {
  std::vector<std::string> texts = {
      "vector search suite retail metrics lab harbor freight works data platforms",
      "search tools for retail data logistics and freight platform"};
  return build_vocab(texts, 1);
}

void add_model_checks(GradientSuiteReport& report) {
  const FieldSchema schema = tiny_schema();
  const Vocab vocab = tiny_vocab();

  // Scale-encoder path alone.
  {
    ParamStore params;
    Rng rng(19);
    ScaleEncoderConfig cfg;
    cfg.d_s = 6;
    cfg.buckets = 3;
    init_scale_encoder(params, schema, cfg, rng);
    rerandomize(params, 0.5, 191);
    const CompanyRecord company = tiny_company(0);
    const ScalarClosure closure = [&](ParamStore& store, bool compute_grad) {
      Tape tape;
      const int c_s = encode_company_scale(tape, store, schema, cfg, company);
      const int p = scale_score(tape, store, c_s);
      const int loss = tape.binary_cross_entropy(p, {1.0});
      if (compute_grad) tape.backward(loss);
      return tape.value(loss).item();
    };
    const auto result = grad_check(closure, params, 1e-5);
    report.components.push_back({"scale_encoder_loss", result.max_relative_error});
  }

  // Full hierarchical model through the joint loss, tiny configuration.
  {
    ModelConfig cfg;
    cfg.d_e = 8;
    cfg.token_layers = 1;
    cfg.heads = 2;
    cfg.ff = 12;
    cfg.max_len = 48;
    cfg.field_layers = 1;
    cfg.scale.d_s = 6;
    cfg.scale.buckets = 3;
    MatchModel model(schema, cfg, AblationFlags{}, vocab.size(), 23);
    rerandomize(model.store(), 0.5, 59 * 7 + 1);
    const SolutionRecord solution = tiny_solution();
    const CompanyRecord company_a = tiny_company(0);
    const CompanyRecord company_b = tiny_company(1);
    const auto seq_a = model.assemble(solution, company_a, vocab);
    const auto seq_b = model.assemble(solution, company_b, vocab);
    const ScalarClosure closure = [&](ParamStore& store, bool compute_grad) {
      (void)store;  // closures mutate the model's own store in place
      Tape tape;
      std::vector<MatchModel::Forward> batch;
      batch.push_back(model.forward(tape, seq_a, company_a));
      batch.push_back(model.forward(tape, seq_b, company_b));
      const int loss = joint_loss(tape, batch, {1.0, 0.0});
      if (compute_grad) tape.backward(loss);
      return tape.value(loss).item();
    };
    const auto result = grad_check(closure, model.store(), 1e-5);
    report.components.push_back({"match_model_joint_loss", result.max_relative_error});
  }

  // InfoNCE over free representations.
  {
    ParamStore params;
    Rng rng(29);
    params.create("reps", random_tensor({4, 6}, 1.0, rng), ParamGroup::token_level);
    const ScalarClosure closure = [&](ParamStore& store, bool compute_grad) {
      Tape tape;
      const int loss = info_nce_loss(tape, tape.param(store, "reps"), {0, 0, 1, 1}, 0.2);
      if (compute_grad) tape.backward(loss);
      return tape.value(loss).item();
    };
    const auto result = grad_check(closure, params, 1e-5);
    report.components.push_back({"info_nce_loss", result.max_relative_error});
  }

  // InfoNCE through a tiny encoder, as used in pretraining.
  {
    ModelConfig cfg;
    cfg.d_e = 8;
    cfg.token_layers = 1;
    cfg.heads = 2;
    cfg.ff = 12;
    cfg.max_len = 48;
    cfg.field_layers = 0;
    cfg.scale.d_s = 6;
    cfg.scale.buckets = 3;
    AblationFlags flags;
    flags.no_scale = true;
    flags.no_field_level = true;
    flags.no_attr = true;
    MatchModel model(schema, cfg, flags, vocab.size(), 31);
    rerandomize(model.store(), 0.5, 67);
    const SolutionRecord solution = tiny_solution();
    const auto seq_a = model.assemble(solution, tiny_company(0), vocab);
    const auto seq_b = model.assemble(solution, tiny_company(1), vocab);
    Rng mask_rng(33);
    std::vector<TokenSequence> views = {token_mask(seq_a[0], 0.2, mask_rng),
                                        token_mask(seq_a[0], 0.2, mask_rng),
                                        token_mask(seq_b[0], 0.2, mask_rng),
                                        token_mask(seq_b[0], 0.2, mask_rng)};
    const ScalarClosure closure = [&](ParamStore& store, bool compute_grad) {
      (void)store;
      Tape tape;
      std::vector<int> cls;
      for (const auto& v : views) cls.push_back(model.encode_cls(tape, 0, v));
      const int loss = info_nce_loss(tape, tape.concat_rows(cls), {0, 0, 1, 1}, 0.2);
      if (compute_grad) tape.backward(loss);
      return tape.value(loss).item();
    };
    const auto result = grad_check(closure, model.store(), 1e-5);
    report.components.push_back({"info_nce_through_encoder", result.max_relative_error});
  }
}

}  // namespace

GradientSuiteReport run_gradient_suite() {
  GradientSuiteReport report;
  add_primitive_checks(report);
  add_model_checks(report);
  return report;
}

}  // namespace fieldmatch
