#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fieldmatch/gradient_suite.hpp"
#include "fieldmatch/pipeline.hpp"

namespace py = pybind11;
using namespace fieldmatch;

namespace {

RunConfig config_from_dict(const py::dict& options) {
  RunConfig cfg;
  for (const auto& item : options) {
    cfg.set(py::str(item.first).cast<std::string>(), py::str(item.second).cast<std::string>());
  }
  return cfg;
}

py::dict report_to_dict(const MetricsReport& report) {
  py::dict out;
  py::dict summary;
  for (const auto& [name, value] : report.summary) summary[py::str(name)] = value;
  out["summary"] = summary;
  py::list per_solution;
  for (const auto& ps : report.per_solution) {
    py::dict row;
    row["solution_id"] = ps.solution_id;
    row["ap"] = ps.metrics.ap;
    row["auc"] = ps.metrics.auc;
    row["positives"] = ps.metrics.positives;
    row["candidates"] = ps.metrics.candidates;
    per_solution.append(row);
  }
  out["per_solution"] = per_solution;
  out["config_fingerprint"] = report.config_fingerprint;
  out["seed"] = report.seed;
  out["warnings"] = report.warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical multi-field solution-company matching core";

  py::class_<FieldSchema>(m, "FieldSchema")
      .def(py::init<>())
      .def_readwrite("desc_fields_solution", &FieldSchema::desc_fields_solution)
      .def_readwrite("desc_fields_company", &FieldSchema::desc_fields_company)
      .def_readwrite("attr_fields_solution", &FieldSchema::attr_fields_solution)
      .def_readwrite("attr_fields_company", &FieldSchema::attr_fields_company)
      .def_readwrite("categorical_fields", &FieldSchema::categorical_fields)
      .def_readwrite("numeric_fields", &FieldSchema::numeric_fields)
      .def("check", &FieldSchema::check);

  py::class_<SolutionRecord>(m, "SolutionRecord")
      .def(py::init<>())
      .def_readwrite("id", &SolutionRecord::id)
      .def_readwrite("desc", &SolutionRecord::desc)
      .def_readwrite("attr", &SolutionRecord::attr);

  py::class_<CompanyRecord>(m, "CompanyRecord")
      .def(py::init<>())
      .def_readwrite("id", &CompanyRecord::id)
      .def_readwrite("desc", &CompanyRecord::desc)
      .def_readwrite("attr", &CompanyRecord::attr)
      .def_readwrite("categorical", &CompanyRecord::categorical)
      .def_readwrite("numeric", &CompanyRecord::numeric);

  py::class_<MatchExample>(m, "MatchExample")
      .def(py::init<>())
      .def_readwrite("solution_id", &MatchExample::solution_id)
      .def_readwrite("company_id", &MatchExample::company_id)
      .def_readwrite("label", &MatchExample::label);

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("missing", &ValidationReport::missing)
      .def_readonly("errors", &ValidationReport::errors)
      .def("ok", &ValidationReport::ok);

  m.def("validate_solution",
        [](const SolutionRecord& r, const FieldSchema& s) { return validate_record(r, s); });
  m.def("validate_company",
        [](const CompanyRecord& r, const FieldSchema& s) { return validate_record(r, s); });

  py::class_<Vocab>(m, "Vocab")
      .def(py::init<>())
      .def("id", &Vocab::id)
      .def("token", &Vocab::token)
      .def("size", &Vocab::size)
      .def("encode", &Vocab::encode)
      .def("decode", &Vocab::decode)
      .def("save", &Vocab::save)
      .def_static("load", &Vocab::load);
  m.def("build_vocab", &build_vocab, py::arg("texts"), py::arg("min_count") = 1);

  py::class_<TokenSequence>(m, "TokenSequence")
      .def_readonly("token_ids", &TokenSequence::token_ids)
      .def_readonly("field_ids", &TokenSequence::field_ids)
      .def_readonly("n_fields", &TokenSequence::n_fields)
      .def_readonly("boundary", &TokenSequence::boundary)
      .def_readonly("sep_positions", &TokenSequence::sep_positions)
      .def_readonly("real_len", &TokenSequence::real_len);

  m.def("assemble_description", &assemble_description, py::arg("solution"), py::arg("company"),
        py::arg("schema"), py::arg("vocab"), py::arg("max_len"));
  m.def("assemble_attribute", &assemble_attribute, py::arg("solution"), py::arg("company"),
        py::arg("schema"), py::arg("vocab"), py::arg("max_len"));

  m.def(
      "sequence_violations_description",
      [](const TokenSequence& seq, const FieldSchema& schema) {
        return sequence_violations(seq, GroupSpec::description(schema));
      },
      "Grammar violations of a description sequence (empty when valid)");

  m.def(
      "generate_corpus",
      [](const py::dict& options) {
        SynthConfig cfg;
        RunConfig rc = config_from_dict(options);
        cfg.n_solutions = rc.int_of("n_solutions");
        cfg.n_companies = rc.int_of("n_companies");
        cfg.n_industries = rc.int_of("n_industries");
        cfg.vocab_seed_words = rc.int_of("vocab_seed_words");
        cfg.positives_per_solution = rc.int_of("positives_per_solution");
        cfg.text_signal_strength = rc.double_of("text_signal_strength");
        cfg.scale_signal_strength = rc.double_of("scale_signal_strength");
        cfg.missing_field_rate = rc.double_of("missing_field_rate");
        cfg.missing_token_rate = rc.double_of("missing_token_rate");
        cfg.seed = rc.seed();
        auto corpus = generate_corpus(cfg);
        return py::make_tuple(corpus.schema, corpus.solutions, corpus.companies, corpus.positives);
      },
      "Synthetic corpus (schema, solutions, companies, positive pairs) from config keys");

  m.def("build_examples", &build_examples, py::arg("positives"), py::arg("companies"),
        py::arg("negatives_per_positive"), py::arg("seed"));
  m.def("split_dataset", &split_dataset, py::arg("examples"), py::arg("train_ratio"),
        py::arg("validation_ratio"), py::arg("test_ratio"), py::arg("seed"));

  m.def(
      "ranking_metrics",
      [](const std::vector<std::tuple<std::string, double, int>>& pool) {
        std::vector<RankedCandidate> candidates;
        for (const auto& [id, score, label] : pool) candidates.push_back({id, score, label});
        const auto metrics = ranking_metrics(std::move(candidates));
        py::dict out;
        out["ap"] = metrics.ap;
        out["auc"] = metrics.auc;
        for (const auto& [k, v] : metrics.precision_at) {
          out[py::str("p_at_" + std::to_string(k))] = v;
        }
        for (const auto& [k, v] : metrics.recall_at) {
          out[py::str("r_at_" + std::to_string(k))] = v;
        }
        return out;
      },
      "AP/AUC/P@k/R@k of one (id, score, label) candidate pool");

  // Stage commands, mirroring the CLI.
  m.def("gen_data", [](const py::dict& options, const std::string& out_dir) {
    cmd_gen_data(config_from_dict(options), out_dir);
  });
  m.def("build_vocab_files",
        [](const py::dict& options, const std::string& data_dir, const std::string& out_dir) {
          cmd_build_vocab(config_from_dict(options), {data_dir, out_dir});
        });
  m.def("pretrain", [](const py::dict& options, const std::string& data_dir,
                       const std::string& out_dir) {
    cmd_pretrain(config_from_dict(options), {data_dir, out_dir}, AblationFlags{});
  });
  m.def("train", [](const py::dict& options, const std::string& data_dir,
                    const std::string& out_dir) {
    cmd_train(config_from_dict(options), {data_dir, out_dir}, AblationFlags{});
  });
  m.def("evaluate", [](const py::dict& options, const std::string& data_dir,
                       const std::string& out_dir) {
    return report_to_dict(cmd_eval(config_from_dict(options), {data_dir, out_dir},
                                   AblationFlags{}));
  });
  m.def("rank",
        [](const py::dict& options, const std::string& data_dir, const std::string& out_dir,
           const std::string& solution_id, int top, bool labeled_pool) {
          return cmd_rank(config_from_dict(options), {data_dir, out_dir}, solution_id, top,
                          labeled_pool);
        },
        py::arg("options"), py::arg("data_dir"), py::arg("out_dir"), py::arg("solution_id"),
        py::arg("top") = 10, py::arg("labeled_pool") = false);
  m.def("run_experiment",
        [](const py::dict& options, const std::string& data_dir,
           const std::vector<std::string>& flags) {
          const auto data = load_experiment_data(data_dir);
          const auto outcome = run_experiment(data, config_from_dict(options),
                                              AblationFlags::from_names(flags));
          return report_to_dict(outcome.report);
        },
        py::arg("options"), py::arg("data_dir"),
        py::arg("flags") = std::vector<std::string>{});

  m.def("gradient_suite", [] {
    const auto report = run_gradient_suite();
    py::dict out;
    for (const auto& c : report.components) out[py::str(c.name)] = c.max_relative_error;
    out["pass"] = report.pass();
    return out;
  });

  m.def("config_fingerprint",
        [](const py::dict& options) { return config_from_dict(options).fingerprint(); });
  m.def("default_config", [] {
    py::dict out;
    for (const auto& [k, v] : RunConfig::registry()) out[py::str(k)] = v;
    return out;
  });
}
