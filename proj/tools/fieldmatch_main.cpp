#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fieldmatch/gradient_suite.hpp"
#include "fieldmatch/pipeline.hpp"

namespace fm = fieldmatch;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed_override;
  std::string data_dir = "out";
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_data_dir = true) {
  cmd->add_option("--config", args.config_path, "key=value run configuration file");
  cmd->add_option("--set", args.sets, "override a config key (key=value, repeatable)");
  cmd->add_option("--seed", args.seed_override, "override the global seed");
  if (with_data_dir) {
    cmd->add_option("--data-dir", args.data_dir, "directory holding generated data");
  }
  cmd->add_option("--out-dir", args.out_dir, "directory for artifacts");
}

fm::RunConfig resolve_config(const CommonArgs& args) {
  std::vector<std::string> overrides = args.sets;
  if (!args.seed_override.empty()) overrides.push_back("seed=" + args.seed_override);
  if (args.config_path.empty()) return fm::RunConfig::from_overrides(overrides);
  return fm::RunConfig::from_file(args.config_path, overrides);
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::string> parse_names(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fieldmatch: hierarchical multi-field solution-company matching"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string solution_id;
  int top = 10;
  bool labeled_pool = false;
  std::string flags_csv;
  std::string sweep_param;
  std::string grid_csv;
  std::string default_config_path;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus and splits");
  add_common(gen, args, /*with_data_dir=*/false);

  auto* vocab_cmd = app.add_subcommand("build-vocab", "build the vocabulary from the corpus");
  add_common(vocab_cmd, args);

  auto* pre = app.add_subcommand("pretrain", "contrastive pretraining of the token encoders");
  add_common(pre, args);

  auto* tr = app.add_subcommand("train", "supervised training with the joint loss");
  add_common(tr, args);

  auto* ev = app.add_subcommand("eval", "evaluate the trained model on the test split");
  add_common(ev, args);

  auto* rank = app.add_subcommand("rank", "rank companies for one solution");
  add_common(rank, args);
  rank->add_option("--solution-id", solution_id, "solution to rank for")->required();
  rank->add_option("--top", top, "number of companies to print");
  rank->add_flag("--labeled-pool", labeled_pool,
                 "rank only the solution's labeled test pool instead of the whole corpus");

  auto* ab = app.add_subcommand("ablate", "train/evaluate ablated variants side by side");
  add_common(ab, args);
  ab->add_option("--flags", flags_csv, "comma-separated ablation flags, one variant each")
      ->required();

  auto* sw = app.add_subcommand("sweep", "hyperparameter sweep, one train/eval per grid point");
  add_common(sw, args);
  sw->add_option("--param", sweep_param, "one of d_s, tau_d, tau_a, r_t, r_f")->required();
  sw->add_option("--grid", grid_csv, "comma-separated values")->required();

  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient verification");

  auto* wc = app.add_subcommand("write-config", "write the default configuration file");
  wc->add_option("path", default_config_path, "destination path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      cmd_gen_data(resolve_config(args), args.out_dir);
      std::cout << "wrote corpus, schema, and splits to " << args.out_dir << "\n";
    } else if (vocab_cmd->parsed()) {
      cmd_build_vocab(resolve_config(args), {args.data_dir, args.out_dir});
      std::cout << "wrote " << fm::vocab_path(args.out_dir) << "\n";
    } else if (pre->parsed()) {
      cmd_pretrain(resolve_config(args), {args.data_dir, args.out_dir}, fm::AblationFlags{});
      std::cout << "pretrained encoders written to " << args.out_dir << "\n";
    } else if (tr->parsed()) {
      cmd_train(resolve_config(args), {args.data_dir, args.out_dir}, fm::AblationFlags{});
      std::cout << "trained checkpoint written to " << args.out_dir << "\n";
    } else if (ev->parsed()) {
      const auto config = resolve_config(args);
      const auto report = cmd_eval(config, {args.data_dir, args.out_dir}, fm::AblationFlags{});
      for (const auto& [name, value] : report.summary) {
        std::printf("%s\t%.6f\n", name.c_str(), value);
      }
    } else if (rank->parsed()) {
      const auto ranking =
          cmd_rank(resolve_config(args), {args.data_dir, args.out_dir}, solution_id, top,
                   labeled_pool);
      for (const auto& [company_id, score] : ranking) {
        std::printf("%s\t%.6f\n", company_id.c_str(), score);
      }
    } else if (ab->parsed()) {
      const auto rows =
          cmd_ablate(resolve_config(args), {args.data_dir, args.out_dir}, parse_names(flags_csv));
      std::printf("%-24s%10s%10s%10s%10s\n", "variant", "MAP", "AUC", "P@10", "R@10");
      for (const auto& [name, report] : rows) {
        std::printf("%-24s%10.4f%10.4f%10.4f%10.4f\n", name.c_str(), report.summary.at("MAP"),
                    report.summary.at("AUC"), report.summary.at("P@10"),
                    report.summary.at("R@10"));
      }
    } else if (sw->parsed()) {
      const auto curve = cmd_sweep(resolve_config(args), {args.data_dir, args.out_dir},
                                   sweep_param, parse_grid(grid_csv));
      for (const auto& [value, map] : curve) {
        std::printf("%g\t%.6f\n", value, map);
      }
    } else if (gc->parsed()) {
      const auto report = fm::run_gradient_suite();
      for (const auto& c : report.components) {
        std::printf("%-28s max_rel_err %.3e\n", c.name.c_str(), c.max_relative_error);
      }
      if (!report.pass()) {
        std::fprintf(stderr, "grad-check: FAIL (worst %.3e >= 1e-4)\n", report.worst());
        return 1;
      }
      std::printf("grad-check: PASS (worst %.3e)\n", report.worst());
    } else if (wc->parsed()) {
      fm::RunConfig::write_default_config(default_config_path);
      std::cout << "wrote " << default_config_path << "\n";
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
