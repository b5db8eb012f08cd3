// tripdist: synthetic data -> teacher -> calibration -> distillation -> evaluation -> comparison.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tripdist/tripdist.hpp"

namespace {

struct StageArgs {
  std::string config;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void add_stage_flags(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("--config", args.config, "key = value config file (missing keys take defaults)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "output root directory")->capture_default_str();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--set", args.overrides, "override a config key, KEY=VALUE (repeatable)");
  cmd->add_flag("--quiet", args.quiet, "print nothing on success");
}

tripdist::ExperimentConfig resolve_config(const StageArgs& args) {
  auto cfg = args.config.empty() ? tripdist::ExperimentConfig{}
                                 : tripdist::ExperimentConfig::load(args.config);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw tripdist::ContractViolation("--set expects KEY=VALUE, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed) cfg.set("seed", std::to_string(*args.seed));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triplet distillation with teacher-driven dynamic margins"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "list every subcommand's flags");

  std::string command_line;
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

  StageArgs stage_args;
  using Fn = tripdist::pipeline::StageOutput (*)(const tripdist::ExperimentConfig&,
                                                 const tripdist::pipeline::Options&);
  const std::vector<std::tuple<std::string, std::string, Fn>> stages = {
      {"gen-data", "generate the synthetic hierarchical dataset", tripdist::pipeline::cmd_gen_data},
      {"train-teacher", "pre-train and freeze the teacher", tripdist::pipeline::cmd_train_teacher},
      {"calibrate", "sample triplets and report the teacher-gap spread", tripdist::pipeline::cmd_calibrate},
      {"distill", "fine-tune the student with fixed or dynamic margins", tripdist::pipeline::cmd_distill},
      {"evaluate", "pair verification and structure correlation", tripdist::pipeline::cmd_evaluate},
  };
  std::vector<std::pair<CLI::App*, Fn>> stage_cmds;
  for (const auto& [name, desc, fn] : stages) {
    auto* cmd = app.add_subcommand(name, desc);
    add_stage_flags(cmd, stage_args);
    stage_cmds.emplace_back(cmd, fn);
  }

  std::vector<std::string> compare_runs;
  std::string compare_out = ".";
  bool compare_quiet = false;
  auto* compare = app.add_subcommand("compare", "tabulate evaluation reports (text + CSV)");
  compare->add_option("runs", compare_runs, "run directories or report.json files")->required();
  compare->add_option("--out", compare_out, "where to write comparison.txt/.csv")->capture_default_str();
  compare->add_flag("--quiet", compare_quiet, "do not print the table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (compare->parsed()) {
      tripdist::pipeline::Options opt;
      opt.out_root = compare_out;
      opt.quiet = compare_quiet;
      opt.command_line = command_line;
      tripdist::pipeline::cmd_compare({compare_runs.begin(), compare_runs.end()}, opt);
      return 0;
    }
    for (const auto& [cmd, fn] : stage_cmds) {
      if (!cmd->parsed()) continue;
      const auto cfg = resolve_config(stage_args);
      tripdist::pipeline::Options opt;
      opt.out_root = stage_args.out;
      opt.quiet = stage_args.quiet;
      opt.command_line = command_line;
      fn(cfg, opt);
      return 0;
    }
  } catch (const tripdist::Error& e) {
    std::cerr << "tripdist: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "tripdist: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
