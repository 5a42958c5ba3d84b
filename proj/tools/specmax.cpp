#include <CLI11.hpp>

#include <iostream>

#include "specmax/cli.hpp"
#include "specmax/error.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  long long seed = -1;
  std::string out;
  int trials = -1;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_path, "configuration file (key = value)");
  cmd->add_option("--seed", flags->seed, "override [run] seed");
  cmd->add_option("--out", flags->out, "override [run] output directory");
  cmd->add_option("--trials", flags->trials, "override [run] trial count");
}

specmax::RunConfig load(const CommonFlags& flags) {
  specmax::RunConfig cfg;
  if (!flags.config_path.empty())
    cfg = specmax::parse_config_file(flags.config_path);
  if (flags.seed >= 0) cfg.seed = static_cast<uint64_t>(flags.seed);
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  if (flags.trials > 0) cfg.trials = flags.trials;
  return cfg;
}

int guarded(int (*fn)(const specmax::RunConfig&), const CommonFlags& flags) {
  try {
    return fn(load(flags));
  } catch (const specmax::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case specmax::ErrorKind::Config:
        return specmax::kExitConfig;
      case specmax::ErrorKind::Solver:
        return specmax::kExitSolver;
      case specmax::ErrorKind::Diverged:
        return specmax::kExitDiverged;
    }
    return specmax::kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return specmax::kExitSolver;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "specmax: maximization of the second conformal-Laplacian eigenvalue "
      "over discrete conformal factors"};
  app.require_subcommand(1);

  CommonFlags sf, of, vf, rf;
  CLI::App* spectrum =
      app.add_subcommand("spectrum", "weighted spectrum, inertia and cluster report");
  add_common(spectrum, &sf);
  CLI::App* optimize =
      app.add_subcommand("optimize", "run the regularized continuation");
  add_common(optimize, &of);
  CLI::App* verify =
      app.add_subcommand("verify", "derivative/continuity/maximality harnesses");
  add_common(verify, &vf);
  CLI::App* report =
      app.add_subcommand("report", "summarize a previous output directory");
  add_common(report, &rf);

  CLI11_PARSE(app, argc, argv);

  if (spectrum->parsed()) return guarded(specmax::cmd_spectrum, sf);
  if (optimize->parsed()) return guarded(specmax::cmd_optimize, of);
  if (verify->parsed()) return guarded(specmax::cmd_verify, vf);
  if (report->parsed()) return guarded(specmax::cmd_report, rf);
  return specmax::kExitConfig;
}
