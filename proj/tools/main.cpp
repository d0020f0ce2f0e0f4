#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "contradice/commands.hpp"
#include "contradice/formulas.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

void add_common(CLI::App* cmd, contradice::CommandOptions& opts, std::uint64_t& seed, int& seeds,
                std::string& mode) {
  cmd->add_option("--config", opts.config_path, "flat key = value config file");
  cmd->add_option("--seed", seed, "first seed (overrides the config)");
  cmd->add_option("--seeds", seeds, "number of seeds (overrides the config)")->check(CLI::PositiveNumber);
  cmd->add_option("--mode", mode,
                  "surrogate|clipped_exp|alpha_one_rl|large_alpha|bc_mix|bc_good (overrides the config)");
  cmd->add_option("--out", opts.out, "output root directory");
  cmd->add_flag("--exact-psi", opts.exact_psi, "use Psi from true occupancies instead of discriminators");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ContraDICE on tabular MDPs: imitate good demonstrations, avoid bad ones."};
  app.require_subcommand(1);
  app.footer(contradice::config_help());

  contradice::CommandOptions opts;
  std::uint64_t seed = 0;
  int seeds = 0;
  std::string mode;

  auto* gen = app.add_subcommand("gen-data", "write mdp.json and good/bad/mix datasets per task");
  auto* train = app.add_subcommand("train", "train every task and seed; write runs/<name>/");
  auto* eval = app.add_subcommand("eval", "re-score saved policies against their recorded scores");
  auto* verify = app.add_subcommand("verify", "run all oracle probes; exit 3 on any failure");
  auto* sweep = app.add_subcommand("sweep", "sweep one axis and write a tidy CSV");
  for (auto* cmd : {gen, train, eval, verify, sweep}) add_common(cmd, opts, seed, seeds, mode);
  train->add_option("--load-disc", opts.load_disc, "directory of saved discriminators to reuse");
  train->add_option("--save-disc", opts.save_disc, "directory to save trained discriminators");
  verify->add_option("--mutation", opts.mutation,
                     "inject a formula mutation (psi_sign_flip, drop_one_minus_alpha, exp_to_linear)");
  sweep->add_option("--axis", opts.axis, "alpha|bad_size|beta|mix_quality")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) opts.seed = seed;
  if (chosen->count("--seeds")) opts.seeds = seeds;
  if (chosen->count("--mode")) opts.mode = mode;

  try {
    if (chosen == gen) return contradice::cmd_gen_data(opts, std::cout);
    if (chosen == train) return contradice::cmd_train(opts, std::cout);
    if (chosen == eval) return contradice::cmd_eval(opts, std::cout);
    if (chosen == verify) return contradice::cmd_verify(opts, std::cout);
    return contradice::cmd_sweep(opts, std::cout);
  } catch (const contradice::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
