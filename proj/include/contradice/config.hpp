#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contradice/mdp.hpp"
#include "contradice/trainer.hpp"

namespace contradice {

/// Bad command-line input or configuration; maps to exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Run modes accepted by `mode`: the four trainer modes plus two cloning
/// baselines ("bc_mix" clones the unlabeled data, "bc_good" the good data).
bool is_baseline_mode(const std::string& mode);
void check_run_mode(const std::string& mode);

struct ExperimentConfig {
  std::string name = "trap_gridworld";
  std::string env = "gridworld";  // gridworld | random
  // Gridworld: layout names or literal layouts. Random: MDP seeds.
  std::vector<std::string> tasks = {"corner", "ring"};

  double slip = 0.1;
  double goal_reward = 1.0;
  double trap_reward = -1.0;
  double step_cost = 0.01;
  int random_states = 10;
  int random_actions = 3;
  int random_branching = 3;

  double beta_good = 0.1;  // temperature of the expert generating good data
  double beta_bad = 0.1;   // temperature of the policy generating bad data
  int horizon = 50;
  int n_good = 1;
  int n_bad = 10;        // bad set = the first n_bad bad rollouts
  int n_mix_bad = 100;   // bad rollouts inside the unlabeled data
  int n_mix_expert = 5;  // expert rollouts inside the unlabeled data

  std::uint64_t seed = 0;
  int n_seeds = 5;
  std::string mode = "surrogate";
  bool exact_psi = false;    // Psi from true occupancies instead of discriminators
  bool known_model = false;  // true transitions and p0 instead of empirical ones
  std::string data_dir;      // empty: datasets generated per seed

  TrainConfig train;

  /// Cross-field checks. Throws UsageError.
  void validate() const;
};

struct ConfigKey {
  std::string key;
  std::string type;
  std::string help;
};

/// Every accepted key with its type and a one-line description.
const std::vector<ConfigKey>& config_keys();

/// Text for `--help`: one line per key.
std::string config_help();

/// Parses `key = value` lines; '#' starts a comment. Unknown keys, duplicate
/// keys and malformed values throw UsageError naming every offender.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");

ExperimentConfig load_config(const std::string& path);

/// Sets one key. Throws UsageError for an unknown key or malformed value.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Value of one key in the syntax parse_config accepts.
std::string get_setting(const ExperimentConfig& config, const std::string& key);

/// Every key in declaration order; parse_config of the result reproduces `config`.
std::string config_to_text(const ExperimentConfig& config);

}  // namespace contradice
