#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "contradice/config.hpp"
#include "contradice/datasets.hpp"
#include "contradice/trainer.hpp"

namespace contradice {

// --- Experiment building blocks ---------------------------------------------------

/// One task instance: the true MDP, its generating policies and the three
/// datasets for one seed.
struct TaskData {
  std::string task;
  TabularMdp mdp;
  Policy expert;
  Policy bad_policy;
  DemonstrationSet good;
  DemonstrationSet bad;
  DemonstrationSet mix;
};

TabularMdp build_task_mdp(const ExperimentConfig& config, const std::string& task);

/// Datasets for `seed`: good from stream 1; the bad pool from stream 2 (the
/// bad set is its first n_bad trajectories, the unlabeled set holds its first
/// n_mix_bad); the unlabeled expert rollouts from stream 3.
TaskData generate_task_data(const ExperimentConfig& config, const std::string& task,
                            std::uint64_t seed);

/// Reads <dir>/mdp.json and good/bad/mix.jsonl.
TaskData load_task_data(const ExperimentConfig& config, const std::string& task,
                        const std::string& dir);

/// Mean discounted return of the trajectories in `data` under the true reward.
double dataset_mean_return(const TabularMdp& mdp, const DemonstrationSet& data);

struct SeedOutcome {
  std::uint64_t seed = 0;
  double score = 0.0;             // mean normalized score over the last 10 evaluations
  double final_return = 0.0;      // return of the final extracted policy
  double final_normalized = 0.0;  // normalized score of the final extracted policy
  Policy policy;
  std::vector<MetricRecord> metrics;
  std::vector<std::string> warnings;
  DiscriminatorPair discriminators;
  double wall_seconds = 0.0;
};

/// Trains (or clones, for the baseline modes) on one task instance.
SeedOutcome run_seed(const ExperimentConfig& config, const TaskData& data, std::uint64_t seed,
                     const DiscriminatorPair& preloaded = {});

struct TaskSummary {
  std::string task;
  std::vector<SeedOutcome> seeds;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over seeds
};

struct RunResult {
  ExperimentConfig config;
  std::vector<TaskSummary> tasks;
  double suite_mean = 0.0;
  double suite_std = 0.0;
  double wall_seconds = 0.0;
};

/// Seeds seed, seed+1, ... for every task. Independent (task, seed) jobs run
/// on worker threads; results do not depend on scheduling.
RunResult run_experiment(const ExperimentConfig& config,
                         const std::function<DiscriminatorPair(const std::string&, std::uint64_t)>&
                             preload = nullptr);

/// JSON without per-seed policies. `with_timing` = false drops wall-clock fields.
std::string run_result_to_json(const RunResult& result, bool with_timing = true);

struct SweepRow {
  std::string task;
  std::string axis;
  double value = 0.0;
  std::uint64_t seed = 0;
  double score = 0.0;
};

/// Grid values of a sweep axis: alpha, bad_size, beta or mix_quality.
std::vector<double> sweep_values(const std::string& axis);

/// Config for one grid point of `axis`.
ExperimentConfig sweep_point(const ExperimentConfig& base, const std::string& axis, double value);

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& axis);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Runs fn(0..n-1) on up to `threads` workers (0: hardware concurrency) and
/// rethrows the first failure by index.
void parallel_for(int n, const std::function<void(int)>& fn, int threads = 0);

// --- Commands ----------------------------------------------------------------------

struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> seeds;
  std::optional<std::string> mode;
  std::string out;  // empty: command default
  std::string load_disc;
  std::string save_disc;
  bool exact_psi = false;
  std::string axis;      // sweep
  std::string mutation;  // verify
};

/// Config file (defaults when no path) with command-line overrides applied.
ExperimentConfig resolve_config(const CommandOptions& options);

// Each returns the process exit code: 0 ok, 3 verification failure. Usage
// problems throw UsageError, everything else throws Error.
int cmd_gen_data(const CommandOptions& options, std::ostream& out);
int cmd_train(const CommandOptions& options, std::ostream& out);
int cmd_eval(const CommandOptions& options, std::ostream& out);
int cmd_verify(const CommandOptions& options, std::ostream& out);
int cmd_sweep(const CommandOptions& options, std::ostream& out);

}  // namespace contradice
