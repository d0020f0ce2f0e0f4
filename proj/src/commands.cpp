#include "contradice/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "contradice/environments.hpp"
#include "contradice/oracle.hpp"
#include "contradice/rng.hpp"

namespace contradice {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Subset of `data` holding its first `n` trajectories, tagged `role`.
DemonstrationSet prefix(const DemonstrationSet& data, int n, Role role) {
  DemonstrationSet out = data;
  out.role = role;
  out.trajectories.resize(std::min<std::size_t>(n, data.trajectories.size()));
  return out;
}

std::string metrics_to_csv(const std::vector<MetricRecord>& metrics) {
  std::ostringstream out;
  out << "step,l_q,j_v,mean_psi,mean_delta,policy_return,normalized_score\n";
  for (const auto& m : metrics) {
    out << m.step << ',' << format_number(m.l_q) << ',' << format_number(m.j_v) << ','
        << format_number(m.mean_psi) << ',' << format_number(m.mean_delta) << ','
        << format_number(m.policy_return) << ',' << format_number(m.normalized_score) << '\n';
  }
  return out.str();
}

std::string policy_to_json(const Policy& policy) {
  ordered_json doc;
  doc["n_states"] = policy.n_states();
  doc["n_actions"] = policy.n_actions();
  ordered_json rows = ordered_json::array();
  for (int s = 0; s < policy.n_states(); ++s) {
    ordered_json row = ordered_json::array();
    for (int a = 0; a < policy.n_actions(); ++a) row.push_back(policy.probs(s, a));
    rows.push_back(std::move(row));
  }
  doc["probs"] = std::move(rows);
  return doc.dump() + "\n";
}

Policy policy_from_json(const std::string& text) {
  Policy policy;
  try {
    const auto doc = nlohmann::json::parse(text);
    const int n_s = doc.at("n_states").get<int>();
    const int n_a = doc.at("n_actions").get<int>();
    policy.probs.resize(n_s, n_a);
    const auto& rows = doc.at("probs");
    if (static_cast<int>(rows.size()) != n_s) throw Error("policy file has the wrong number of rows");
    for (int s = 0; s < n_s; ++s) {
      if (static_cast<int>(rows[s].size()) != n_a) throw Error("policy file row has the wrong length");
      for (int a = 0; a < n_a; ++a) policy.probs(s, a) = rows[s][a].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed policy file: ") + e.what());
  }
  policy.validate(1e-9);
  return policy;
}

std::string discriminators_to_json(const DiscriminatorPair& pair) {
  ordered_json doc;
  doc["good"] = pair.good ? nlohmann::json::parse(discriminator_to_json(*pair.good)) : nullptr;
  doc["bad"] = pair.bad ? nlohmann::json::parse(discriminator_to_json(*pair.bad)) : nullptr;
  return doc.dump() + "\n";
}

DiscriminatorPair discriminators_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  DiscriminatorPair pair;
  if (!doc.at("good").is_null()) pair.good = discriminator_from_json(doc.at("good").dump());
  if (!doc.at("bad").is_null()) pair.bad = discriminator_from_json(doc.at("bad").dump());
  return pair;
}

fs::path seed_dir(const fs::path& root, const std::string& task, std::uint64_t seed) {
  return root / task / std::to_string(seed);
}

double mean_of(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return xs.empty() ? 0.0 : total / xs.size();
}

double std_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double total = 0.0;
  for (double x : xs) total += (x - m) * (x - m);
  return xs.empty() ? 0.0 : std::sqrt(total / xs.size());
}

// Task names are used as directory names; literal layouts are not.
std::string task_label(const std::string& task) {
  if (task.find('/') == std::string::npos) return task;
  std::string label = "layout_" + std::to_string(fnv1a64(task) % 1000000007ULL);
  return label;
}

}  // namespace

// --- Building blocks ----------------------------------------------------------------

TabularMdp build_task_mdp(const ExperimentConfig& config, const std::string& task) {
  if (config.env == "random") {
    RandomMdpSpec spec;
    spec.n_states = config.random_states;
    spec.n_actions = config.random_actions;
    spec.branching = config.random_branching;
    spec.gamma = config.train.gamma;
    spec.seed = std::stoull(task);
    return make_random_mdp(spec);
  }
  GridworldSpec spec;
  try {
    spec.layout = resolve_layout(task);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  spec.slip = config.slip;
  spec.goal_reward = config.goal_reward;
  spec.trap_reward = config.trap_reward;
  spec.step_cost = config.step_cost;
  spec.gamma = config.train.gamma;
  return make_gridworld(spec).mdp;
}

TaskData generate_task_data(const ExperimentConfig& config, const std::string& task,
                            std::uint64_t seed) {
  TaskData data;
  data.task = task;
  data.mdp = build_task_mdp(config, task);
  data.expert = good_policy(data.mdp, config.beta_good);
  data.bad_policy = bad_policy(data.mdp, config.beta_bad);
  const int pool = std::max(config.n_bad, config.n_mix_bad);
  data.good = rollout(data.mdp, data.expert, config.horizon, config.n_good, split_seed(seed, 1),
                      Role::kGood);
  const DemonstrationSet bad_pool = rollout(data.mdp, data.bad_policy, config.horizon, pool,
                                            split_seed(seed, 2), Role::kBad);
  data.bad = prefix(bad_pool, config.n_bad, Role::kBad);
  const DemonstrationSet mix_expert = rollout(data.mdp, data.expert, config.horizon,
                                              config.n_mix_expert, split_seed(seed, 3), Role::kMix);
  data.mix = concatenate(prefix(bad_pool, config.n_mix_bad, Role::kMix), mix_expert);
  return data;
}

TaskData load_task_data(const ExperimentConfig& config, const std::string& task,
                        const std::string& dir) {
  TaskData data;
  data.task = task;
  data.mdp = mdp_from_json(read_file(fs::path(dir) / "mdp.json"));
  data.expert = good_policy(data.mdp, config.beta_good);
  data.bad_policy = bad_policy(data.mdp, config.beta_bad);
  auto load = [&](const char* file) {
    LoadedDataset loaded = load_dataset((fs::path(dir) / file).string());
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
    if (loaded.data.n_states != data.mdp.n_states || loaded.data.n_actions != data.mdp.n_actions) {
      throw Error(std::string(file) + " does not match the shape of mdp.json");
    }
    return loaded.data;
  };
  data.good = load("good.jsonl");
  data.bad = load("bad.jsonl");
  data.mix = load("mix.jsonl");
  return data;
}

double dataset_mean_return(const TabularMdp& mdp, const DemonstrationSet& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& traj : data.trajectories) {
    double discount = 1.0;
    for (const auto& step : traj.steps) {
      total += discount * mdp.reward(step.state, step.action);
      discount *= mdp.gamma;
    }
  }
  return total / data.trajectories.size();
}

SeedOutcome run_seed(const ExperimentConfig& config, const TaskData& data, std::uint64_t seed,
                     const DiscriminatorPair& preloaded) {
  const auto start = std::chrono::steady_clock::now();
  const Evaluator evaluator = Evaluator::against(data.mdp, data.expert);
  SeedOutcome out;
  out.seed = seed;
  if (config.mode == "bc_mix" || config.mode == "bc_good") {
    out.policy = train_bc(config.mode == "bc_mix" ? data.mix : data.good, config.train.epsilon);
  } else {
    TrainConfig tc = config.train;
    tc.mode = train_mode_from_string(config.mode);
    tc.seed = seed;
    const TabularMdp* known = config.known_model ? &data.mdp : nullptr;
    TrainResult result;
    if (config.exact_psi) {
      const OccupancyMeasure d_g = occupancy_of_policy(data.mdp, data.expert);
      const OccupancyMeasure d_b = occupancy_of_policy(data.mdp, data.bad_policy);
      const double n_expert = config.n_good + config.n_mix_expert;
      const double n_bad = config.n_mix_bad;
      const OccupancyMeasure d_u{(n_expert * d_g.d + n_bad * d_b.d) / (n_expert + n_bad)};
      TrainConfig clip = tc;
      clip.alpha = data.bad.empty() ? 0.0 : tc.alpha;
      const PsiTable psi = exact_psi(d_g, d_b, d_u, clip.alpha, clip.psi_clip_lo(), clip.psi_clip_hi());
      result = train_contradice(psi, build_union(data.good, data.mix), tc, known, &evaluator);
    } else {
      result = train_contradice(data.good, data.bad, data.mix, tc, known, &evaluator, preloaded);
    }
    out.policy = result.state.policy;
    out.metrics = std::move(result.state.metrics_log);
    out.warnings = std::move(result.state.warnings);
    out.discriminators.good = result.disc_good;
    out.discriminators.bad = result.disc_bad;
  }
  out.final_return = evaluator.score(out.policy);
  out.final_normalized = evaluator.normalized(out.policy);
  std::vector<double> last;
  for (auto it = out.metrics.rbegin(); it != out.metrics.rend() && last.size() < 10; ++it) {
    if (std::isfinite(it->normalized_score)) last.push_back(it->normalized_score);
  }
  out.score = last.empty() ? out.final_normalized : mean_of(last);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void parallel_for(int n, const std::function<void(int)>& fn, int threads) {
  if (n <= 0) return;
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

TaskData task_data_for(const ExperimentConfig& config, const std::string& task, std::uint64_t seed) {
  if (config.data_dir.empty()) return generate_task_data(config, task, seed);
  return load_task_data(config, task, (fs::path(config.data_dir) / task_label(task)).string());
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config,
                         const std::function<DiscriminatorPair(const std::string&, std::uint64_t)>& preload) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const int n_tasks = static_cast<int>(config.tasks.size());
  const int n_seeds = config.n_seeds;
  std::vector<SeedOutcome> outcomes(n_tasks * n_seeds);
  parallel_for(n_tasks * n_seeds, [&](int job) {
    const std::string& task = config.tasks[job / n_seeds];
    const std::uint64_t seed = config.seed + job % n_seeds;
    try {
      const TaskData data = task_data_for(config, task, seed);
      const DiscriminatorPair discs = preload ? preload(task, seed) : DiscriminatorPair{};
      outcomes[job] = run_seed(config, data, seed, discs);
    } catch (const UsageError&) {
      throw;
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("task " + task + ", seed " + std::to_string(seed) + ": " + e.what(),
                             e.residual());
    } catch (const Error& e) {
      throw Error("task " + task + ", seed " + std::to_string(seed) + ": " + e.what());
    }
  });

  RunResult result;
  result.config = config;
  std::vector<double> all;
  for (int t = 0; t < n_tasks; ++t) {
    TaskSummary summary;
    summary.task = config.tasks[t];
    std::vector<double> scores;
    for (int k = 0; k < n_seeds; ++k) {
      summary.seeds.push_back(std::move(outcomes[t * n_seeds + k]));
      scores.push_back(summary.seeds.back().score);
      all.push_back(scores.back());
    }
    summary.mean = mean_of(scores);
    summary.std = std_of(scores);
    result.tasks.push_back(std::move(summary));
  }
  result.suite_mean = mean_of(all);
  result.suite_std = std_of(all);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string run_result_to_json(const RunResult& result, bool with_timing) {
  ordered_json doc;
  doc["name"] = result.config.name;
  doc["mode"] = result.config.mode;
  ordered_json snapshot;
  for (const auto& key : config_keys()) snapshot[key.key] = get_setting(result.config, key.key);
  doc["config"] = std::move(snapshot);
  ordered_json tasks = ordered_json::array();
  for (const auto& t : result.tasks) {
    ordered_json task;
    task["task"] = t.task;
    task["mean"] = t.mean;
    task["std"] = t.std;
    ordered_json seeds = ordered_json::array();
    for (const auto& s : t.seeds) {
      ordered_json seed;
      seed["seed"] = s.seed;
      seed["normalized_score"] = s.score;
      seed["final_return"] = s.final_return;
      seed["final_normalized_score"] = s.final_normalized;
      seed["n_evaluations"] = s.metrics.size();
      seed["warnings"] = s.warnings;
      seed["metrics_csv"] = (fs::path(task_label(t.task)) / std::to_string(s.seed) / "metrics.csv").string();
      if (with_timing) seed["wall_clock_seconds"] = s.wall_seconds;
      seeds.push_back(std::move(seed));
    }
    task["seeds"] = std::move(seeds);
    tasks.push_back(std::move(task));
  }
  doc["tasks"] = std::move(tasks);
  doc["suite_mean"] = result.suite_mean;
  doc["suite_std"] = result.suite_std;
  if (with_timing) doc["wall_clock_seconds"] = result.wall_seconds;
  return doc.dump(2) + "\n";
}

std::vector<double> sweep_values(const std::string& axis) {
  if (axis == "alpha") {
    std::vector<double> out;
    for (int i = 0; i <= 9; ++i) out.push_back(i / 10.0);
    return out;
  }
  if (axis == "bad_size") return {0, 1, 5, 10, 25};
  if (axis == "beta") return {1, 3, 5, 10, 15, 20, 30};
  if (axis == "mix_quality") return {0, 1, 5, 10, 30};
  throw UsageError("unknown sweep axis '" + axis + "' (expected alpha, bad_size, beta or mix_quality)");
}

ExperimentConfig sweep_point(const ExperimentConfig& base, const std::string& axis, double value) {
  ExperimentConfig config = base;
  if (axis == "alpha") {
    config.train.alpha = value;
  } else if (axis == "bad_size") {
    config.n_bad = static_cast<int>(value);
  } else if (axis == "beta") {
    config.train.beta = value;
  } else if (axis == "mix_quality") {
    config.n_mix_expert = static_cast<int>(value);
  } else {
    sweep_values(axis);  // throws
  }
  config.validate();
  return config;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& axis) {
  const std::vector<double> values = sweep_values(axis);
  const int n_values = static_cast<int>(values.size());
  const int n_tasks = static_cast<int>(config.tasks.size());
  const int n_seeds = config.n_seeds;
  std::vector<ExperimentConfig> points;
  for (double v : values) points.push_back(sweep_point(config, axis, v));
  std::vector<SweepRow> rows(n_values * n_tasks * n_seeds);
  parallel_for(static_cast<int>(rows.size()), [&](int job) {
    const int vi = job / (n_tasks * n_seeds);
    const int ti = (job / n_seeds) % n_tasks;
    const std::uint64_t seed = config.seed + job % n_seeds;
    const ExperimentConfig& point = points[vi];
    const TaskData data = task_data_for(point, config.tasks[ti], seed);
    rows[job] = {config.tasks[ti], axis, values[vi], seed, run_seed(point, data, seed).score};
  });
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "task,axis,value,seed,score\n";
  for (const auto& r : rows) {
    out << task_label(r.task) << ',' << r.axis << ',' << format_number(r.value) << ',' << r.seed << ','
        << format_number(r.score) << '\n';
  }
  return out.str();
}

// --- Commands ------------------------------------------------------------------------

ExperimentConfig resolve_config(const CommandOptions& options) {
  ExperimentConfig config =
      options.config_path.empty() ? ExperimentConfig{} : load_config(options.config_path);
  if (options.seed) config.seed = *options.seed;
  if (options.seeds) config.n_seeds = *options.seeds;
  if (options.mode) apply_setting(config, "mode", *options.mode);
  if (options.exact_psi) config.exact_psi = true;
  config.validate();
  return config;
}

int cmd_gen_data(const CommandOptions& options, std::ostream& out) {
  const ExperimentConfig config = resolve_config(options);
  const fs::path root = options.out.empty() ? fs::path("data") : fs::path(options.out);
  out << "task        good  bad  mix  good_return  bad_return  mix_return\n";
  for (const auto& task : config.tasks) {
    const TaskData data = generate_task_data(config, task, config.seed);
    const fs::path dir = root / task_label(task);
    write_file(dir / "mdp.json", mdp_to_json(data.mdp));
    save_dataset((dir / "good.jsonl").string(), data.good);
    save_dataset((dir / "bad.jsonl").string(), data.bad);
    save_dataset((dir / "mix.jsonl").string(), data.mix);
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %5zu %4zu %4zu  %11.4f %11.4f %11.4f\n",
                  task_label(task).c_str(), data.good.trajectories.size(),
                  data.bad.trajectories.size(), data.mix.trajectories.size(),
                  dataset_mean_return(data.mdp, data.good), dataset_mean_return(data.mdp, data.bad),
                  dataset_mean_return(data.mdp, data.mix));
    out << line;
  }
  write_file(root / "config.txt", config_to_text(config));
  out << "wrote " << root.string() << '\n';
  return 0;
}

int cmd_train(const CommandOptions& options, std::ostream& out) {
  const ExperimentConfig config = resolve_config(options);
  const fs::path root = (options.out.empty() ? fs::path("runs") : fs::path(options.out)) / config.name;
  std::function<DiscriminatorPair(const std::string&, std::uint64_t)> preload;
  if (!options.load_disc.empty()) {
    const fs::path disc_root = options.load_disc;
    preload = [disc_root](const std::string& task, std::uint64_t seed) {
      return discriminators_from_json(read_file(seed_dir(disc_root, task_label(task), seed) / "disc.json"));
    };
  }
  const RunResult result = run_experiment(config, preload);
  for (const auto& t : result.tasks) {
    for (const auto& s : t.seeds) {
      const fs::path dir = seed_dir(root, task_label(t.task), s.seed);
      write_file(dir / "metrics.csv", metrics_to_csv(s.metrics));
      write_file(dir / "policy.json", policy_to_json(s.policy));
      if (!options.save_disc.empty()) {
        write_file(seed_dir(options.save_disc, task_label(t.task), s.seed) / "disc.json",
                   discriminators_to_json(s.discriminators));
      }
      for (const auto& w : s.warnings) {
        std::cerr << "warning: task " << t.task << " seed " << s.seed << ": " << w << '\n';
      }
    }
  }
  write_file(root / "result.json", run_result_to_json(result));
  write_file(root / "config.txt", config_to_text(config));

  out << "task        mode           normalized score (mean +- std over " << config.n_seeds
      << " seeds)\n";
  for (const auto& t : result.tasks) {
    char line[256];
    std::snprintf(line, sizeof line, "%-10s  %-13s  %7.3f +- %.3f\n", task_label(t.task).c_str(),
                  config.mode.c_str(), t.mean, t.std);
    out << line;
  }
  char line[256];
  std::snprintf(line, sizeof line, "%-10s  %-13s  %7.3f +- %.3f\n", "suite", config.mode.c_str(),
                result.suite_mean, result.suite_std);
  out << line << "wrote " << (root / "result.json").string() << '\n';
  return 0;
}

int cmd_eval(const CommandOptions& options, std::ostream& out) {
  const ExperimentConfig config = resolve_config(options);
  const fs::path root = (options.out.empty() ? fs::path("runs") : fs::path(options.out)) / config.name;
  const auto stored = nlohmann::json::parse(read_file(root / "result.json"));
  int mismatches = 0;
  out << "task        seed        return  normalized  stored\n";
  for (const auto& task_doc : stored.at("tasks")) {
    const std::string task = task_doc.at("task").get<std::string>();
    const TabularMdp mdp =
        config.data_dir.empty()
            ? build_task_mdp(config, task)
            : mdp_from_json(read_file(fs::path(config.data_dir) / task_label(task) / "mdp.json"));
    const Evaluator evaluator = Evaluator::against(mdp, good_policy(mdp, config.beta_good));
    for (const auto& seed_doc : task_doc.at("seeds")) {
      const auto seed = seed_doc.at("seed").get<std::uint64_t>();
      const Policy policy = policy_from_json(read_file(seed_dir(root, task_label(task), seed) / "policy.json"));
      if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions) {
        throw Error("policy for task " + task + " seed " + std::to_string(seed) +
                    " does not match the task MDP");
      }
      const double ret = evaluator.score(policy);
      const double norm = evaluator.normalized(policy);
      const double recorded = seed_doc.at("final_normalized_score").get<double>();
      const bool agrees = std::abs(norm - recorded) <= 1e-9 * std::max(1.0, std::abs(recorded));
      if (!agrees) ++mismatches;
      char line[256];
      std::snprintf(line, sizeof line, "%-10s %5llu  %12.6f  %10.4f  %6.4f%s\n",
                    task_label(task).c_str(), static_cast<unsigned long long>(seed), ret, norm,
                    recorded, agrees ? "" : "  MISMATCH");
      out << line;
    }
  }
  if (mismatches > 0) {
    out << mismatches << " policies no longer reproduce their recorded scores\n";
    return 3;
  }
  return 0;
}

int cmd_verify(const CommandOptions& options, std::ostream& out) {
  const Formulas* fx = &standard_formulas();
  if (!options.mutation.empty()) {
    fx = find_mutation(options.mutation);
    if (!fx) {
      std::string known;
      for (const auto& n : mutation_names()) known += (known.empty() ? "" : ", ") + n;
      throw UsageError("unknown mutation '" + options.mutation + "' (expected one of: " + known + ")");
    }
  }
  const std::uint64_t seed = options.seed.value_or(0);
  const std::vector<ProbeReport> reports = run_all_probes(seed, *fx);
  out << "formulas: " << fx->name() << "\n";
  out << "probe               check                                   max_violation  tolerance  result\n";
  bool all_passed = true;
  for (const auto& r : reports) {
    for (const auto& c : r.checks) {
      char line[256];
      std::snprintf(line, sizeof line, "%-18s  %-38s  %13.3e  %9.1e  %s\n", r.name.c_str(),
                    c.name.c_str(), c.max_violation, c.tolerance, c.passed ? "PASS" : "FAIL");
      out << line;
    }
    all_passed = all_passed && r.passed;
  }
  const fs::path report_path = (options.out.empty() ? fs::path("runs") : fs::path(options.out)) /
                               (options.mutation.empty() ? "verify.json" : "verify_" + options.mutation + ".json");
  write_file(report_path, probe_reports_to_json(reports) + "\n");
  out << (all_passed ? "all probes passed" : "some probes FAILED") << "; wrote " << report_path.string()
      << '\n';
  return all_passed ? 0 : 3;
}

int cmd_sweep(const CommandOptions& options, std::ostream& out) {
  if (options.axis.empty()) throw UsageError("sweep needs --axis (alpha, bad_size, beta or mix_quality)");
  const std::vector<double> values = sweep_values(options.axis);
  const ExperimentConfig config = resolve_config(options);
  const std::vector<SweepRow> rows = run_sweep(config, options.axis);
  const fs::path path = (options.out.empty() ? fs::path("runs") : fs::path(options.out)) / config.name /
                        ("sweep_" + options.axis + ".csv");
  write_file(path, sweep_to_csv(rows));

  out << options.axis << " sweep, mean normalized score over " << config.n_seeds << " seeds\n";
  out << "value   ";
  for (const auto& task : config.tasks) {
    char cell[64];
    std::snprintf(cell, sizeof cell, "%10s", task_label(task).c_str());
    out << cell;
  }
  out << '\n';
  for (double v : values) {
    char head[32];
    std::snprintf(head, sizeof head, "%-8g", v);
    out << head;
    for (const auto& task : config.tasks) {
      std::vector<double> scores;
      for (const auto& r : rows) {
        if (r.value == v && r.task == task) scores.push_back(r.score);
      }
      char cell[64];
      std::snprintf(cell, sizeof cell, "%10.3f", mean_of(scores));
      out << cell;
    }
    out << '\n';
  }
  out << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace contradice
