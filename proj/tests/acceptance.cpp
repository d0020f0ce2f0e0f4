// Acceptance suite: one PASS/FAIL line per criterion. Exit status 0 iff all pass.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "contradice/commands.hpp"
#include "contradice/formulas.hpp"
#include "contradice/oracle.hpp"
#include "test_support.hpp"

using namespace contradice;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

constexpr double kNoLimit = 1e9;

const ProbeCheck& check_named(const ProbeReport& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return c;
  }
  throw Error("probe " + r.name + " has no check " + name);
}

Outcome probe_criterion(const ProbeReport& r, const std::vector<std::string>& checks, double seconds,
                        double time_limit) {
  Outcome out;
  out.passed = seconds < time_limit;
  for (const auto& name : checks) {
    const ProbeCheck& c = check_named(r, name);
    out.passed = out.passed && c.passed;
    out.detail += format("%s %.3e (tol %.0e); ", name.c_str(), c.max_violation, c.tolerance);
    if (name == "f_nonconvex_for_alpha_gt_1") out.detail += "witness " + c.worst_case + "; ";
  }
  out.detail += time_limit < kNoLimit ? format("%.2f s (limit %.0f s)", seconds, time_limit)
                                      : format("%.2f s", seconds);
  return out;
}

template <typename Probe>
Outcome timed_probe(Probe probe, const std::vector<std::string>& checks, double time_limit) {
  const auto start = std::chrono::steady_clock::now();
  const ProbeReport r = probe();
  return probe_criterion(r, checks, seconds_since(start), time_limit);
}

Outcome discriminator_consistency() {
  const auto start = std::chrono::steady_clock::now();
  const testing::RatioCase rc = testing::ratio_case(7, 100000);
  const TrainConfig defaults;
  const DiscriminatorTraining training{defaults.steps_disc, defaults.lr_disc, DiscriminatorInput::kStateAction};
  const Discriminator disc =
      train_discriminator(empirical_occupancy(rc.good, rc.mdp.gamma, defaults.epsilon),
                          empirical_occupancy(rc.union_set, rc.mdp.gamma, defaults.epsilon), training);
  const Matrix exact = rc.d_g.cwiseQuotient(rc.d_u);
  const double err = (ratio_from_discriminator(disc) - exact).cwiseQuotient(exact).cwiseAbs().maxCoeff();
  const double seconds = seconds_since(start);
  return {err <= 0.05 && seconds < 30.0,
          format("max relative error %.4f (limit 0.05) over %d pairs; %.2f s (limit 30 s)", err,
                 static_cast<int>(exact.size()), seconds)};
}

ExperimentConfig suite_config() { return ExperimentConfig{}; }

Outcome end_to_end() {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig base = suite_config();
  const RunResult main = run_experiment(base);
  ExperimentConfig bc = base;
  bc.mode = "bc_mix";
  const RunResult bc_mix = run_experiment(bc);
  ExperimentConfig good_only = base;
  good_only.train.alpha = 0.0;
  const RunResult alpha_zero = run_experiment(good_only);
  const double seconds = seconds_since(start);
  const bool ok = main.suite_mean >= 0.9 && main.suite_mean > bc_mix.suite_mean &&
                  main.suite_mean > alpha_zero.suite_mean && seconds < 300.0;
  std::string per_task;
  for (const auto& t : main.tasks) per_task += format("%s %.3f+-%.3f, ", t.task.c_str(), t.mean, t.std);
  return {ok, format("ContraDICE %.3f (%s5 seeds; limit >= 0.9) > BC-MIX %.3f, > alpha=0 %.3f; %.1f s (limit 300 s)",
                     main.suite_mean, per_task.c_str(), bc_mix.suite_mean, alpha_zero.suite_mean, seconds)};
}

std::map<double, double> sweep_means(const std::string& axis) {
  std::map<double, std::vector<double>> grouped;
  for (const auto& row : run_sweep(suite_config(), axis)) grouped[row.value].push_back(row.score);
  std::map<double, double> means;
  for (const auto& [value, scores] : grouped) {
    double total = 0.0;
    for (double s : scores) total += s;
    means[value] = total / scores.size();
  }
  return means;
}

Outcome bad_size_trend() {
  const auto means = sweep_means("bad_size");
  std::string curve;
  for (const auto& [v, m] : means) curve += format("%g:%.3f ", v, m);
  const double at0 = means.at(0.0);
  const double at10 = means.at(10.0);
  return {at10 >= at0 - 0.05, format("score(10) %.3f >= score(0) %.3f - 0.05; curve %s", at10, at0, curve.c_str())};
}

Outcome alpha_plateau() {
  const auto means = sweep_means("alpha");
  double best = -1e300;
  for (const auto& [v, m] : means) best = std::max(best, m);
  int run = 0;
  int longest = 0;
  std::string curve;
  for (const auto& [v, m] : means) {
    run = m >= best - 0.1 ? run + 1 : 0;
    longest = std::max(longest, run);
    curve += format("%g:%.3f ", v, m);
  }
  return {longest >= 3, format("%d consecutive alphas within 0.1 of best %.3f (need 3); curve %s", longest, best,
                               curve.c_str())};
}

Outcome alpha_one_oracle() {
  const ExperimentConfig config = suite_config();
  double worst = 0.0;
  for (const auto& task : config.tasks) {
    for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(config.n_seeds); ++seed) {
      const TaskData data = generate_task_data(config, task, seed);
      const OccupancyMeasure d_g = occupancy_of_policy(data.mdp, data.expert);
      const OccupancyMeasure d_b = occupancy_of_policy(data.mdp, data.bad_policy);
      const OccupancyMeasure d_u{0.5 * d_g.d + 0.5 * d_b.d};
      const PsiTable psi = exact_psi(d_g, d_b, d_u, 1.0, -default_psi_clip(1.0), default_psi_clip(1.0));
      TrainConfig tc = config.train;
      tc.alpha = 1.0;
      tc.mode = TrainMode::kAlphaOneRl;
      const TrainingData td = prepare_training_data(build_union(data.good, data.mix), tc, &data.mdp);
      const TrainState state = train_alpha_one(psi, td, tc);

      SoftValueOptions options;
      options.reference = alpha_one_reference(td.union_estimates.counts);
      options.tolerance = 1e-12;
      TabularMdp on_psi = data.mdp;
      on_psi.reward = psi.psi;
      const SoftValueResult vi = soft_value_iteration(on_psi, psi.psi, tc.beta, options);
      const double gap = std::abs(policy_return(on_psi, state.policy) - policy_return(on_psi, vi.policy)) *
                         (1.0 - data.mdp.gamma);
      worst = std::max(worst, gap);
    }
  }
  return {worst <= 1e-6, format("max |E_d[Psi]| gap %.3e over %zu tasks x %d seeds (limit 1e-6)", worst,
                                config.tasks.size(), config.n_seeds)};
}

Outcome mutation_sensitivity() {
  std::map<std::string, std::vector<std::string>> caught;
  for (const auto& name : mutation_names()) {
    for (const auto& r : run_all_probes(0, *find_mutation(name))) {
      if (!r.passed) caught[r.name].push_back(name);
    }
  }
  bool ok = true;
  std::string detail;
  for (const auto& r : run_all_probes(0)) {
    const auto& by = caught[r.name];
    ok = ok && !by.empty();
    detail += r.name + ":";
    if (by.empty()) detail += "none";
    for (std::size_t i = 0; i < by.size(); ++i) detail += (i ? "," : "") + by[i];
    detail += " ";
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::uint64_t seed = 0;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"occupancy objective equals its reformulation",
       [&] { return timed_probe([&] { return probe_reformulation(100, seed); }, {"f_equals_reformulation"}, 1.0); }},
      {"objective convex for alpha <= 1, not for alpha = 2",
       [&] {
         return timed_probe([&] { return probe_convexity({0.0, 0.5, 1.0, 2.0}, 1000, seed); },
                            {"f_convex_for_alpha_le_1", "f_nonconvex_for_alpha_gt_1"}, 10.0);
       }},
      {"surrogate lower-bounds the full dual",
       [&] {
         return timed_probe([&] { return probe_lower_bound(100, seed); },
                            {"surrogate_below_full", "equal_where_residual_vanishes"}, kNoLimit);
       }},
      {"non-adversarial objective convex; softmax attains the inner max",
       [&] {
         const auto start = std::chrono::steady_clock::now();
         const ProbeReport convex = probe_convexity({0.5}, 1000, seed);
         const ProbeReport minimax = probe_minimax_softvalue(20, seed);
         ProbeReport joined;
         joined.checks = {check_named(convex, "surrogate_q_convex"), check_named(minimax, "grid_max_below_softvalue"),
                          check_named(minimax, "softmax_attains_softvalue")};
         return probe_criterion(joined, {"surrogate_q_convex", "grid_max_below_softvalue", "softmax_attains_softvalue"},
                                seconds_since(start), kNoLimit);
       }},
      {"Extreme-V minimizer equals the closed-form soft value",
       [&] { return timed_probe([&] { return probe_extreme_v(20, seed); }, {"golden_section_matches_softvalue"}, kNoLimit); }},
      {"Q-weighted and advantage-weighted cloning coincide",
       [&] { return timed_probe([&] { return probe_qwbc_awbc(100, seed); }, {"qwbc_equals_awbc"}, kNoLimit); }},
      {"discriminator ratio matches the exact occupancy ratio", discriminator_consistency},
      {"analytic gradients match finite differences",
       [&] {
         return timed_probe([&] { return probe_gradients(20, seed); },
                            {"l_q_given_v_gradient", "chi2_gradient", "j_extreme_v_gradient", "discriminator_loss_gradient"},
                            kNoLimit);
       }},
      {"trap-gridworld suite: score >= 0.9 and above both baselines", end_to_end},
      {"bad-data size trend", bad_size_trend},
      {"alpha plateau", alpha_plateau},
      {"alpha = 1 extraction matches value iteration on Psi", alpha_one_oracle},
      {"every probe fails under some mutation", mutation_sensitivity},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    if (!out.passed) ++failures;
    std::printf("%s %2zu  %s: %s\n", out.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
  return failures == 0 ? 0 : 1;
}
