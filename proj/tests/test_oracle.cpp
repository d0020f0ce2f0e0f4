#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "contradice/objectives.hpp"
#include "contradice/oracle.hpp"
#include "contradice/trainer.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace contradice;

namespace {

Matrix random_occupancy(const TabularMdp& m, SplitRng& rng) {
  return occupancy_of_policy(m, testing::random_policy(rng, m.n_states, m.n_actions)).d;
}

double f_of(const TabularMdp& m, const Policy& pi, const Matrix& dg, const Matrix& db, double alpha) {
  return f_objective(occupancy_of_policy(m, pi).d, dg, db, alpha);
}

}  // namespace

TEST_CASE("every probe passes on the standard formulas") {
  const std::vector<ProbeReport> reports = run_all_probes(0);
  REQUIRE(reports.size() == 7);
  for (const auto& r : reports) {
    INFO(r.name << " worst case " << r.worst_case());
    CHECK(r.passed);
    CHECK(r.n_trials > 0);
    for (const auto& c : r.checks) CHECK(c.passed == (c.max_violation <= c.tolerance));
  }
}

TEST_CASE("probes are seed-deterministic and serialize") {
  const ProbeReport a = probe_lower_bound(20, 5);
  const ProbeReport b = probe_lower_bound(20, 5);
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    CHECK(a.checks[i].max_violation == b.checks[i].max_violation);
    CHECK(a.checks[i].worst_case == b.checks[i].worst_case);
  }
  const auto doc = nlohmann::json::parse(probe_reports_to_json({a}));
  REQUIRE(doc.is_array());
  CHECK(doc[0]["name"] == a.name);
  CHECK(doc[0]["passed"] == a.passed);
  CHECK(doc[0]["checks"].size() == a.checks.size());
}

TEST_CASE("each probe fails under some injected mutation") {
  std::map<std::string, std::vector<std::string>> caught;
  for (const auto& name : mutation_names()) {
    const Formulas* fx = find_mutation(name);
    REQUIRE(fx != nullptr);
    for (const auto& r : run_all_probes(0, *fx)) {
      if (!r.passed) caught[r.name].push_back(name);
    }
  }
  for (const auto& r : run_all_probes(0)) {
    INFO(r.name);
    CHECK_FALSE(caught[r.name].empty());
  }
  CHECK(find_mutation("no_such_mutation") == nullptr);
}

TEST_CASE("mutations change the formulas they name") {
  const Formulas& standard = standard_formulas();
  CHECK(find_mutation("psi_sign_flip")->psi(1.0, 0.5, 0.5) == doctest::Approx(-standard.psi(1.0, 0.5, 0.5)));
  CHECK(find_mutation("drop_one_minus_alpha")->kl_scale(0.3) == 1.0);
  CHECK(find_mutation("exp_to_linear")->exp_link(2.0) != doctest::Approx(std::exp(2.0)));
}

TEST_CASE("oracle reaches an attainable imitation target") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TabularMdp m = testing::random_mdp(seed, 8, 3);
    SplitRng rng(seed);
    const Matrix dg = random_occupancy(m, rng);
    const Matrix db = random_occupancy(m, rng);
    const MinFResult r = oracle_min_f(m, dg, db, 0.0);
    CHECK(r.converged);
    CHECK(kl_divergence(r.d.d, dg) <= 1e-6);
    CHECK(bellman_flow_residual(m, r.policy, r.d) <= 1e-8);
  }
}

TEST_CASE("oracle minimum lies below every candidate policy") {
  for (double alpha : {0.25, 0.5, 0.9}) {
    const TabularMdp m = testing::random_mdp(20, 8, 3);
    SplitRng rng(21);
    const Matrix dg = random_occupancy(m, rng);
    const Matrix db = random_occupancy(m, rng);
    const MinFResult r = oracle_min_f(m, dg, db, alpha);
    CHECK(r.converged);
    CHECK(r.f == doctest::Approx(f_objective(r.d.d, dg, db, alpha)).epsilon(1e-12));
    for (int i = 0; i < 200; ++i) {
      CHECK(r.f <= f_of(m, testing::random_policy(rng, 8, 3, 0.01), dg, db, alpha) + 1e-9);
    }
  }
}

TEST_CASE("oracle at alpha = 1 agrees with near-greedy value iteration on Psi") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TabularMdp m = testing::random_mdp(seed + 30, 8, 3);
    SplitRng rng(seed);
    const Matrix dg = random_occupancy(m, rng);
    const Matrix db = random_occupancy(m, rng);
    const MinFResult r = oracle_min_f(m, dg, db, 1.0);
    CHECK(r.converged);
    const Matrix psi = dg.cwiseQuotient(db).array().log();
    const SoftValueResult vi = soft_value_iteration(m, psi, 1e-3);
    CHECK(std::abs(f_of(m, vi.policy, dg, db, 1.0) - r.f) <= 0.05);
  }
}

TEST_CASE("trainer never beats the oracle and improves on the behavior policy") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TabularMdp m = testing::random_mdp(seed + 100, 8, 3);
    SplitRng rng(seed);
    const Policy good = testing::random_policy(rng, 8, 3);
    const Policy bad = testing::random_policy(rng, 8, 3);
    const Policy behavior = Policy::uniform(8, 3);
    const Matrix dg = occupancy_of_policy(m, good).d;
    const Matrix db = occupancy_of_policy(m, bad).d;
    const Matrix du = occupancy_of_policy(m, behavior).d;
    const double alpha = 0.5;

    TrainConfig config;
    config.alpha = alpha;
    config.beta = 1.0;
    config.gamma = m.gamma;
    config.clip_lo = -50.0;
    config.clip_hi = 50.0;
    config.log_every = 0;
    TrainingData data;
    data.gamma = m.gamma;
    data.transition = m.transition;
    data.p0 = m.p0;
    data.union_estimates.d_hat = du;
    data.union_estimates.counts = du;
    data.union_estimates.mu_hat = behavior.probs;
    data.union_estimates.support_mask = (du.array() > 0.0).matrix();
    const PsiTable psi = exact_psi({dg}, {db}, {du}, alpha, config.clip_lo, config.clip_hi);
    const TrainState state = train_with_psi(psi, data, config);

    const MinFResult oracle = oracle_min_f(m, dg, db, alpha);
    const double trained = f_of(m, state.policy, dg, db, alpha);
    CHECK(oracle.f <= trained + 1e-9);
    CHECK(trained < f_of(m, behavior, dg, db, alpha));
  }
}

TEST_CASE("oracle input checks") {
  const TabularMdp m = testing::random_mdp(1, 4, 2);
  SplitRng rng(1);
  const Matrix dg = random_occupancy(m, rng);
  Matrix db = random_occupancy(m, rng);
  CHECK_THROWS_AS(oracle_min_f(m, dg, db, 1.5), InvalidArgument);
  CHECK_THROWS_AS(oracle_min_f(m, dg, db.topRows(2), 0.5), InvalidArgument);
  db(0, 0) = 0.0;
  CHECK_THROWS_AS(oracle_min_f(m, dg, db, 0.5), InvalidArgument);
}
