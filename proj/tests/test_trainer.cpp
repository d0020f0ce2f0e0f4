#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "contradice/trainer.hpp"
#include "test_support.hpp"

using namespace contradice;

namespace {

struct GridData {
  Gridworld world;
  Policy expert;
  DemonstrationSet good;
  DemonstrationSet bad;
  DemonstrationSet mix;
};

GridData grid_data(std::uint64_t seed) {
  GridData g;
  g.world = make_gridworld(GridworldSpec{});
  g.expert = good_policy(g.world.mdp, 0.1);
  const Policy worst = bad_policy(g.world.mdp, 0.1);
  g.good = rollout(g.world.mdp, g.expert, 50, 1, split_seed(seed, 1), Role::kGood);
  const DemonstrationSet pool = rollout(g.world.mdp, worst, 50, 100, split_seed(seed, 2), Role::kBad);
  g.bad = pool;
  g.bad.trajectories.resize(10);
  DemonstrationSet mixed = pool;
  mixed.role = Role::kMix;
  g.mix = concatenate(mixed, rollout(g.world.mdp, g.expert, 50, 5, split_seed(seed, 3), Role::kMix));
  return g;
}

/// Union data on a random MDP where every pair is visited.
TrainingData full_support_data(const TabularMdp& m, const TrainConfig& config, std::uint64_t seed) {
  const DemonstrationSet d = rollout(m, Policy::uniform(m.n_states, m.n_actions), 40, 400, seed, Role::kUnion);
  return prepare_training_data(d, config, &m);
}

TrainConfig short_config() {
  TrainConfig c;
  c.steps_main = 300;
  c.steps_disc = 500;
  c.log_every = 10;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.mode = TrainMode::kAlphaOneRl;
  CHECK_NOTHROW(c.validate());
  c.alpha = 0.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.mode = TrainMode::kLargeAlpha;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.alpha = 3.0;
  CHECK_NOTHROW(c.validate());
  c = TrainConfig{};
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = TrainConfig{};
  CHECK(c.psi_clip_hi() == doctest::Approx(3.5));
  c.clip_hi = 2.0;
  CHECK(c.psi_clip_hi() == 2.0);
  CHECK(train_mode_from_string("clipped_exp") == TrainMode::kClippedExp);
  CHECK_THROWS_AS(train_mode_from_string("adversarial"), InvalidArgument);
}

TEST_CASE("Q step") {
  const TabularMdp m = testing::random_mdp(1);
  TrainConfig config;
  const TrainingData data = full_support_data(m, config, 1);
  PsiTable psi;
  psi.psi = Matrix::Zero(m.n_states, m.n_actions);
  const Matrix ones = q_weights(psi, config);
  CHECK((ones.array() == 1.0).all());

  SUBCASE("stationary point has unit residual under unit weights") {
    SplitRng rng(1);
    TrainState state = TrainState::initial(m.n_states, m.n_actions);
    state.v = testing::random_vector(rng, m.n_states, -1, 1);
    for (int i = 0; i < 200; ++i) q_update(state, ones, psi, data, config);
    const Matrix residual = bellman_residual(state.q, state.v, data.transition, data.gamma);
    CHECK((residual.array() - 1.0).abs().maxCoeff() < 1e-10);
  }
  SUBCASE("zero learning rate leaves Q unchanged") {
    TrainConfig frozen = config;
    frozen.lr_q = 0.0;
    SplitRng rng(2);
    TrainState state = TrainState::initial(m.n_states, m.n_actions);
    state.q = testing::random_matrix(rng, m.n_states, m.n_actions, -1, 1);
    const Matrix before = state.q;
    q_update(state, ones, psi, data, frozen);
    CHECK(state.q == before);
  }
  SUBCASE("objective never increases at a small step") {
    for (bool preconditioned : {true, false}) {
      TrainConfig small = config;
      small.lr_q = 0.01;
      small.preconditioned = preconditioned;
      SplitRng rng(3);
      psi.psi = testing::random_matrix(rng, m.n_states, m.n_actions, -1, 1);
      psi.alpha = 0.5;
      const Matrix w = q_weights(psi, small);
      TrainState state = TrainState::initial(m.n_states, m.n_actions);
      state.v = testing::random_vector(rng, m.n_states, -1, 1);
      double previous = q_objective(state, w, data, small);
      for (int i = 0; i < 100; ++i) {
        q_update(state, w, psi, data, small);
        const double now = q_objective(state, w, data, small);
        CHECK(now <= previous + 1e-14);
        previous = now;
      }
    }
  }
  SUBCASE("non-finite weights are reported") {
    Matrix broken = ones;
    broken(0, 0) = std::numeric_limits<double>::infinity();
    TrainState state = TrainState::initial(m.n_states, m.n_actions);
    CHECK_THROWS_AS(q_update(state, broken, psi, data, config), ConvergenceError);
  }
}

TEST_CASE("V step") {
  const TabularMdp m = testing::random_mdp(2);
  TrainConfig config;
  const TrainingData data = full_support_data(m, config, 2);
  SplitRng rng(4);
  TrainState state = TrainState::initial(m.n_states, m.n_actions);
  state.q_target = testing::random_matrix(rng, m.n_states, m.n_actions, -2, 2);
  const Vector closed = soft_value_closed_form(state.q_target, data.union_estimates.mu_hat, config.beta);

  SUBCASE("exact solve") {
    TrainConfig exact = config;
    exact.exact_v_solve = true;
    v_update(state, data, exact);
    CHECK((state.v - closed).cwiseAbs().maxCoeff() < 1e-10);
    state.q_target.setConstant(0.75);
    v_update(state, data, exact);
    CHECK((state.v.array() - 0.75).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("Newton steps converge to the closed form") {
    for (int i = 0; i < 50; ++i) v_update(state, data, config);
    CHECK((state.v - closed).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("objective never increases at a small step") {
    for (bool preconditioned : {true, false}) {
      TrainConfig small = config;
      small.preconditioned = preconditioned;
      small.lr_v = preconditioned ? 0.5 : 0.1;
      TrainState s = state;
      double previous = j_extreme_v(s.v, s.q_target, data.union_estimates.d_hat, config.beta);
      for (int i = 0; i < 100; ++i) {
        v_update(s, data, small);
        const double now = j_extreme_v(s.v, s.q_target, data.union_estimates.d_hat, config.beta);
        CHECK(now <= previous + 1e-14);
        previous = now;
      }
    }
  }
}

TEST_CASE("target update") {
  TrainState state = TrainState::initial(2, 2);
  state.q << 1.0, 2.0, 3.0, 4.0;
  TrainState full = state;
  target_update(full, 1.0);
  CHECK(full.q_target == full.q);
  CHECK(TrainConfig{}.tau == 0.005);

  const double tau = 0.005;
  double gap = (state.q - state.q_target).cwiseAbs().maxCoeff();
  for (int i = 0; i < 100; ++i) {
    target_update(state, tau);
    const double next = (state.q - state.q_target).cwiseAbs().maxCoeff();
    CHECK(std::abs(next / gap - (1.0 - tau)) <= 1e-12);
    gap = next;
  }
}

TEST_CASE("Q-weighted extraction") {
  const double beta = 2.0;
  SUBCASE("zero Q clones the data") {
    Matrix counts(2, 3);
    counts << 1, 2, 5, 0, 0, 0;
    const Policy pi = policy_extract_qwbc(Matrix::Zero(2, 3), counts, beta);
    CHECK(pi.probs(0, 2) == doctest::Approx(5.0 / 8.0));
    CHECK(pi.probs(1, 1) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("counts and Q trade off") {
    Matrix counts(1, 2);
    counts << 2, 1;
    Matrix q(1, 2);
    q << 0.0, beta * std::log(2.0);
    const Policy pi = policy_extract_qwbc(q, counts, beta);
    CHECK(pi.probs(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(pi.probs(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("advantage weighting gives the same policy for any V") {
    SplitRng rng(5);
    const Matrix q = testing::random_matrix(rng, 6, 4, -3, 3);
    Matrix counts = testing::random_matrix(rng, 6, 4, 0, 4).array().floor();
    counts.row(2).setZero();
    const Matrix mu = alpha_one_reference(counts);
    const Policy qw = policy_extract_qwbc(q, counts, beta);
    const Policy soft = policy_extract_awbc(q, soft_value_closed_form(q, mu, beta), counts, beta);
    CHECK((qw.probs - soft.probs).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(policy_extract_awbc(q, Vector::Zero(6), counts, beta).probs == qw.probs);
    for (int i = 0; i < 50; ++i) {
      const Vector noise = testing::random_vector(rng, 6, -5, 5);
      CHECK((policy_extract_awbc(q, noise, counts, beta).probs - qw.probs).cwiseAbs().maxCoeff() <= 1e-12);
    }
    Matrix q_equals_v(6, 4);
    const Vector v = testing::random_vector(rng, 6, -1, 1);
    q_equals_v = v.replicate(1, 4);
    CHECK((policy_extract_awbc(q_equals_v, v, counts, beta).probs - mu).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((qw.probs.row(2).array() == 0.25).all());
  }
  SUBCASE("invalid temperature") {
    CHECK_THROWS_AS(policy_extract_qwbc(Matrix::Zero(1, 2), Matrix::Ones(1, 2), 0.0), InvalidArgument);
  }
}

TEST_CASE("behavior cloning") {
  const Gridworld world = make_gridworld(GridworldSpec{});
  SUBCASE("single deterministic trajectory") {
    GridworldSpec spec;
    spec.slip = 0.0;
    const Gridworld det = make_gridworld(spec);
    const Matrix q = soft_value_iteration(det.mdp, det.mdp.reward, 1e-3).q;
    Policy expert{Matrix::Zero(25, 4)};
    for (int s = 0; s < 25; ++s) {
      int best = 0;
      q.row(s).maxCoeff(&best);
      expert.probs(s, best) = 1.0;
    }
    const DemonstrationSet d = rollout(det.mdp, expert, 20, 1, 1);
    const Policy pi = train_bc(d, 1e-8);
    for (const auto& step : d.trajectories[0].steps) CHECK(pi.probs(step.state, step.action) > 1.0 - 1e-6);
  }
  SUBCASE("large expert dataset recovers the expert") {
    const Policy expert = good_policy(world.mdp, 1.0);
    const DemonstrationSet d = rollout(world.mdp, expert, 50, 10000, 2);
    const Policy pi = train_bc(d, 1e-6);
    const Matrix counts = weighted_counts(d, 1.0, OccupancyWeighting::kUniform);
    for (int s = 0; s < 25; ++s) {
      if (counts.row(s).sum() < 5000 || world.cells[s] == CellKind::kGoal || world.cells[s] == CellKind::kTrap) continue;
      CHECK((pi.probs.row(s) - expert.probs.row(s)).cwiseAbs().maxCoeff() <= 0.03);
    }
  }
  SUBCASE("cloning is extraction with zero Q") {
    const DemonstrationSet d = rollout(world.mdp, Policy::uniform(25, 4), 10, 3, 3);
    const Matrix counts = weighted_counts(d, 1.0, OccupancyWeighting::kUniform);
    CHECK((train_bc(d, 1e-4).probs - policy_extract_qwbc(Matrix::Zero(25, 4), counts, 1.0, 1e-4).probs)
              .cwiseAbs()
              .maxCoeff() <= 1e-14);
  }
  SUBCASE("empty data") {
    DemonstrationSet empty;
    empty.n_states = 25;
    empty.n_actions = 4;
    CHECK_THROWS_AS(train_bc(empty, 1e-4), InvalidArgument);
  }
}

TEST_CASE("without bad data and with identical good and unlabeled data the run reduces to zero Psi") {
  const GridData g = grid_data(1);
  DemonstrationSet mix = g.good;
  mix.role = Role::kMix;
  DemonstrationSet no_bad = g.bad;
  no_bad.trajectories.clear();
  // Smoothing separates d_g from d_u by O(epsilon) off the data support.
  TrainConfig config = short_config();
  config.epsilon = 1e-14;
  const TrainResult run = train_contradice(g.good, no_bad, mix, config);
  const auto& mask = prepare_training_data(build_union(g.good, mix), config).union_estimates.support_mask;
  CHECK(mask.select(run.psi.psi, 0.0).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_FALSE(run.disc_bad.has_value());

  PsiTable zero;
  zero.psi = Matrix::Zero(25, 4);
  const TrainResult reference = train_contradice(zero, build_union(g.good, mix), config);
  REQUIRE(run.state.metrics_log.size() == reference.state.metrics_log.size());
  for (std::size_t i = 0; i < run.state.metrics_log.size(); ++i) {
    CHECK(std::abs(run.state.metrics_log[i].l_q - reference.state.metrics_log[i].l_q) <= 1e-8);
  }
}

TEST_CASE("training is deterministic") {
  const GridData g = grid_data(2);
  const TrainConfig config = short_config();
  const Evaluator eval = Evaluator::against(g.world.mdp, g.expert);
  const TrainResult a = train_contradice(g.good, g.bad, g.mix, config, nullptr, &eval);
  const TrainResult b = train_contradice(g.good, g.bad, g.mix, config, nullptr, &eval);
  CHECK(a.state.metrics_log == b.state.metrics_log);
  CHECK(a.state.q == b.state.q);
  CHECK(a.state.policy.probs == b.state.policy.probs);
  CHECK(a.state.metrics_log.size() == 30);
}

TEST_CASE("gridworld run beats the expert threshold") {
  const GridData g = grid_data(0);
  const Evaluator eval = Evaluator::against(g.world.mdp, g.expert);
  const TrainResult run = train_contradice(g.good, g.bad, g.mix, TrainConfig{}, nullptr, &eval);
  CHECK(eval.normalized(run.state.policy) >= 0.9);
  CHECK(std::isfinite(run.state.metrics_log.back().normalized_score));
  CHECK(run.state.warnings.empty());
}

TEST_CASE("recovered reward matches the surrogate weight at convergence") {
  const TabularMdp m = testing::random_mdp(3, 6, 3);
  TrainConfig config;
  config.exact_v_solve = true;
  config.tau = 0.05;
  config.steps_main = 5000;
  config.log_every = 0;
  const TrainingData data = full_support_data(m, config, 3);
  SplitRng rng(6);
  PsiTable psi;
  psi.psi = testing::random_matrix(rng, 6, 3, -1, 1);
  psi.alpha = config.alpha;
  psi.source = PsiSource::kExact;
  const TrainState state = train_with_psi(psi, data, config);
  const Matrix implicit_reward = bellman_residual(state.q, state.v, data.transition, data.gamma);
  CHECK((implicit_reward - q_weights(psi, config)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("alpha = 1 mode") {
  const TabularMdp m = testing::random_mdp(4, 6, 3);
  TrainConfig config;
  config.alpha = 1.0;
  config.mode = TrainMode::kAlphaOneRl;
  config.beta = 0.2;
  const TrainingData data = full_support_data(m, config, 4);
  SplitRng rng(7);

  SUBCASE("zero Psi makes every policy equally good") {
    PsiTable zero;
    zero.psi = Matrix::Zero(6, 3);
    zero.alpha = 1.0;
    const TrainState state = train_alpha_one(zero, data, config);
    CHECK(state.q.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((state.policy.probs - alpha_one_reference(data.union_estimates.counts)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("extracted policy matches soft value iteration on Psi") {
    PsiTable psi;
    psi.psi = testing::random_matrix(rng, 6, 3, -1, 1);
    psi.alpha = 1.0;
    const TrainState state = train_alpha_one(psi, data, config);
    SoftValueOptions options;
    options.reference = alpha_one_reference(data.union_estimates.counts);
    options.tolerance = 1e-12;
    TabularMdp on_psi = m;
    on_psi.reward = psi.psi;
    const SoftValueResult oracle = soft_value_iteration(on_psi, psi.psi, config.beta, options);
    CHECK(std::abs(policy_return(on_psi, state.policy) - policy_return(on_psi, oracle.policy)) <= 1e-6);
    // No candidate policy does better on the entropy-regularized objective.
    const double best = (1.0 - m.gamma) * m.p0.dot(oracle.v);
    for (int i = 0; i < 20; ++i) {
      const Policy other = testing::random_policy(rng, 6, 3);
      const Matrix d = occupancy_of_policy(m, other).d;
      const Matrix kl = (other.probs.array() * (other.probs.array() / options.reference.array()).log());
      const double value = (d.array() * psi.psi.array()).sum() -
                           config.beta * (d.array() * kl.array()).sum();
      CHECK(value <= best + 1e-9);
    }
  }
  SUBCASE("unvisited actions are pinned low") {
    DemonstrationSet d;
    d.n_states = 2;
    d.n_actions = 2;
    d.trajectories.push_back(Trajectory{{{0, 0, 1}, {1, 1, 0}, {0, 0, 0}, {0, 0, 1}}});
    const TrainingData sparse = prepare_training_data(d, config);
    PsiTable psi;
    psi.psi = Matrix::Constant(2, 2, 0.5);
    psi.psi(0, 1) = 5.0;
    psi.alpha = 1.0;
    const TrainState state = train_alpha_one(psi, sparse, config);
    CHECK(state.q(0, 1) == doctest::Approx(0.5 / (1.0 - config.gamma)));
    CHECK(state.policy.probs(0, 1) == 0.0);
  }
}

TEST_CASE("large-alpha mode") {
  TrainConfig config;
  config.mode = TrainMode::kLargeAlpha;
  config.alpha = 2.0;
  PsiTable psi;
  psi.psi = Matrix::Zero(3, 2);
  psi.alpha = 2.0;
  CHECK((q_weights(psi, config).array() == 1.0).all());
  psi.psi(1, 1) = 1.0;
  CHECK(q_weights(psi, config)(1, 1) == doctest::Approx(std::exp(1.0)));
  TrainConfig wrong;
  CHECK_THROWS_AS(train_large_alpha(psi, TrainingData{}, wrong), InvalidArgument);
}

TEST_CASE("clipped exponent mode trains") {
  const GridData g = grid_data(3);
  TrainConfig config = short_config();
  config.mode = TrainMode::kClippedExp;
  const TrainResult run = train_contradice(g.good, g.bad, g.mix, config);
  CHECK(run.state.q.allFinite());
  CHECK_NOTHROW(run.state.policy.validate());
}
