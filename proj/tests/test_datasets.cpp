#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "contradice/datasets.hpp"
#include "contradice/environments.hpp"
#include "test_support.hpp"

using namespace contradice;

namespace {

DemonstrationSet single_pair_set(int repeats) {
  DemonstrationSet d;
  d.n_states = 2;
  d.n_actions = 2;
  Trajectory t;
  for (int i = 0; i < repeats; ++i) t.steps.push_back(Step{0, 1, 0});
  d.trajectories.push_back(t);
  return d;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("contradice_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("deterministic dynamics and policy give identical trajectories") {
  TabularMdp m = testing::two_state_chain();
  m.transition.by_action[0] = Matrix::Identity(2, 2);
  Matrix p(2, 2);
  p << 1.0, 0.0, 1.0, 0.0;
  const DemonstrationSet d = rollout(m, Policy{p}, 10, 5, 3);
  for (const auto& t : d.trajectories) CHECK(t == d.trajectories.front());
  CHECK(d.n_steps() == 50);
}

TEST_CASE("rollouts are seed-determined") {
  const TabularMdp m = testing::random_mdp(1);
  const Policy pi = Policy::uniform(m.n_states, m.n_actions);
  CHECK(rollout(m, pi, 20, 10, 7) == rollout(m, pi, 20, 10, 7));
  CHECK_FALSE(rollout(m, pi, 20, 10, 7) == rollout(m, pi, 20, 10, 8));
  // Trajectory i depends only on (seed, i): a longer dataset extends a shorter one.
  const DemonstrationSet longer = rollout(m, pi, 20, 12, 7);
  const DemonstrationSet shorter = rollout(m, pi, 20, 10, 7);
  CHECK(std::equal(shorter.trajectories.begin(), shorter.trajectories.end(), longer.trajectories.begin()));
}

TEST_CASE("uniform policy action frequencies") {
  const TabularMdp m = testing::random_mdp(2, 6, 4);
  const DemonstrationSet d = rollout(m, Policy::uniform(6, 4), 50, 400, 5);
  const Matrix counts = weighted_counts(d, 1.0, OccupancyWeighting::kUniform);
  const Matrix freq = counts.colwise().sum() / counts.sum();
  CHECK((freq.array() - 0.25).abs().maxCoeff() <= 0.02);
}

TEST_CASE("union concatenates good then mix") {
  const TabularMdp m = testing::random_mdp(3);
  const DemonstrationSet good = rollout(m, Policy::uniform(8, 3), 15, 4, 1, Role::kGood);
  const DemonstrationSet mix = rollout(m, Policy::uniform(8, 3), 15, 9, 2, Role::kMix);
  const DemonstrationSet u = build_union(good, mix);
  CHECK(u.role == Role::kUnion);
  CHECK(u.trajectories.size() == 13);
  CHECK(u.trajectories.front() == good.trajectories.front());
  CHECK(u.trajectories.back() == mix.trajectories.back());

  const Matrix cu = weighted_counts(u, 0.9, OccupancyWeighting::kDiscounted);
  const Matrix cg = weighted_counts(good, 0.9, OccupancyWeighting::kDiscounted);
  const Matrix cm = weighted_counts(mix, 0.9, OccupancyWeighting::kDiscounted);
  CHECK((cu - cg - cm).cwiseAbs().maxCoeff() <= 1e-12);

  DemonstrationSet empty_good = good;
  empty_good.trajectories.clear();
  const DemonstrationSet only_mix = build_union(empty_good, mix);
  CHECK(only_mix.trajectories == mix.trajectories);
  CHECK(only_mix.mdp_hash == mix.mdp_hash);
}

TEST_CASE("smoothed occupancy of a single repeated pair") {
  const DemonstrationSet d = single_pair_set(8);
  const double eps = 1e-3;
  const EmpiricalEstimates est = empirical_occupancy(d, 0.9, eps, OccupancyWeighting::kUniform);
  CHECK(est.d_hat(0, 1) == doctest::Approx((8.0 + eps) / (8.0 + 4 * eps)).epsilon(1e-14));
  CHECK(est.d_hat(1, 0) == doctest::Approx(eps / (8.0 + 4 * eps)).epsilon(1e-14));
  CHECK(est.support_mask(0, 1));
  CHECK_FALSE(est.support_mask(1, 1));
  CHECK_THROWS_AS(empirical_occupancy(d, 0.9, 0.0), InvalidArgument);
}

TEST_CASE("discounted empirical occupancy converges to the true occupancy") {
  const TabularMdp m = testing::random_mdp(4, 5, 2);
  const Policy pi = Policy::uniform(5, 2);
  const Matrix truth = occupancy_of_policy(m, pi).d;
  const DemonstrationSet d = rollout(m, pi, 80, 100000, 9);
  const EmpiricalEstimates est = empirical_occupancy(d, m.gamma, 1e-9);
  CHECK((est.d_hat - truth).cwiseAbs().maxCoeff() <= 0.01);
}

TEST_CASE("estimation error shrinks with dataset size") {
  const TabularMdp m = testing::random_mdp(6, 5, 2);
  const Policy pi = Policy::uniform(5, 2);
  const Matrix truth = occupancy_of_policy(m, pi).d;
  std::vector<double> medians;
  for (int n : {100, 1000, 10000}) {
    std::vector<double> errors;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const DemonstrationSet d = rollout(m, pi, 60, n, 1000 * seed + n);
      errors.push_back((empirical_occupancy(d, m.gamma, 1e-9).d_hat - truth).cwiseAbs().maxCoeff());
    }
    std::nth_element(errors.begin(), errors.begin() + 10, errors.end());
    medians.push_back(errors[10]);
  }
  CHECK(medians[1] <= medians[0]);
  CHECK(medians[2] <= medians[1]);
}

TEST_CASE("behavior policy estimate") {
  DemonstrationSet d;
  d.n_states = 2;
  d.n_actions = 2;
  d.trajectories.push_back(Trajectory{{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 1, 0}}});
  const Matrix mu = empirical_behavior_policy(d, 1e-12);
  CHECK(mu(0, 0) == doctest::Approx(0.75));
  CHECK(mu(0, 1) == doctest::Approx(0.25));
  CHECK(mu(1, 0) == doctest::Approx(0.5));
  CHECK(mu(1, 1) == doctest::Approx(0.5));

  const EmpiricalEstimates est = estimate(d, 0.9, 1e-4);
  for (int s = 0; s < 2; ++s) {
    const Matrix conditional = est.d_hat.row(s) / est.d_hat.row(s).sum();
    CHECK((conditional - est.mu_hat.row(s)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("empirical transitions and initial distribution") {
  DemonstrationSet d;
  d.n_states = 3;
  d.n_actions = 1;
  d.trajectories.push_back(Trajectory{{{0, 0, 1}, {1, 0, 2}}});
  d.trajectories.push_back(Trajectory{{{0, 0, 2}}});
  const TransitionTensor t = empirical_transitions(d);
  CHECK(t.by_action[0](0, 1) == doctest::Approx(0.5));
  CHECK(t.by_action[0](0, 2) == doctest::Approx(0.5));
  CHECK(t.by_action[0](1, 2) == 1.0);
  CHECK(t.by_action[0](2, 2) == 1.0);
  const Vector p0 = empirical_initial_distribution(d);
  CHECK(p0(0) == 1.0);
}

TEST_CASE("JSON-lines round trip") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TabularMdp m = testing::random_mdp(seed, 4, 3);
    SplitRng rng(seed);
    const DemonstrationSet d =
        rollout(m, testing::random_policy(rng, 4, 3), 1 + static_cast<int>(seed % 7),
                static_cast<int>(seed % 5), seed, Role::kBad);
    CHECK(dataset_from_jsonl(dataset_to_jsonl(d)).data == d);
  }
}

TEST_CASE("dataset files") {
  const auto dir = scratch_dir("datasets");
  const TabularMdp m = testing::random_mdp(1);
  const DemonstrationSet good = rollout(m, Policy::uniform(8, 3), 5, 3, 1, Role::kGood);

  SUBCASE("role mismatch with the file name only warns") {
    const auto path = (dir / "bad.jsonl").string();
    save_dataset(path, good);
    const LoadedDataset loaded = load_dataset(path);
    CHECK(loaded.data == good);
    REQUIRE(loaded.warnings.size() == 1);
    CHECK(loaded.warnings[0].find("good") != std::string::npos);
  }
  SUBCASE("matching role loads silently") {
    const auto path = (dir / "good.jsonl").string();
    save_dataset(path, good);
    CHECK(load_dataset(path).warnings.empty());
  }
  SUBCASE("truncated file names the broken line") {
    std::string text = dataset_to_jsonl(good);
    text.resize(text.size() - 10);
    try {
      dataset_from_jsonl(text, "cut.jsonl");
      FAIL("expected DataFormatError");
    } catch (const DataFormatError& e) {
      CHECK(e.line() == 4);
      CHECK(std::string(e.what()).find("cut.jsonl:4") != std::string::npos);
    }
  }
  SUBCASE("missing trajectories are reported") {
    std::string text = dataset_to_jsonl(good);
    text.resize(text.rfind('{'));
    CHECK_THROWS_AS(dataset_from_jsonl(text), DataFormatError);
  }
  SUBCASE("out-of-range steps are rejected") {
    std::string text = dataset_to_jsonl(good);
    const auto pos = text.find("[[");
    text.replace(pos, 3, "[[9");
    CHECK_THROWS_AS(dataset_from_jsonl(text), DataFormatError);
  }
  std::filesystem::remove_all(dir);
}
