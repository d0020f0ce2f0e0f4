#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "contradice/config.hpp"

using namespace contradice;

TEST_CASE("defaults describe the trap-gridworld suite") {
  const ExperimentConfig c;
  CHECK(c.tasks == std::vector<std::string>{"corner", "ring"});
  CHECK(c.n_good == 1);
  CHECK(c.n_bad == 10);
  CHECK(c.n_mix_expert == 5);
  CHECK(c.n_seeds == 5);
  CHECK(c.train.alpha == 0.5);
  CHECK(c.train.beta == 5.0);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("parsing key = value text") {
  const ExperimentConfig c = parse_config(
      "# comment line\n"
      "name = probe   # trailing comment\n"
      "tasks = corner\n"
      "alpha = 0.3\n"
      "steps_main = 1000\n"
      "exact_psi = true\n"
      "occupancy_weighting = uniform\n"
      "\n");
  CHECK(c.name == "probe");
  CHECK(c.tasks == std::vector<std::string>{"corner"});
  CHECK(c.train.alpha == 0.3);
  CHECK(c.train.steps_main == 1000);
  CHECK(c.exact_psi);
  CHECK(c.train.occupancy_weighting == OccupancyWeighting::kUniform);
}

TEST_CASE("every problem is reported at once") {
  try {
    parse_config("alpah = 0.5\nfoo = 1\nbeta = fast\nbeta = 2\nnot a pair\n", "bad.cfg");
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("alpah") != std::string::npos);
    CHECK(msg.find("foo") != std::string::npos);
    CHECK(msg.find("bad.cfg:3") != std::string::npos);
    CHECK(msg.find("duplicate key 'beta'") != std::string::npos);
    CHECK(msg.find("bad.cfg:5") != std::string::npos);
  }
}

TEST_CASE("cross-field checks") {
  CHECK_THROWS_AS(parse_config("alpha = 1.0\n"), UsageError);
  CHECK_NOTHROW(parse_config("alpha = 1.0\nmode = alpha_one_rl\n"));
  CHECK_NOTHROW(parse_config("alpha = 2.0\nmode = large_alpha\n"));
  CHECK_THROWS_AS(parse_config("mode = adversarial\n"), UsageError);
  CHECK_THROWS_AS(parse_config("seeds = 0\n"), UsageError);
  CHECK_THROWS_AS(parse_config("n_mix_bad = 0\nn_mix_expert = 0\n"), UsageError);
  CHECK_THROWS_AS(parse_config("env = mujoco\n"), UsageError);
  CHECK_THROWS_AS(parse_config("steps_main = 1.5\n"), UsageError);
  CHECK_THROWS_AS(load_config("/nonexistent/contradice.cfg"), UsageError);
}

TEST_CASE("baseline modes keep the trainer mode") {
  ExperimentConfig c;
  apply_setting(c, "mode", "bc_mix");
  CHECK(c.mode == "bc_mix");
  CHECK(c.train.mode == TrainMode::kSurrogate);
  CHECK(is_baseline_mode("bc_good"));
  CHECK_FALSE(is_baseline_mode("surrogate"));
  apply_setting(c, "mode", "clipped_exp");
  CHECK(c.train.mode == TrainMode::kClippedExp);
}

TEST_CASE("text round trip reproduces the config") {
  ExperimentConfig c;
  c.name = "round_trip";
  c.tasks = {"ring", "....G/...../..S../...../T...T"};
  c.train.alpha = 0.1 + 0.2;  // not exactly representable in short form
  c.train.clip_hi = 2.5;
  c.train.lr_disc = 1.0 / 3.0;
  c.seed = 12345678901234ULL;
  const ExperimentConfig back = parse_config(config_to_text(c));
  CHECK(config_to_text(back) == config_to_text(c));
  CHECK(back.train.alpha == c.train.alpha);
  CHECK(back.train.lr_disc == c.train.lr_disc);
  CHECK(std::isnan(back.train.clip_lo));
  CHECK(back.tasks == c.tasks);
  CHECK(back.seed == c.seed);
}

TEST_CASE("key documentation") {
  CHECK(config_keys().size() > 40);
  const std::string help = config_help();
  for (const auto& k : config_keys()) CHECK(help.find(k.key) != std::string::npos);
  CHECK(get_setting(ExperimentConfig{}, "clip_lo") == "auto");
  CHECK_THROWS_AS(get_setting(ExperimentConfig{}, "nope"), UsageError);
}
