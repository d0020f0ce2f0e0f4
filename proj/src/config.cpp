#include "contradice/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace contradice {

namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "auto";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  // Prefer the shortest form that parses back to the same value.
  for (int precision = 1; precision <= 17; ++precision) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", precision, x);
    if (std::strtod(shorter, nullptr) == x) return shorter;
  }
  return buf;
}

double parse_double(const std::string& key, const std::string& value, bool allow_auto) {
  if (allow_auto && value == "auto") return kUnset;
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || std::isnan(x)) {
    throw UsageError("config key '" + key + "' expects a number, got '" + value + "'");
  }
  return x;
}

long long parse_integer(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw UsageError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return x;
}

int parse_int(const std::string& key, const std::string& value) {
  const long long x = parse_integer(key, value);
  if (x < -2147483647LL || x > 2147483647LL) {
    throw UsageError("config key '" + key + "' is out of range: " + value);
  }
  return static_cast<int>(x);
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!value.empty() && value[0] != '-') x = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw UsageError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("config key '" + key + "' expects true or false, got '" + value + "'");
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

struct Entry {
  ConfigKey doc;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Field>
Entry real_entry(std::string key, std::string help, Field field, bool allow_auto = false) {
  return {{key, allow_auto ? "real|auto" : "real", std::move(help)},
          [key, field, allow_auto](ExperimentConfig& c, const std::string& v) {
            field(c) = parse_double(key, v, allow_auto);
          },
          [field](const ExperimentConfig& c) {
            return format_double(field(c));
          }};
}

template <typename Field>
Entry int_entry(std::string key, std::string help, Field field) {
  return {{key, "integer", std::move(help)},
          [key, field](ExperimentConfig& c, const std::string& v) { field(c) = parse_int(key, v); },
          [field](const ExperimentConfig& c) {
            return std::to_string(field(c));
          }};
}

template <typename Field>
Entry bool_entry(std::string key, std::string help, Field field) {
  return {{key, "bool", std::move(help)},
          [key, field](ExperimentConfig& c, const std::string& v) { field(c) = parse_bool(key, v); },
          [field](const ExperimentConfig& c) {
            return std::string(field(c) ? "true" : "false");
          }};
}

template <typename Field>
Entry text_entry(std::string key, std::string help, Field field) {
  return {{key, "text", std::move(help)},
          [field](ExperimentConfig& c, const std::string& v) { field(c) = v; },
          [field](const ExperimentConfig& c) { return field(c); }};
}

const std::vector<Entry>& entries() {
  using C = ExperimentConfig;
  static const std::vector<Entry> table = {
      text_entry("name", "run name; outputs go to <out>/<name>", [](auto& c) -> auto& { return c.name; }),
      {{"env", "gridworld|random", "environment family"},
       [](C& c, const std::string& v) {
         if (v != "gridworld" && v != "random") {
           throw UsageError("config key 'env' expects gridworld or random, got '" + v + "'");
         }
         c.env = v;
       },
       [](const C& c) { return c.env; }},
      {{"tasks", "list", "comma-separated layout names (corner, ring) or literal layouts; MDP seeds for env = random"},
       [](C& c, const std::string& v) {
         c.tasks = parse_list(v);
         if (c.tasks.empty()) throw UsageError("config key 'tasks' needs at least one entry");
       },
       [](const C& c) { return join(c.tasks); }},
      real_entry("slip", "gridworld probability of a uniformly random move", [](auto& c) -> auto& { return c.slip; }),
      real_entry("goal_reward", "reward for entering a goal cell", [](auto& c) -> auto& { return c.goal_reward; }),
      real_entry("trap_reward", "reward for entering a trap cell", [](auto& c) -> auto& { return c.trap_reward; }),
      real_entry("step_cost", "cost of each action in a non-absorbing cell", [](auto& c) -> auto& { return c.step_cost; }),
      int_entry("random_states", "states of a random MDP", [](auto& c) -> auto& { return c.random_states; }),
      int_entry("random_actions", "actions of a random MDP", [](auto& c) -> auto& { return c.random_actions; }),
      int_entry("random_branching", "successors per pair of a random MDP", [](auto& c) -> auto& { return c.random_branching; }),
      real_entry("beta_good", "temperature of the expert policy", [](auto& c) -> auto& { return c.beta_good; }),
      real_entry("beta_bad", "temperature of the bad policy", [](auto& c) -> auto& { return c.beta_bad; }),
      int_entry("horizon", "steps per trajectory", [](auto& c) -> auto& { return c.horizon; }),
      int_entry("n_good", "expert trajectories in the good set", [](auto& c) -> auto& { return c.n_good; }),
      int_entry("n_bad", "bad trajectories in the bad set", [](auto& c) -> auto& { return c.n_bad; }),
      int_entry("n_mix_bad", "bad trajectories in the unlabeled set", [](auto& c) -> auto& { return c.n_mix_bad; }),
      int_entry("n_mix_expert", "expert trajectories in the unlabeled set", [](auto& c) -> auto& { return c.n_mix_expert; }),
      {{"seed", "integer", "first seed; seeds are seed, seed+1, ..."},
       [](C& c, const std::string& v) { c.seed = parse_seed("seed", v); },
       [](const C& c) { return std::to_string(c.seed); }},
      int_entry("seeds", "number of seeds", [](auto& c) -> auto& { return c.n_seeds; }),
      {{"mode", "text", "surrogate|clipped_exp|alpha_one_rl|large_alpha|bc_mix|bc_good"},
       [](C& c, const std::string& v) {
         check_run_mode(v);
         c.mode = v;
       },
       [](const C& c) { return c.mode; }},
      bool_entry("exact_psi", "Psi from true occupancies instead of discriminators", [](auto& c) -> auto& { return c.exact_psi; }),
      bool_entry("known_model", "true transitions and p0 instead of empirical ones", [](auto& c) -> auto& { return c.known_model; }),
      text_entry("data_dir", "load datasets from <data_dir>/<task>/ instead of generating them", [](auto& c) -> auto& { return c.data_dir; }),
      real_entry("alpha", "weight of the bad-data term", [](auto& c) -> auto& { return c.train.alpha; }),
      real_entry("beta", "soft-value temperature", [](auto& c) -> auto& { return c.train.beta; }),
      real_entry("gamma", "discount factor", [](auto& c) -> auto& { return c.train.gamma; }),
      real_entry("tau", "target update rate", [](auto& c) -> auto& { return c.train.tau; }),
      real_entry("lr_q", "Q step size", [](auto& c) -> auto& { return c.train.lr_q; }),
      real_entry("lr_v", "V step size", [](auto& c) -> auto& { return c.train.lr_v; }),
      real_entry("lr_pi", "policy step size (recorded only; extraction is closed form)", [](auto& c) -> auto& { return c.train.lr_pi; }),
      real_entry("lr_disc", "discriminator step size", [](auto& c) -> auto& { return c.train.lr_disc; }),
      int_entry("steps_disc", "discriminator gradient steps", [](auto& c) -> auto& { return c.train.steps_disc; }),
      int_entry("steps_main", "Q/V steps", [](auto& c) -> auto& { return c.train.steps_main; }),
      real_entry("epsilon", "count smoothing", [](auto& c) -> auto& { return c.train.epsilon; }),
      real_entry("clip_lo", "lower Psi clip", [](auto& c) -> auto& { return c.train.clip_lo; }, true),
      real_entry("clip_hi", "upper Psi clip", [](auto& c) -> auto& { return c.train.clip_hi; }, true),
      real_entry("exp_clip_lo", "lower exponent clip in clipped_exp mode", [](auto& c) -> auto& { return c.train.exp_clip_lo; }),
      real_entry("exp_clip_hi", "upper exponent clip in clipped_exp mode", [](auto& c) -> auto& { return c.train.exp_clip_hi; }),
      {{"occupancy_weighting", "discounted|uniform", "visitation weighting of the empirical occupancy"},
       [](C& c, const std::string& v) {
         try {
           c.train.occupancy_weighting = weighting_from_string(v);
         } catch (const InvalidArgument& e) {
           throw UsageError(std::string("config key 'occupancy_weighting': ") + e.what());
         }
       },
       [](const C& c) { return to_string(c.train.occupancy_weighting); }},
      {{"discriminator_input", "state_action|state", "discriminator features"},
       [](C& c, const std::string& v) {
         try {
           c.train.discriminator_input = discriminator_input_from_string(v);
         } catch (const InvalidArgument& e) {
           throw UsageError(std::string("config key 'discriminator_input': ") + e.what());
         }
       },
       [](const C& c) { return to_string(c.train.discriminator_input); }},
      bool_entry("exact_v_solve", "replace the V step by its closed-form minimizer", [](auto& c) -> auto& { return c.train.exact_v_solve; }),
      bool_entry("preconditioned", "divide Q/V steps by the union weights", [](auto& c) -> auto& { return c.train.preconditioned; }),
      real_entry("chi2_weight", "weight of the chi-square residual penalty", [](auto& c) -> auto& { return c.train.chi2_weight; }),
      bool_entry("chi2_target_v", "residual uses the soft value of the target Q", [](auto& c) -> auto& { return c.train.chi2_target_v; }),
      int_entry("log_every", "steps between metric records (0 disables)", [](auto& c) -> auto& { return c.train.log_every; }),
      real_entry("alpha_one_pin", "Q value of unseen actions in alpha_one_rl mode", [](auto& c) -> auto& { return c.train.alpha_one_pin; }, true),
      real_entry("alpha_one_tolerance", "stopping tolerance of alpha_one_rl mode", [](auto& c) -> auto& { return c.train.alpha_one_tolerance; }),
  };
  return table;
}

const Entry* find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.doc.key == key) return &e;
  }
  return nullptr;
}

}  // namespace

bool is_baseline_mode(const std::string& mode) { return mode == "bc_mix" || mode == "bc_good"; }

void check_run_mode(const std::string& mode) {
  if (is_baseline_mode(mode)) return;
  try {
    train_mode_from_string(mode);
  } catch (const InvalidArgument&) {
    throw UsageError("unknown mode '" + mode +
                     "' (expected surrogate, clipped_exp, alpha_one_rl, large_alpha, bc_mix or bc_good)");
  }
}

void ExperimentConfig::validate() const {
  check_run_mode(mode);
  if (tasks.empty()) throw UsageError("no tasks configured");
  if (n_seeds < 1) throw UsageError("seeds must be at least 1");
  if (horizon < 1) throw UsageError("horizon must be at least 1");
  if (n_good < 1) throw UsageError("n_good must be at least 1");
  if (n_bad < 0 || n_mix_bad < 0 || n_mix_expert < 0) {
    throw UsageError("trajectory counts must be non-negative");
  }
  if (n_mix_bad + n_mix_expert < 1) throw UsageError("the unlabeled set needs at least one trajectory");
  if (!(beta_good > 0.0) || !(beta_bad > 0.0)) throw UsageError("generator temperatures must be positive");
  if (!(slip >= 0.0 && slip <= 1.0)) throw UsageError("slip must lie in [0, 1]");
  if (env == "random") {
    if (random_states < 1 || random_actions < 1 || random_branching < 1) {
      throw UsageError("random MDP sizes must be positive");
    }
    for (const auto& t : tasks) parse_seed("tasks", t);
  }
  TrainConfig checked = train;
  if (!is_baseline_mode(mode)) checked.mode = train_mode_from_string(mode);
  try {
    checked.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.doc);
    return out;
  }();
  return keys;
}

std::string config_help() {
  const ExperimentConfig defaults;
  std::ostringstream out;
  out << "Config file keys (key = value, '#' comments):\n";
  for (const auto& e : entries()) {
    char line[512];
    std::snprintf(line, sizeof line, "  %-20s %-18s %s [%s]\n", e.doc.key.c_str(),
                  e.doc.type.c_str(), e.doc.help.c_str(), e.get(defaults).c_str());
    out << line;
  }
  return out.str();
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const Entry* entry = find_entry(key);
  if (!entry) throw UsageError("unknown config key '" + key + "'");
  entry->set(config, value);
  if (key == "mode" && !is_baseline_mode(value)) config.train.mode = train_mode_from_string(value);
}

std::string get_setting(const ExperimentConfig& config, const std::string& key) {
  const Entry* entry = find_entry(key);
  if (!entry) throw UsageError("unknown config key '" + key + "'");
  return entry->get(config);
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig config;
  std::vector<std::string> unknown;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      problems.push_back(where + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!find_entry(key)) {
      unknown.push_back(key);
      continue;
    }
    if (!seen.insert(key).second) {
      problems.push_back(where + ": duplicate key '" + key + "'");
      continue;
    }
    try {
      apply_setting(config, key, value);
    } catch (const UsageError& e) {
      problems.push_back(where + ": " + e.what());
    }
  }
  if (!unknown.empty()) problems.insert(problems.begin(), source + ": unknown config keys: " + join(unknown));
  if (!problems.empty()) {
    std::string msg;
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "\n" : "") + problems[i];
    throw UsageError(msg);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

std::string config_to_text(const ExperimentConfig& config) {
  std::ostringstream out;
  for (const auto& e : entries()) out << e.doc.key << " = " << e.get(config) << '\n';
  return out.str();
}

}  // namespace contradice
