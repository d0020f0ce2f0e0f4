#include "contradice/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "contradice/rng.hpp"
#include "json.hpp"

namespace contradice {

std::string to_string(Role role) {
  switch (role) {
    case Role::kGood: return "good";
    case Role::kBad: return "bad";
    case Role::kMix: return "mix";
    case Role::kUnion: return "union";
  }
  return "unknown";
}

Role role_from_string(const std::string& name) {
  if (name == "good") return Role::kGood;
  if (name == "bad") return Role::kBad;
  if (name == "mix") return Role::kMix;
  if (name == "union") return Role::kUnion;
  throw InvalidArgument("unknown dataset role '" + name + "'");
}

std::string to_string(OccupancyWeighting w) {
  return w == OccupancyWeighting::kDiscounted ? "discounted" : "uniform";
}

OccupancyWeighting weighting_from_string(const std::string& name) {
  if (name == "discounted") return OccupancyWeighting::kDiscounted;
  if (name == "uniform") return OccupancyWeighting::kUniform;
  throw InvalidArgument("unknown occupancy weighting '" + name + "'");
}

std::size_t DemonstrationSet::n_steps() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

DemonstrationSet rollout(const TabularMdp& mdp, const Policy& policy, int horizon, int n_traj,
                         std::uint64_t seed, Role role) {
  if (horizon < 1) throw InvalidArgument("rollout horizon must be at least 1");
  if (n_traj < 0) throw InvalidArgument("rollout count must be non-negative");
  if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions) {
    throw InvalidArgument("policy shape does not match the MDP");
  }
  DemonstrationSet out;
  out.role = role;
  out.seed = seed;
  out.n_states = mdp.n_states;
  out.n_actions = mdp.n_actions;
  out.mdp_hash = mdp_hash(mdp);
  out.trajectories.resize(n_traj);
  for (int i = 0; i < n_traj; ++i) {
    SplitRng rng(split_seed(seed, static_cast<std::uint64_t>(i)));
    Trajectory& traj = out.trajectories[i];
    traj.steps.reserve(horizon);
    int s = rng.categorical(mdp.p0);
    for (int t = 0; t < horizon; ++t) {
      const int a = rng.categorical(policy.probs.row(s));
      const int next = rng.categorical(mdp.transition.by_action[a].row(s));
      traj.steps.push_back(Step{s, a, next});
      s = next;
    }
  }
  return out;
}

namespace {

void check_same_shape(const DemonstrationSet& a, const DemonstrationSet& b) {
  if (a.n_states != b.n_states || a.n_actions != b.n_actions) {
    throw InvalidArgument("datasets come from MDPs of different shape");
  }
}

}  // namespace

DemonstrationSet concatenate(const DemonstrationSet& first, const DemonstrationSet& second) {
  check_same_shape(first, second);
  DemonstrationSet out = first;
  out.trajectories.insert(out.trajectories.end(), second.trajectories.begin(),
                          second.trajectories.end());
  if (out.mdp_hash != second.mdp_hash) out.mdp_hash = 0;
  return out;
}

DemonstrationSet build_union(const DemonstrationSet& good, const DemonstrationSet& mix) {
  DemonstrationSet out = concatenate(good, mix);
  out.role = Role::kUnion;
  out.seed = mix.seed;
  if (good.empty()) out.mdp_hash = mix.mdp_hash;
  return out;
}

Matrix weighted_counts(const DemonstrationSet& data, double gamma, OccupancyWeighting weighting) {
  Matrix counts = Matrix::Zero(data.n_states, data.n_actions);
  for (const auto& traj : data.trajectories) {
    double w = 1.0;
    for (const auto& step : traj.steps) {
      counts(step.state, step.action) += w;
      if (weighting == OccupancyWeighting::kDiscounted) w *= gamma;
    }
  }
  return counts;
}

EmpiricalEstimates empirical_occupancy(const DemonstrationSet& data, double gamma, double epsilon,
                                       OccupancyWeighting weighting) {
  if (!(epsilon > 0.0)) throw InvalidArgument("smoothing epsilon must be positive");
  if (data.n_steps() == 0) throw InvalidArgument("cannot estimate occupancy from an empty dataset");
  EmpiricalEstimates est;
  est.epsilon = epsilon;
  est.counts = weighted_counts(data, gamma, weighting);
  est.support_mask = (est.counts.array() > 0.0).matrix();
  const Matrix smoothed = est.counts.array() + epsilon;
  est.d_hat = smoothed / smoothed.sum();
  return est;
}

namespace {

Matrix conditional(const Matrix& counts, double epsilon) {
  const int n_actions = static_cast<int>(counts.cols());
  Matrix mu(counts.rows(), counts.cols());
  for (int s = 0; s < counts.rows(); ++s) {
    const double total = counts.row(s).sum();
    if (total <= 0.0) {
      mu.row(s).setConstant(1.0 / n_actions);
    } else {
      mu.row(s) = (counts.row(s).array() + epsilon) / (total + n_actions * epsilon);
    }
  }
  return mu;
}

}  // namespace

Matrix empirical_behavior_policy(const DemonstrationSet& data, double epsilon, double gamma,
                                 OccupancyWeighting weighting) {
  if (!(epsilon > 0.0)) throw InvalidArgument("smoothing epsilon must be positive");
  return conditional(weighted_counts(data, gamma, weighting), epsilon);
}

EmpiricalEstimates estimate(const DemonstrationSet& data, double gamma, double epsilon,
                            OccupancyWeighting weighting) {
  EmpiricalEstimates est = empirical_occupancy(data, gamma, epsilon, weighting);
  est.mu_hat = conditional(est.counts, epsilon);
  return est;
}

TransitionTensor empirical_transitions(const DemonstrationSet& data) {
  TransitionTensor out;
  out.by_action.assign(data.n_actions, Matrix::Zero(data.n_states, data.n_states));
  for (const auto& traj : data.trajectories) {
    for (const auto& step : traj.steps) out.by_action[step.action](step.state, step.next_state) += 1.0;
  }
  for (int a = 0; a < data.n_actions; ++a) {
    Matrix& t = out.by_action[a];
    for (int s = 0; s < data.n_states; ++s) {
      const double total = t.row(s).sum();
      if (total > 0.0) {
        t.row(s) /= total;
      } else {
        t(s, s) = 1.0;
      }
    }
  }
  return out;
}

Vector empirical_initial_distribution(const DemonstrationSet& data) {
  Vector p0 = Vector::Zero(data.n_states);
  int n = 0;
  for (const auto& traj : data.trajectories) {
    if (traj.steps.empty()) continue;
    p0(traj.steps.front().state) += 1.0;
    ++n;
  }
  if (n == 0) throw InvalidArgument("dataset has no non-empty trajectory");
  return p0 / n;
}

std::string dataset_to_jsonl(const DemonstrationSet& data) {
  std::ostringstream out;
  nlohmann::ordered_json header;
  header["role"] = to_string(data.role);
  header["seed"] = data.seed;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(data.mdp_hash));
  header["mdp_hash"] = hash;
  header["n_states"] = data.n_states;
  header["n_actions"] = data.n_actions;
  header["n_trajectories"] = data.trajectories.size();
  out << header.dump() << '\n';
  for (const auto& traj : data.trajectories) {
    out << "{\"steps\":[";
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
      const Step& st = traj.steps[i];
      if (i) out << ',';
      out << '[' << st.state << ',' << st.action << ',' << st.next_state << ']';
    }
    out << "]}\n";
  }
  return out.str();
}

LoadedDataset dataset_from_jsonl(const std::string& text, const std::string& source) {
  LoadedDataset loaded;
  DemonstrationSet& data = loaded.data;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::size_t expected = 0;
  auto fail = [&](const std::string& why) -> DataFormatError {
    return DataFormatError(source + ":" + std::to_string(line_no) + ": " + why, line_no);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw fail("malformed JSON");
    }
    try {
      if (line_no == 1) {
        data.role = role_from_string(doc.at("role").get<std::string>());
        data.seed = doc.at("seed").get<std::uint64_t>();
        data.mdp_hash = std::stoull(doc.at("mdp_hash").get<std::string>(), nullptr, 16);
        data.n_states = doc.at("n_states").get<int>();
        data.n_actions = doc.at("n_actions").get<int>();
        expected = doc.at("n_trajectories").get<std::size_t>();
        continue;
      }
      Trajectory traj;
      for (const auto& triple : doc.at("steps")) {
        if (!triple.is_array() || triple.size() != 3) throw fail("step is not an [s,a,s'] triple");
        Step st{triple[0].get<int>(), triple[1].get<int>(), triple[2].get<int>()};
        if (st.state < 0 || st.state >= data.n_states || st.next_state < 0 ||
            st.next_state >= data.n_states || st.action < 0 || st.action >= data.n_actions) {
          throw fail("step index out of range");
        }
        traj.steps.push_back(st);
      }
      data.trajectories.push_back(std::move(traj));
    } catch (const nlohmann::json::exception& e) {
      throw fail(std::string("missing or mistyped field: ") + e.what());
    } catch (const InvalidArgument& e) {
      throw fail(e.what());
    } catch (const std::invalid_argument&) {
      throw fail("mdp_hash is not hexadecimal");
    }
  }
  if (line_no == 0) throw DataFormatError(source + ": empty dataset file", 1);
  if (data.trajectories.size() != expected) {
    ++line_no;
    throw fail("expected " + std::to_string(expected) + " trajectories, found " +
               std::to_string(data.trajectories.size()));
  }
  return loaded;
}

void save_dataset(const std::string& path, const DemonstrationSet& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << dataset_to_jsonl(data);
  if (!out) throw Error("failed writing '" + path + "'");
}

LoadedDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  LoadedDataset loaded = dataset_from_jsonl(buf.str(), path);
  const std::string stem = std::filesystem::path(path).stem().string();
  for (Role r : {Role::kGood, Role::kBad, Role::kMix, Role::kUnion}) {
    if (stem == to_string(r) && r != loaded.data.role) {
      loaded.warnings.push_back("file '" + path + "' is named for role " + to_string(r) +
                                " but its header says " + to_string(loaded.data.role));
    }
  }
  return loaded;
}

}  // namespace contradice
