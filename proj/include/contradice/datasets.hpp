#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contradice/mdp.hpp"

namespace contradice {

/// Malformed dataset input; `line()` is 1-based.
class DataFormatError : public Error {
 public:
  DataFormatError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct Step {
  int state = 0;
  int action = 0;
  int next_state = 0;
  bool operator==(const Step&) const = default;
};

struct Trajectory {
  std::vector<Step> steps;
  bool operator==(const Trajectory&) const = default;
};

enum class Role { kGood, kBad, kMix, kUnion };

std::string to_string(Role role);
Role role_from_string(const std::string& name);

struct DemonstrationSet {
  std::vector<Trajectory> trajectories;
  Role role = Role::kGood;
  std::uint64_t seed = 0;
  int n_states = 0;
  int n_actions = 0;
  std::uint64_t mdp_hash = 0;  // 0 when the generating MDP is unknown

  bool empty() const { return trajectories.empty(); }
  std::size_t n_steps() const;
  bool operator==(const DemonstrationSet&) const = default;
};

enum class OccupancyWeighting { kDiscounted, kUniform };

std::string to_string(OccupancyWeighting w);
OccupancyWeighting weighting_from_string(const std::string& name);

struct EmpiricalEstimates {
  Matrix counts;  // weighted visitation counts before smoothing
  Matrix d_hat;   // smoothed occupancy, sums to one
  Matrix mu_hat;  // smoothed conditional behavior policy
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> support_mask;
  double epsilon = 0.0;
};

/// `n_traj` trajectories of exactly `horizon` steps. Trajectory i draws from a
/// generator seeded with split_seed(seed, i), so output depends only on the inputs.
DemonstrationSet rollout(const TabularMdp& mdp, const Policy& policy, int horizon, int n_traj,
                         std::uint64_t seed, Role role = Role::kGood);

/// Concatenation of `good` then `mix`, tagged UNION.
DemonstrationSet build_union(const DemonstrationSet& good, const DemonstrationSet& mix);

/// Concatenation that keeps the role of `first`; used to assemble MIX.
DemonstrationSet concatenate(const DemonstrationSet& first, const DemonstrationSet& second);

/// Per-pair visitation weights: gamma^t for discounted weighting, 1 for uniform.
Matrix weighted_counts(const DemonstrationSet& data, double gamma, OccupancyWeighting weighting);

/// d_hat(s,a) proportional to count(s,a) + epsilon. Fills counts, d_hat,
/// support_mask and epsilon.
EmpiricalEstimates empirical_occupancy(const DemonstrationSet& data, double gamma, double epsilon,
                                       OccupancyWeighting weighting = OccupancyWeighting::kDiscounted);

/// mu_hat(a|s) = (count(s,a) + eps) / (count(s) + A eps); unvisited states are uniform.
Matrix empirical_behavior_policy(const DemonstrationSet& data, double epsilon, double gamma = 1.0,
                                 OccupancyWeighting weighting = OccupancyWeighting::kUniform);

/// Both halves at once, with consistent weighting. mu_hat equals the
/// conditional of d_hat.
EmpiricalEstimates estimate(const DemonstrationSet& data, double gamma, double epsilon,
                            OccupancyWeighting weighting = OccupancyWeighting::kDiscounted);

/// Maximum-likelihood transitions from observed (s, a, s'); unseen pairs self-loop.
TransitionTensor empirical_transitions(const DemonstrationSet& data);

/// Distribution of the first state of each trajectory.
Vector empirical_initial_distribution(const DemonstrationSet& data);

// JSON-lines persistence: one header line, then {"steps":[[s,a,s'],...]} per trajectory.
std::string dataset_to_jsonl(const DemonstrationSet& data);

struct LoadedDataset {
  DemonstrationSet data;
  std::vector<std::string> warnings;
};

/// Parses JSON-lines text. `source` names the input in error messages.
LoadedDataset dataset_from_jsonl(const std::string& text, const std::string& source = "<memory>");

void save_dataset(const std::string& path, const DemonstrationSet& data);

/// Warns (does not fail) when the header role disagrees with a file named
/// good/bad/mix/union.jsonl.
LoadedDataset load_dataset(const std::string& path);

}  // namespace contradice
