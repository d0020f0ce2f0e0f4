#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contradice/mdp.hpp"

namespace contradice {

/// Grid layout rows separated by '/'. Cells: '.' free, 'S' start, 'G' goal,
/// 'T' trap, '#' wall. Goals and traps are absorbing with zero reward after entry.
struct GridworldSpec {
  std::string layout = "....G/...../..S../...../TT...";
  double slip = 0.1;          // probability mass spread uniformly over all four moves
  double goal_reward = 1.0;   // paid on entering a goal cell
  double trap_reward = -1.0;  // paid on entering a trap cell
  double step_cost = 0.01;    // paid by every action taken in a non-absorbing cell
  double gamma = 0.9;
};

struct NamedLayout {
  std::string name;
  std::string layout;
};

/// The trap-gridworld suite: "corner" (traps along the bottom-left edge) and
/// "ring" (traps in the three corners away from the goal).
const std::vector<NamedLayout>& trap_gridworld_suite();

/// Layout string for a suite name; strings containing '/' pass through.
/// Throws InvalidArgument for an unknown name.
std::string resolve_layout(const std::string& name_or_layout);

enum class CellKind { kFree, kStart, kGoal, kTrap, kWall };

struct Gridworld {
  TabularMdp mdp;
  int width = 0;
  int height = 0;
  std::vector<CellKind> cells;  // row-major, one per state
};

/// Actions are 0 = up, 1 = right, 2 = down, 3 = left.
Gridworld make_gridworld(const GridworldSpec& spec);

struct RandomMdpSpec {
  int n_states = 8;
  int n_actions = 3;
  int branching = 3;  // next states per (s, a)
  double gamma = 0.9;
  std::uint64_t seed = 0;
};

/// Random MDP with sparse Dirichlet-like rows, uniform rewards in [0,1] and a
/// random full-support initial distribution.
TabularMdp make_random_mdp(const RandomMdpSpec& spec);

/// Soft-optimal policy on the true reward at temperature `beta_gen`.
Policy good_policy(const TabularMdp& mdp, double beta_gen);

/// Soft-optimal policy on the negated reward at temperature `beta_gen`.
Policy bad_policy(const TabularMdp& mdp, double beta_gen);

}  // namespace contradice
