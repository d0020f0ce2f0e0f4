#include "contradice/environments.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "contradice/rng.hpp"

namespace contradice {

namespace {

CellKind parse_cell(char c) {
  switch (c) {
    case '.': return CellKind::kFree;
    case 'S': return CellKind::kStart;
    case 'G': return CellKind::kGoal;
    case 'T': return CellKind::kTrap;
    case '#': return CellKind::kWall;
    default: throw InvalidArgument(std::string("unknown gridworld cell '") + c + "'");
  }
}

bool absorbing(CellKind k) { return k == CellKind::kGoal || k == CellKind::kTrap; }

}  // namespace

Gridworld make_gridworld(const GridworldSpec& spec) {
  std::vector<std::string> rows;
  std::string current;
  for (char c : spec.layout) {
    if (c == '/') {
      rows.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  rows.push_back(current);
  const int height = static_cast<int>(rows.size());
  const int width = static_cast<int>(rows.front().size());
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != width) throw InvalidArgument("gridworld rows differ in length");
  }
  if (spec.slip < 0.0 || spec.slip > 1.0) throw InvalidArgument("slip must lie in [0, 1]");

  Gridworld grid;
  grid.width = width;
  grid.height = height;
  for (const auto& r : rows) {
    for (char c : r) grid.cells.push_back(parse_cell(c));
  }
  const int n = width * height;
  constexpr int kActions = 4;
  constexpr int kDr[kActions] = {-1, 0, 1, 0};
  constexpr int kDc[kActions] = {0, 1, 0, -1};

  TabularMdp& mdp = grid.mdp;
  mdp.n_states = n;
  mdp.n_actions = kActions;
  mdp.gamma = spec.gamma;
  mdp.transition.by_action.assign(kActions, Matrix::Zero(n, n));
  mdp.reward = Matrix::Zero(n, kActions);
  mdp.p0 = Vector::Zero(n);

  auto move = [&](int s, int dir) {
    const int r = s / width + kDr[dir];
    const int c = s % width + kDc[dir];
    if (r < 0 || r >= height || c < 0 || c >= width) return s;
    const int t = r * width + c;
    return grid.cells[t] == CellKind::kWall ? s : t;
  };

  int n_start = 0;
  for (int s = 0; s < n; ++s) {
    if (grid.cells[s] == CellKind::kStart) ++n_start;
  }
  if (n_start == 0) throw InvalidArgument("gridworld layout needs at least one 'S' cell");

  for (int s = 0; s < n; ++s) {
    const CellKind kind = grid.cells[s];
    if (kind == CellKind::kStart) mdp.p0(s) = 1.0 / n_start;
    for (int a = 0; a < kActions; ++a) {
      Matrix& t = mdp.transition.by_action[a];
      if (absorbing(kind) || kind == CellKind::kWall) {
        t(s, s) = 1.0;
        continue;
      }
      t(s, move(s, a)) += 1.0 - spec.slip;
      for (int dir = 0; dir < kActions; ++dir) t(s, move(s, dir)) += spec.slip / kActions;
      double r = -spec.step_cost;
      for (int sp = 0; sp < n; ++sp) {
        if (t(s, sp) == 0.0) continue;
        if (grid.cells[sp] == CellKind::kGoal) r += t(s, sp) * spec.goal_reward;
        if (grid.cells[sp] == CellKind::kTrap) r += t(s, sp) * spec.trap_reward;
      }
      mdp.reward(s, a) = r;
    }
  }
  mdp.validate();
  return grid;
}

TabularMdp make_random_mdp(const RandomMdpSpec& spec) {
  if (spec.n_states <= 0 || spec.n_actions <= 0 || spec.branching <= 0) {
    throw InvalidArgument("random MDP sizes must be positive");
  }
  SplitRng rng(spec.seed);
  TabularMdp mdp;
  mdp.n_states = spec.n_states;
  mdp.n_actions = spec.n_actions;
  mdp.gamma = spec.gamma;
  mdp.transition.by_action.assign(spec.n_actions, Matrix::Zero(spec.n_states, spec.n_states));
  mdp.reward = Matrix::Zero(spec.n_states, spec.n_actions);
  const int branching = std::min(spec.branching, spec.n_states);
  std::vector<int> order(spec.n_states);
  for (int s = 0; s < spec.n_states; ++s) {
    for (int a = 0; a < spec.n_actions; ++a) {
      for (int i = 0; i < spec.n_states; ++i) order[i] = i;
      // Partial Fisher-Yates for `branching` distinct successors.
      double norm = 0.0;
      std::vector<double> w(branching);
      for (int k = 0; k < branching; ++k) {
        const int j = k + static_cast<int>(rng.uniform() * (spec.n_states - k));
        std::swap(order[k], order[std::min(j, spec.n_states - 1)]);
        w[k] = -std::log(1.0 - rng.uniform());  // Exp(1) gives a flat Dirichlet
        norm += w[k];
      }
      for (int k = 0; k < branching; ++k) mdp.transition.by_action[a](s, order[k]) += w[k] / norm;
      mdp.reward(s, a) = rng.uniform();
    }
  }
  mdp.p0 = Vector::Zero(spec.n_states);
  for (int s = 0; s < spec.n_states; ++s) mdp.p0(s) = 0.1 + rng.uniform();
  mdp.p0 /= mdp.p0.sum();
  // Renormalize rows so they sum to one within the 1e-12 invariant.
  for (auto& t : mdp.transition.by_action) {
    for (int s = 0; s < spec.n_states; ++s) t.row(s) /= t.row(s).sum();
  }
  mdp.validate();
  return mdp;
}

Policy good_policy(const TabularMdp& mdp, double beta_gen) {
  return soft_value_iteration(mdp, mdp.reward, beta_gen).policy;
}

Policy bad_policy(const TabularMdp& mdp, double beta_gen) {
  return soft_value_iteration(mdp, -mdp.reward, beta_gen).policy;
}

const std::vector<NamedLayout>& trap_gridworld_suite() {
  static const std::vector<NamedLayout> suite{
      {"corner", "....G/...../..S../...../TT..."},
      {"ring", "T...G/...../..S../...../T...T"},
  };
  return suite;
}

std::string resolve_layout(const std::string& name_or_layout) {
  if (name_or_layout.find('/') != std::string::npos) return name_or_layout;
  for (const auto& entry : trap_gridworld_suite()) {
    if (entry.name == name_or_layout) return entry.layout;
  }
  throw InvalidArgument("unknown gridworld layout '" + name_or_layout + "'");
}

}  // namespace contradice
