#include "contradice/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "contradice/environments.hpp"
#include "contradice/objectives.hpp"
#include "contradice/ratios.hpp"
#include "contradice/rng.hpp"
#include "contradice/trainer.hpp"

namespace contradice {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Running maximum of one check; NaN is recorded as +inf.
class CheckTracker {
 public:
  CheckTracker(std::string name, double tolerance) {
    check_.name = std::move(name);
    check_.tolerance = tolerance;
    check_.max_violation = -kInf;
  }

  void observe(double violation, const json& context) {
    if (std::isnan(violation)) violation = kInf;
    if (violation > check_.max_violation || check_.worst_case.empty()) {
      check_.max_violation = violation;
      check_.worst_case = context.dump();
    }
  }

  ProbeCheck finish() const {
    ProbeCheck out = check_;
    if (out.worst_case.empty()) {
      out.max_violation = 0.0;
      out.worst_case = "{}";
    }
    out.passed = std::isfinite(out.max_violation) && out.max_violation <= out.tolerance;
    return out;
  }

 private:
  ProbeCheck check_;
};

ProbeReport make_report(std::string name, int n_trials, std::vector<ProbeCheck> checks) {
  ProbeReport report;
  report.name = std::move(name);
  report.n_trials = n_trials;
  report.checks = std::move(checks);
  report.passed = std::all_of(report.checks.begin(), report.checks.end(),
                              [](const ProbeCheck& c) { return c.passed; });
  return report;
}

double uniform_in(SplitRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Matrix uniform_matrix(SplitRng& rng, int rows, int cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = uniform_in(rng, lo, hi);
  }
  return m;
}

Vector uniform_vector(SplitRng& rng, int n, double lo, double hi) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform_in(rng, lo, hi);
  return v;
}

// Rows drawn from Dirichlet(1), then mixed with uniform by `floor_mix` so every
// entry is at least floor_mix / n_actions.
Matrix random_stochastic_rows(SplitRng& rng, int rows, int cols, double floor_mix) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = -std::log(1.0 - rng.uniform());
    m.row(i) /= m.row(i).sum();
    m.row(i) = (1.0 - floor_mix) * m.row(i).array() + floor_mix / cols;
  }
  return m;
}

Matrix random_occupancy(const TabularMdp& mdp, SplitRng& rng) {
  Policy pi{random_stochastic_rows(rng, mdp.n_states, mdp.n_actions, 0.05)};
  return occupancy_of_policy(mdp, pi).d;
}

TabularMdp probe_mdp(int n_states, int n_actions, std::uint64_t seed) {
  RandomMdpSpec spec;
  spec.n_states = n_states;
  spec.n_actions = n_actions;
  spec.branching = std::min(3, n_states);
  spec.seed = seed;
  return make_random_mdp(spec);
}

Matrix conditional(const Matrix& d) {
  Matrix out = d;
  for (int s = 0; s < d.rows(); ++s) {
    const double total = d.row(s).sum();
    if (total > 0.0) out.row(s) /= total;
  }
  return out;
}

Matrix psi_from_occupancies(const Matrix& d_g, const Matrix& d_b, const Matrix& d_u, double alpha,
                            const Formulas& fx) {
  Matrix psi(d_u.rows(), d_u.cols());
  for (int s = 0; s < d_u.rows(); ++s) {
    for (int a = 0; a < d_u.cols(); ++a) {
      psi(s, a) = fx.psi(std::log(d_g(s, a) / d_u(s, a)), std::log(d_b(s, a) / d_u(s, a)), alpha);
    }
  }
  return psi;
}

double relative(double diff, double scale) { return std::abs(diff) / std::max(1.0, std::abs(scale)); }

}  // namespace

double ProbeReport::max_violation() const {
  double worst = -kInf;
  for (const auto& c : checks) {
    const double v = c.tolerance > 0.0 ? c.max_violation / c.tolerance : c.max_violation;
    worst = std::max(worst, std::isnan(v) ? kInf : v);
  }
  return checks.empty() ? 0.0 : worst;
}

std::string ProbeReport::worst_case() const {
  for (const auto& c : checks) {
    if (!c.passed) return c.worst_case;
  }
  return checks.empty() ? "{}" : checks.front().worst_case;
}

ProbeReport probe_reformulation(int n_trials, std::uint64_t seed, const Formulas& fx) {
  CheckTracker identity("f_equals_reformulation", 1e-10);
  for (int trial = 0; trial < n_trials; ++trial) {
    SplitRng rng(split_seed(seed, trial));
    const TabularMdp mdp = probe_mdp(6, 3, split_seed(seed, 1000 + trial));
    const Matrix d = random_occupancy(mdp, rng);
    const Matrix d_g = random_occupancy(mdp, rng);
    const Matrix d_b = random_occupancy(mdp, rng);
    const Matrix d_u = random_occupancy(mdp, rng);
    const double alpha = rng.uniform();
    const Matrix psi = psi_from_occupancies(d_g, d_b, d_u, alpha, fx);
    const double lhs = f_objective(d, d_g, d_b, alpha);
    const double rhs = f_reformulated(d, d_u, psi, alpha, fx);
    identity.observe(std::abs(lhs - rhs), {{"trial", trial}, {"alpha", alpha}, {"f", lhs},
                                           {"reformulated", rhs}});
  }
  return make_report("reformulation", n_trials, {identity.finish()});
}

ProbeReport probe_convexity(const std::vector<double>& alphas, int n_segments, std::uint64_t seed,
                            const Formulas& fx) {
  constexpr int kLambdas = 9;
  constexpr double kCounterexampleGap = 1e-6;
  CheckTracker convex("f_convex_for_alpha_le_1", 1e-9);
  CheckTracker counterexample("f_nonconvex_for_alpha_gt_1", 0.0);
  CheckTracker convex_q("surrogate_q_convex", 1e-9);
  bool any_large_alpha = false;

  for (double alpha : alphas) {
    // Largest gap seen per form; each form needs its own counterexample.
    double best_direct = -kInf;
    double best_reformulated = -kInf;
    for (int seg = 0; seg < n_segments; ++seg) {
      SplitRng rng(split_seed(seed, seg));
      const TabularMdp mdp = probe_mdp(5, 3, split_seed(seed, 5000 + seg));
      const Matrix d1 = random_occupancy(mdp, rng);
      const Matrix d2 = random_occupancy(mdp, rng);
      const Matrix d_g = random_occupancy(mdp, rng);
      const Matrix d_b = random_occupancy(mdp, rng);
      const Matrix d_u = random_occupancy(mdp, rng);
      const Matrix psi = psi_from_occupancies(d_g, d_b, d_u, alpha, fx);
      const double gap_direct = convexity_probe(
          [&](const Matrix& d) { return f_objective(d, d_g, d_b, alpha); }, d1, d2, kLambdas);
      const double gap_reformulated = convexity_probe(
          [&](const Matrix& d) { return f_reformulated(d, d_u, psi, alpha, fx); }, d1, d2, kLambdas);
      if (alpha <= 1.0) {
        convex.observe(std::max(gap_direct, gap_reformulated),
                       {{"alpha", alpha}, {"segment", seg}, {"gap_f", gap_direct},
                        {"gap_reformulated", gap_reformulated}});
      }
      best_direct = std::max(best_direct, gap_direct);
      best_reformulated = std::max(best_reformulated, gap_reformulated);
    }
    if (alpha > 1.0) {
      any_large_alpha = true;
      const double weakest = std::min(best_direct, best_reformulated);
      const double shortfall = weakest > kCounterexampleGap ? 0.0 : kCounterexampleGap - weakest;
      counterexample.observe(shortfall, {{"alpha", alpha}, {"largest_gap_f", best_direct},
                                         {"largest_gap_reformulated", best_reformulated}});
    }
  }

  for (int seg = 0; seg < n_segments; ++seg) {
    SplitRng rng(split_seed(seed, 20000 + seg));
    const TabularMdp mdp = probe_mdp(5, 3, split_seed(seed, 25000 + seg));
    DualProblem problem{mdp.transition,
                        mdp.p0,
                        random_occupancy(mdp, rng),
                        random_stochastic_rows(rng, mdp.n_states, mdp.n_actions, 0.2),
                        uniform_in(rng, 0.0, 0.8),
                        uniform_in(rng, 0.5, 5.0),
                        mdp.gamma};
    const Matrix psi = uniform_matrix(rng, mdp.n_states, mdp.n_actions, -2.0, 2.0);
    const Matrix q1 = uniform_matrix(rng, mdp.n_states, mdp.n_actions, -3.0, 3.0);
    const Matrix q2 = uniform_matrix(rng, mdp.n_states, mdp.n_actions, -3.0, 3.0);
    const double gap = convexity_probe(
        [&](const Matrix& q) { return l_surrogate_q(q, psi, problem, fx); }, q1, q2, kLambdas);
    convex_q.observe(gap, {{"segment", seg}, {"alpha", problem.alpha}, {"beta", problem.beta},
                           {"gap", gap}});
  }

  std::vector<ProbeCheck> checks{convex.finish()};
  if (any_large_alpha) checks.push_back(counterexample.finish());
  checks.push_back(convex_q.finish());
  return make_report("convexity", n_segments, std::move(checks));
}

ProbeReport probe_lower_bound(int n_trials, std::uint64_t seed, const Formulas& fx) {
  CheckTracker bound("surrogate_below_full", 1e-9);
  CheckTracker equality("equal_where_residual_vanishes", 1e-9);
  for (int trial = 0; trial < n_trials; ++trial) {
    SplitRng rng(split_seed(seed, trial));
    const TabularMdp mdp = probe_mdp(6, 3, split_seed(seed, 1000 + trial));
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    DualProblem problem{mdp.transition,
                        mdp.p0,
                        random_occupancy(mdp, rng),
                        random_stochastic_rows(rng, S, A, 0.5),
                        uniform_in(rng, 0.0, 0.8),
                        uniform_in(rng, 0.5, 2.0),
                        mdp.gamma};
    const Matrix psi = uniform_matrix(rng, S, A, -2.0, 2.0);
    const Matrix pi = random_stochastic_rows(rng, S, A, 0.5);
    const Matrix q = uniform_matrix(rng, S, A, -1.0, 1.0);
    const json context{{"trial", trial}, {"alpha", problem.alpha}, {"beta", problem.beta}};

    const double full = l_full(q, pi, psi, problem, std::nullopt, fx);
    const double surrogate = l_surrogate(q, pi, psi, problem, fx);
    json c = context;
    c["l_full"] = full;
    c["l_surrogate"] = surrogate;
    bound.observe((surrogate - full) / std::max(1.0, std::abs(full)), c);

    // Q with T^pi[Q] = 0: V = (I - g P_pi)^-1 (-beta KL_s), Q = g T V.
    Vector kl = Vector::Zero(S);
    Matrix p_pi = Matrix::Zero(S, S);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        kl(s) += pi(s, a) * std::log(pi(s, a) / problem.mu_u(s, a));
        p_pi.row(s) += pi(s, a) * mdp.transition.by_action[a].row(s);
      }
    }
    const Matrix system = Matrix::Identity(S, S) - mdp.gamma * p_pi;
    const Vector v = system.partialPivLu().solve(-problem.beta * kl);
    const Matrix q_fixed = mdp.gamma * mdp.transition.expectation(v);
    const double full_eq = l_full(q_fixed, pi, psi, problem, std::nullopt, fx);
    const double surrogate_eq = l_surrogate(q_fixed, pi, psi, problem, fx);
    c = context;
    c["l_full"] = full_eq;
    c["l_surrogate"] = surrogate_eq;
    equality.observe(relative(full_eq - surrogate_eq, full_eq), c);
  }
  return make_report("lower_bound", n_trials, {bound.finish(), equality.finish()});
}

ProbeReport probe_minimax_softvalue(int n_trials, std::uint64_t seed, const Formulas& fx) {
  constexpr int kStates = 50;
  constexpr int kGrid = 200;  // simplex resolution 1/200
  CheckTracker grid("grid_max_below_softvalue", 1e-4);
  CheckTracker attains("softmax_attains_softvalue", 1e-6);
  CheckTracker flat("large_beta_limit", 1e-3);
  CheckTracker greedy("small_beta_limit", 1e-2);

  for (int trial = 0; trial < n_trials; ++trial) {
    SplitRng rng(split_seed(seed, trial));
    const int A = 2 + trial % 2;
    const double beta = uniform_in(rng, 0.1, 5.0);
    const Matrix q = uniform_matrix(rng, kStates, A, -1.0, 1.0);
    const Matrix mu = random_stochastic_rows(rng, kStates, A, 0.2);
    const Vector v = soft_value_closed_form(q, mu, beta, fx);

    Matrix softmax(kStates, A);
    for (int s = 0; s < kStates; ++s) {
      for (int a = 0; a < A; ++a) softmax(s, a) = mu(s, a) * fx.exp_link((q(s, a) - v(s)) / beta);
      softmax.row(s) /= softmax.row(s).sum();
    }
    Vector v_softmax;
    try {
      v_softmax = soft_value_pi(q, softmax, mu, beta);
    } catch (const InvalidArgument&) {
      v_softmax = Vector::Constant(kStates, std::numeric_limits<double>::quiet_NaN());
    }

    for (int s = 0; s < kStates; ++s) {
      auto value = [&](const double* p) {
        double total = 0.0;
        for (int a = 0; a < A; ++a) {
          if (p[a] > 0.0) total += p[a] * (q(s, a) - beta * std::log(p[a] / mu(s, a)));
        }
        return total;
      };
      double best = -kInf;
      double p[3] = {0.0, 0.0, 0.0};
      if (A == 2) {
        for (int i = 0; i <= kGrid; ++i) {
          p[0] = static_cast<double>(i) / kGrid;
          p[1] = 1.0 - p[0];
          best = std::max(best, value(p));
        }
      } else {
        for (int i = 0; i <= kGrid; ++i) {
          for (int j = 0; i + j <= kGrid; ++j) {
            p[0] = static_cast<double>(i) / kGrid;
            p[1] = static_cast<double>(j) / kGrid;
            p[2] = static_cast<double>(kGrid - i - j) / kGrid;
            best = std::max(best, value(p));
          }
        }
      }
      const json context{{"trial", trial}, {"state", s}, {"beta", beta}, {"softvalue", v(s)},
                         {"grid_max", best}, {"softmax_value", v_softmax(s)}};
      grid.observe(best - v(s), context);
      attains.observe(std::abs(v_softmax(s) - v(s)), context);
    }

    const Vector v_flat = soft_value_closed_form(q, mu, 1e6, fx);
    const Vector v_greedy = soft_value_closed_form(q, mu, 1e-3, fx);
    for (int s = 0; s < kStates; ++s) {
      const double mean = mu.row(s).dot(q.row(s));
      const double top = q.row(s).maxCoeff();
      flat.observe(std::abs(v_flat(s) - mean),
                   {{"trial", trial}, {"state", s}, {"softvalue", v_flat(s)}, {"mu_mean", mean}});
      greedy.observe(std::abs(v_greedy(s) - top),
                     {{"trial", trial}, {"state", s}, {"softvalue", v_greedy(s)}, {"max_q", top}});
    }
  }
  return make_report("minimax_softvalue", n_trials,
                     {grid.finish(), attains.finish(), flat.finish(), greedy.finish()});
}

ProbeReport probe_extreme_v(int n_trials, std::uint64_t seed, const Formulas& fx) {
  constexpr int kStates = 8;
  constexpr int kActions = 3;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  CheckTracker argmin("golden_section_matches_softvalue", 1e-6);

  for (int trial = 0; trial < n_trials; ++trial) {
    SplitRng rng(split_seed(seed, trial));
    const double beta = uniform_in(rng, 0.5, 3.0);
    const Matrix q = uniform_matrix(rng, kStates, kActions, -2.0, 2.0);
    const Matrix d_u = uniform_matrix(rng, kStates, kActions, 0.05, 1.0);
    const Vector closed = soft_value_closed_form(q, conditional(d_u), beta, fx);

    for (int s = 0; s < kStates; ++s) {
      Matrix row_weight = Matrix::Zero(kStates, kActions);
      row_weight.row(s) = d_u.row(s) / d_u.row(s).sum();
      auto objective = [&](double x) {
        Vector v = Vector::Zero(kStates);
        v(s) = x;
        return j_extreme_v(v, q, row_weight, beta, nullptr, fx);
      };
      double lo = q.row(s).minCoeff() - 1.0;
      double hi = q.row(s).maxCoeff() + 1.0;
      double x1 = hi - inv_phi * (hi - lo);
      double x2 = lo + inv_phi * (hi - lo);
      double f1 = objective(x1);
      double f2 = objective(x2);
      for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        if (f1 <= f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - inv_phi * (hi - lo);
          f1 = objective(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + inv_phi * (hi - lo);
          f2 = objective(x2);
        }
      }
      const double found = 0.5 * (lo + hi);
      argmin.observe(std::abs(found - closed(s)), {{"trial", trial}, {"state", s}, {"beta", beta},
                                                   {"golden_section", found},
                                                   {"softvalue", closed(s)}});
    }
  }
  return make_report("extreme_v", n_trials, {argmin.finish()});
}

ProbeReport probe_qwbc_awbc(int n_trials, std::uint64_t seed, const Formulas& fx) {
  constexpr int kStates = 8;
  constexpr int kActions = 4;
  CheckTracker identity("qwbc_equals_awbc", 1e-12);
  CheckTracker optimal("qwbc_maximizes_weighted_likelihood", 1e-12);

  for (int trial = 0; trial < n_trials; ++trial) {
    SplitRng rng(split_seed(seed, trial));
    constexpr double kBetas[] = {0.5, 5.0, 50.0};
    const double beta = kBetas[trial % 3];
    const double eps = (trial / 3) % 2 == 0 ? 0.0 : 1e-6;
    const Matrix q = uniform_matrix(rng, kStates, kActions, -3.0, 3.0);
    const Vector v = uniform_vector(rng, kStates, -3.0, 3.0);
    Matrix counts(kStates, kActions);
    for (int s = 0; s < kStates; ++s) {
      const bool empty_row = rng.uniform() < 0.15;
      for (int a = 0; a < kActions; ++a) {
        counts(s, a) = empty_row ? 0.0 : std::floor(6.0 * rng.uniform());
      }
    }
    const Policy qw = policy_extract_qwbc(q, counts, beta, eps, fx);
    const Policy aw = policy_extract_awbc(q, v, counts, beta, eps, fx);
    identity.observe((qw.probs - aw.probs).cwiseAbs().maxCoeff(),
                     {{"trial", trial}, {"beta", beta}, {"epsilon", eps}});

    for (int s = 0; s < kStates; ++s) {
      if (counts.row(s).sum() <= 0.0) continue;
      Vector w(kActions);
      for (int a = 0; a < kActions; ++a) w(a) = (counts(s, a) + eps) * fx.exp_link(q(s, a) / beta);
      auto likelihood = [&](const Vector& p) {
        double total = 0.0;
        for (int a = 0; a < kActions; ++a) {
          if (w(a) == 0.0) continue;
          total += p(a) > 0.0 ? w(a) * std::log(p(a)) : -kInf * (w(a) > 0.0 ? 1.0 : -1.0);
        }
        return total;
      };
      const Vector extracted = qw.probs.row(s).transpose();
      const double base = likelihood(extracted);
      for (double lambda : {1e-3, 1e-2, 1e-1, 1.0}) {
        const Vector other = random_stochastic_rows(rng, 1, kActions, 0.0).row(0).transpose();
        const Vector mixed = (1.0 - lambda) * extracted + lambda * other;
        const double gain = likelihood(mixed) - base;
        optimal.observe(gain / std::max(1.0, std::abs(base)),
                        {{"trial", trial}, {"state", s}, {"lambda", lambda}, {"gain", gain}});
      }
    }
  }
  return make_report("qwbc_awbc", n_trials, {identity.finish(), optimal.finish()});
}

ProbeReport probe_gradients(int n_trials, std::uint64_t seed, const Formulas& fx) {
  constexpr double kStep = 1e-5;
  static constexpr double kFloor = 1e-3;
  CheckTracker q_linear("l_q_given_v_gradient", 1e-6);
  CheckTracker chi2("chi2_gradient", 1e-6);
  CheckTracker extreme("j_extreme_v_gradient", 1e-6);
  CheckTracker logistic("discriminator_loss_gradient", 1e-6);

  auto compare = [](CheckTracker& tracker, double analytic, double numeric, const json& context) {
    json c = context;
    c["analytic"] = analytic;
    c["finite_difference"] = numeric;
    tracker.observe(std::abs(analytic - numeric) / std::max(std::abs(analytic), kFloor), c);
  };

  for (int trial = 0; trial < n_trials; ++trial) {
    SplitRng rng(split_seed(seed, trial));
    const TabularMdp mdp = probe_mdp(6, 3, split_seed(seed, 1000 + trial));
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    const Matrix q = uniform_matrix(rng, S, A, -2.0, 2.0);
    const Vector v = uniform_vector(rng, S, -2.0, 2.0);
    const Matrix w = uniform_matrix(rng, S, A, 0.1, 3.0);
    const Matrix d_u = random_occupancy(mdp, rng);
    const double beta = uniform_in(rng, 0.5, 3.0);

    const Matrix g_linear = l_q_given_v_gradient(w, d_u);
    const Matrix g_chi2 = chi2_gradient(bellman_residual(q, v, mdp.transition, mdp.gamma), d_u);
    auto linear_at = [&](const Matrix& x) {
      return l_q_given_v(x, v, w, d_u, mdp.transition, mdp.p0, mdp.gamma);
    };
    auto chi2_at = [&](const Matrix& x) {
      return chi2_regularizer(bellman_residual(x, v, mdp.transition, mdp.gamma), d_u);
    };
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        Matrix plus = q;
        Matrix minus = q;
        plus(s, a) += kStep;
        minus(s, a) -= kStep;
        const json context{{"trial", trial}, {"s", s}, {"a", a}};
        compare(q_linear, g_linear(s, a), (linear_at(plus) - linear_at(minus)) / (2 * kStep), context);
        compare(chi2, g_chi2(s, a), (chi2_at(plus) - chi2_at(minus)) / (2 * kStep), context);
      }
    }

    const Vector g_extreme = j_extreme_v_gradient(v, q, d_u, beta, fx);
    for (int s = 0; s < S; ++s) {
      Vector plus = v;
      Vector minus = v;
      plus(s) += kStep;
      minus(s) -= kStep;
      const double numeric = (j_extreme_v(plus, q, d_u, beta, nullptr, fx) -
                              j_extreme_v(minus, q, d_u, beta, nullptr, fx)) /
                             (2 * kStep);
      compare(extreme, g_extreme(s), numeric, {{"trial", trial}, {"s", s}, {"beta", beta}});
    }

    const Matrix pos = random_occupancy(mdp, rng);
    const Matrix ref = random_occupancy(mdp, rng);
    for (auto input : {DiscriminatorInput::kStateAction, DiscriminatorInput::kState}) {
      Discriminator disc = Discriminator::untrained(S, A, input);
      for (int i = 0; i < disc.weights.size(); ++i) disc.weights(i) = uniform_in(rng, -1.0, 1.0);
      disc.bias = uniform_in(rng, -1.0, 1.0);
      const Vector grad = discriminator_loss_gradient(disc, pos, ref);
      for (int i = 0; i < grad.size(); ++i) {
        Discriminator plus = disc;
        Discriminator minus = disc;
        if (i < disc.weights.size()) {
          plus.weights(i) += kStep;
          minus.weights(i) -= kStep;
        } else {
          plus.bias += kStep;
          minus.bias -= kStep;
        }
        const double numeric =
            (discriminator_loss(plus, pos, ref) - discriminator_loss(minus, pos, ref)) / (2 * kStep);
        compare(logistic, grad(i), numeric,
                {{"trial", trial}, {"input", to_string(input)}, {"parameter", i}});
      }
    }
  }
  return make_report("gradients", n_trials,
                     {q_linear.finish(), chi2.finish(), extreme.finish(), logistic.finish()});
}

std::vector<ProbeReport> run_all_probes(std::uint64_t seed, const Formulas& fx) {
  return {
      probe_reformulation(100, split_seed(seed, 1), fx),
      probe_convexity({0.0, 0.5, 1.0, 2.0}, 1000, split_seed(seed, 2), fx),
      probe_lower_bound(100, split_seed(seed, 3), fx),
      probe_minimax_softvalue(20, split_seed(seed, 4), fx),
      probe_extreme_v(20, split_seed(seed, 5), fx),
      probe_qwbc_awbc(100, split_seed(seed, 6), fx),
      probe_gradients(20, split_seed(seed, 7), fx),
  };
}

std::string probe_reports_to_json(const std::vector<ProbeReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json checks = json::array();
    for (const auto& c : r.checks) {
      const double shown = std::isfinite(c.max_violation) ? c.max_violation : 1e308;
      checks.push_back({{"name", c.name},
                        {"max_violation", shown},
                        {"tolerance", c.tolerance},
                        {"passed", c.passed},
                        {"worst_case", json::parse(c.worst_case, nullptr, false)}});
    }
    out.push_back({{"name", r.name},
                   {"n_trials", r.n_trials},
                   {"passed", r.passed},
                   {"checks", std::move(checks)}});
  }
  return out.dump(2);
}

// --- Reference minimizer --------------------------------------------------------

namespace {

// Pair coefficient c = log d_g - alpha log d_b; -inf where d_g has no mass.
Matrix linear_coefficient(const Matrix& d_g, const Matrix& d_b, double alpha) {
  Matrix c(d_g.rows(), d_g.cols());
  for (int s = 0; s < d_g.rows(); ++s) {
    for (int a = 0; a < d_g.cols(); ++a) {
      if (d_g(s, a) <= 0.0) {
        c(s, a) = -kInf;
        continue;
      }
      if (alpha > 0.0 && d_b(s, a) <= 0.0) {
        std::ostringstream msg;
        msg << "oracle_min_f: bad occupancy has no mass at (" << s << "," << a
            << ") where the good occupancy does";
        throw InvalidArgument(msg.str());
      }
      c(s, a) = std::log(d_g(s, a)) - (alpha > 0.0 ? alpha * std::log(d_b(s, a)) : 0.0);
    }
  }
  return c;
}

Policy policy_from_occupancy(const Matrix& d) {
  Policy pi{d};
  for (int s = 0; s < d.rows(); ++s) {
    const double total = d.row(s).sum();
    if (total > 0.0) {
      pi.probs.row(s) /= total;
    } else {
      pi.probs.row(s).setConstant(1.0 / d.cols());
    }
  }
  return pi;
}

MinFResult finish(const TabularMdp& mdp, const Policy& pi, const Matrix& d_g, const Matrix& d_b,
                  double alpha) {
  MinFResult out;
  out.policy = pi;
  out.d = occupancy_of_policy(mdp, pi);
  out.f = f_objective(out.d.d, d_g, d_b, alpha);
  return out;
}

MinFResult solve_linear(const TabularMdp& mdp, const Matrix& c, const Matrix& d_g, const Matrix& d_b,
                        int max_iterations) {
  const int S = mdp.n_states;
  const int A = mdp.n_actions;
  Vector v = Vector::Zero(S);
  Matrix qv(S, A);
  int it = 0;
  double change = kInf;
  // Enough sweeps for the contraction to reach 1e-13 from any start.
  const int sweeps = std::max(max_iterations, 50 * static_cast<int>(std::ceil(1.0 / (1.0 - mdp.gamma))));
  for (; it < sweeps * 20 && change > 1e-13; ++it) {
    qv = c + mdp.gamma * mdp.transition.expectation(v);
    Vector next(S);
    for (int s = 0; s < S; ++s) {
      const double best = qv.row(s).maxCoeff();
      next(s) = std::isfinite(best) ? best : 0.0;
    }
    change = (next - v).cwiseAbs().maxCoeff();
    v = next;
  }
  Policy pi{Matrix::Zero(S, A)};
  for (int s = 0; s < S; ++s) {
    int best = 0;
    for (int a = 1; a < A; ++a) {
      if (qv(s, a) > qv(s, best)) best = a;
    }
    pi.probs(s, best) = 1.0;
  }
  MinFResult out = finish(mdp, pi, d_g, d_b, 1.0);
  out.iterations = it;
  out.residual = change;
  out.converged = change <= 1e-13;
  return out;
}

}  // namespace

MinFResult oracle_min_f(const TabularMdp& mdp, const Matrix& d_g, const Matrix& d_b, double alpha,
                        int max_iterations) {
  mdp.validate();
  if (d_g.rows() != mdp.n_states || d_g.cols() != mdp.n_actions || d_b.rows() != d_g.rows() ||
      d_b.cols() != d_g.cols()) {
    throw InvalidArgument("oracle_min_f: occupancy shape does not match the MDP");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("oracle_min_f: alpha must lie in [0, 1]");
  }
  const Matrix c = linear_coefficient(d_g, d_b, alpha);
  if (alpha == 1.0) return solve_linear(mdp, c, d_g, d_b, max_iterations);

  const int S = mdp.n_states;
  const int A = mdp.n_actions;
  const double scale = 1.0 - alpha;
  const double gamma = mdp.gamma;

  // d(nu) = exp((c - nu(s) + g E_s'[nu]) / (1 - alpha) - 1), zero where c = -inf.
  auto primal = [&](const Vector& nu) {
    const Matrix next = mdp.transition.expectation(nu);
    Matrix d(S, A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        d(s, a) = std::isfinite(c(s, a))
                      ? std::exp((c(s, a) - nu(s) + gamma * next(s, a)) / scale - 1.0)
                      : 0.0;
      }
    }
    return d;
  };
  auto dual = [&](const Vector& nu, const Matrix& d) {
    return -scale * d.sum() - (1.0 - gamma) * mdp.p0.dot(nu);
  };
  // Gradient of the dual: outflow - discounted inflow - (1 - g) p0.
  auto flow_residual = [&](const Matrix& d) {
    Vector r = d.rowwise().sum() - (1.0 - gamma) * mdp.p0;
    for (int a = 0; a < A; ++a) r -= gamma * mdp.transition.by_action[a].transpose() * d.col(a);
    return r;
  };

  Vector nu = Vector::Zero(S);
  Matrix d = primal(nu);
  double g = dual(nu, d);
  Vector r = flow_residual(d);
  MinFResult out;
  int it = 0;
  for (; it < max_iterations; ++it) {
    if (!std::isfinite(g) || !r.allFinite()) break;
    if (r.cwiseAbs().maxCoeff() <= 1e-12) break;
    // Negative dual Hessian times (1 - alpha): M diag(d) M^T with
    // M(s, (x,a)) = [x = s] - g T(s|x,a).
    Matrix h = Matrix::Zero(S, S);
    for (int a = 0; a < A; ++a) {
      Matrix m = Matrix::Identity(S, S) - gamma * mdp.transition.by_action[a].transpose();
      h += m * d.col(a).asDiagonal() * m.transpose();
    }
    h.diagonal().array() += 1e-14 * std::max(1.0, h.diagonal().maxCoeff());
    const Vector step = scale * h.ldlt().solve(r);
    const double slope = r.dot(step);
    double eta = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, eta *= 0.5) {
      const Vector trial = nu + eta * step;
      const Matrix d_trial = primal(trial);
      const double g_trial = dual(trial, d_trial);
      if (!std::isfinite(g_trial)) continue;
      // Near the optimum the dual is flat to rounding; a shrinking residual suffices there.
      const bool ascent = g_trial >= g + 1e-4 * eta * slope;
      const bool closer = flow_residual(d_trial).norm() < (1.0 - 1e-4 * eta) * r.norm();
      if (ascent || closer) {
        nu = trial;
        d = d_trial;
        g = g_trial;
        accepted = true;
        break;
      }
    }
    r = flow_residual(d);
    if (!accepted) break;
  }
  const double residual = r.allFinite() ? r.cwiseAbs().maxCoeff() : kInf;
  if (d.allFinite() && d.sum() > 0.0) {
    out = finish(mdp, policy_from_occupancy(d), d_g, d_b, alpha);
  } else {
    out.d.d = Matrix::Zero(S, A);
    out.policy = Policy::uniform(S, A);
    out.f = std::numeric_limits<double>::quiet_NaN();
  }
  out.iterations = it;
  out.residual = residual;
  out.converged = residual <= 1e-9;
  return out;
}

}  // namespace contradice
