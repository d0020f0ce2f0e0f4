#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contradice/formulas.hpp"
#include "contradice/mdp.hpp"

namespace contradice {

/// One assertion inside a probe: passed iff max_violation <= tolerance.
/// Non-finite violations count as failures.
struct ProbeCheck {
  std::string name;
  double max_violation = 0.0;
  double tolerance = 0.0;
  std::string worst_case;  // JSON object describing the worst input seen
  bool passed = false;
};

struct ProbeReport {
  std::string name;
  int n_trials = 0;
  std::vector<ProbeCheck> checks;
  bool passed = false;

  /// Largest violation across checks, as a multiple of its tolerance where the
  /// tolerance is non-zero.
  double max_violation() const;
  /// Worst case of the first failing check, or of the first check when all pass.
  std::string worst_case() const;
};

/// f_objective against f_reformulated on random full-support tuples.
ProbeReport probe_reformulation(int n_trials, std::uint64_t seed,
                                const Formulas& fx = standard_formulas());

/// Convexity of f in d for every alpha <= 1 in `alphas`, a counterexample for
/// every alpha > 1, and convexity of the non-adversarial Q objective.
ProbeReport probe_convexity(const std::vector<double>& alphas, int n_segments, std::uint64_t seed,
                            const Formulas& fx = standard_formulas());

/// l_surrogate <= l_full on random draws, and equality where T^pi[Q] vanishes.
ProbeReport probe_lower_bound(int n_trials, std::uint64_t seed,
                              const Formulas& fx = standard_formulas());

/// Simplex grid search of the inner policy maximization against the closed-form
/// soft value, plus its large- and small-temperature limits.
ProbeReport probe_minimax_softvalue(int n_trials, std::uint64_t seed,
                                    const Formulas& fx = standard_formulas());

/// Golden-section minimization of the Extreme-V objective per state against
/// the closed-form soft value.
ProbeReport probe_extreme_v(int n_trials, std::uint64_t seed,
                            const Formulas& fx = standard_formulas());

/// Q-weighted and advantage-weighted cloning agree, and the Q-weighted policy
/// maximizes its weighted log-likelihood.
ProbeReport probe_qwbc_awbc(int n_trials, std::uint64_t seed,
                            const Formulas& fx = standard_formulas());

/// Analytic gradients against central finite differences (step 1e-5).
ProbeReport probe_gradients(int n_trials, std::uint64_t seed,
                            const Formulas& fx = standard_formulas());

/// Every probe above with its default trial counts.
std::vector<ProbeReport> run_all_probes(std::uint64_t seed, const Formulas& fx = standard_formulas());

std::string probe_reports_to_json(const std::vector<ProbeReport>& reports);

struct MinFResult {
  OccupancyMeasure d;
  Policy policy;
  double f = 0.0;
  int iterations = 0;
  double residual = 0.0;  // flow residual of the dual solution before projection
  bool converged = false;
};

/// Minimizes f(d) = KL(d || d_g) - alpha KL(d || d_b) over the occupancies of
/// `mdp`. For alpha < 1 this runs Newton ascent on the Lagrange dual over one
/// multiplier per state; alpha = 1 is a linear program solved by value
/// iteration. The returned d is the exact occupancy of the policy read off
/// the dual solution.
MinFResult oracle_min_f(const TabularMdp& mdp, const Matrix& d_g, const Matrix& d_b, double alpha,
                        int max_iterations = 200);

}  // namespace contradice
