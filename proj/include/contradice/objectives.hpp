#pragma once

#include <functional>
#include <optional>

#include "contradice/formulas.hpp"
#include "contradice/mdp.hpp"

namespace contradice {

/// An exponential term left the representable range.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Everything the dual objectives read besides Q, V, pi and Psi. `d_u` weights
/// every union expectation; `mu_u` is the behavior policy of the union data.
struct DualProblem {
  TransitionTensor transition;
  Vector p0;
  Matrix d_u;
  Matrix mu_u;
  double alpha = 0.0;
  double beta = 1.0;
  double gamma = 0.9;
};

/// Bounds applied to the exponent of the full objective in clipped mode.
struct ExpClip {
  double lo = -7.0;
  double hi = 7.0;
};

// --- Occupancy-space objectives -------------------------------------------

/// sum d1 log(d1/d2) with 0 log 0 = 0. Throws InvalidArgument when d2 has no
/// mass where d1 does.
double kl_divergence(const Matrix& d1, const Matrix& d2);

/// KL(d || d_g) - alpha KL(d || d_b).
double f_objective(const Matrix& d, const Matrix& d_g, const Matrix& d_b, double alpha);

/// (1 - alpha) KL(d || d_u) - E_d[psi].
double f_reformulated(const Matrix& d, const Matrix& d_u, const Matrix& psi, double alpha,
                      const Formulas& fx = standard_formulas());

/// Largest gap f(l x1 + (1-l) x2) - [l f(x1) + (1-l) f(x2)] over the interior
/// grid l = k/(n+1), k = 1..n. Non-positive on every segment iff f is convex
/// along it.
double convexity_probe(const std::function<double(const Matrix&)>& objective, const Matrix& x1,
                       const Matrix& x2, int n_lambdas);

// --- Soft values and Bellman residuals ----------------------------------------

/// v(s) = beta log sum_a mu(a|s) exp(q(s,a)/beta), max-shifted.
Vector soft_value_closed_form(const Matrix& q, const Matrix& mu_u, double beta,
                              const Formulas& fx = standard_formulas());

/// v(s) = sum_a pi(a|s) (q(s,a) - beta log(pi(a|s)/mu(a|s))). Throws
/// InvalidArgument where pi puts mass on an action mu never takes.
Vector soft_value_pi(const Matrix& q, const Matrix& pi, const Matrix& mu_u, double beta);

/// q(s,a) - gamma sum_s' T(s'|s,a) v(s').
Matrix bellman_residual(const Matrix& q, const Vector& v, const TransitionTensor& transition,
                        double gamma);

/// exp(psi / (1 - alpha)), the per-pair weight of the surrogate objective.
Matrix delta_weights(const Matrix& psi, double alpha, const Formulas& fx = standard_formulas());

// --- Dual objectives over (Q, pi) ---------------------------------------------

/// (1-g) E_p0[V_Q^pi] + (1-alpha) E_du[exp((psi - T^pi[Q]) / (1-alpha))].
/// With `clip`, the exponent is clamped first. Without it, an exponent above
/// the double range throws OverflowError.
double l_full(const Matrix& q, const Matrix& pi, const Matrix& psi, const DualProblem& problem,
              std::optional<ExpClip> clip = std::nullopt, const Formulas& fx = standard_formulas());

/// (1-g) E_p0[V_Q^pi] - E_du[delta T^pi[Q]] + (1-alpha) E_du[delta]. Keeps the
/// constant last term so that l_surrogate <= l_full holds literally.
double l_surrogate(const Matrix& q, const Matrix& pi, const Matrix& psi, const DualProblem& problem,
                   const Formulas& fx = standard_formulas());

/// (1-g) E_p0[V_Q] - E_du[delta T[Q]] with V_Q the closed-form soft value.
/// The constant (1-alpha) E_du[delta] is dropped.
double l_surrogate_q(const Matrix& q, const Matrix& psi, const DualProblem& problem,
                     const Formulas& fx = standard_formulas());

// --- Alternating objectives -------------------------------------------------

/// Exponents above this are clamped inside j_extreme_v.
inline constexpr double kExtremeVClamp = 30.0;

/// E_du[e^t - t - 1] with t = (q(s,a) - v(s))/beta. Counts clamped exponents
/// into `n_clamped` when given.
double j_extreme_v(const Vector& v, const Matrix& q, const Matrix& d_u, double beta,
                   int* n_clamped = nullptr, const Formulas& fx = standard_formulas());

/// Gradient of j_extreme_v with respect to v.
Vector j_extreme_v_gradient(const Vector& v, const Matrix& q, const Matrix& d_u, double beta,
                            const Formulas& fx = standard_formulas());

/// (1-g) E_p0[v] - E_du[w (q - g E_s'[v])] for per-pair weights `w`
/// (delta_weights in the surrogate mode, exp(psi) in the large-alpha mode).
double l_q_given_v(const Matrix& q, const Vector& v, const Matrix& w, const Matrix& d_u,
                   const TransitionTensor& transition, const Vector& p0, double gamma);

/// Gradient of l_q_given_v with respect to q: -d_u * w.
Matrix l_q_given_v_gradient(const Matrix& w, const Matrix& d_u);

/// E_du[residual^2 / 2].
double chi2_regularizer(const Matrix& residual, const Matrix& d_u);

/// Gradient of chi2_regularizer(q - g T v) with respect to q: d_u * residual.
Matrix chi2_gradient(const Matrix& residual, const Matrix& d_u);

}  // namespace contradice
