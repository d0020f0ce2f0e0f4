#include "contradice/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace contradice {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch");
  }
}

// log of the largest finite double; exponents beyond this overflow.
const double kMaxExponent = std::log(std::numeric_limits<double>::max());

}  // namespace

double kl_divergence(const Matrix& d1, const Matrix& d2) {
  require_same_shape(d1, d2, "kl_divergence");
  double kl = 0.0;
  for (int s = 0; s < d1.rows(); ++s) {
    for (int a = 0; a < d1.cols(); ++a) {
      const double p = d1(s, a);
      if (p <= 0.0) continue;
      if (d2(s, a) <= 0.0) {
        std::ostringstream msg;
        msg << "kl_divergence: reference has no mass at (" << s << "," << a << ")";
        throw InvalidArgument(msg.str());
      }
      kl += p * std::log(p / d2(s, a));
    }
  }
  return kl;
}

double f_objective(const Matrix& d, const Matrix& d_g, const Matrix& d_b, double alpha) {
  const double good = kl_divergence(d, d_g);
  return alpha == 0.0 ? good : good - alpha * kl_divergence(d, d_b);
}

double f_reformulated(const Matrix& d, const Matrix& d_u, const Matrix& psi, double alpha,
                      const Formulas& fx) {
  require_same_shape(d, psi, "f_reformulated");
  double expected_psi = 0.0;
  for (int s = 0; s < d.rows(); ++s) {
    for (int a = 0; a < d.cols(); ++a) {
      if (d(s, a) > 0.0) expected_psi += d(s, a) * psi(s, a);
    }
  }
  return fx.kl_scale(alpha) * kl_divergence(d, d_u) - expected_psi;
}

double convexity_probe(const std::function<double(const Matrix&)>& objective, const Matrix& x1,
                       const Matrix& x2, int n_lambdas) {
  if (n_lambdas < 1) throw InvalidArgument("convexity_probe needs at least one interior point");
  require_same_shape(x1, x2, "convexity_probe");
  const double f1 = objective(x1);
  const double f2 = objective(x2);
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 1; k <= n_lambdas; ++k) {
    const double lambda = static_cast<double>(k) / (n_lambdas + 1);
    const double mid = objective(lambda * x1 + (1.0 - lambda) * x2);
    const double gap = mid - (lambda * f1 + (1.0 - lambda) * f2);
    if (std::isnan(gap)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, gap);
  }
  return worst;
}

Vector soft_value_closed_form(const Matrix& q, const Matrix& mu_u, double beta,
                              const Formulas& fx) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  require_same_shape(q, mu_u, "soft_value_closed_form");
  Vector v(q.rows());
  for (int s = 0; s < q.rows(); ++s) {
    double shift = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < q.cols(); ++a) {
      if (mu_u(s, a) > 0.0) shift = std::max(shift, q(s, a));
    }
    if (!std::isfinite(shift)) {
      v(s) = shift;
      continue;
    }
    double acc = 0.0;
    for (int a = 0; a < q.cols(); ++a) {
      if (mu_u(s, a) > 0.0) acc += mu_u(s, a) * fx.exp_link((q(s, a) - shift) / beta);
    }
    v(s) = shift + beta * std::log(acc);
  }
  return v;
}

Vector soft_value_pi(const Matrix& q, const Matrix& pi, const Matrix& mu_u, double beta) {
  require_same_shape(q, pi, "soft_value_pi");
  require_same_shape(q, mu_u, "soft_value_pi");
  Vector v = Vector::Zero(q.rows());
  for (int s = 0; s < q.rows(); ++s) {
    for (int a = 0; a < q.cols(); ++a) {
      const double p = pi(s, a);
      if (p <= 0.0) continue;
      if (mu_u(s, a) <= 0.0) {
        std::ostringstream msg;
        msg << "policy takes action " << a << " at state " << s
            << " where the behavior policy has no mass";
        throw InvalidArgument(msg.str());
      }
      v(s) += p * (q(s, a) - beta * std::log(p / mu_u(s, a)));
    }
  }
  return v;
}

Matrix bellman_residual(const Matrix& q, const Vector& v, const TransitionTensor& transition,
                        double gamma) {
  if (transition.n_states() != q.rows() || transition.n_actions() != q.cols() ||
      v.size() != q.rows()) {
    throw InvalidArgument("bellman_residual: shape mismatch");
  }
  return q - gamma * transition.expectation(v);
}

Matrix delta_weights(const Matrix& psi, double alpha, const Formulas& fx) {
  const double scale = fx.kl_scale(alpha);
  if (!(scale > 0.0)) throw InvalidArgument("delta weights need alpha < 1");
  return psi.unaryExpr([&](double x) { return fx.exp_link(x / scale); });
}

double l_full(const Matrix& q, const Matrix& pi, const Matrix& psi, const DualProblem& problem,
              std::optional<ExpClip> clip, const Formulas& fx) {
  const double scale = fx.kl_scale(problem.alpha);
  if (!(scale > 0.0)) throw InvalidArgument("l_full needs alpha < 1");
  const Vector v = soft_value_pi(q, pi, problem.mu_u, problem.beta);
  const Matrix residual = bellman_residual(q, v, problem.transition, problem.gamma);
  double expectation = 0.0;
  for (int s = 0; s < q.rows(); ++s) {
    for (int a = 0; a < q.cols(); ++a) {
      const double w = problem.d_u(s, a);
      if (w <= 0.0) continue;
      double t = (psi(s, a) - residual(s, a)) / scale;
      if (clip) {
        t = std::clamp(t, clip->lo, clip->hi);
      } else if (t > kMaxExponent) {
        std::ostringstream msg;
        msg << "l_full: exponent " << t << " at (" << s << "," << a << ") overflows";
        throw OverflowError(msg.str());
      }
      expectation += w * fx.exp_link(t);
    }
  }
  return (1.0 - problem.gamma) * problem.p0.dot(v) + scale * expectation;
}

double l_surrogate(const Matrix& q, const Matrix& pi, const Matrix& psi, const DualProblem& problem,
                   const Formulas& fx) {
  const Matrix delta = delta_weights(psi, problem.alpha, fx);
  const Vector v = soft_value_pi(q, pi, problem.mu_u, problem.beta);
  const Matrix residual = bellman_residual(q, v, problem.transition, problem.gamma);
  const double weighted = (problem.d_u.array() * delta.array() * residual.array()).sum();
  const double constant = fx.kl_scale(problem.alpha) * (problem.d_u.array() * delta.array()).sum();
  return (1.0 - problem.gamma) * problem.p0.dot(v) - weighted + constant;
}

double l_surrogate_q(const Matrix& q, const Matrix& psi, const DualProblem& problem,
                     const Formulas& fx) {
  const Matrix delta = delta_weights(psi, problem.alpha, fx);
  const Vector v = soft_value_closed_form(q, problem.mu_u, problem.beta, fx);
  const Matrix residual = bellman_residual(q, v, problem.transition, problem.gamma);
  const double weighted = (problem.d_u.array() * delta.array() * residual.array()).sum();
  return (1.0 - problem.gamma) * problem.p0.dot(v) - weighted;
}

double j_extreme_v(const Vector& v, const Matrix& q, const Matrix& d_u, double beta,
                   int* n_clamped, const Formulas& fx) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  require_same_shape(q, d_u, "j_extreme_v");
  double total = 0.0;
  int clamped = 0;
  for (int s = 0; s < q.rows(); ++s) {
    for (int a = 0; a < q.cols(); ++a) {
      const double w = d_u(s, a);
      if (w <= 0.0) continue;
      double t = (q(s, a) - v(s)) / beta;
      if (t > kExtremeVClamp) {
        t = kExtremeVClamp;
        ++clamped;
      }
      total += w * (fx.exp_link(t) - t - 1.0);
    }
  }
  if (n_clamped) *n_clamped = clamped;
  return total;
}

Vector j_extreme_v_gradient(const Vector& v, const Matrix& q, const Matrix& d_u, double beta,
                            const Formulas& fx) {
  require_same_shape(q, d_u, "j_extreme_v_gradient");
  Vector grad = Vector::Zero(v.size());
  for (int s = 0; s < q.rows(); ++s) {
    for (int a = 0; a < q.cols(); ++a) {
      const double w = d_u(s, a);
      if (w <= 0.0) continue;
      const double t = (q(s, a) - v(s)) / beta;
      if (t > kExtremeVClamp) continue;  // clamped exponent is flat in v
      grad(s) -= w * (fx.exp_link(t) - 1.0) / beta;
    }
  }
  return grad;
}

double l_q_given_v(const Matrix& q, const Vector& v, const Matrix& w, const Matrix& d_u,
                   const TransitionTensor& transition, const Vector& p0, double gamma) {
  require_same_shape(q, w, "l_q_given_v");
  require_same_shape(q, d_u, "l_q_given_v");
  const Matrix residual = bellman_residual(q, v, transition, gamma);
  return (1.0 - gamma) * p0.dot(v) - (d_u.array() * w.array() * residual.array()).sum();
}

Matrix l_q_given_v_gradient(const Matrix& w, const Matrix& d_u) {
  require_same_shape(w, d_u, "l_q_given_v_gradient");
  return -(d_u.array() * w.array()).matrix();
}

double chi2_regularizer(const Matrix& residual, const Matrix& d_u) {
  require_same_shape(residual, d_u, "chi2_regularizer");
  return 0.5 * (d_u.array() * residual.array().square()).sum();
}

Matrix chi2_gradient(const Matrix& residual, const Matrix& d_u) {
  require_same_shape(residual, d_u, "chi2_gradient");
  return (d_u.array() * residual.array()).matrix();
}

}  // namespace contradice
