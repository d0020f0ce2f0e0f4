#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace contradice {

/// Scalar building blocks shared by the objectives, the Psi construction and
/// policy extraction. Every formula routes through one of these hooks so the
/// verification probes can be rerun against deliberately broken variants.
class Formulas {
 public:
  virtual ~Formulas() = default;

  /// The exponential link inside the dual objectives, soft values and
  /// Q-weighted cloning.
  virtual double exp_link(double t) const { return std::exp(t); }

  /// Combines log(d_g/d_u) and log(d_b/d_u) into Psi.
  virtual double psi(double log_ratio_g, double log_ratio_b, double alpha) const {
    return log_ratio_g - alpha * log_ratio_b;
  }

  /// Coefficient of KL(d || d_u) after the bad-data term is folded in.
  virtual double kl_scale(double alpha) const { return 1.0 - alpha; }

  virtual std::string name() const { return "standard"; }
};

/// The unmodified formulas used in production.
const Formulas& standard_formulas();

/// Names accepted by find_mutation.
std::vector<std::string> mutation_names();

/// A broken variant of the formulas, or nullptr for an unknown name.
/// Known names: psi_sign_flip, drop_one_minus_alpha, exp_to_linear.
const Formulas* find_mutation(const std::string& name);

}  // namespace contradice
