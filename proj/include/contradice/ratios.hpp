#pragma once

#include <limits>
#include <string>
#include <vector>

#include "contradice/datasets.hpp"
#include "contradice/formulas.hpp"
#include "contradice/mdp.hpp"

namespace contradice {

enum class DiscriminatorInput { kStateAction, kState };

std::string to_string(DiscriminatorInput input);
DiscriminatorInput discriminator_input_from_string(const std::string& name);

/// Logistic classifier over one-hot features: c = sigmoid(w[feature] + bias).
struct Discriminator {
  DiscriminatorInput input = DiscriminatorInput::kStateAction;
  int n_states = 0;
  int n_actions = 0;
  Vector weights;  // length S*A (state-action) or S (state)
  double bias = 0.0;
  int trained_steps = 0;

  static Discriminator untrained(int n_states, int n_actions, DiscriminatorInput input);

  /// Classifier output c(s,a) broadcast to an S x A table, strictly inside (0,1).
  Matrix output() const;
};

struct DiscriminatorTraining {
  int steps = 2000;
  double lr = 1.0;
  DiscriminatorInput input = DiscriminatorInput::kStateAction;
};

/// Negated objective -(E_pos[log c] + E_ref[log(1-c)]) with expectations
/// weighted by the S x A tables `pos` and `ref`.
double discriminator_loss(const Discriminator& disc, const Matrix& pos, const Matrix& ref);

/// Gradient of discriminator_loss; last entry is the bias derivative.
Vector discriminator_loss_gradient(const Discriminator& disc, const Matrix& pos, const Matrix& ref);

/// Full-batch gradient descent on discriminator_loss from the zero-initialized
/// classifier. Throws ConvergenceError naming the step if the loss turns non-finite.
Discriminator train_discriminator(const Matrix& pos, const Matrix& ref,
                                  const DiscriminatorTraining& options);

inline Discriminator train_discriminator(const EmpiricalEstimates& pos, const EmpiricalEstimates& ref,
                                         const DiscriminatorTraining& options) {
  return train_discriminator(pos.d_hat, ref.d_hat, options);
}

/// c / (1 - c) elementwise.
Matrix ratio_from_discriminator(const Discriminator& disc);

enum class PsiSource { kDiscriminator, kExact };

struct PsiTable {
  Matrix psi;
  double alpha = 0.0;
  double clip_lo = -std::numeric_limits<double>::infinity();
  double clip_hi = std::numeric_limits<double>::infinity();
  PsiSource source = PsiSource::kDiscriminator;
};

/// Symmetric clip bound on Psi so that exp(Psi / (1 - alpha)) stays within
/// [e^-7, e^7]; alpha >= 1 clips Psi itself to +-7.
double default_psi_clip(double alpha);

/// Psi = clamp(log ratio_g - alpha log ratio_b, clip_lo, clip_hi).
PsiTable compute_psi(const Matrix& ratio_g, const Matrix& ratio_b, double alpha, double clip_lo,
                     double clip_hi, const Formulas& fx = standard_formulas());

/// Psi from true occupancies. Throws InvalidArgument listing pairs where d_u is
/// zero but d_g or d_b is not.
PsiTable exact_psi(const OccupancyMeasure& d_g, const OccupancyMeasure& d_b,
                   const OccupancyMeasure& d_u, double alpha, double clip_lo, double clip_hi,
                   const Formulas& fx = standard_formulas());

/// Per-pair Psi for a state-input discriminator: the state ratio is read at
/// next states, averaged over the empirical successor distribution of (s,a).
/// Pairs never observed fall back to the ratio at s itself.
Matrix next_state_log_ratio(const Vector& state_log_ratio, const DemonstrationSet& transitions);

// JSON persistence for --save-disc / --load-disc.
std::string discriminator_to_json(const Discriminator& disc);
Discriminator discriminator_from_json(const std::string& text);

}  // namespace contradice
