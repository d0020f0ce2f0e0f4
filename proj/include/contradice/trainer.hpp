#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "contradice/datasets.hpp"
#include "contradice/formulas.hpp"
#include "contradice/mdp.hpp"
#include "contradice/objectives.hpp"
#include "contradice/ratios.hpp"

namespace contradice {

enum class TrainMode { kSurrogate, kClippedExp, kAlphaOneRl, kLargeAlpha };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

inline constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct TrainConfig {
  double alpha = 0.5;
  double beta = 5.0;
  double gamma = 0.9;
  double tau = 0.005;
  double lr_q = 0.5;
  double lr_v = 0.5;
  double lr_pi = 1.0;  // unused by the closed-form tabular extraction; kept in snapshots
  double lr_disc = 2.0;
  int steps_disc = 20000;
  int steps_main = 40000;
  double epsilon = 1e-6;
  double clip_lo = kUnset;  // unset: -default_psi_clip(alpha)
  double clip_hi = kUnset;  // unset: +default_psi_clip(alpha)
  double exp_clip_lo = -7.0;
  double exp_clip_hi = 7.0;
  TrainMode mode = TrainMode::kSurrogate;
  OccupancyWeighting occupancy_weighting = OccupancyWeighting::kDiscounted;
  DiscriminatorInput discriminator_input = DiscriminatorInput::kStateAction;
  bool exact_v_solve = false;
  // Divide each pair's gradient by its union weight d_u(s,a). Plain steps
  // scale with d_u, which is tiny on rarely visited pairs.
  bool preconditioned = true;
  double chi2_weight = 1.0;
  bool chi2_target_v = false;  // residual uses the soft value of q_target instead of v
  int log_every = 100;
  double alpha_one_pin = kUnset;  // unset: min(psi) / (1 - gamma)
  double alpha_one_tolerance = 1e-12;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on an inconsistent mode/alpha pair or bad ranges.
  void validate() const;

  double psi_clip_lo() const;
  double psi_clip_hi() const;
};

struct MetricRecord {
  int step = 0;
  double l_q = 0.0;
  double j_v = 0.0;
  double mean_psi = 0.0;
  double mean_delta = 0.0;
  double policy_return = kUnset;
  double normalized_score = kUnset;
  bool operator==(const MetricRecord&) const = default;
};

struct TrainState {
  Matrix q;
  Vector v;
  Matrix q_target;
  Policy policy;
  int step = 0;
  std::vector<MetricRecord> metrics_log;
  std::vector<std::string> warnings;

  static TrainState initial(int n_states, int n_actions);
};

/// The learner's view of the union data. The transition model and initial
/// distribution come from the data unless a known MDP is supplied.
struct TrainingData {
  EmpiricalEstimates union_estimates;  // d_hat is d_u, mu_hat is mu_u
  TransitionTensor transition;
  Vector p0;
  double gamma = 0.9;

  int n_states() const { return static_cast<int>(union_estimates.d_hat.rows()); }
  int n_actions() const { return static_cast<int>(union_estimates.d_hat.cols()); }
};

TrainingData prepare_training_data(const DemonstrationSet& union_set, const TrainConfig& config,
                                   const TabularMdp* known_model = nullptr);

/// Scores policies on the true MDP against a uniform-random and an expert policy.
struct Evaluator {
  TabularMdp mdp;
  double random_score = 0.0;
  double expert_score = 1.0;

  static Evaluator against(const TabularMdp& mdp, const Policy& expert);
  double score(const Policy& policy) const { return policy_return(mdp, policy); }
  double normalized(const Policy& policy) const;
};

// --- Single steps -----------------------------------------------------------

/// Per-pair weights on the Bellman residual: exp(psi/(1-alpha)) for the
/// surrogate modes, exp(psi) for the large-alpha mode.
Matrix q_weights(const PsiTable& psi, const TrainConfig& config,
                 const Formulas& fx = standard_formulas());

/// One step on l_q_given_v + chi2_weight * chi2 over the union support.
/// Throws ConvergenceError on a non-finite gradient.
void q_update(TrainState& state, const Matrix& weights, const PsiTable& psi,
              const TrainingData& data, const TrainConfig& config);

/// One step on j_extreme_v(v | q_target), or the closed-form minimizer when
/// config.exact_v_solve is set.
void v_update(TrainState& state, const TrainingData& data, const TrainConfig& config);

/// q_target <- tau q + (1 - tau) q_target.
void target_update(TrainState& state, double tau);

/// Value of l_q_given_v + chi2_weight * chi2 at the current state.
double q_objective(const TrainState& state, const Matrix& weights, const TrainingData& data,
                   const TrainConfig& config);

// --- Policy extraction --------------------------------------------------------

/// pi(a|s) proportional to (counts(s,a) + epsilon) exp(q(s,a)/beta); rows
/// with no counts are uniform.
Policy policy_extract_qwbc(const Matrix& q, const Matrix& counts, double beta, double epsilon = 0.0,
                           const Formulas& fx = standard_formulas());

/// Counts taken from `union_set` with the configured occupancy weighting.
Policy policy_extract_qwbc(const Matrix& q, const DemonstrationSet& union_set, double beta,
                           const TrainConfig& config);

/// pi(a|s) proportional to (counts(s,a) + epsilon) exp((q(s,a) - v(s))/beta).
Policy policy_extract_awbc(const Matrix& q, const Vector& v, const Matrix& counts, double beta,
                           double epsilon = 0.0, const Formulas& fx = standard_formulas());

/// Smoothed empirical conditional of uniformly weighted counts.
Policy train_bc(const DemonstrationSet& data, double epsilon);

// --- Full runs ----------------------------------------------------------------

struct TrainResult {
  TrainState state;
  PsiTable psi;
  std::optional<Discriminator> disc_good;
  std::optional<Discriminator> disc_bad;
};

/// Pretrained discriminators to reuse instead of training.
struct DiscriminatorPair {
  std::optional<Discriminator> good;
  std::optional<Discriminator> bad;
};

/// Discriminators for d_g/d_u and d_b/d_u, then Psi. An empty bad set
/// drops the bad term (alpha treated as 0).
TrainResult estimate_psi(const DemonstrationSet& good, const DemonstrationSet& bad,
                         const DemonstrationSet& union_set, const TrainConfig& config,
                         const DiscriminatorPair& preloaded = {});

/// The alternating Q/V loop with a fixed Psi table.
TrainState train_with_psi(const PsiTable& psi, const TrainingData& data, const TrainConfig& config,
                          const Evaluator* evaluator = nullptr);

/// Full pipeline: union, discriminators, Psi, alternating Q/V training and
/// Q-weighted extraction. Dispatches on config.mode.
TrainResult train_contradice(const DemonstrationSet& good, const DemonstrationSet& bad,
                             const DemonstrationSet& mix, const TrainConfig& config,
                             const TabularMdp* known_model = nullptr,
                             const Evaluator* evaluator = nullptr,
                             const DiscriminatorPair& preloaded = {});

/// Same loop with a caller-supplied Psi (for example from true occupancies).
TrainResult train_contradice(const PsiTable& psi, const DemonstrationSet& union_set,
                             const TrainConfig& config, const TabularMdp* known_model = nullptr,
                             const Evaluator* evaluator = nullptr);

/// Soft Q-iteration on reward psi over the data support, then extraction.
/// The reference policy is the raw empirical conditional (uniform on unvisited
/// states); actions never taken at a visited state are pinned.
TrainState train_alpha_one(const PsiTable& psi, const TrainingData& data, const TrainConfig& config,
                           const Evaluator* evaluator = nullptr);

/// Reference policy used by train_alpha_one.
Matrix alpha_one_reference(const Matrix& counts);

/// Mode LARGE_ALPHA with weights exp(psi).
TrainState train_large_alpha(const PsiTable& psi, const TrainingData& data,
                             const TrainConfig& config, const Evaluator* evaluator = nullptr);

}  // namespace contradice
