#include "contradice/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace contradice {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kSurrogate: return "surrogate";
    case TrainMode::kClippedExp: return "clipped_exp";
    case TrainMode::kAlphaOneRl: return "alpha_one_rl";
    case TrainMode::kLargeAlpha: return "large_alpha";
  }
  return "unknown";
}

TrainMode train_mode_from_string(const std::string& name) {
  for (TrainMode m : {TrainMode::kSurrogate, TrainMode::kClippedExp, TrainMode::kAlphaOneRl,
                      TrainMode::kLargeAlpha}) {
    if (name == to_string(m)) return m;
  }
  throw InvalidArgument("unknown training mode '" + name + "'");
}

void TrainConfig::validate() const {
  switch (mode) {
    case TrainMode::kSurrogate:
    case TrainMode::kClippedExp:
      if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw InvalidArgument("mode " + to_string(mode) + " needs 0 <= alpha < 1");
      }
      break;
    case TrainMode::kAlphaOneRl:
      if (alpha != 1.0) throw InvalidArgument("mode alpha_one_rl needs alpha = 1");
      break;
    case TrainMode::kLargeAlpha:
      if (!(alpha >= 1.0)) throw InvalidArgument("mode large_alpha needs alpha >= 1");
      break;
  }
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("tau must lie in (0, 1]");
  if (!(lr_q >= 0.0) || !(lr_v >= 0.0)) throw InvalidArgument("learning rates must be non-negative");
  if (!(lr_pi > 0.0) || !(lr_disc > 0.0)) throw InvalidArgument("learning rates must be positive");
  if (steps_disc < 0 || steps_main < 0) throw InvalidArgument("step counts must be non-negative");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (psi_clip_lo() > psi_clip_hi()) throw InvalidArgument("clip_lo exceeds clip_hi");
  if (exp_clip_lo > exp_clip_hi) throw InvalidArgument("exp_clip_lo exceeds exp_clip_hi");
  if (!(chi2_weight >= 0.0)) throw InvalidArgument("chi2_weight must be non-negative");
  if (log_every < 0) throw InvalidArgument("log_every must be non-negative");
}

double TrainConfig::psi_clip_lo() const {
  return std::isnan(clip_lo) ? -default_psi_clip(alpha) : clip_lo;
}

double TrainConfig::psi_clip_hi() const {
  return std::isnan(clip_hi) ? default_psi_clip(alpha) : clip_hi;
}

TrainState TrainState::initial(int n_states, int n_actions) {
  TrainState state;
  state.q = Matrix::Zero(n_states, n_actions);
  state.v = Vector::Zero(n_states);
  state.q_target = state.q;
  state.policy = Policy::uniform(n_states, n_actions);
  return state;
}

TrainingData prepare_training_data(const DemonstrationSet& union_set, const TrainConfig& config,
                                   const TabularMdp* known_model) {
  TrainingData data;
  data.gamma = config.gamma;
  data.union_estimates = estimate(union_set, config.gamma, config.epsilon, config.occupancy_weighting);
  if (known_model) {
    if (known_model->n_states != union_set.n_states || known_model->n_actions != union_set.n_actions) {
      throw InvalidArgument("known model shape does not match the data");
    }
    data.transition = known_model->transition;
    data.p0 = known_model->p0;
  } else {
    data.transition = empirical_transitions(union_set);
    data.p0 = empirical_initial_distribution(union_set);
  }
  return data;
}

Evaluator Evaluator::against(const TabularMdp& mdp, const Policy& expert) {
  Evaluator eval;
  eval.mdp = mdp;
  eval.random_score = policy_return(mdp, Policy::uniform(mdp.n_states, mdp.n_actions));
  eval.expert_score = policy_return(mdp, expert);
  return eval;
}

double Evaluator::normalized(const Policy& policy) const {
  return normalized_score(score(policy), random_score, expert_score);
}

Matrix q_weights(const PsiTable& psi, const TrainConfig& config, const Formulas& fx) {
  if (config.mode == TrainMode::kLargeAlpha) {
    return psi.psi.unaryExpr([&](double x) { return fx.exp_link(x); });
  }
  return delta_weights(psi.psi, psi.alpha, fx);
}

namespace {

Vector chi2_value_function(const TrainState& state, const TrainingData& data,
                           const TrainConfig& config) {
  if (!config.chi2_target_v) return state.v;
  return soft_value_closed_form(state.q_target, data.union_estimates.mu_hat, config.beta);
}

// Weight on the residual from the clipped full objective; zero where the
// exponent sits outside the clip range.
Matrix clipped_exp_weights(const Matrix& psi, const Matrix& residual, double alpha,
                           const TrainConfig& config) {
  const double scale = 1.0 - alpha;
  Matrix w(psi.rows(), psi.cols());
  for (int s = 0; s < psi.rows(); ++s) {
    for (int a = 0; a < psi.cols(); ++a) {
      const double t = (psi(s, a) - residual(s, a)) / scale;
      w(s, a) = (t >= config.exp_clip_lo && t <= config.exp_clip_hi) ? std::exp(t) : 0.0;
    }
  }
  return w;
}

}  // namespace

void q_update(TrainState& state, const Matrix& weights, const PsiTable& psi,
              const TrainingData& data, const TrainConfig& config) {
  const Matrix& d_u = data.union_estimates.d_hat;
  const auto& mask = data.union_estimates.support_mask;
  const Matrix residual =
      bellman_residual(state.q, chi2_value_function(state, data, config), data.transition, data.gamma);
  Matrix pull;  // -dL/dq divided by d_u
  if (config.mode == TrainMode::kClippedExp) {
    const Matrix exp_residual = config.chi2_target_v
                                    ? bellman_residual(state.q, state.v, data.transition, data.gamma)
                                    : residual;
    pull = clipped_exp_weights(psi.psi, exp_residual, psi.alpha, config) - config.chi2_weight * residual;
  } else {
    pull = weights - config.chi2_weight * residual;
  }
  if (!pull.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite Q gradient at step " << state.step + 1;
    throw ConvergenceError(msg.str(), std::numeric_limits<double>::infinity());
  }
  for (int s = 0; s < state.q.rows(); ++s) {
    for (int a = 0; a < state.q.cols(); ++a) {
      if (!mask(s, a)) continue;
      const double step = config.preconditioned ? pull(s, a) : d_u(s, a) * pull(s, a);
      state.q(s, a) += config.lr_q * step;
    }
  }
}

void v_update(TrainState& state, const TrainingData& data, const TrainConfig& config) {
  const Matrix& d_u = data.union_estimates.d_hat;
  const double beta = config.beta;
  if (config.exact_v_solve) {
    state.v = soft_value_closed_form(state.q_target, data.union_estimates.mu_hat, beta);
    return;
  }
  if (!config.preconditioned) {
    state.v -= config.lr_v * j_extreme_v_gradient(state.v, state.q_target, d_u, beta);
    return;
  }
  // Damped Newton step per state; the step is capped at 10 beta because the
  // curvature vanishes when v sits far above every q.
  for (int s = 0; s < state.v.size(); ++s) {
    double grad = 0.0;
    double curv = 0.0;
    for (int a = 0; a < d_u.cols(); ++a) {
      const double w = d_u(s, a);
      const double t = std::min((state.q_target(s, a) - state.v(s)) / beta, kExtremeVClamp);
      const double e = std::exp(t);
      grad -= w * (e - 1.0) / beta;
      curv += w * e / (beta * beta);
    }
    if (!(curv > 0.0)) continue;
    const double step = std::clamp(grad / curv, -10.0 * beta, 10.0 * beta);
    state.v(s) -= config.lr_v * step;
  }
}

void target_update(TrainState& state, double tau) {
  state.q_target = tau * state.q + (1.0 - tau) * state.q_target;
}

double q_objective(const TrainState& state, const Matrix& weights, const TrainingData& data,
                   const TrainConfig& config) {
  const Matrix& d_u = data.union_estimates.d_hat;
  const Matrix residual =
      bellman_residual(state.q, chi2_value_function(state, data, config), data.transition, data.gamma);
  const double chi2 = config.chi2_weight * chi2_regularizer(residual, d_u);
  if (config.mode == TrainMode::kClippedExp) {
    const Matrix raw = bellman_residual(state.q, state.v, data.transition, data.gamma);
    double expectation = 0.0;
    const double scale = 1.0 - config.alpha;
    for (int s = 0; s < raw.rows(); ++s) {
      for (int a = 0; a < raw.cols(); ++a) {
        const double t = std::clamp((weights(s, a) - raw(s, a)) / scale, config.exp_clip_lo,
                                    config.exp_clip_hi);
        expectation += d_u(s, a) * std::exp(t);
      }
    }
    return (1.0 - data.gamma) * data.p0.dot(state.v) + scale * expectation + chi2;
  }
  return l_q_given_v(state.q, state.v, weights, d_u, data.transition, data.p0, data.gamma) + chi2;
}

Policy policy_extract_qwbc(const Matrix& q, const Matrix& counts, double beta, double epsilon,
                           const Formulas& fx) {
  return policy_extract_awbc(q, Vector::Zero(q.rows()), counts, beta, epsilon, fx);
}

Policy policy_extract_qwbc(const Matrix& q, const DemonstrationSet& union_set, double beta,
                           const TrainConfig& config) {
  return policy_extract_qwbc(q, weighted_counts(union_set, config.gamma, config.occupancy_weighting),
                             beta);
}

Policy policy_extract_awbc(const Matrix& q, const Vector& v, const Matrix& counts, double beta,
                           double epsilon, const Formulas& fx) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be non-negative");
  if (q.rows() != counts.rows() || q.cols() != counts.cols() || v.size() != q.rows()) {
    throw InvalidArgument("policy extraction: shape mismatch");
  }
  const int n_actions = static_cast<int>(q.cols());
  Policy pi;
  pi.probs.resize(q.rows(), n_actions);
  for (int s = 0; s < q.rows(); ++s) {
    if (counts.row(s).sum() <= 0.0) {
      pi.probs.row(s).setConstant(1.0 / n_actions);
      continue;
    }
    double shift = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_actions; ++a) {
      if (counts(s, a) + epsilon > 0.0) shift = std::max(shift, q(s, a) - v(s));
    }
    double total = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      const double n = counts(s, a) + epsilon;
      pi.probs(s, a) = n > 0.0 ? n * fx.exp_link((q(s, a) - v(s) - shift) / beta) : 0.0;
      total += pi.probs(s, a);
    }
    pi.probs.row(s) /= total;
  }
  return pi;
}

Policy train_bc(const DemonstrationSet& data, double epsilon) {
  if (data.n_steps() == 0) throw InvalidArgument("behavior cloning needs a non-empty dataset");
  return Policy{empirical_behavior_policy(data, epsilon)};
}

namespace {

Discriminator checked_preloaded(const Discriminator& disc, const DemonstrationSet& like,
                                const TrainConfig& config, const char* which) {
  if (disc.n_states != like.n_states || disc.n_actions != like.n_actions ||
      disc.input != config.discriminator_input) {
    throw InvalidArgument(std::string("preloaded ") + which +
                          " discriminator does not match the data shape or input kind");
  }
  return disc;
}

// Per-pair ratio table from a trained classifier, read at next states for
// state-input discriminators.
Matrix pair_ratio(const Discriminator& disc, const DemonstrationSet& union_set) {
  if (disc.input == DiscriminatorInput::kStateAction) return ratio_from_discriminator(disc);
  const Vector log_ratio = disc.weights.array() + disc.bias;
  return next_state_log_ratio(log_ratio, union_set).array().exp();
}

}  // namespace

TrainResult estimate_psi(const DemonstrationSet& good, const DemonstrationSet& bad,
                         const DemonstrationSet& union_set, const TrainConfig& config,
                         const DiscriminatorPair& preloaded) {
  const bool use_bad = !bad.empty();
  const double alpha = use_bad ? config.alpha : 0.0;
  TrainConfig clip_config = config;
  clip_config.alpha = alpha;
  const double lo = clip_config.psi_clip_lo();
  const double hi = clip_config.psi_clip_hi();

  DiscriminatorTraining training{config.steps_disc, config.lr_disc, config.discriminator_input};
  const auto d_u = estimate(union_set, config.gamma, config.epsilon, config.occupancy_weighting);

  TrainResult result;
  if (preloaded.good) {
    result.disc_good = checked_preloaded(*preloaded.good, union_set, config, "good");
  } else {
    const auto d_g = estimate(good, config.gamma, config.epsilon, config.occupancy_weighting);
    result.disc_good = train_discriminator(d_g, d_u, training);
  }
  const Matrix ratio_g = pair_ratio(*result.disc_good, union_set);
  Matrix ratio_b = Matrix::Ones(ratio_g.rows(), ratio_g.cols());
  if (use_bad) {
    if (preloaded.bad) {
      result.disc_bad = checked_preloaded(*preloaded.bad, union_set, config, "bad");
    } else {
      const auto d_b = estimate(bad, config.gamma, config.epsilon, config.occupancy_weighting);
      result.disc_bad = train_discriminator(d_b, d_u, training);
    }
    ratio_b = pair_ratio(*result.disc_bad, union_set);
  }
  result.psi = compute_psi(ratio_g, ratio_b, alpha, lo, hi);
  return result;
}

namespace {

void record_metrics(TrainState& state, const PsiTable& psi, const Matrix& weights,
                    const TrainingData& data, const TrainConfig& config,
                    const Evaluator* evaluator) {
  const Matrix& d_u = data.union_estimates.d_hat;
  MetricRecord rec;
  rec.step = state.step;
  rec.l_q = q_objective(state, weights, data, config);
  rec.j_v = j_extreme_v(state.v, state.q_target, d_u, config.beta);
  rec.mean_psi = (d_u.array() * psi.psi.array()).sum();
  rec.mean_delta = (d_u.array() * weights.array()).sum();
  if (evaluator) {
    const Policy pi = policy_extract_qwbc(state.q, data.union_estimates.counts, config.beta);
    rec.policy_return = evaluator->score(pi);
    rec.normalized_score = evaluator->normalized(pi);
  }
  state.metrics_log.push_back(rec);
}

}  // namespace

TrainState train_with_psi(const PsiTable& psi, const TrainingData& data, const TrainConfig& config,
                          const Evaluator* evaluator) {
  config.validate();
  if (psi.psi.rows() != data.n_states() || psi.psi.cols() != data.n_actions()) {
    throw InvalidArgument("psi table shape does not match the data");
  }
  const Matrix weights = q_weights(psi, config);
  TrainState state = TrainState::initial(data.n_states(), data.n_actions());
  for (int step = 1; step <= config.steps_main; ++step) {
    try {
      q_update(state, weights, psi, data, config);
      v_update(state, data, config);
    } catch (const ConvergenceError& e) {
      std::ostringstream msg;
      msg << "training step " << step << ": " << e.what();
      throw ConvergenceError(msg.str(), e.residual());
    }
    target_update(state, config.tau);
    state.step = step;
    if (config.log_every > 0 && (step % config.log_every == 0 || step == config.steps_main)) {
      int clamped = 0;
      j_extreme_v(state.v, state.q_target, data.union_estimates.d_hat, config.beta, &clamped);
      if (clamped > 0 && step == config.steps_main) {
        std::ostringstream msg;
        msg << "step " << step << ": " << clamped
            << " Extreme-V exponents clamped at " << kExtremeVClamp;
        state.warnings.push_back(msg.str());
      }
      record_metrics(state, psi, config.mode == TrainMode::kClippedExp ? psi.psi : weights, data,
                     config, evaluator);
    }
  }
  state.policy = policy_extract_qwbc(state.q, data.union_estimates.counts, config.beta);
  return state;
}

TrainResult train_contradice(const DemonstrationSet& good, const DemonstrationSet& bad,
                             const DemonstrationSet& mix, const TrainConfig& config,
                             const TabularMdp* known_model, const Evaluator* evaluator,
                             const DiscriminatorPair& preloaded) {
  config.validate();
  if (good.empty()) throw InvalidArgument("the good dataset is empty");
  if (mix.empty()) throw InvalidArgument("the unlabeled dataset is empty");
  const DemonstrationSet union_set = build_union(good, mix);
  TrainResult result = estimate_psi(good, bad, union_set, config, preloaded);
  TrainResult trained = train_contradice(result.psi, union_set, config, known_model, evaluator);
  result.state = std::move(trained.state);
  return result;
}

TrainResult train_contradice(const PsiTable& psi, const DemonstrationSet& union_set,
                             const TrainConfig& config, const TabularMdp* known_model,
                             const Evaluator* evaluator) {
  config.validate();
  const TrainingData data = prepare_training_data(union_set, config, known_model);
  TrainResult result;
  result.psi = psi;
  switch (config.mode) {
    case TrainMode::kAlphaOneRl:
      result.state = train_alpha_one(psi, data, config, evaluator);
      break;
    case TrainMode::kLargeAlpha:
      result.state = train_large_alpha(psi, data, config, evaluator);
      break;
    default:
      result.state = train_with_psi(psi, data, config, evaluator);
  }
  return result;
}

Matrix alpha_one_reference(const Matrix& counts) {
  Matrix ref(counts.rows(), counts.cols());
  for (int s = 0; s < counts.rows(); ++s) {
    const double total = counts.row(s).sum();
    if (total > 0.0) {
      ref.row(s) = counts.row(s) / total;
    } else {
      ref.row(s).setConstant(1.0 / counts.cols());
    }
  }
  return ref;
}

TrainState train_alpha_one(const PsiTable& psi, const TrainingData& data, const TrainConfig& config,
                           const Evaluator* evaluator) {
  if (config.mode != TrainMode::kAlphaOneRl) config.validate();
  if (!(config.beta > 0.0)) throw InvalidArgument("beta must be positive");
  const Matrix ref = alpha_one_reference(data.union_estimates.counts);
  const double pin = std::isnan(config.alpha_one_pin) ? psi.psi.minCoeff() / (1.0 - data.gamma)
                                                      : config.alpha_one_pin;
  const int n_s = data.n_states();
  const int n_a = data.n_actions();
  Matrix q(n_s, n_a);
  for (int s = 0; s < n_s; ++s) {
    for (int a = 0; a < n_a; ++a) q(s, a) = ref(s, a) > 0.0 ? psi.psi(s, a) : pin;
  }
  Vector v = soft_value_closed_form(q, ref, config.beta);
  double change = std::numeric_limits<double>::infinity();
  int it = 0;
  constexpr int kMaxIterations = 1000000;
  while (change > config.alpha_one_tolerance && it < kMaxIterations) {
    const Matrix backup = data.transition.expectation(v);
    Matrix next(n_s, n_a);
    for (int s = 0; s < n_s; ++s) {
      for (int a = 0; a < n_a; ++a) {
        next(s, a) = ref(s, a) > 0.0 ? psi.psi(s, a) + data.gamma * backup(s, a) : pin;
      }
    }
    change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    v = soft_value_closed_form(q, ref, config.beta);
    ++it;
    if (!std::isfinite(change)) {
      throw ConvergenceError("alpha = 1 soft Q-iteration produced a non-finite value", change);
    }
  }
  if (change > config.alpha_one_tolerance) {
    throw ConvergenceError("alpha = 1 soft Q-iteration did not converge", change);
  }
  TrainState state = TrainState::initial(n_s, n_a);
  state.q = q;
  state.v = v;
  state.q_target = q;
  state.step = it;
  state.policy = policy_extract_qwbc(q, ref, config.beta);
  MetricRecord rec;
  rec.step = it;
  rec.l_q = 0.0;
  rec.j_v = j_extreme_v(v, q, data.union_estimates.d_hat, config.beta);
  rec.mean_psi = (data.union_estimates.d_hat.array() * psi.psi.array()).sum();
  rec.mean_delta = rec.mean_psi;
  if (evaluator) {
    rec.policy_return = evaluator->score(state.policy);
    rec.normalized_score = evaluator->normalized(state.policy);
  }
  state.metrics_log.push_back(rec);
  return state;
}

TrainState train_large_alpha(const PsiTable& psi, const TrainingData& data,
                             const TrainConfig& config, const Evaluator* evaluator) {
  if (config.mode != TrainMode::kLargeAlpha) {
    throw InvalidArgument("train_large_alpha needs mode large_alpha");
  }
  return train_with_psi(psi, data, config, evaluator);
}

}  // namespace contradice
