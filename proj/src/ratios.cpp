#include "contradice/ratios.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace contradice {

std::string to_string(DiscriminatorInput input) {
  return input == DiscriminatorInput::kStateAction ? "state_action" : "state";
}

DiscriminatorInput discriminator_input_from_string(const std::string& name) {
  if (name == "state_action") return DiscriminatorInput::kStateAction;
  if (name == "state") return DiscriminatorInput::kState;
  throw InvalidArgument("unknown discriminator input '" + name + "'");
}

namespace {

/// Flattens an S x A weight table onto the discriminator's feature index.
Vector feature_weights(const Matrix& table, DiscriminatorInput input) {
  if (input == DiscriminatorInput::kState) return table.rowwise().sum();
  Vector out(table.size());
  for (int s = 0; s < table.rows(); ++s) {
    for (int a = 0; a < table.cols(); ++a) out(s * table.cols() + a) = table(s, a);
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(z)) and log(1 - sigmoid(z)) without cancellation.
double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }
double log_one_minus_sigmoid(double z) { return log_sigmoid(-z); }

}  // namespace

Discriminator Discriminator::untrained(int n_states, int n_actions, DiscriminatorInput input) {
  Discriminator disc;
  disc.input = input;
  disc.n_states = n_states;
  disc.n_actions = n_actions;
  const int n_features = input == DiscriminatorInput::kState ? n_states : n_states * n_actions;
  disc.weights = Vector::Zero(n_features);
  return disc;
}

Matrix Discriminator::output() const {
  Matrix c(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const int f = input == DiscriminatorInput::kState ? s : s * n_actions + a;
      c(s, a) = sigmoid(weights(f) + bias);
    }
  }
  return c;
}

double discriminator_loss(const Discriminator& disc, const Matrix& pos, const Matrix& ref) {
  const Vector p = feature_weights(pos, disc.input);
  const Vector r = feature_weights(ref, disc.input);
  double loss = 0.0;
  for (int i = 0; i < disc.weights.size(); ++i) {
    const double z = disc.weights(i) + disc.bias;
    if (p(i) > 0.0) loss -= p(i) * log_sigmoid(z);
    if (r(i) > 0.0) loss -= r(i) * log_one_minus_sigmoid(z);
  }
  return loss;
}

Vector discriminator_loss_gradient(const Discriminator& disc, const Matrix& pos, const Matrix& ref) {
  const Vector p = feature_weights(pos, disc.input);
  const Vector r = feature_weights(ref, disc.input);
  const int n = static_cast<int>(disc.weights.size());
  Vector grad(n + 1);
  double bias_grad = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = sigmoid(disc.weights(i) + disc.bias);
    grad(i) = -p(i) * (1.0 - c) + r(i) * c;
    bias_grad += grad(i);
  }
  grad(n) = bias_grad;
  return grad;
}

Discriminator train_discriminator(const Matrix& pos, const Matrix& ref,
                                  const DiscriminatorTraining& options) {
  if (options.steps < 0) throw InvalidArgument("discriminator steps must be non-negative");
  if (!(options.lr > 0.0)) throw InvalidArgument("discriminator learning rate must be positive");
  if (pos.rows() != ref.rows() || pos.cols() != ref.cols()) {
    throw InvalidArgument("discriminator inputs differ in shape");
  }
  Discriminator disc = Discriminator::untrained(static_cast<int>(pos.rows()),
                                                static_cast<int>(pos.cols()), options.input);
  const int n = static_cast<int>(disc.weights.size());
  for (int step = 0; step < options.steps; ++step) {
    const Vector grad = discriminator_loss_gradient(disc, pos, ref);
    disc.weights -= options.lr * grad.head(n);
    disc.bias -= options.lr * grad(n);
    ++disc.trained_steps;
    if (!disc.weights.allFinite() || !std::isfinite(disc.bias)) {
      std::ostringstream msg;
      msg << "discriminator diverged at step " << step + 1;
      throw ConvergenceError(msg.str(), std::numeric_limits<double>::infinity());
    }
  }
  const double final_loss = discriminator_loss(disc, pos, ref);
  if (!std::isfinite(final_loss)) {
    throw ConvergenceError("discriminator loss is non-finite after training", final_loss);
  }
  return disc;
}

Matrix ratio_from_discriminator(const Discriminator& disc) {
  Matrix out(disc.n_states, disc.n_actions);
  for (int s = 0; s < disc.n_states; ++s) {
    for (int a = 0; a < disc.n_actions; ++a) {
      const int f = disc.input == DiscriminatorInput::kState ? s : s * disc.n_actions + a;
      // c / (1 - c) = exp(logit).
      out(s, a) = std::exp(disc.weights(f) + disc.bias);
    }
  }
  return out;
}

double default_psi_clip(double alpha) { return alpha < 1.0 ? 7.0 * (1.0 - alpha) : 7.0; }

PsiTable compute_psi(const Matrix& ratio_g, const Matrix& ratio_b, double alpha, double clip_lo,
                     double clip_hi, const Formulas& fx) {
  if (ratio_g.rows() != ratio_b.rows() || ratio_g.cols() != ratio_b.cols()) {
    throw InvalidArgument("ratio tables differ in shape");
  }
  if (!(ratio_g.array() > 0.0).all() || !(ratio_b.array() > 0.0).all()) {
    throw InvalidArgument("occupancy ratios must be strictly positive");
  }
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
  if (clip_lo > clip_hi) throw InvalidArgument("clip_lo exceeds clip_hi");
  PsiTable out;
  out.alpha = alpha;
  out.clip_lo = clip_lo;
  out.clip_hi = clip_hi;
  out.source = PsiSource::kDiscriminator;
  out.psi.resize(ratio_g.rows(), ratio_g.cols());
  for (int s = 0; s < ratio_g.rows(); ++s) {
    for (int a = 0; a < ratio_g.cols(); ++a) {
      const double psi = fx.psi(std::log(ratio_g(s, a)), std::log(ratio_b(s, a)), alpha);
      out.psi(s, a) = std::clamp(psi, clip_lo, clip_hi);
    }
  }
  return out;
}

PsiTable exact_psi(const OccupancyMeasure& d_g, const OccupancyMeasure& d_b,
                   const OccupancyMeasure& d_u, double alpha, double clip_lo, double clip_hi,
                   const Formulas& fx) {
  const Matrix& g = d_g.d;
  const Matrix& b = d_b.d;
  const Matrix& u = d_u.d;
  std::ostringstream bad;
  int n_bad = 0;
  for (int s = 0; s < u.rows(); ++s) {
    for (int a = 0; a < u.cols(); ++a) {
      if (u(s, a) <= 0.0 && (g(s, a) > 0.0 || b(s, a) > 0.0)) {
        bad << (n_bad++ ? ", " : "") << "(" << s << "," << a << ")";
      }
    }
  }
  if (n_bad > 0) {
    throw InvalidArgument("d_u has no mass on pairs covered by d_g or d_b: " + bad.str());
  }
  PsiTable out;
  out.alpha = alpha;
  out.clip_lo = clip_lo;
  out.clip_hi = clip_hi;
  out.source = PsiSource::kExact;
  out.psi = Matrix::Zero(u.rows(), u.cols());
  for (int s = 0; s < u.rows(); ++s) {
    for (int a = 0; a < u.cols(); ++a) {
      if (u(s, a) <= 0.0) continue;  // outside every support; Psi is irrelevant there
      const double lg = std::log(g(s, a) / u(s, a));
      const double lb = alpha == 0.0 ? 0.0 : std::log(b(s, a) / u(s, a));
      double psi = fx.psi(lg, lb, alpha);
      if (std::isnan(psi)) psi = 0.0;  // -inf + inf: both ratios vanish
      out.psi(s, a) = std::clamp(psi, clip_lo, clip_hi);
    }
  }
  return out;
}

Matrix next_state_log_ratio(const Vector& state_log_ratio, const DemonstrationSet& transitions) {
  const int n_s = transitions.n_states;
  const int n_a = transitions.n_actions;
  Matrix sum = Matrix::Zero(n_s, n_a);
  Matrix count = Matrix::Zero(n_s, n_a);
  for (const auto& traj : transitions.trajectories) {
    for (const auto& st : traj.steps) {
      sum(st.state, st.action) += state_log_ratio(st.next_state);
      count(st.state, st.action) += 1.0;
    }
  }
  Matrix out(n_s, n_a);
  for (int s = 0; s < n_s; ++s) {
    for (int a = 0; a < n_a; ++a) {
      out(s, a) = count(s, a) > 0.0 ? sum(s, a) / count(s, a) : state_log_ratio(s);
    }
  }
  return out;
}

std::string discriminator_to_json(const Discriminator& disc) {
  nlohmann::ordered_json doc;
  doc["input"] = to_string(disc.input);
  doc["n_states"] = disc.n_states;
  doc["n_actions"] = disc.n_actions;
  doc["bias"] = disc.bias;
  doc["trained_steps"] = disc.trained_steps;
  doc["weights"] = std::vector<double>(disc.weights.data(), disc.weights.data() + disc.weights.size());
  return doc.dump();
}

Discriminator discriminator_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    Discriminator disc = Discriminator::untrained(doc.at("n_states").get<int>(),
                                                  doc.at("n_actions").get<int>(),
                                                  discriminator_input_from_string(doc.at("input").get<std::string>()));
    disc.bias = doc.at("bias").get<double>();
    disc.trained_steps = doc.at("trained_steps").get<int>();
    const auto w = doc.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != disc.weights.size()) {
      throw InvalidArgument("discriminator weight count does not match its shape");
    }
    disc.weights = Eigen::Map<const Vector>(w.data(), disc.weights.size());
    return disc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed discriminator JSON: ") + e.what());
  }
}

}  // namespace contradice
