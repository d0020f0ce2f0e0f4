#include "contradice/mdp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace contradice {

namespace {

void check_probability_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, double tol,
                           const std::string& what) {
  if ((row.array() < 0.0).any() || !row.allFinite()) {
    throw InvalidArgument(what + " has a negative or non-finite entry");
  }
  if (std::abs(row.sum() - 1.0) > tol) {
    std::ostringstream msg;
    msg << what << " sums to " << row.sum() << " instead of 1";
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

Matrix TransitionTensor::expectation(const Vector& v) const {
  Matrix out(n_states(), n_actions());
  for (int a = 0; a < n_actions(); ++a) {
    out.col(a) = by_action[a] * v;
  }
  return out;
}

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) {
    throw InvalidArgument("MDP needs at least one state and one action");
  }
  if (transition.n_actions() != n_actions || transition.n_states() != n_states) {
    throw InvalidArgument("transition tensor shape does not match n_states x n_actions");
  }
  if (reward.rows() != n_states || reward.cols() != n_actions) {
    throw InvalidArgument("reward matrix shape does not match n_states x n_actions");
  }
  if (p0.size() != n_states) {
    throw InvalidArgument("p0 length does not match n_states");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw InvalidArgument("gamma must lie in [0, 1)");
  }
  for (int a = 0; a < n_actions; ++a) {
    const Matrix& t = transition.by_action[a];
    if (t.cols() != n_states) throw InvalidArgument("transition row length does not match n_states");
    for (int s = 0; s < n_states; ++s) {
      check_probability_row(t.row(s), 1e-12,
                            "T(.|s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")");
    }
  }
  check_probability_row(p0.transpose(), 1e-12, "p0");
  if (!reward.allFinite()) throw InvalidArgument("reward has non-finite entries");
}

Policy Policy::uniform(int n_states, int n_actions) {
  return Policy{Matrix::Constant(n_states, n_actions, 1.0 / n_actions)};
}

void Policy::validate(double tol) const {
  for (int s = 0; s < probs.rows(); ++s) {
    check_probability_row(probs.row(s), tol, "pi(.|s=" + std::to_string(s) + ")");
  }
}

void OccupancyMeasure::validate(double tol) const {
  if ((d.array() < 0.0).any() || !d.allFinite()) {
    throw InvalidArgument("occupancy has a negative or non-finite entry");
  }
  if (std::abs(d.sum() - 1.0) > tol) {
    throw InvalidArgument("occupancy does not sum to 1");
  }
}

OccupancyMeasure occupancy_of_policy(const TabularMdp& mdp, const Policy& policy) {
  const int n = mdp.n_states;
  if (policy.n_states() != n || policy.n_actions() != mdp.n_actions) {
    throw InvalidArgument("policy shape does not match the MDP");
  }
  Matrix p_pi = Matrix::Zero(n, n);
  for (int a = 0; a < mdp.n_actions; ++a) {
    p_pi += policy.probs.col(a).asDiagonal() * mdp.transition.by_action[a];
  }
  const Matrix system = Matrix::Identity(n, n) - mdp.gamma * p_pi.transpose();
  const Vector rhs = (1.0 - mdp.gamma) * mdp.p0;
  Eigen::PartialPivLU<Matrix> lu(system);
  const Vector rho = lu.solve(rhs);
  if (!rho.allFinite()) {
    throw Error("internal error: occupancy linear system could not be solved");
  }
  OccupancyMeasure out{rho.asDiagonal() * policy.probs};
  // Round-off can leave entries at -1e-18.
  out.d = out.d.cwiseMax(0.0);
  return out;
}

double bellman_flow_residual(const TabularMdp& mdp, const Policy& policy,
                             const OccupancyMeasure& occupancy) {
  const Matrix& d = occupancy.d;
  Vector inflow = Vector::Zero(mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a) {
    inflow += mdp.transition.by_action[a].transpose() * d.col(a);
  }
  const Vector rho = (1.0 - mdp.gamma) * mdp.p0 + mdp.gamma * inflow;
  const Matrix rhs = rho.asDiagonal() * policy.probs;
  return (rhs - d).cwiseAbs().maxCoeff();
}

Vector weighted_soft_max(const Matrix& x, const Matrix& weights, double beta) {
  Vector out(x.rows());
  for (int s = 0; s < x.rows(); ++s) {
    double shift = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < x.cols(); ++a) {
      if (weights(s, a) > 0.0) shift = std::max(shift, x(s, a));
    }
    if (!std::isfinite(shift)) {
      out(s) = shift;
      continue;
    }
    double acc = 0.0;
    for (int a = 0; a < x.cols(); ++a) {
      if (weights(s, a) > 0.0) acc += weights(s, a) * std::exp((x(s, a) - shift) / beta);
    }
    out(s) = shift + beta * std::log(acc);
  }
  return out;
}

SoftValueResult soft_value_iteration(const TabularMdp& mdp, const Matrix& reward, double beta,
                                     const SoftValueOptions& options) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (reward.rows() != mdp.n_states || reward.cols() != mdp.n_actions) {
    throw InvalidArgument("reward shape does not match the MDP");
  }
  const Matrix reference = options.reference.size() == 0
                               ? Matrix::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions)
                               : options.reference;

  Vector v = Vector::Zero(mdp.n_states);
  Matrix q = reward;
  double change = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < options.max_iterations) {
    ++it;
    q = reward + mdp.gamma * mdp.transition.expectation(v);
    const Vector next = weighted_soft_max(q, reference, beta);
    change = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (!std::isfinite(change)) {
      throw ConvergenceError("soft value iteration produced a non-finite value", change);
    }
    if (change < options.tolerance) break;
  }
  if (change >= options.tolerance) {
    std::ostringstream msg;
    msg << "soft value iteration did not converge after " << it << " steps (residual " << change
        << ")";
    throw ConvergenceError(msg.str(), change);
  }
  q = reward + mdp.gamma * mdp.transition.expectation(v);

  Policy policy{Matrix::Zero(mdp.n_states, mdp.n_actions)};
  for (int s = 0; s < mdp.n_states; ++s) {
    double norm = 0.0;
    const double shift = q.row(s).maxCoeff();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = reference(s, a) * std::exp((q(s, a) - shift) / beta);
      policy.probs(s, a) = w;
      norm += w;
    }
    policy.probs.row(s) /= norm;
  }
  return SoftValueResult{std::move(q), std::move(v), std::move(policy), it};
}

double policy_return(const TabularMdp& mdp, const Policy& policy) {
  const OccupancyMeasure occ = occupancy_of_policy(mdp, policy);
  return occ.d.cwiseProduct(mdp.reward).sum() / (1.0 - mdp.gamma);
}

double normalized_score(double score, double random_score, double expert_score) {
  const double denom = expert_score - random_score;
  if (denom == 0.0 || !std::isfinite(denom)) {
    throw InvalidArgument("normalized score needs expert_score != random_score");
  }
  return (score - random_score) / denom;
}

std::string mdp_to_json(const TabularMdp& mdp) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["n_states"] = mdp.n_states;
  doc["n_actions"] = mdp.n_actions;
  doc["gamma"] = mdp.gamma;
  doc["p0"] = std::vector<double>(mdp.p0.data(), mdp.p0.data() + mdp.p0.size());
  ordered_json transition = ordered_json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    ordered_json per_state = ordered_json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const Matrix& t = mdp.transition.by_action[a];
      std::vector<double> row(mdp.n_states);
      for (int sp = 0; sp < mdp.n_states; ++sp) row[sp] = t(s, sp);
      per_state.push_back(row);
    }
    transition.push_back(std::move(per_state));
  }
  doc["transition"] = std::move(transition);
  ordered_json reward = ordered_json::array();
  for (int s = 0; s < mdp.n_states; ++s) {
    std::vector<double> row(mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a) row[a] = mdp.reward(s, a);
    reward.push_back(row);
  }
  doc["reward"] = std::move(reward);
  return doc.dump();
}

TabularMdp mdp_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("malformed MDP JSON: ") + e.what());
  }
  TabularMdp mdp;
  try {
    mdp.n_states = doc.at("n_states").get<int>();
    mdp.n_actions = doc.at("n_actions").get<int>();
    mdp.gamma = doc.at("gamma").get<double>();
    const auto p0 = doc.at("p0").get<std::vector<double>>();
    mdp.p0 = Eigen::Map<const Vector>(p0.data(), static_cast<Eigen::Index>(p0.size()));
    const auto& transition = doc.at("transition");
    const auto& reward = doc.at("reward");
    if (transition.size() != static_cast<std::size_t>(mdp.n_states) ||
        reward.size() != static_cast<std::size_t>(mdp.n_states)) {
      throw InvalidArgument("MDP JSON arrays do not match n_states");
    }
    mdp.transition.by_action.assign(mdp.n_actions, Matrix::Zero(mdp.n_states, mdp.n_states));
    mdp.reward = Matrix::Zero(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (transition[s].size() != static_cast<std::size_t>(mdp.n_actions) ||
          reward[s].size() != static_cast<std::size_t>(mdp.n_actions)) {
        throw InvalidArgument("MDP JSON arrays do not match n_actions");
      }
      for (int a = 0; a < mdp.n_actions; ++a) {
        const auto row = transition[s][a].get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(mdp.n_states)) {
          throw InvalidArgument("MDP JSON transition row has the wrong length");
        }
        for (int sp = 0; sp < mdp.n_states; ++sp) mdp.transition.by_action[a](s, sp) = row[sp];
        mdp.reward(s, a) = reward[s][a].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("MDP JSON is missing a field: ") + e.what());
  }
  mdp.validate();
  return mdp;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::uint64_t mdp_hash(const TabularMdp& mdp) { return fnv1a64(mdp_to_json(mdp)); }

}  // namespace contradice
