#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace contradice {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violated a documented precondition or type invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its step cap or produced a non-finite value.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Transition kernel stored per action: `by_action[a](s, s') = T(s'|s,a)`.
struct TransitionTensor {
  std::vector<Matrix> by_action;

  int n_states() const { return by_action.empty() ? 0 : static_cast<int>(by_action.front().rows()); }
  int n_actions() const { return static_cast<int>(by_action.size()); }

  /// `out(s, a) = sum_s' T(s'|s,a) v(s')`.
  Matrix expectation(const Vector& v) const;
};

struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  TransitionTensor transition;
  Matrix reward;  // S x A, environment truth
  Vector p0;
  double gamma = 0.9;

  /// Throws InvalidArgument when any invariant fails.
  void validate() const;
};

struct Policy {
  Matrix probs;  // S x A, rows are pi(.|s)

  static Policy uniform(int n_states, int n_actions);
  void validate(double tol = 1e-12) const;
  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_actions() const { return static_cast<int>(probs.cols()); }
};

struct OccupancyMeasure {
  Matrix d;  // S x A

  void validate(double tol = 1e-10) const;
  Vector state_marginal() const { return d.rowwise().sum(); }
};

struct SoftValueResult {
  Matrix q;
  Vector v;
  Policy policy;
  int iterations = 0;
};

struct SoftValueOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
  /// Reference policy for the log-sum-exp. Uniform when empty.
  Matrix reference;
};

/// Discounted state-action occupancy of `policy` via a dense linear solve.
OccupancyMeasure occupancy_of_policy(const TabularMdp& mdp, const Policy& policy);

/// Max-norm residual of the Bellman-flow constraint for `occupancy`.
double bellman_flow_residual(const TabularMdp& mdp, const Policy& policy,
                             const OccupancyMeasure& occupancy);

/// Soft (MaxEnt) value iteration with temperature `beta`:
///   v(s) = beta * log sum_a ref(a|s) exp(q(s,a)/beta),  q = reward + gamma T v.
/// The returned policy is ref(a|s) exp((q - v)/beta).
SoftValueResult soft_value_iteration(const TabularMdp& mdp, const Matrix& reward, double beta,
                                     const SoftValueOptions& options = {});

/// Expected discounted return E[sum_t gamma^t r(s_t, a_t)], computed as
/// sum_{s,a} d(s,a) r(s,a) / (1 - gamma). This is the single return convention
/// used for every score in the project.
double policy_return(const TabularMdp& mdp, const Policy& policy);

/// (score - random) / (expert - random).
double normalized_score(double score, double random_score, double expert_score);

/// Row-wise weighted log-sum-exp: `beta * log sum_a w(s,a) exp(x(s,a)/beta)`.
/// Entries with zero weight are skipped; a row of zero weights yields -inf.
Vector weighted_soft_max(const Matrix& x, const Matrix& weights, double beta);

// JSON document {n_states, n_actions, gamma, p0, transition, reward}.
std::string mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const std::string& text);

/// 64-bit FNV-1a over arbitrary bytes.
std::uint64_t fnv1a64(const std::string& bytes);

/// FNV-1a of the canonical JSON serialization.
std::uint64_t mdp_hash(const TabularMdp& mdp);

}  // namespace contradice
