#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dolce {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// ---------------------------------------------------------------------------
// Logged data
// ---------------------------------------------------------------------------

/// One logged interaction: current context, K lagged contexts, action, reward.
struct LaggedSample {
  VectorXd x;
  std::vector<VectorXd> x_lags;
  int a = 0;
  double r = 0.0;
  std::optional<double> logged_propensity;
};

/// Immutable collection of lagged samples. Columnar copies of the data are
/// built once at construction; every estimator reads those.
class LaggedDataset {
 public:
  /// Validates every sample against (d, num_actions, lag count) and throws
  /// InvalidInput on the first inconsistency.
  LaggedDataset(std::vector<LaggedSample> samples, int d, int num_actions,
                std::vector<std::string> lag_labels);

  std::size_t size() const { return samples_.size(); }
  int dim() const { return d_; }
  int num_actions() const { return num_actions_; }
  int num_lags() const { return static_cast<int>(lag_labels_.size()); }
  const std::vector<std::string>& lag_labels() const { return lag_labels_; }
  const std::vector<LaggedSample>& samples() const { return samples_; }

  /// n x d matrix of current contexts.
  const MatrixXd& contexts() const { return contexts_; }
  /// n x d matrix of lag-k contexts (k is 0-based).
  const MatrixXd& lag_contexts(int k) const;
  const VectorXi& actions() const { return actions_; }
  const VectorXd& rewards() const { return rewards_; }
  bool has_logged_propensities() const { return has_propensities_; }
  /// Logged propensities; only valid when has_logged_propensities().
  const VectorXd& logged_propensities() const { return propensities_; }

 private:
  std::vector<LaggedSample> samples_;
  int d_;
  int num_actions_;
  std::vector<std::string> lag_labels_;
  MatrixXd contexts_;
  std::vector<MatrixXd> lag_contexts_;
  VectorXi actions_;
  VectorXd rewards_;
  VectorXd propensities_;
  bool has_propensities_ = false;
};

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

struct UniformPolicy {
  int num_actions;
  int dim = -1;  // -1 accepts any context length
};

/// With probability 1 - epsilon picks the highest-scoring action (lowest index
/// on ties), otherwise explores uniformly.
struct EpsGreedyScoresPolicy {
  std::function<VectorXd(const VectorXd&)> scores;
  int num_actions;
  int dim;
  double epsilon;
};

/// Softmax over affine logits. theta is |A| x (d+1); the last column multiplies
/// an implicit constant-1 feature.
struct LinearSoftmaxPolicy {
  MatrixXd theta;
};

/// Probability table over finitely many contexts. The context id is read from
/// x[0] (rounded), so tabular policies take d = 1.
struct TabularPolicy {
  MatrixXd table;  // contexts x |A|
};

class Policy {
 public:
  using Variant = std::variant<UniformPolicy, EpsGreedyScoresPolicy, LinearSoftmaxPolicy, TabularPolicy>;

  explicit Policy(Variant v);

  static Policy uniform(int num_actions, int dim = -1);
  static Policy eps_greedy(std::function<VectorXd(const VectorXd&)> scores, int num_actions, int dim,
                           double epsilon);
  static Policy linear_softmax(MatrixXd theta);
  static Policy tabular(MatrixXd table);

  int num_actions() const;
  /// Expected context length, or -1 when any length is accepted.
  int dim() const;
  bool is_linear_softmax() const { return std::holds_alternative<LinearSoftmaxPolicy>(v_); }
  const LinearSoftmaxPolicy& as_linear_softmax() const;
  const Variant& variant() const { return v_; }
  std::string name() const;

  /// Probability vector pi(.|x).
  VectorXd probs(const VectorXd& x) const;
  /// Row-wise probabilities for an n x d context matrix.
  MatrixXd prob_matrix(const MatrixXd& contexts) const;

 private:
  Variant v_;
};

/// pi(.|x); throws InvalidInput on a dimension mismatch.
VectorXd policy_prob(const Policy& policy, const VectorXd& x);

/// Gradient of log pi_theta(a|x) with respect to theta, flattened row-major
/// (index a' * (d+1) + j). Throws UnsupportedPolicy for non-softmax variants.
VectorXd policy_score(const Policy& policy, const VectorXd& x, int a);

/// Softmax of a logit vector with max-shift.
VectorXd softmax(const VectorXd& logits);

// ---------------------------------------------------------------------------
// Cross-fitting and reports
// ---------------------------------------------------------------------------

struct FoldAssignment {
  std::vector<int> fold_of;
  int num_folds = 0;

  std::size_t size() const { return fold_of.size(); }
  /// Indices belonging to fold j.
  std::vector<int> in_fold(int j) const;
  /// Indices outside fold j (the training set for fold j's predictions).
  std::vector<int> out_of_fold(int j) const;
};

struct EstimateReport {
  std::string estimator_name;
  double value = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ess = 0.0;
  std::vector<double> per_lag_values;
  std::vector<double> lag_weights_alpha;
  /// Per-sample contributions centered by value (the influence estimates).
  VectorXd influence;
};

}  // namespace dolce
