#pragma once

#include "dolce/core.hpp"
#include "dolce/nuisance.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dolce {

enum class GradientEstimator { IPS, DR, DOLCE };

GradientEstimator parse_gradient_estimator(const std::string& tag);
std::string to_string(GradientEstimator e);

struct TrainConfig {
  int steps = 200;
  double step_size = 0.05;
  double exploration_floor = 0.05;  // used by the synthetic logging policy in OPL mode
  std::uint64_t init_seed = 0;
  double init_scale = 0.1;  // theta_0 entries ~ N(0, init_scale^2)
  GradientEstimator estimator = GradientEstimator::DOLCE;
  RewardModelKind dolce_reward = RewardModelKind::Plain;
  double tau = 0.05;

  void validate() const;
};

/// Gradients are flattened row-major: index a * (d+1) + j, matching policy_score.

/// (1/n) sum_i w_i R_i s(A_i|X_i).
VectorXd grad_ips(const LaggedDataset& data, const Policy& policy, const VectorXd& propensities);
/// (1/n) sum_i [w_i (R_i - q(X_i,A_i)) s(A_i|X_i) + sum_a pi q s(a|X_i)].
VectorXd grad_dr(const LaggedDataset& data, const Policy& policy, const MatrixXd& q_hat, const VectorXd& propensities);

/// Cross-fitted regressions of pi(a|X) s(a|X) and pi(a|X) on X^(k).
struct LagScoreModels {
  std::vector<MultiRidgeModel> per_fold;  // targets laid out as a * P + c with P = |A| (d+1)
  LagTargetModel target;
  MatrixXd oof_at_logged;  // n x P: bar s(A_i | X_i^(k)) out-of-fold

  /// bar s(a | z) for fold j.
  VectorXd lag_score(int fold, const VectorXd& z, int a) const;
};

LagScoreModels fit_lag_score_marginal(const LaggedDataset& data, const Policy& policy, int lag,
                                      const FoldAssignment& folds, double reg, double p_min);

/// (1/n) sum_i [w_i (R_i - q_k(i, A_i)) bar_s_i + sum_a pi q_k s(a|X_i)] from precomputed pieces.
VectorXd grad_dolce(const LaggedDataset& data, const Policy& policy, const VectorXd& lag_weights,
                    const MatrixXd& q_hat, const MatrixXd& lag_scores_at_logged);
/// Lag-k gradient with the weights rebuilt from the score models' target marginal.
VectorXd grad_dolce(const LaggedDataset& data, const Policy& policy, const NuisanceSet& nuisances,
                    const LagScoreModels& scores, int lag);

/// theta_0 with i.i.d. N(0, scale^2) entries, |A| x (d+1).
MatrixXd initial_theta(int num_actions, int d, std::uint64_t seed, double scale);

struct TrainResult {
  Policy policy;
  std::vector<MatrixXd> trajectory;  // theta_0 ... theta_T
  std::vector<double> grad_norms;
  VectorXd first_gradient;  // g(theta_0), used for OSI
};

/// theta_{t+1} = theta_t + step_size * g(theta_t). Propensity-free nuisances are
/// fitted once; the DOLCE target and score marginals are refitted every step.
TrainResult train_policy(const LaggedDataset& data, const TrainConfig& config, const NuisanceOptions& nuisance,
                         const MatrixXd& theta0);

/// Gradient of the chosen estimator at theta with freshly fitted nuisances.
VectorXd estimate_gradient(const LaggedDataset& data, const TrainConfig& config, const NuisanceOptions& nuisance,
                           const MatrixXd& theta);

struct OplMetrics {
  double ni;  // NaN when V* = V(pi_0)
  double osi;
  double regret;
  double v_learned;
  double v_logging;
  double v_star;
};

/// Values on a test set with known q (m x |A|). logging_probs is m x |A|.
OplMetrics opl_metrics(const Policy& learned, const MatrixXd& logging_probs, const MatrixXd& test_x,
                       const MatrixXd& q_test, const MatrixXd& theta0, const VectorXd& first_gradient,
                       double step_size);

/// Mean over rows of sum_a pi q.
double value_on(const MatrixXd& pi, const MatrixXd& q);

/// Reshapes a flattened gradient to |A| x (d+1).
MatrixXd unflatten(const VectorXd& g, int num_actions);

}  // namespace dolce
