#pragma once

#include "dolce/core.hpp"

#include <cstdint>
#include <limits>
#include <string>

namespace dolce::synth {

/// Synthetic benchmark settings. Defaults are the benchmark's default regime.
struct SynthConfig {
  int n = 1000;
  int d = 10;
  int num_actions = 5;
  double violation_ratio = 0.5;  // r: share of samples forced to action 0
  double mix_lambda = 0.5;       // weight of the current-context reward component
  double interaction_eta = 0.0;  // strength of the current x lag interaction term
  double logging_beta = 0.3;     // logging softmax temperature on g
  double lag_rho = 1.0;          // X ~ N(rho * X_lag, 9 I)
  double target_epsilon = 0.1;
  double exploration_floor = 0.0;  // uniform mixture weight in the logging policy (OPL mode)
  std::uint64_t env_seed = 1;
  std::uint64_t data_seed = 1;

  /// Throws InvalidConfig when a field is out of range.
  void validate() const;
};

/// Environment coefficients, a deterministic function of env_seed.
/// Row a of g_coef / h_coef holds the threshold contrasts of action a over the
/// d-1 threshold features x[1..d-1]; row 0 is the fixed baseline contrast.
struct SynthEnv {
  int d = 0;
  int num_actions = 0;
  Eigen::MatrixXd g_coef;  // |A| x (d-1)
  Eigen::MatrixXd h_coef;  // |A| x (d-1)
  Eigen::MatrixXd u_coef;  // |A| x 3
};

inline constexpr double kThreshold = 0.5;
inline constexpr double kBaselineContrast = 0.2;
inline constexpr double kCountPenaltyAction0 = -0.3;
inline constexpr double kCountBonusOthers = 0.15;
inline constexpr double kCoefRange = 0.5;  // contrasts ~ Uniform(-0.5, 0.5)
inline constexpr double kCurrentNoiseSd = 3.0;

SynthEnv make_env(const SynthConfig& config);

/// Threshold-rule component shared by g (on x) and h (on x_lag).
double threshold_component(const Eigen::MatrixXd& coef, const Eigen::VectorXd& z, int a);
double g_component(const SynthEnv& env, const Eigen::VectorXd& x, int a);
double h_component(const SynthEnv& env, const Eigen::VectorXd& x_lag, int a);
double u_component(const SynthEnv& env, const Eigen::VectorXd& x, const Eigen::VectorXd& x_lag, int a);

/// q(x, x_lag, a) = lambda g(x,a) + (1-lambda) h(x_lag,a) + eta u(x,x_lag,a).
double mean_reward(const SynthEnv& env, const Eigen::VectorXd& x, const Eigen::VectorXd& x_lag, int a,
                   double mix_lambda, double interaction_eta);

/// g(x, .) for all actions.
Eigen::VectorXd g_scores(const SynthEnv& env, const Eigen::VectorXd& x);

/// Logging policy: one-hot on action 0 when x[0] > c_r, otherwise
/// softmax(beta g(x,.)) mixed with uniform by exploration_floor.
Eigen::VectorXd logging_policy_probs(const SynthEnv& env, const Eigen::VectorXd& x, double beta, double c_r,
                                     double exploration_floor = 0.0);

/// The epsilon-greedy target on g(x, .).
Policy target_policy(const SynthEnv& env, double epsilon);

/// Threshold c_r such that exactly round(r * n) of the values exceed it.
/// Returns +infinity when that count is zero.
double violation_threshold(const Eigen::VectorXd& first_coordinate, double r);

/// A generated dataset together with its realized violation threshold.
struct SynthData {
  LaggedDataset data;
  double c_r;
};

/// Draws contexts, the violation threshold, logged actions and noisy rewards.
/// Uses config.data_seed; the lag label is "1".
SynthData generate(const SynthConfig& config, const SynthEnv& env);

/// Contexts only (no actions), used for test sets and Monte Carlo truths.
struct ContextSample {
  Eigen::MatrixXd x;      // m x d
  Eigen::MatrixXd x_lag;  // m x d
};
ContextSample draw_contexts(int m, int d, double rho, std::uint64_t seed);

/// m x |A| matrix of q(x_j, x_lag_j, a).
Eigen::MatrixXd mean_reward_table(const SynthEnv& env, const ContextSample& contexts, double mix_lambda,
                                  double interaction_eta);

/// Monte Carlo ground truth (1/m) sum_j sum_a pi(a|X_j) q(X_j, X_j^lag, a).
/// Does not depend on the violation ratio.
double true_value_mc(const SynthConfig& config, const SynthEnv& env, const Policy& policy, int m_samples,
                     std::uint64_t seed);

/// Mean over the test set of max_a q.
double oracle_best_value(const Eigen::MatrixXd& q_table);
double oracle_best_value(const SynthConfig& config, const SynthEnv& env, const ContextSample& test_set);

/// Mean over the test set of sum_a pi(a|x) q.
double policy_value_on(const Policy& policy, const ContextSample& test_set, const Eigen::MatrixXd& q_table);

/// Coefficients as a JSON document for auditing.
std::string env_to_json(const SynthEnv& env);

}  // namespace dolce::synth
