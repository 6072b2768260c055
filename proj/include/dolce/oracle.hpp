#pragma once

#include "dolce/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Exact expectations over small finite environments. Everything here is a
// finite sum, so identities between estimators and their bias formulas can be
// checked to machine precision.
namespace dolce::oracle {

/// Dense (x, x0, a) table.
class Table3 {
 public:
  Table3() = default;
  Table3(int num_x, int num_x0, int num_actions, double fill = 0.0)
      : nx_(num_x), n0_(num_x0), na_(num_actions), v_(static_cast<std::size_t>(num_x) * num_x0 * num_actions, fill) {}

  double& operator()(int x, int x0, int a) { return v_[index(x, x0, a)]; }
  double operator()(int x, int x0, int a) const { return v_[index(x, x0, a)]; }
  int num_x() const { return nx_; }
  int num_x0() const { return n0_; }
  int num_actions() const { return na_; }
  const std::vector<double>& values() const { return v_; }

 private:
  std::size_t index(int x, int x0, int a) const {
    return (static_cast<std::size_t>(x) * n0_ + x0) * na_ + a;
  }
  int nx_ = 0, n0_ = 0, na_ = 0;
  std::vector<double> v_;
};

/// Finite lagged bandit: X0 ~ p0, X | X0 ~ p(.|x0), A | X ~ pi0(.|x),
/// R | (x, x0, a) with mean q and variance sigma2. The logging policy reads x
/// only, so current-action sufficiency holds by construction.
struct DiscreteEnv {
  VectorXd p0;            // n0
  MatrixXd p_x_given_x0;  // n0 x nx
  MatrixXd pi0;           // nx x |A|
  Table3 q;
  Table3 sigma2;
  MatrixXd features;  // nx x f; feature vectors for differentiable policies

  int num_x() const { return static_cast<int>(pi0.rows()); }
  int num_x0() const { return static_cast<int>(p0.size()); }
  int num_actions() const { return static_cast<int>(pi0.cols()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  /// Throws InvalidInput unless all rows are simplex vectors and tables match.
  void validate() const;
};

using PolicyTable = MatrixXd;  // nx x |A|

struct LagMarginals {
  MatrixXd target;   // n0 x |A|: E[pi(a|X) | x0]
  MatrixXd logging;  // n0 x |A|: E[pi0(a|X) | x0]
};

/// pi evaluated at every current context (feature rows; tabular policies by id).
PolicyTable tabulate(const DiscreteEnv& env, const Policy& policy);

double exact_value(const DiscreteEnv& env, const PolicyTable& pi);
LagMarginals exact_lag_marginals(const DiscreteEnv& env, const PolicyTable& pi);

/// Oracle lag weights min(bar_pi_theta / bar_pi_0, clip); zero where bar_pi_0 = 0.
MatrixXd oracle_lag_weights(const DiscreteEnv& env, const PolicyTable& pi, double clip);

/// p(x) and p(x0 | x) by Bayes.
VectorXd marginal_x(const DiscreteEnv& env);
MatrixXd x0_given_x(const DiscreteEnv& env);  // nx x n0

/// q(x, a) = sum_x0 p(x0|x) q(x, x0, a).
MatrixXd current_mean_reward(const DiscreteEnv& env);

/// E[IPS] by enumerating every (x0, x, a) with pi0(a|x) > 0.
double exact_ips_expectation(const DiscreteEnv& env, const PolicyTable& pi);
/// -E[sum over unsupported actions of pi(a|X) q(X, a)].
double exact_bias_ips(const DiscreteEnv& env, const PolicyTable& pi);
/// E[DR] with reward model q_hat(x, a).
double exact_dr_expectation(const DiscreteEnv& env, const PolicyTable& pi, const MatrixXd& q_hat);
/// E[sum over unsupported actions of pi(a|X) (q_hat - q)(X, a)].
double exact_bias_dr(const DiscreteEnv& env, const PolicyTable& pi, const MatrixXd& q_hat);

/// E[w (R - q_tilde) + sum_a pi q_tilde] with oracle lag weights, by enumeration.
double exact_dolce_expectation(const DiscreteEnv& env, const PolicyTable& pi, const Table3& q_tilde,
                               double clip = std::numeric_limits<double>::infinity());
/// E[sum_a (pi0 w - pi) (q - q_tilde)], the oracle-weight bias expression.
double dolce_bias_formula(const DiscreteEnv& env, const PolicyTable& pi, const Table3& q_tilde,
                          double clip = std::numeric_limits<double>::infinity());

/// (1/n) Var(psi) via E[w^2 sigma^2] + Var(w Delta + sum_a pi q_tilde).
double exact_dolce_variance(const DiscreteEnv& env, const PolicyTable& pi, const Table3& q_tilde, int n,
                            double clip = std::numeric_limits<double>::infinity());
/// (1/n)(E[psi^2] - E[psi]^2) enumerating a two-point reward law R = q +- sigma.
double exact_dolce_variance_direct(const DiscreteEnv& env, const PolicyTable& pi, const Table3& q_tilde, int n,
                                   double clip = std::numeric_limits<double>::infinity());

/// Policy gradient of V for a linear-softmax policy on env.features.
VectorXd exact_gradient(const DiscreteEnv& env, const MatrixXd& theta);
/// Central finite differences of exact_value in theta.
VectorXd finite_difference_gradient(const DiscreteEnv& env, const MatrixXd& theta, double step = 1e-6);
/// E[w (R - q_tilde) bar_s(A|x0) + sum_a pi q_tilde s(a|x)] with oracle nuisances.
VectorXd exact_dolce_gradient_expectation(const DiscreteEnv& env, const MatrixXd& theta, const Table3& q_tilde);
/// Exact lag-marginal score bar_s(a|x0) = m(a|x0) / bar_pi_theta(a|x0), rows indexed x0 * |A| + a.
MatrixXd exact_lag_score(const DiscreteEnv& env, const MatrixXd& theta);

/// Values of V through q (via p(x0|x)) and through q_k directly.
struct ValueIdentity {
  double via_current;
  double via_lagged;
  double max_reward_gap;  // max |sum_x0 p(x0|x) q_k - q(x, a)|, should be 0
};
ValueIdentity lemma_value_identity(const DiscreteEnv& env, const PolicyTable& pi);

/// max over the centered indicator basis of |E[Delta f_tilde]|, where
/// Delta = q - q_tilde and f_tilde = f - E[f | x0, a].
double max_orthogonality_residual(const DiscreteEnv& env, const Table3& q_tilde);

/// True when bar_pi_theta > 0 implies bar_pi_0 > 0 for every (x0, a).
bool lag_overlap_holds(const DiscreteEnv& env, const PolicyTable& pi);

/// Random environment. zero_prob injects zeros into pi0 (support violations);
/// lag overlap is kept by making p(x|x0) dense and every action supported at
/// some x.
DiscreteEnv random_env(std::uint64_t seed, int num_x0, int num_x, int num_actions, int feature_dim = 2,
                       double zero_prob = 0.3);
/// q_tilde = q - delta(x0, a) with random delta (residual invariant).
Table3 residual_invariant_model(const DiscreteEnv& env, std::uint64_t seed, double scale = 1.0);
/// q_tilde = q - e(x, x0, a) with error varying in x (breaks residual invariance).
Table3 misspecified_model(const DiscreteEnv& env, std::uint64_t seed, double scale = 1.0);
/// Random positive policy table.
PolicyTable random_policy(const DiscreteEnv& env, std::uint64_t seed);

std::string env_to_json(const DiscreteEnv& env);
DiscreteEnv env_from_json(const std::string& text);
DiscreteEnv load_env(const std::string& path);

/// Draws n lagged samples. Current contexts are encoded as [features(x), 0_{n0}],
/// lag contexts as [0_f, onehot(x0)], so d = f + n0 and a linear model on the lag
/// block is saturated. Logged propensities are pi0(a|x).
LaggedDataset sample_dataset(const DiscreteEnv& env, int n, std::uint64_t seed, std::vector<int>* x_ids = nullptr,
                             std::vector<int>* x0_ids = nullptr);
/// Pads an env-feature theta (|A| x (f+1)) to the sampled-dataset width (|A| x (f+n0+1)).
MatrixXd embed_theta(const DiscreteEnv& env, const MatrixXd& theta);

struct CheckResult {
  std::string name;
  double residual;
  double tolerance;
  bool passed;
  bool expected_fail = false;
};

/// Identity suite on one env: unbiasedness under residual invariance, bias and
/// variance formulas, baseline bias formulas, value identity, orthogonality.
std::vector<CheckResult> identity_suite(const DiscreteEnv& env, std::uint64_t seed);

}  // namespace dolce::oracle
