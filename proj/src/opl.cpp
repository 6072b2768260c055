#include "dolce/opl.hpp"

#include "dolce/error.hpp"
#include "dolce/estimators.hpp"
#include "dolce/rng.hpp"

#include <cmath>
#include <limits>

namespace dolce {

GradientEstimator parse_gradient_estimator(const std::string& tag) {
  if (tag == "IPS") return GradientEstimator::IPS;
  if (tag == "DR") return GradientEstimator::DR;
  if (tag == "DOLCE") return GradientEstimator::DOLCE;
  throw InvalidConfig("unknown gradient estimator '" + tag + "' (expected IPS, DR or DOLCE)");
}

std::string to_string(GradientEstimator e) {
  switch (e) {
    case GradientEstimator::IPS: return "IPS";
    case GradientEstimator::DR: return "DR";
    default: return "DOLCE";
  }
}

void TrainConfig::validate() const {
  if (steps < 1) throw InvalidConfig("steps must be at least 1");
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw InvalidConfig("step_size must be finite and >= 0");
  if (!(exploration_floor >= 0.0 && exploration_floor < 1.0))
    throw InvalidConfig("exploration_floor must lie in [0, 1)");
  if (!(init_scale >= 0.0)) throw InvalidConfig("init_scale must be nonnegative");
  if (!(tau > 0.0)) throw InvalidConfig("tau must be positive");
}

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

MatrixXd with_intercept(const MatrixXd& X) {
  MatrixXd out(X.rows(), X.cols() + 1);
  out.leftCols(X.cols()) = X;
  out.col(X.cols()).setOnes();
  return out;
}

VectorXd flatten(const MatrixXd& G) {
  const RowMajorMatrix rm = G;
  return Eigen::Map<const VectorXd>(rm.data(), rm.size());
}

// sum_i sum_b C(i, b) (e_b block) x~_i / n, i.e. the gradient when every sample's
// score contribution has the form coef_b * x~.
VectorXd coefficient_gradient(const MatrixXd& C, const MatrixXd& Xt) {
  return flatten(C.transpose() * Xt / static_cast<double>(Xt.rows()));
}

void check_policy(const LaggedDataset& data, const Policy& policy) {
  const LinearSoftmaxPolicy& sm = policy.as_linear_softmax();
  if (sm.theta.rows() != data.num_actions() || sm.theta.cols() != data.dim() + 1)
    throw InvalidInput("policy theta must be |A| x (d+1) for this dataset");
}

}  // namespace

VectorXd grad_ips(const LaggedDataset& data, const Policy& policy, const VectorXd& propensities) {
  check_policy(data, policy);
  const MatrixXd& X = data.contexts();
  const MatrixXd pi = policy.prob_matrix(X);
  const VectorXi& A = data.actions();
  const VectorXd& R = data.rewards();
  if (propensities.size() != pi.rows()) throw InvalidInput("one propensity per sample is required");
  MatrixXd C(pi.rows(), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    const double p = propensities[i];
    if (!(p > 0.0 && p <= 1.0)) throw InvalidPropensity(static_cast<std::size_t>(i), p);
    const double w = pi(i, A[i]) / p;
    const double c = w * R[i];
    for (Eigen::Index b = 0; b < pi.cols(); ++b) C(i, b) = c * ((b == A[i] ? 1.0 : 0.0) - pi(i, b));
  }
  return coefficient_gradient(C, with_intercept(X));
}

VectorXd grad_dr(const LaggedDataset& data, const Policy& policy, const MatrixXd& q_hat, const VectorXd& propensities) {
  check_policy(data, policy);
  const MatrixXd& X = data.contexts();
  const MatrixXd pi = policy.prob_matrix(X);
  const VectorXi& A = data.actions();
  const VectorXd& R = data.rewards();
  if (propensities.size() != pi.rows()) throw InvalidInput("one propensity per sample is required");
  if (q_hat.rows() != pi.rows() || q_hat.cols() != pi.cols()) throw InvalidInput("q_hat must be n x |A|");
  MatrixXd C(pi.rows(), pi.cols());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    const double p = propensities[i];
    if (!(p > 0.0 && p <= 1.0)) throw InvalidPropensity(static_cast<std::size_t>(i), p);
    const double w = pi(i, A[i]) / p;
    const double c = w * (R[i] - q_hat(i, A[i]));
    const double q_bar = pi.row(i).dot(q_hat.row(i));
    for (Eigen::Index b = 0; b < pi.cols(); ++b)
      C(i, b) = c * ((b == A[i] ? 1.0 : 0.0) - pi(i, b)) + pi(i, b) * (q_hat(i, b) - q_bar);
  }
  return coefficient_gradient(C, with_intercept(X));
}

VectorXd LagScoreModels::lag_score(int fold, const VectorXd& z, int a) const {
  const MatrixXd zrow = z.transpose();
  const MatrixXd m = per_fold.at(fold).predict(zrow);
  const Eigen::Index width = m.cols() / target.oof.cols();
  const double denom = target.predict(fold, zrow)(0, a);
  return m.row(0).segment(a * width, width).transpose() / denom;
}

LagScoreModels fit_lag_score_marginal(const LaggedDataset& data, const Policy& policy, int lag,
                                      const FoldAssignment& folds, double reg, double p_min) {
  check_policy(data, policy);
  const MatrixXd& X = data.contexts();
  const MatrixXd& Zk = data.lag_contexts(lag);
  const MatrixXd pi = policy.prob_matrix(X);
  const MatrixXd Xt = with_intercept(X);
  const auto n = pi.rows();
  const auto na = pi.cols();
  const auto D = Xt.cols();
  const auto P = na * D;

  // Row i, block (a, b, j): pi_a (1{a=b} - pi_b) x~_j.
  MatrixXd Y(n, na * P);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < na; ++a)
      for (Eigen::Index b = 0; b < na; ++b) {
        const double c = pi(i, a) * ((a == b ? 1.0 : 0.0) - pi(i, b));
        Y.row(i).segment(a * P + b * D, D) = c * Xt.row(i);
      }

  LagScoreModels models;
  models.target = fit_lag_target_marginal(data, pi, lag, folds, reg, p_min);
  models.oof_at_logged.resize(n, P);
  const VectorXi& A = data.actions();
  for (int j = 0; j < folds.num_folds; ++j) {
    const std::vector<int> train = folds.out_of_fold(j), test = folds.in_fold(j);
    models.per_fold.push_back(fit_ridge_multi(select_rows(Zk, train), select_rows(Y, train), reg));
    const MatrixXd m = models.per_fold.back().predict(select_rows(Zk, test));
    for (std::size_t t = 0; t < test.size(); ++t) {
      const int i = test[t];
      models.oof_at_logged.row(i) =
          m.row(static_cast<Eigen::Index>(t)).segment(A[i] * P, P) / models.target.oof(i, A[i]);
    }
  }
  return models;
}

VectorXd grad_dolce(const LaggedDataset& data, const Policy& policy, const VectorXd& lag_weights,
                    const MatrixXd& q_hat, const MatrixXd& lag_scores_at_logged) {
  check_policy(data, policy);
  const MatrixXd& X = data.contexts();
  const MatrixXd pi = policy.prob_matrix(X);
  const VectorXi& A = data.actions();
  const VectorXd& R = data.rewards();
  const auto n = pi.rows();
  if (lag_weights.size() != n || q_hat.rows() != n || q_hat.cols() != pi.cols() ||
      lag_scores_at_logged.rows() != n || lag_scores_at_logged.cols() != pi.cols() * (X.cols() + 1))
    throw InvalidInput("DOLCE gradient inputs have inconsistent shapes");
  VectorXd c(n);
  MatrixXd C(n, pi.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    c[i] = lag_weights[i] * (R[i] - q_hat(i, A[i]));
    const double q_bar = pi.row(i).dot(q_hat.row(i));
    for (Eigen::Index b = 0; b < pi.cols(); ++b) C(i, b) = pi(i, b) * (q_hat(i, b) - q_bar);
  }
  const VectorXd lag_term = lag_scores_at_logged.transpose() * c / static_cast<double>(n);
  return lag_term + coefficient_gradient(C, with_intercept(X));
}

VectorXd grad_dolce(const LaggedDataset& data, const Policy& policy, const NuisanceSet& nuisances,
                    const LagScoreModels& scores, int lag) {
  if (lag < 0 || lag >= static_cast<int>(nuisances.lags.size()))
    throw InvalidInput("lag index " + std::to_string(lag) + " not present in data");
  const LagNuisance& nu = nuisances.lags[lag];
  const VectorXd w = lag_weights(scores.target, nu.propensity, data.actions(), nuisances.options.clip);
  return grad_dolce(data, policy, w, nu.reward.oof, scores.oof_at_logged);
}

MatrixXd initial_theta(int num_actions, int d, std::uint64_t seed, double scale) {
  CounterRng rng(derive_seed(seed, 0x7468657461));
  MatrixXd theta(num_actions, d + 1);
  for (int a = 0; a < num_actions; ++a)
    for (int j = 0; j <= d; ++j) theta(a, j) = scale * rng.normal();
  return theta;
}

namespace {

// Holds the theta-independent nuisances of one training run.
class GradientEngine {
 public:
  GradientEngine(const LaggedDataset& data, const TrainConfig& config, const NuisanceOptions& options)
      : data_(data), config_(config), options_(options) {
    options_.validate();
    folds_ = kfold_split(static_cast<int>(data.size()), options_.num_folds, options_.fold_seed);
    switch (config.estimator) {
      case GradientEstimator::IPS:
        propensities_ = propensity_source(data, folds_, options_.reg, options_.p_min);
        break;
      case GradientEstimator::DR:
        propensities_ = propensity_source(data, folds_, options_.reg, options_.p_min);
        q_current_ = fit_reward_model_current(data, folds_, options_.reg, options_.basis).oof;
        break;
      case GradientEstimator::DOLCE: {
        if (data.num_lags() < 1) throw InvalidInput("DOLCE needs lag contexts");
        nuisances_.folds = folds_;
        nuisances_.options = options_;
        VectorXd alc(data.num_lags());
        for (int k = 0; k < data.num_lags(); ++k) {
          LagNuisance nu;
          nu.propensity = fit_lag_propensity(data, k, folds_, options_.reg, options_.p_min);
          nu.reward = config.dolce_reward == RewardModelKind::Mtri
                          ? fit_reward_model_mtri(data, k, folds_, options_.mtri_penalty, options_.reg,
                                                  options_.gram_eps, options_.basis)
                          : fit_reward_model_plain(data, k, folds_, options_.reg, options_.basis);
          nu.alc = estimate_alc(data, k, folds_, nu.reward, options_.alc_reg);
          alc[k] = nu.alc;
          nuisances_.lags.push_back(std::move(nu));
        }
        alpha_ = softmin_weights(alc, config.tau);
        break;
      }
    }
  }

  VectorXd gradient(const MatrixXd& theta) const {
    const Policy policy = Policy::linear_softmax(theta);
    switch (config_.estimator) {
      case GradientEstimator::IPS: return grad_ips(data_, policy, propensities_);
      case GradientEstimator::DR: return grad_dr(data_, policy, q_current_, propensities_);
      default: {
        VectorXd g = VectorXd::Zero(theta.size());
        for (int k = 0; k < data_.num_lags(); ++k) {
          const LagScoreModels scores =
              fit_lag_score_marginal(data_, policy, k, folds_, options_.reg, options_.p_min);
          g += alpha_[k] * grad_dolce(data_, policy, nuisances_, scores, k);
        }
        return g;
      }
    }
  }

 private:
  const LaggedDataset& data_;
  TrainConfig config_;
  NuisanceOptions options_;
  FoldAssignment folds_;
  VectorXd propensities_;
  MatrixXd q_current_;
  NuisanceSet nuisances_;
  VectorXd alpha_;
};

}  // namespace

VectorXd estimate_gradient(const LaggedDataset& data, const TrainConfig& config, const NuisanceOptions& nuisance,
                           const MatrixXd& theta) {
  return GradientEngine(data, config, nuisance).gradient(theta);
}

TrainResult train_policy(const LaggedDataset& data, const TrainConfig& config, const NuisanceOptions& nuisance,
                         const MatrixXd& theta0) {
  config.validate();
  if (theta0.rows() != data.num_actions() || theta0.cols() != data.dim() + 1)
    throw InvalidInput("theta_0 must be |A| x (d+1)");
  const GradientEngine engine(data, config, nuisance);
  TrainResult result{Policy::linear_softmax(theta0), {theta0}, {}, {}};
  MatrixXd theta = theta0;
  for (int t = 0; t < config.steps; ++t) {
    const VectorXd g = engine.gradient(theta);
    if (!g.allFinite())
      throw NumericError("non-finite " + to_string(config.estimator) + " gradient at step " + std::to_string(t));
    if (t == 0) result.first_gradient = g;
    result.grad_norms.push_back(g.norm());
    theta += config.step_size * unflatten(g, data.num_actions());
    result.trajectory.push_back(theta);
  }
  result.policy = Policy::linear_softmax(theta);
  return result;
}

double value_on(const MatrixXd& pi, const MatrixXd& q) { return (pi.array() * q.array()).rowwise().sum().mean(); }

MatrixXd unflatten(const VectorXd& g, int num_actions) {
  if (num_actions < 1 || g.size() % num_actions != 0) throw InvalidInput("gradient length is not a multiple of |A|");
  return Eigen::Map<const RowMajorMatrix>(g.data(), num_actions, g.size() / num_actions);
}

OplMetrics opl_metrics(const Policy& learned, const MatrixXd& logging_probs, const MatrixXd& test_x,
                       const MatrixXd& q_test, const MatrixXd& theta0, const VectorXd& first_gradient,
                       double step_size) {
  OplMetrics m{};
  m.v_learned = value_on(learned.prob_matrix(test_x), q_test);
  m.v_logging = value_on(logging_probs, q_test);
  m.v_star = q_test.rowwise().maxCoeff().mean();
  m.ni = m.v_star == m.v_logging ? std::numeric_limits<double>::quiet_NaN()
                                 : (m.v_learned - m.v_logging) / (m.v_star - m.v_logging);
  m.regret = m.v_star - m.v_learned;
  const MatrixXd theta1 = theta0 + step_size * unflatten(first_gradient, static_cast<int>(theta0.rows()));
  m.osi = value_on(Policy::linear_softmax(theta1).prob_matrix(test_x), q_test) -
          value_on(Policy::linear_softmax(theta0).prob_matrix(test_x), q_test);
  return m;
}

}  // namespace dolce
