#include "dolce/estimators.hpp"

#include "dolce/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>

namespace dolce {

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidConfig("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - (1.0 - level) / 2.0);
}

ConfidenceInterval influence_ci(const VectorXd& influence, double estimate, double level) {
  const auto n = static_cast<double>(influence.size());
  if (n < 1) throw InvalidInput("influence vector is empty");
  const double se = std::sqrt(influence.squaredNorm()) / n;
  const double z = normal_quantile_two_sided(level);
  return {se, estimate - z * se, estimate + z * se};
}

double ess(const VectorXd& weights) {
  if (weights.size() == 0) throw InvalidInput("ESS needs at least one weight");
  if ((weights.array() < 0.0).any()) throw InvalidInput("ESS weights must be nonnegative");
  const double sq = weights.squaredNorm();
  if (sq == 0.0) throw InvalidInput("ESS is undefined for all-zero weights");
  const double s = weights.sum();
  return std::min(s * s / sq, static_cast<double>(weights.size()));
}

EstimateReport report_from_contributions(const std::string& name, const VectorXd& contributions, double ess_value,
                                         double level) {
  EstimateReport r;
  r.estimator_name = name;
  r.value = contributions.mean();
  r.influence = contributions.array() - r.value;
  const ConfidenceInterval ci = influence_ci(r.influence, r.value, level);
  r.se = ci.se;
  r.ci_low = ci.low;
  r.ci_high = ci.high;
  r.ess = ess_value;
  return r;
}

namespace {

void check_shapes(const MatrixXd& pi, const VectorXi& actions, const VectorXd& rewards) {
  if (actions.size() != pi.rows() || rewards.size() != pi.rows())
    throw InvalidInput("policy matrix, actions and rewards must have one entry per sample");
}

VectorXd importance_weights(const MatrixXd& pi, const VectorXi& actions, const VectorXd& propensities) {
  if (propensities.size() != pi.rows()) throw InvalidInput("one propensity per sample is required");
  VectorXd w(pi.rows());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) {
    const double p = propensities[i];
    if (!(p > 0.0 && p <= 1.0)) throw InvalidPropensity(static_cast<std::size_t>(i), p);
    w[i] = pi(i, actions[i]) / p;
  }
  return w;
}

double weight_ess(const VectorXd& w) { return w.squaredNorm() > 0.0 ? ess(w) : 0.0; }

}  // namespace

EstimateReport dm_estimate(const MatrixXd& pi, const MatrixXd& q_hat, double level) {
  if (pi.rows() != q_hat.rows() || pi.cols() != q_hat.cols()) throw InvalidInput("pi and q_hat shapes differ");
  const VectorXd psi = (pi.array() * q_hat.array()).rowwise().sum();
  return report_from_contributions("DM", psi, static_cast<double>(pi.rows()), level);
}

EstimateReport ips_estimate(const MatrixXd& pi, const VectorXi& actions, const VectorXd& rewards,
                            const VectorXd& propensities, double level) {
  check_shapes(pi, actions, rewards);
  const VectorXd w = importance_weights(pi, actions, propensities);
  VectorXd psi(pi.rows());
  for (Eigen::Index i = 0; i < pi.rows(); ++i) psi[i] = w[i] * rewards[i];
  return report_from_contributions("IPS", psi, weight_ess(w), level);
}

EstimateReport dr_estimate(const MatrixXd& pi, const VectorXi& actions, const VectorXd& rewards,
                           const VectorXd& propensities, const MatrixXd& q_hat, double level) {
  check_shapes(pi, actions, rewards);
  if (q_hat.rows() != pi.rows() || q_hat.cols() != pi.cols()) throw InvalidInput("pi and q_hat shapes differ");
  const VectorXd w = importance_weights(pi, actions, propensities);
  VectorXd psi(pi.rows());
  for (Eigen::Index i = 0; i < pi.rows(); ++i)
    psi[i] = w[i] * (rewards[i] - q_hat(i, actions[i])) + pi.row(i).dot(q_hat.row(i));
  return report_from_contributions("DR", psi, weight_ess(w), level);
}

EstimateReport dolce_lag_estimate(const MatrixXd& pi, const VectorXi& actions, const VectorXd& rewards,
                                  const VectorXd& lag_weights, const MatrixXd& q_hat, double level) {
  check_shapes(pi, actions, rewards);
  if (q_hat.rows() != pi.rows() || q_hat.cols() != pi.cols()) throw InvalidInput("pi and q_hat shapes differ");
  if (lag_weights.size() != pi.rows()) throw InvalidInput("one lag weight per sample is required");
  VectorXd psi(pi.rows());
  for (Eigen::Index i = 0; i < pi.rows(); ++i)
    psi[i] = lag_weights[i] * (rewards[i] - q_hat(i, actions[i])) + pi.row(i).dot(q_hat.row(i));
  return report_from_contributions("DOLCE", psi, weight_ess(lag_weights), level);
}

VectorXd softmin_weights(const VectorXd& alc, double tau) {
  if (!(tau > 0.0)) throw InvalidConfig("softmin temperature tau must be positive");
  if (alc.size() < 1) throw InvalidInput("softmin needs at least one lag");
  if (!alc.allFinite()) throw InvalidInput("ALC estimates must be finite");
  const VectorXd e = (-(alc.array() - alc.minCoeff()) / tau).exp();
  return e / e.sum();
}

EstimateReport aggregate_lags(const std::vector<EstimateReport>& per_lag, const VectorXd& alpha, double level) {
  if (per_lag.empty() || static_cast<Eigen::Index>(per_lag.size()) != alpha.size())
    throw InvalidInput("one softmin weight per lag estimate is required");
  if (per_lag.size() == 1) {
    // alpha = (1): return the lag estimate as is instead of re-summing its contributions.
    EstimateReport r = per_lag.front();
    r.estimator_name = "DOLCE";
    r.per_lag_values = {r.value};
    r.lag_weights_alpha = {alpha[0]};
    return r;
  }
  const Eigen::Index n = per_lag.front().influence.size();
  VectorXd psi = VectorXd::Zero(n);
  double ess_value = 0.0;
  EstimateReport out;
  for (std::size_t k = 0; k < per_lag.size(); ++k) {
    if (per_lag[k].influence.size() != n) throw InvalidInput("lag estimates cover different samples");
    psi += alpha[k] * (per_lag[k].influence.array() + per_lag[k].value).matrix();
    ess_value += alpha[k] * per_lag[k].ess;
    out.per_lag_values.push_back(per_lag[k].value);
    out.lag_weights_alpha.push_back(alpha[k]);
  }
  EstimateReport r = report_from_contributions("DOLCE", psi, ess_value, level);
  r.per_lag_values = std::move(out.per_lag_values);
  r.lag_weights_alpha = std::move(out.lag_weights_alpha);
  return r;
}

VectorXd propensity_source(const LaggedDataset& data, const FoldAssignment& folds, double reg, double p_min) {
  if (data.has_logged_propensities()) return data.logged_propensities();
  const MatrixXd& X = data.contexts();
  VectorXd out(data.size());
  for (int j = 0; j < folds.num_folds; ++j) {
    const std::vector<int> train = folds.out_of_fold(j), test = folds.in_fold(j);
    const MultinomialLogitModel m =
        fit_multinomial_logit(select_rows(X, train), data.actions()(train), data.num_actions(), reg);
    const MatrixXd p = floor_simplex_rows(m.predict_proba(select_rows(X, test)), p_min);
    for (std::size_t t = 0; t < test.size(); ++t) out[test[t]] = p(static_cast<Eigen::Index>(t), data.actions()[test[t]]);
  }
  return out;
}

EstimateReport dolce_lag_estimate(const LaggedDataset& data, const MatrixXd& pi, const NuisanceSet& nuisances, int lag,
                                  double level) {
  if (lag < 0 || lag >= data.num_lags() || lag >= static_cast<int>(nuisances.lags.size()))
    throw InvalidInput("lag index " + std::to_string(lag) + " not present in data");
  const LagNuisance& nu = nuisances.lags[lag];
  EstimateReport r = dolce_lag_estimate(pi, data.actions(), data.rewards(), nu.weights, nu.reward.oof, level);
  r.per_lag_values = {r.value};
  r.lag_weights_alpha = {1.0};
  return r;
}

EstimateReport dolce_estimate(const LaggedDataset& data, const MatrixXd& pi, const NuisanceSet& nuisances, double tau,
                              double level) {
  if (nuisances.lags.empty()) throw InvalidInput("no lag nuisances were fitted");
  std::vector<EstimateReport> per_lag;
  VectorXd alc(nuisances.lags.size());
  for (std::size_t k = 0; k < nuisances.lags.size(); ++k) {
    per_lag.push_back(dolce_lag_estimate(data, pi, nuisances, static_cast<int>(k), level));
    alc[static_cast<Eigen::Index>(k)] = nuisances.lags[k].alc;
  }
  return aggregate_lags(per_lag, softmin_weights(alc, tau), level);
}

double clipping_gap_bound(const VectorXd& raw_weights, const VectorXi& actions, const VectorXd& rewards,
                          const MatrixXd& q_hat, double d1, double d2) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < raw_weights.size(); ++i)
    total += (std::min(raw_weights[i], d2) - std::min(raw_weights[i], d1)) *
             std::abs(rewards[i] - q_hat(i, actions[i]));
  return total / static_cast<double>(raw_weights.size());
}

}  // namespace dolce
