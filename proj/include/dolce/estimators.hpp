#pragma once

#include "dolce/core.hpp"
#include "dolce/nuisance.hpp"

#include <string>
#include <vector>

namespace dolce {

struct ConfidenceInterval {
  double se;
  double low;
  double high;
};

/// Two-sided standard normal quantile z_{1 - (1 - level)/2}.
double normal_quantile_two_sided(double level);

/// SE = sqrt(sum phi^2) / n with phi centered by the estimate; Wald interval.
ConfidenceInterval influence_ci(const VectorXd& influence, double estimate, double level = 0.95);

/// (sum w)^2 / sum w^2. Throws InvalidInput for negative or all-zero weights.
double ess(const VectorXd& weights);

/// Builds a report from per-sample contributions psi_i (value = mean psi).
EstimateReport report_from_contributions(const std::string& name, const VectorXd& contributions, double ess_value,
                                         double level);

// Matrix-level estimators. pi is n x |A| with pi(a|X_i); q_hat is n x |A|.

EstimateReport dm_estimate(const MatrixXd& pi, const MatrixXd& q_hat, double level = 0.95);
/// Throws InvalidPropensity when a propensity is not in (0, 1].
EstimateReport ips_estimate(const MatrixXd& pi, const VectorXi& actions, const VectorXd& rewards,
                            const VectorXd& propensities, double level = 0.95);
EstimateReport dr_estimate(const MatrixXd& pi, const VectorXi& actions, const VectorXd& rewards,
                           const VectorXd& propensities, const MatrixXd& q_hat, double level = 0.95);
/// mean[w_i (R_i - q_hat(i, A_i)) + sum_a pi(a|X_i) q_hat(i, a)].
EstimateReport dolce_lag_estimate(const MatrixXd& pi, const VectorXi& actions, const VectorXd& rewards,
                                  const VectorXd& lag_weights, const MatrixXd& q_hat, double level = 0.95);

/// alpha_k proportional to exp(-alc_k / tau). Throws InvalidConfig for tau <= 0.
VectorXd softmin_weights(const VectorXd& alc, double tau);

/// sum_k alpha_k V_k, with influence contributions combined by the same alpha.
EstimateReport aggregate_lags(const std::vector<EstimateReport>& per_lag, const VectorXd& alpha, double level = 0.95);

// Dataset-level wrappers.

/// Logged propensities when present, else a cross-fitted multinomial logit on X
/// floored at p_min.
VectorXd propensity_source(const LaggedDataset& data, const FoldAssignment& folds, double reg, double p_min);

EstimateReport dolce_lag_estimate(const LaggedDataset& data, const MatrixXd& pi, const NuisanceSet& nuisances, int lag,
                                  double level = 0.95);
EstimateReport dolce_estimate(const LaggedDataset& data, const MatrixXd& pi, const NuisanceSet& nuisances, double tau,
                              double level = 0.95);

/// Bounds |V(d1) - V(d2)| for clip levels d1 <= d2 given raw (unclipped) weights.
double clipping_gap_bound(const VectorXd& raw_weights, const VectorXi& actions, const VectorXd& rewards,
                          const MatrixXd& q_hat, double d1, double d2);

}  // namespace dolce
