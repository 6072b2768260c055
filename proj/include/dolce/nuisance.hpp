#pragma once

#include "dolce/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dolce {

// ---------------------------------------------------------------------------
// Regressors
// ---------------------------------------------------------------------------

/// Ridge fit minimizing ||y - Xw - b||^2 + reg ||w||^2 (intercept unpenalized).
struct RidgeModel {
  VectorXd weights;
  double intercept = 0.0;
  double reg = 0.0;

  double predict(const VectorXd& x) const { return weights.dot(x) + intercept; }
  VectorXd predict(const MatrixXd& X) const;
};

/// Several targets sharing one design matrix; column t of weights belongs to target t.
struct MultiRidgeModel {
  MatrixXd weights;          // p x T
  Eigen::RowVectorXd intercepts;  // 1 x T
  double reg = 0.0;

  MatrixXd predict(const MatrixXd& X) const;
};

RidgeModel fit_ridge(const MatrixXd& X, const VectorXd& y, double reg);
MultiRidgeModel fit_ridge_multi(const MatrixXd& X, const MatrixXd& Y, double reg);

/// Multinomial logit P(A = a | z) = softmax(coef * [z; 1]); coef is |A| x (p+1).
struct MultinomialLogitModel {
  MatrixXd coef;
  int iterations = 0;

  MatrixXd predict_proba(const MatrixXd& Z) const;
};

/// Newton's method with backtracking on the ridge-penalized mean log likelihood.
/// Throws ConvergenceError when the gradient norm stays above tol after max_iter.
MultinomialLogitModel fit_multinomial_logit(const MatrixXd& Z, const VectorXi& actions, int num_actions, double reg,
                                            int max_iter = 100, double tol = 1e-8);

/// Raises every entry of each row to at least p_min while keeping rows on the simplex.
MatrixXd floor_simplex_rows(MatrixXd probs, double p_min);

// ---------------------------------------------------------------------------
// Cross-fitting
// ---------------------------------------------------------------------------

/// Random partition into k folds whose sizes differ by at most one.
FoldAssignment kfold_split(int n, int k, std::uint64_t seed);

enum class RewardModelKind { Plain, Mtri };

/// Reward-model basis: raw coordinates and/or step indicators 1{z > t} per knot t.
struct FeatureBasis {
  bool linear = true;
  std::vector<double> knots;
};

struct NuisanceOptions {
  int num_folds = 5;
  double reg = 1e-2;
  double p_min = 1e-3;
  double clip = 20.0;
  double mtri_penalty = 1.0;
  double gram_eps = 1e-6;
  double alc_reg = 10.0;
  RewardModelKind reward_kind = RewardModelKind::Mtri;
  FeatureBasis basis{false, {0.5}};
  std::uint64_t fold_seed = 0;

  void validate() const;
};

/// Feature maps. psi feeds the lagged reward model, chi the lag-only regressions,
/// critic the MTRI test functions and the full-feature ALC regression.
/// psi = [1, x, x^k, 1{x > t}, 1{x^k > t} for every knot t]; the raw blocks only when basis.linear.
MatrixXd reward_features(const MatrixXd& X, const MatrixXd& Xk, const FeatureBasis& basis = {});
/// [1, x, 1{x > t}] for the current-context model, same convention.
MatrixXd current_features(const MatrixXd& X, const FeatureBasis& basis = {});
MatrixXd lag_features(const MatrixXd& Xk);                        // [x^k, (x^k)^2]
MatrixXd critic_features(const MatrixXd& X, const MatrixXd& Xk);  // [x, x^2, x * x^k]

/// Per-fold lag propensity models for P(A | X^(k)) and their out-of-fold predictions.
struct LagPropensityModel {
  std::vector<MultinomialLogitModel> per_fold;
  double p_min = 0.0;
  MatrixXd oof;  // n x |A|, floored simplex rows

  MatrixXd predict(int fold, const MatrixXd& Zk) const;
};

LagPropensityModel fit_lag_propensity(const LaggedDataset& data, int lag, const FoldAssignment& folds, double reg,
                                      double p_min);

/// Per-fold ridge of pi(a|X) on X^(k), one target per action.
struct LagTargetModel {
  std::vector<MultiRidgeModel> per_fold;
  double p_min = 0.0;
  MatrixXd oof;  // n x |A|

  MatrixXd predict(int fold, const MatrixXd& Zk) const;
};

/// pi_matrix holds pi(a|X_i) (n x |A|).
LagTargetModel fit_lag_target_marginal(const LaggedDataset& data, const MatrixXd& pi_matrix, int lag,
                                       const FoldAssignment& folds, double reg, double p_min);
LagTargetModel fit_lag_target_marginal(const LaggedDataset& data, const Policy& policy, int lag,
                                       const FoldAssignment& folds, double reg, double p_min);

/// min(target / logging, clip). Both are already floored at p_min.
double lag_weight(double target_marginal, double logging_marginal, double clip);
/// Out-of-fold weights at the logged actions.
VectorXd lag_weights(const LagTargetModel& target, const LagPropensityModel& logging, const VectorXi& actions,
                     double clip);

/// Per-fold, per-action linear reward model on a feature map.
struct RewardModel {
  std::vector<MatrixXd> coef;  // per fold: |A| x p (features include the intercept column)
  MatrixXd oof;                // n x |A| out-of-fold predictions
  std::vector<std::string> fallbacks;  // one note per (fold, action) that used the mean fallback

  MatrixXd predict(int fold, const MatrixXd& features) const { return features * coef[fold].transpose(); }
};

/// Generic fit on precomputed features (first column must be the constant 1).
/// With critics given and penalty > 0 the MTRI objective is solved; penalty = 0
/// reproduces the plain ridge fit.
RewardModel fit_reward_on_features(const MatrixXd& psi, const VectorXi& actions, const VectorXd& rewards,
                                   int num_actions, const FoldAssignment& folds, double reg,
                                   const MatrixXd* critics = nullptr, const MatrixXd* center_features = nullptr,
                                   double mtri_penalty = 0.0, double gram_eps = 1e-6);

/// Lagged reward model q_k on reward_features(x, x^k, basis).
RewardModel fit_reward_model_plain(const LaggedDataset& data, int lag, const FoldAssignment& folds, double reg,
                                   const FeatureBasis& basis = {});
RewardModel fit_reward_model_mtri(const LaggedDataset& data, int lag, const FoldAssignment& folds,
                                  double mtri_penalty, double reg, double gram_eps = 1e-6,
                                  const FeatureBasis& basis = {});
/// Current-context reward model q(x, a) on current_features(x, basis), used by DM and DR.
RewardModel fit_reward_model_current(const LaggedDataset& data, const FoldAssignment& folds, double reg,
                                     const FeatureBasis& basis = {});

/// Moment vector m(beta) of one action's MTRI problem on given rows; exposed for tests.
VectorXd mtri_moments(const MatrixXd& psi, const VectorXd& rewards, const MatrixXd& centered_critics,
                      const VectorXd& beta, double n_total);

/// Out-of-fold centered critics: each critic column minus a ridge prediction from
/// (center_features, action), fitted on the other folds.
MatrixXd center_critics(const MatrixXd& critics, const MatrixXd& center_features, const VectorXi& actions,
                        int num_actions, const FoldAssignment& folds, double reg);

/// Plug-in ALC: mean((m1 - m0)^2) where m1 regresses the residual on full
/// features and m0 on lag features, per action and out-of-fold.
double estimate_alc(const LaggedDataset& data, int lag, const FoldAssignment& folds, const RewardModel& reward,
                    double reg);
double estimate_alc(const MatrixXd& full_features, const MatrixXd& lag_feats, const VectorXi& actions,
                    const VectorXd& residuals, int num_actions, const FoldAssignment& folds, double reg);

/// Everything DOLCE needs for one lag.
struct LagNuisance {
  LagPropensityModel propensity;
  LagTargetModel target;
  RewardModel reward;
  VectorXd weights;  // out-of-fold clipped lag weights at the logged actions
  double alc = 0.0;
};

struct NuisanceSet {
  FoldAssignment folds;
  NuisanceOptions options;
  std::vector<LagNuisance> lags;
};

/// Fits every lag with shared folds. pi_matrix holds pi(a|X_i).
NuisanceSet fit_nuisances(const LaggedDataset& data, const MatrixXd& pi_matrix, const NuisanceOptions& options);
NuisanceSet fit_nuisances(const LaggedDataset& data, const Policy& policy, const NuisanceOptions& options);

/// Rows of M selected by index.
MatrixXd select_rows(const MatrixXd& M, const std::vector<int>& idx);
VectorXd select_rows(const VectorXd& v, const std::vector<int>& idx);

}  // namespace dolce
