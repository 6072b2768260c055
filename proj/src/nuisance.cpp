#include "dolce/nuisance.hpp"

#include "dolce/error.hpp"
#include "dolce/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dolce {

MatrixXd select_rows(const MatrixXd& M, const std::vector<int>& idx) { return M(idx, Eigen::all); }
VectorXd select_rows(const VectorXd& v, const std::vector<int>& idx) { return v(idx); }

VectorXd RidgeModel::predict(const MatrixXd& X) const {
  return (X * weights).array() + intercept;
}

MatrixXd MultiRidgeModel::predict(const MatrixXd& X) const {
  MatrixXd out = X * weights;
  out.rowwise() += intercepts;
  return out;
}

namespace {

// Solves the centered normal equations shared by the ridge variants.
MatrixXd ridge_solve(const MatrixXd& Xc, const MatrixXd& Yc, double reg) {
  MatrixXd gram = Xc.transpose() * Xc;
  gram.diagonal().array() += reg;
  Eigen::LDLT<MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericError("ridge normal equations could not be factorized");
  MatrixXd w = ldlt.solve(Xc.transpose() * Yc);
  if (!w.allFinite()) throw NumericError("ridge solution is not finite");
  return w;
}

}  // namespace

RidgeModel fit_ridge(const MatrixXd& X, const VectorXd& y, double reg) {
  if (X.rows() < 1 || X.rows() != y.size()) throw InvalidInput("ridge needs matching, nonempty X and y");
  if (!(reg > 0.0)) throw InvalidConfig("ridge reg must be positive");
  const Eigen::RowVectorXd mean_x = X.colwise().mean();
  const double mean_y = y.mean();
  MatrixXd Xc = X.rowwise() - mean_x;
  const VectorXd w = ridge_solve(Xc, y.array() - mean_y, reg);
  return {w, mean_y - mean_x.dot(w), reg};
}

MultiRidgeModel fit_ridge_multi(const MatrixXd& X, const MatrixXd& Y, double reg) {
  if (X.rows() < 1 || X.rows() != Y.rows()) throw InvalidInput("ridge needs matching, nonempty X and Y");
  if (!(reg > 0.0)) throw InvalidConfig("ridge reg must be positive");
  const Eigen::RowVectorXd mean_x = X.colwise().mean();
  const Eigen::RowVectorXd mean_y = Y.colwise().mean();
  MatrixXd Xc = X.rowwise() - mean_x;
  MatrixXd Yc = Y.rowwise() - mean_y;
  MultiRidgeModel m;
  m.weights = ridge_solve(Xc, Yc, reg);
  m.intercepts = mean_y - mean_x * m.weights;
  m.reg = reg;
  return m;
}

// ---------------------------------------------------------------------------
// Multinomial logit
// ---------------------------------------------------------------------------

namespace {

MatrixXd with_intercept(const MatrixXd& Z) {
  MatrixXd out(Z.rows(), Z.cols() + 1);
  out.leftCols(Z.cols()) = Z;
  out.col(Z.cols()).setOnes();
  return out;
}

MatrixXd row_softmax(const MatrixXd& logits) {
  MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

double logit_objective(const MatrixXd& Zt, const VectorXi& actions, const MatrixXd& coef, double reg) {
  const MatrixXd logits = Zt * coef.transpose();
  double f = 0.5 * reg * coef.squaredNorm();
  for (Eigen::Index i = 0; i < Zt.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    f -= logits(i, actions[i]) - m - std::log((logits.row(i).array() - m).exp().sum());
  }
  return f;
}

}  // namespace

MatrixXd MultinomialLogitModel::predict_proba(const MatrixXd& Z) const {
  return row_softmax(with_intercept(Z) * coef.transpose());
}

MultinomialLogitModel fit_multinomial_logit(const MatrixXd& Z, const VectorXi& actions, int num_actions, double reg,
                                            int max_iter, double tol) {
  if (Z.rows() < 1 || Z.rows() != actions.size()) throw InvalidInput("logit needs matching, nonempty Z and actions");
  if (!(reg > 0.0)) throw InvalidConfig("logit reg must be positive");
  const MatrixXd Zt = with_intercept(Z);
  const Eigen::Index n = Zt.rows(), p = Zt.cols();
  const int na = num_actions;
  MultinomialLogitModel model;
  model.coef = MatrixXd::Zero(na, p);
  MatrixXd onehot = MatrixXd::Zero(n, na);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, actions[i]) = 1.0;

  double f = logit_objective(Zt, actions, model.coef, reg);
  double grad_norm = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const MatrixXd probs = row_softmax(Zt * model.coef.transpose());
    // Gradient of the summed objective, laid out as |A| x p.
    MatrixXd grad = (probs - onehot).transpose() * Zt + reg * model.coef;
    grad_norm = grad.norm() / static_cast<double>(n);
    model.iterations = it;
    if (grad_norm < tol) return model;

    MatrixXd hess = MatrixXd::Zero(na * p, na * p);
    for (int a = 0; a < na; ++a)
      for (int b = a; b < na; ++b) {
        VectorXd c = -probs.col(a).cwiseProduct(probs.col(b));
        if (a == b) c += probs.col(a);
        const MatrixXd block = Zt.transpose() * c.asDiagonal() * Zt;
        hess.block(a * p, b * p, p, p) = block;
        if (a != b) hess.block(b * p, a * p, p, p) = block.transpose();
      }
    hess.diagonal().array() += reg;
    MatrixXd grad_t = grad.transpose();  // p x |A|, column-major flattening matches the Hessian layout
    const VectorXd g = Eigen::Map<const VectorXd>(grad_t.data(), na * p);
    Eigen::LDLT<MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) throw NumericError("logit Hessian could not be factorized");
    const VectorXd step = ldlt.solve(g);
    MatrixXd step_t = Eigen::Map<const MatrixXd>(step.data(), p, na);
    const MatrixXd direction = step_t.transpose();

    double t = 1.0;
    const double slope = g.dot(step);
    // Newton decrement below the rounding level of the objective: nothing left to gain.
    if (slope <= 1e-13 * (1.0 + std::abs(f))) return model;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      const MatrixXd trial = model.coef - t * direction;
      const double f_trial = logit_objective(Zt, actions, trial, reg);
      if (f_trial <= f - 1e-4 * t * slope) {
        model.coef = trial;
        f = f_trial;
        break;
      }
      if (ls == 49) {
        // No further decrease is representable; accept the current point if the gradient is tiny.
        if (grad_norm < std::sqrt(tol)) return model;
        throw ConvergenceError("logit line search failed", grad_norm);
      }
    }
  }
  const MatrixXd probs = row_softmax(Zt * model.coef.transpose());
  grad_norm = ((probs - onehot).transpose() * Zt + reg * model.coef).norm() / static_cast<double>(n);
  if (grad_norm < tol) return model;
  throw ConvergenceError("multinomial logit did not converge in " + std::to_string(max_iter) + " iterations",
                         grad_norm);
}

MatrixXd floor_simplex_rows(MatrixXd probs, double p_min) {
  const Eigen::Index na = probs.cols();
  if (p_min * static_cast<double>(na) >= 1.0) {
    probs.setConstant(1.0 / static_cast<double>(na));
    return probs;
  }
  std::vector<char> pinned(na);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i);
    row = row.cwiseMax(0.0);
    std::fill(pinned.begin(), pinned.end(), 0);
    for (Eigen::Index pass = 0; pass <= na; ++pass) {
      double free_mass = 0.0;
      Eigen::Index num_pinned = 0;
      for (Eigen::Index a = 0; a < na; ++a) {
        if (pinned[a]) ++num_pinned;
        else free_mass += row[a];
      }
      const double budget = 1.0 - static_cast<double>(num_pinned) * p_min;
      bool changed = false;
      for (Eigen::Index a = 0; a < na; ++a) {
        if (pinned[a]) {
          row[a] = p_min;
          continue;
        }
        row[a] = free_mass > 0.0 ? row[a] * budget / free_mass : budget / static_cast<double>(na - num_pinned);
        if (row[a] < p_min) {
          pinned[a] = 1;
          changed = true;
        }
      }
      if (!changed) break;
    }
  }
  return probs;
}

// ---------------------------------------------------------------------------
// Cross-fitting
// ---------------------------------------------------------------------------

FoldAssignment kfold_split(int n, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidConfig("number of cross-fitting folds must be at least 2");
  if (n < 2 * k) throw InvalidConfig("need at least 2 samples per fold (n >= 2 * folds)");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng(derive_seed(seed, 0x666f6c64));
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  FoldAssignment folds{std::vector<int>(n), k};
  for (int i = 0; i < n; ++i) folds.fold_of[perm[i]] = i % k;
  return folds;
}

void NuisanceOptions::validate() const {
  if (num_folds < 2) throw InvalidConfig("folds must be at least 2");
  if (!(reg > 0.0)) throw InvalidConfig("reg must be positive");
  if (!(p_min > 0.0 && p_min < 1.0)) throw InvalidConfig("p_min must lie in (0, 1)");
  if (!(clip > 0.0)) throw InvalidConfig("clip must be positive");
  if (!(mtri_penalty >= 0.0)) throw InvalidConfig("mtri_penalty must be nonnegative");
  if (!(gram_eps > 0.0)) throw InvalidConfig("gram_eps must be positive");
  if (!(alc_reg > 0.0)) throw InvalidConfig("alc_reg must be positive");
  if (!basis.linear && basis.knots.empty()) throw InvalidConfig("a step basis needs at least one knot");
}

namespace {

// Columns of [z (if linear), 1{z > t} per knot] for each block in turn.
MatrixXd basis_columns(const std::vector<const MatrixXd*>& blocks, const FeatureBasis& basis) {
  Eigen::Index cols = 1;
  for (const MatrixXd* b : blocks) cols += (basis.linear ? 1 : 0) * b->cols();
  for (const MatrixXd* b : blocks) cols += static_cast<Eigen::Index>(basis.knots.size()) * b->cols();
  MatrixXd out(blocks.front()->rows(), cols);
  out.col(0).setOnes();
  Eigen::Index c = 1;
  if (basis.linear)
    for (const MatrixXd* b : blocks) {
      out.middleCols(c, b->cols()) = *b;
      c += b->cols();
    }
  for (double t : basis.knots)
    for (const MatrixXd* b : blocks) {
      out.middleCols(c, b->cols()) = (b->array() > t).cast<double>().matrix();
      c += b->cols();
    }
  return out;
}

}  // namespace

MatrixXd reward_features(const MatrixXd& X, const MatrixXd& Xk, const FeatureBasis& basis) {
  return basis_columns({&X, &Xk}, basis);
}

MatrixXd current_features(const MatrixXd& X, const FeatureBasis& basis) { return basis_columns({&X}, basis); }

MatrixXd lag_features(const MatrixXd& Xk) {
  MatrixXd out(Xk.rows(), 2 * Xk.cols());
  out << Xk, Xk.array().square().matrix();
  return out;
}

MatrixXd critic_features(const MatrixXd& X, const MatrixXd& Xk) {
  MatrixXd out(X.rows(), 3 * X.cols());
  out << X, X.array().square().matrix(), (X.array() * Xk.array()).matrix();
  return out;
}

// ---------------------------------------------------------------------------
// Lag propensity and target marginal
// ---------------------------------------------------------------------------

MatrixXd LagPropensityModel::predict(int fold, const MatrixXd& Zk) const {
  return floor_simplex_rows(per_fold.at(fold).predict_proba(Zk), p_min);
}

LagPropensityModel fit_lag_propensity(const LaggedDataset& data, int lag, const FoldAssignment& folds, double reg,
                                      double p_min) {
  const MatrixXd& Zk = data.lag_contexts(lag);
  LagPropensityModel model;
  model.p_min = p_min;
  model.oof.resize(data.size(), data.num_actions());
  for (int j = 0; j < folds.num_folds; ++j) {
    const std::vector<int> train = folds.out_of_fold(j), test = folds.in_fold(j);
    model.per_fold.push_back(
        fit_multinomial_logit(select_rows(Zk, train), data.actions()(train), data.num_actions(), reg));
    model.oof(test, Eigen::all) = model.predict(j, select_rows(Zk, test));
  }
  return model;
}

MatrixXd LagTargetModel::predict(int fold, const MatrixXd& Zk) const {
  MatrixXd raw = per_fold.at(fold).predict(Zk);
  return floor_simplex_rows(raw.cwiseMax(p_min).cwiseMin(1.0), p_min);
}

LagTargetModel fit_lag_target_marginal(const LaggedDataset& data, const MatrixXd& pi_matrix, int lag,
                                       const FoldAssignment& folds, double reg, double p_min) {
  if (pi_matrix.rows() != static_cast<Eigen::Index>(data.size()) || pi_matrix.cols() != data.num_actions())
    throw InvalidInput("policy probability matrix must be n x |A|");
  const MatrixXd& Zk = data.lag_contexts(lag);
  LagTargetModel model;
  model.p_min = p_min;
  model.oof.resize(data.size(), data.num_actions());
  for (int j = 0; j < folds.num_folds; ++j) {
    const std::vector<int> train = folds.out_of_fold(j), test = folds.in_fold(j);
    model.per_fold.push_back(fit_ridge_multi(select_rows(Zk, train), select_rows(pi_matrix, train), reg));
    model.oof(test, Eigen::all) = model.predict(j, select_rows(Zk, test));
  }
  return model;
}

LagTargetModel fit_lag_target_marginal(const LaggedDataset& data, const Policy& policy, int lag,
                                       const FoldAssignment& folds, double reg, double p_min) {
  return fit_lag_target_marginal(data, policy.prob_matrix(data.contexts()), lag, folds, reg, p_min);
}

double lag_weight(double target_marginal, double logging_marginal, double clip) {
  return std::min(target_marginal / logging_marginal, clip);
}

VectorXd lag_weights(const LagTargetModel& target, const LagPropensityModel& logging, const VectorXi& actions,
                     double clip) {
  VectorXd w(actions.size());
  for (Eigen::Index i = 0; i < actions.size(); ++i)
    w[i] = lag_weight(target.oof(i, actions[i]), logging.oof(i, actions[i]), clip);
  return w;
}

// ---------------------------------------------------------------------------
// Reward models
// ---------------------------------------------------------------------------

MatrixXd center_critics(const MatrixXd& critics, const MatrixXd& center_features, const VectorXi& actions,
                        int num_actions, const FoldAssignment& folds, double reg) {
  MatrixXd out = critics;
  for (int j = 0; j < folds.num_folds; ++j)
    for (int a = 0; a < num_actions; ++a) {
      std::vector<int> train, test;
      for (std::size_t i = 0; i < folds.size(); ++i) {
        if (actions[i] != a) continue;
        (folds.fold_of[i] == j ? test : train).push_back(static_cast<int>(i));
      }
      if (test.empty()) continue;
      if (train.size() < 2) {
        // No model for this cell: center by the action's overall critic mean.
        std::vector<int> all = train;
        all.insert(all.end(), test.begin(), test.end());
        const Eigen::RowVectorXd mean = select_rows(critics, all).colwise().mean();
        out(test, Eigen::all) = select_rows(critics, test).rowwise() - mean;
        continue;
      }
      const MultiRidgeModel m = fit_ridge_multi(select_rows(center_features, train), select_rows(critics, train), reg);
      out(test, Eigen::all) = select_rows(critics, test) - m.predict(select_rows(center_features, test));
    }
  return out;
}

VectorXd mtri_moments(const MatrixXd& psi, const VectorXd& rewards, const MatrixXd& centered_critics,
                      const VectorXd& beta, double n_total) {
  return centered_critics.transpose() * (rewards - psi * beta) / n_total;
}

RewardModel fit_reward_on_features(const MatrixXd& psi, const VectorXi& actions, const VectorXd& rewards,
                                   int num_actions, const FoldAssignment& folds, double reg, const MatrixXd* critics,
                                   const MatrixXd* center_features, double mtri_penalty, double gram_eps) {
  const Eigen::Index n = psi.rows(), p = psi.cols();
  if (actions.size() != n || rewards.size() != n) throw InvalidInput("reward model inputs have mismatched lengths");
  const bool mtri = critics != nullptr && mtri_penalty > 0.0;
  if (mtri && (center_features == nullptr || critics->rows() != n || center_features->rows() != n))
    throw InvalidInput("MTRI needs critics and centering features for every sample");

  MatrixXd penalty = MatrixXd::Identity(p, p) * reg;
  penalty(0, 0) = 0.0;  // intercept column

  RewardModel model;
  model.oof.resize(n, num_actions);
  for (int j = 0; j < folds.num_folds; ++j) {
    const std::vector<int> train = folds.out_of_fold(j), test = folds.in_fold(j);
    const auto n_train = static_cast<double>(train.size());

    // Fallback means from the training folds: per action, else the overall mean.
    VectorXd action_mean = VectorXd::Constant(num_actions, rewards(train).mean());
    {
      VectorXd sum = VectorXd::Zero(num_actions), count = VectorXd::Zero(num_actions);
      for (int i : train) {
        sum[actions[i]] += rewards[i];
        count[actions[i]] += 1.0;
      }
      for (int a = 0; a < num_actions; ++a)
        if (count[a] > 0.0) action_mean[a] = sum[a] / count[a];
    }

    MatrixXd centered;
    if (mtri) {
      // Centering models are cross-fitted inside the training folds only.
      const FoldAssignment inner =
          kfold_split(static_cast<int>(train.size()), 2, derive_seed(0x63656e746572ULL, static_cast<std::uint64_t>(j)));
      centered = center_critics(select_rows(*critics, train), select_rows(*center_features, train), actions(train),
                                num_actions, inner, reg);
    }

    MatrixXd coef(num_actions, p);
    for (int a = 0; a < num_actions; ++a) {
      std::vector<int> rows, local;
      for (std::size_t t = 0; t < train.size(); ++t)
        if (actions[train[t]] == a) {
          rows.push_back(train[t]);
          local.push_back(static_cast<int>(t));
        }
      if (rows.size() < 2) {
        coef.row(a).setZero();
        coef(a, 0) = action_mean[a];
        model.fallbacks.push_back("fold " + std::to_string(j) + " action " + std::to_string(a) +
                                  ": too few training samples, using the action mean");
        continue;
      }
      const MatrixXd P = select_rows(psi, rows);
      const VectorXd r = rewards(rows);
      MatrixXd lhs = (P.transpose() * P + penalty) / n_train;
      VectorXd rhs = P.transpose() * r / n_train;
      if (mtri) {
        const MatrixXd C = select_rows(centered, local);
        const MatrixXd M = C.transpose() * P / n_train;
        const VectorXd b = C.transpose() * r / n_train;
        MatrixXd gram = C.transpose() * C / n_train;
        double eps = gram_eps;
        MatrixXd W;
        for (int attempt = 0;; ++attempt) {
          MatrixXd g = gram;
          g.diagonal().array() += eps;
          Eigen::LDLT<MatrixXd> ldlt(g);
          if (ldlt.info() == Eigen::Success) {
            W = ldlt.solve(MatrixXd::Identity(g.rows(), g.cols()));
            if (W.allFinite()) break;
          }
          if (attempt == 8) throw NumericError("critic Gram matrix is singular");
          eps *= 10.0;
          model.fallbacks.push_back("fold " + std::to_string(j) + " action " + std::to_string(a) +
                                    ": Gram ridge raised to " + std::to_string(eps));
        }
        const MatrixXd MtW = M.transpose() * W;
        lhs += mtri_penalty * MtW * M;
        rhs += mtri_penalty * MtW * b;
      }
      Eigen::LDLT<MatrixXd> ldlt(lhs);
      VectorXd beta = ldlt.solve(rhs);
      if (ldlt.info() != Eigen::Success || !beta.allFinite())
        throw NumericError("reward model normal equations are singular");
      coef.row(a) = beta.transpose();
    }
    model.coef.push_back(coef);
    model.oof(test, Eigen::all) = model.predict(j, select_rows(psi, test));
  }
  return model;
}

RewardModel fit_reward_model_plain(const LaggedDataset& data, int lag, const FoldAssignment& folds, double reg,
                                   const FeatureBasis& basis) {
  return fit_reward_on_features(reward_features(data.contexts(), data.lag_contexts(lag), basis), data.actions(),
                                data.rewards(), data.num_actions(), folds, reg);
}

RewardModel fit_reward_model_mtri(const LaggedDataset& data, int lag, const FoldAssignment& folds,
                                  double mtri_penalty, double reg, double gram_eps,
                                  const FeatureBasis& basis) {
  const MatrixXd& X = data.contexts();
  const MatrixXd& Xk = data.lag_contexts(lag);
  const MatrixXd critics = critic_features(X, Xk);
  const MatrixXd centers = lag_features(Xk);
  return fit_reward_on_features(reward_features(X, Xk, basis), data.actions(), data.rewards(), data.num_actions(), folds,
                                reg, &critics, &centers, mtri_penalty, gram_eps);
}

RewardModel fit_reward_model_current(const LaggedDataset& data, const FoldAssignment& folds, double reg,
                                     const FeatureBasis& basis) {
  return fit_reward_on_features(current_features(data.contexts(), basis), data.actions(), data.rewards(),
                                data.num_actions(), folds, reg);
}

// ---------------------------------------------------------------------------
// ALC
// ---------------------------------------------------------------------------

namespace {

// Scales columns to unit standard deviation (constant columns are left alone).
MatrixXd standardize_columns(const MatrixXd& M) {
  MatrixXd out = M;
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    const double mean = M.col(c).mean();
    const double sd = std::sqrt((M.col(c).array() - mean).square().mean());
    if (sd > 0.0) out.col(c) = (M.col(c).array() - mean) / sd;
  }
  return out;
}

}  // namespace

double estimate_alc(const MatrixXd& full_features, const MatrixXd& lag_feats, const VectorXi& actions,
                    const VectorXd& residuals, int num_actions, const FoldAssignment& folds, double reg) {
  const MatrixXd F = standardize_columns(full_features);
  const MatrixXd L = standardize_columns(lag_feats);
  double total = 0.0;
  for (int j = 0; j < folds.num_folds; ++j)
    for (int a = 0; a < num_actions; ++a) {
      std::vector<int> train, test;
      for (std::size_t i = 0; i < folds.size(); ++i) {
        if (actions[i] != a) continue;
        (folds.fold_of[i] == j ? test : train).push_back(static_cast<int>(i));
      }
      if (test.empty() || train.size() < 2) continue;  // both regressions fall back to the same mean
      const VectorXd e = residuals(train);
      const RidgeModel m1 = fit_ridge(select_rows(F, train), e, reg);
      const RidgeModel m0 = fit_ridge(select_rows(L, train), e, reg);
      total += (m1.predict(select_rows(F, test)) - m0.predict(select_rows(L, test))).squaredNorm();
    }
  return std::max(total / static_cast<double>(actions.size()), 0.0);
}

double estimate_alc(const LaggedDataset& data, int lag, const FoldAssignment& folds, const RewardModel& reward,
                    double reg) {
  const MatrixXd& X = data.contexts();
  const MatrixXd& Xk = data.lag_contexts(lag);
  const VectorXi& A = data.actions();
  VectorXd resid(A.size());
  for (Eigen::Index i = 0; i < A.size(); ++i) resid[i] = data.rewards()[i] - reward.oof(i, A[i]);
  const MatrixXd lag_f = lag_features(Xk);
  MatrixXd full(X.rows(), 3 * X.cols() + lag_f.cols());
  full << critic_features(X, Xk), lag_f;
  return estimate_alc(full, lag_f, A, resid, data.num_actions(), folds, reg);
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

NuisanceSet fit_nuisances(const LaggedDataset& data, const MatrixXd& pi_matrix, const NuisanceOptions& options) {
  options.validate();
  if (data.num_lags() < 1) throw InvalidInput("DOLCE needs at least one lag context column block");
  NuisanceSet set;
  set.options = options;
  set.folds = kfold_split(static_cast<int>(data.size()), options.num_folds, options.fold_seed);
  for (int k = 0; k < data.num_lags(); ++k) {
    LagNuisance lag;
    lag.propensity = fit_lag_propensity(data, k, set.folds, options.reg, options.p_min);
    lag.target = fit_lag_target_marginal(data, pi_matrix, k, set.folds, options.reg, options.p_min);
    lag.reward = options.reward_kind == RewardModelKind::Mtri
                     ? fit_reward_model_mtri(data, k, set.folds, options.mtri_penalty, options.reg, options.gram_eps,
                                             options.basis)
                     : fit_reward_model_plain(data, k, set.folds, options.reg, options.basis);
    lag.weights = lag_weights(lag.target, lag.propensity, data.actions(), options.clip);
    lag.alc = estimate_alc(data, k, set.folds, lag.reward, options.alc_reg);
    set.lags.push_back(std::move(lag));
  }
  return set;
}

NuisanceSet fit_nuisances(const LaggedDataset& data, const Policy& policy, const NuisanceOptions& options) {
  return fit_nuisances(data, policy.prob_matrix(data.contexts()), options);
}

}  // namespace dolce
