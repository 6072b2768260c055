#include "dolce/core.hpp"

#include "dolce/error.hpp"

#include <cmath>
#include <utility>

namespace dolce {

LaggedDataset::LaggedDataset(std::vector<LaggedSample> samples, int d, int num_actions,
                             std::vector<std::string> lag_labels)
    : samples_(std::move(samples)), d_(d), num_actions_(num_actions), lag_labels_(std::move(lag_labels)) {
  if (samples_.empty()) throw InvalidInput("dataset must contain at least one sample");
  if (d_ < 0) throw InvalidInput("context dimension must be nonnegative");
  if (num_actions_ < 1) throw InvalidInput("num_actions must be at least 1");

  const auto n = static_cast<Eigen::Index>(samples_.size());
  const int num_lags = static_cast<int>(lag_labels_.size());
  contexts_.resize(n, d_);
  lag_contexts_.assign(num_lags, MatrixXd(n, d_));
  actions_.resize(n);
  rewards_.resize(n);
  has_propensities_ = samples_.front().logged_propensity.has_value();
  if (has_propensities_) propensities_.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const LaggedSample& s = samples_[i];
    const std::string where = "sample " + std::to_string(i) + ": ";
    if (s.x.size() != d_) throw InvalidInput(where + "context length " + std::to_string(s.x.size()) + " != d");
    if (static_cast<int>(s.x_lags.size()) != num_lags)
      throw InvalidInput(where + "expected " + std::to_string(num_lags) + " lag contexts");
    if (s.a < 0 || s.a >= num_actions_) throw InvalidInput(where + "action out of range");
    if (!std::isfinite(s.r)) throw InvalidInput(where + "non-finite reward");
    if (s.logged_propensity.has_value() != has_propensities_)
      throw InvalidInput(where + "logged propensity must be present for all samples or none");
    if (s.logged_propensity && !(*s.logged_propensity > 0.0 && *s.logged_propensity <= 1.0))
      throw InvalidInput(where + "logged propensity outside (0, 1]");
    contexts_.row(i) = s.x.transpose();
    for (int k = 0; k < num_lags; ++k) {
      if (s.x_lags[k].size() != d_) throw InvalidInput(where + "lag context length != d");
      lag_contexts_[k].row(i) = s.x_lags[k].transpose();
    }
    actions_[i] = s.a;
    rewards_[i] = s.r;
    if (has_propensities_) propensities_[i] = *s.logged_propensity;
  }
}

const MatrixXd& LaggedDataset::lag_contexts(int k) const {
  if (k < 0 || k >= num_lags()) throw InvalidInput("lag index " + std::to_string(k) + " not present in data");
  return lag_contexts_[k];
}

VectorXd softmax(const VectorXd& logits) {
  VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

Policy::Policy(Variant v) : v_(std::move(v)) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, UniformPolicy>) {
          if (p.num_actions < 1) throw InvalidInput("uniform policy needs at least one action");
        } else if constexpr (std::is_same_v<T, EpsGreedyScoresPolicy>) {
          if (!p.scores) throw InvalidInput("eps-greedy policy needs a score function");
          if (p.num_actions < 1) throw InvalidInput("eps-greedy policy needs at least one action");
          if (!(p.epsilon >= 0.0 && p.epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0, 1]");
        } else if constexpr (std::is_same_v<T, LinearSoftmaxPolicy>) {
          if (p.theta.rows() < 1 || p.theta.cols() < 1) throw InvalidInput("softmax theta must be |A| x (d+1)");
          if (!p.theta.allFinite()) throw InvalidInput("softmax theta must be finite");
        } else {
          if (p.table.rows() < 1 || p.table.cols() < 1) throw InvalidInput("tabular policy needs a nonempty table");
          for (Eigen::Index c = 0; c < p.table.rows(); ++c) {
            if ((p.table.row(c).array() < 0.0).any() || std::abs(p.table.row(c).sum() - 1.0) > 1e-12)
              throw InvalidInput("tabular policy row " + std::to_string(c) + " is not a probability vector");
          }
        }
      },
      v_);
}

Policy Policy::uniform(int num_actions, int dim) { return Policy(UniformPolicy{num_actions, dim}); }

Policy Policy::eps_greedy(std::function<VectorXd(const VectorXd&)> scores, int num_actions, int dim,
                          double epsilon) {
  return Policy(EpsGreedyScoresPolicy{std::move(scores), num_actions, dim, epsilon});
}

Policy Policy::linear_softmax(MatrixXd theta) { return Policy(LinearSoftmaxPolicy{std::move(theta)}); }

Policy Policy::tabular(MatrixXd table) { return Policy(TabularPolicy{std::move(table)}); }

int Policy::num_actions() const {
  return std::visit(
      [](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearSoftmaxPolicy>) return static_cast<int>(p.theta.rows());
        else if constexpr (std::is_same_v<T, TabularPolicy>) return static_cast<int>(p.table.cols());
        else return p.num_actions;
      },
      v_);
}

int Policy::dim() const {
  return std::visit(
      [](const auto& p) -> int {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearSoftmaxPolicy>) return static_cast<int>(p.theta.cols()) - 1;
        else if constexpr (std::is_same_v<T, TabularPolicy>) return 1;
        else return p.dim;
      },
      v_);
}

const LinearSoftmaxPolicy& Policy::as_linear_softmax() const {
  if (const auto* p = std::get_if<LinearSoftmaxPolicy>(&v_)) return *p;
  throw UnsupportedPolicy("policy '" + name() + "' is not differentiable (LinearSoftmax required)");
}

std::string Policy::name() const {
  switch (v_.index()) {
    case 0: return "uniform";
    case 1: return "eps_greedy";
    case 2: return "linear_softmax";
    default: return "tabular";
  }
}

VectorXd Policy::probs(const VectorXd& x) const {
  const int expected = dim();
  if (expected >= 0 && x.size() != expected)
    throw InvalidInput("context length " + std::to_string(x.size()) + " does not match policy dimension " +
                       std::to_string(expected));
  return std::visit(
      [&x](const auto& p) -> VectorXd {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, UniformPolicy>) {
          return VectorXd::Constant(p.num_actions, 1.0 / p.num_actions);
        } else if constexpr (std::is_same_v<T, EpsGreedyScoresPolicy>) {
          const VectorXd s = p.scores(x);
          if (s.size() != p.num_actions) throw InvalidInput("score function returned wrong number of actions");
          Eigen::Index best = 0;
          for (Eigen::Index a = 1; a < s.size(); ++a)
            if (s[a] > s[best]) best = a;
          VectorXd out = VectorXd::Constant(p.num_actions, p.epsilon / p.num_actions);
          out[best] = 1.0 - p.epsilon + p.epsilon / p.num_actions;
          return out;
        } else if constexpr (std::is_same_v<T, LinearSoftmaxPolicy>) {
          const Eigen::Index d = p.theta.cols() - 1;
          VectorXd logits = p.theta.leftCols(d) * x + p.theta.col(d);
          return softmax(logits);
        } else {
          const long id = std::lround(x[0]);
          if (id < 0 || id >= p.table.rows()) throw InvalidInput("tabular context id " + std::to_string(id) + " out of range");
          return p.table.row(id).transpose();
        }
      },
      v_);
}

MatrixXd Policy::prob_matrix(const MatrixXd& contexts) const {
  MatrixXd out(contexts.rows(), num_actions());
  if (const auto* sm = std::get_if<LinearSoftmaxPolicy>(&v_)) {
    const Eigen::Index d = sm->theta.cols() - 1;
    if (contexts.cols() != d) throw InvalidInput("context matrix width does not match policy dimension");
    MatrixXd logits = contexts * sm->theta.leftCols(d).transpose();
    logits.rowwise() += sm->theta.col(d).transpose();
    for (Eigen::Index i = 0; i < logits.rows(); ++i) out.row(i) = softmax(logits.row(i).transpose()).transpose();
    return out;
  }
  for (Eigen::Index i = 0; i < contexts.rows(); ++i) out.row(i) = probs(contexts.row(i).transpose()).transpose();
  return out;
}

VectorXd policy_prob(const Policy& policy, const VectorXd& x) { return policy.probs(x); }

VectorXd policy_score(const Policy& policy, const VectorXd& x, int a) {
  const LinearSoftmaxPolicy& sm = policy.as_linear_softmax();
  const int num_actions = static_cast<int>(sm.theta.rows());
  if (a < 0 || a >= num_actions) throw InvalidInput("action out of range");
  const VectorXd pi = policy.probs(x);
  const Eigen::Index width = sm.theta.cols();
  VectorXd score(num_actions * width);
  for (int b = 0; b < num_actions; ++b) {
    const double coef = (b == a ? 1.0 : 0.0) - pi[b];
    score.segment(b * width, width - 1) = coef * x;
    score[b * width + width - 1] = coef;
  }
  return score;
}

std::vector<int> FoldAssignment::in_fold(int j) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == j) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> FoldAssignment::out_of_fold(int j) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != j) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace dolce
