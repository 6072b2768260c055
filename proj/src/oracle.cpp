#include "dolce/oracle.hpp"

#include "dolce/error.hpp"
#include "dolce/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace dolce::oracle {
namespace {

void check_simplex_rows(const MatrixXd& m, const std::string& name) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if ((m.row(i).array() < 0.0).any() || std::abs(m.row(i).sum() - 1.0) > 1e-12)
      throw InvalidInput(name + " row " + std::to_string(i) + " is not a probability vector");
  }
}

// Probability of (x0, x, a) under the logging distribution.
double joint(const DiscreteEnv& env, int x0, int x, int a) { return env.p0[x0] * env.p_x_given_x0(x0, x) * env.pi0(x, a); }

Policy softmax_on_features(const DiscreteEnv& env, const MatrixXd& theta) {
  if (theta.cols() != env.feature_dim() + 1 || theta.rows() != env.num_actions())
    throw InvalidInput("theta must be |A| x (feature_dim + 1)");
  return Policy::linear_softmax(theta);
}

}  // namespace

void DiscreteEnv::validate() const {
  const int n0 = num_x0(), nx = num_x(), na = num_actions();
  if (n0 < 1 || nx < 1 || na < 1) throw InvalidInput("discrete env needs nonempty context and action sets");
  if ((p0.array() < 0.0).any() || std::abs(p0.sum() - 1.0) > 1e-12) throw InvalidInput("p0 is not a probability vector");
  if (p_x_given_x0.rows() != n0 || p_x_given_x0.cols() != nx) throw InvalidInput("p_x_given_x0 must be n0 x nx");
  check_simplex_rows(p_x_given_x0, "p_x_given_x0");
  check_simplex_rows(pi0, "pi0");
  for (const Table3* t : {&q, &sigma2}) {
    if (t->num_x() != nx || t->num_x0() != n0 || t->num_actions() != na)
      throw InvalidInput("q/sigma2 tables must be nx x n0 x |A|");
  }
  for (double s : sigma2.values())
    if (s < 0.0) throw InvalidInput("sigma2 must be nonnegative");
  if (features.rows() != nx) throw InvalidInput("features must have one row per current context");
}

PolicyTable tabulate(const DiscreteEnv& env, const Policy& policy) {
  PolicyTable out(env.num_x(), env.num_actions());
  const bool by_id = std::holds_alternative<TabularPolicy>(policy.variant());
  for (int x = 0; x < env.num_x(); ++x) {
    const VectorXd ctx = by_id ? VectorXd::Constant(1, x) : VectorXd(env.features.row(x).transpose());
    out.row(x) = policy.probs(ctx).transpose();
  }
  return out;
}

double exact_value(const DiscreteEnv& env, const PolicyTable& pi) {
  double v = 0.0;
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x) {
      const double w = env.p0[x0] * env.p_x_given_x0(x0, x);
      for (int a = 0; a < env.num_actions(); ++a) v += w * pi(x, a) * env.q(x, x0, a);
    }
  return v;
}

LagMarginals exact_lag_marginals(const DiscreteEnv& env, const PolicyTable& pi) {
  return {env.p_x_given_x0 * pi, env.p_x_given_x0 * env.pi0};
}

MatrixXd oracle_lag_weights(const DiscreteEnv& env, const PolicyTable& pi, double clip) {
  const LagMarginals m = exact_lag_marginals(env, pi);
  MatrixXd w(env.num_x0(), env.num_actions());
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int a = 0; a < env.num_actions(); ++a)
      w(x0, a) = m.logging(x0, a) > 0.0 ? std::min(m.target(x0, a) / m.logging(x0, a), clip) : 0.0;
  return w;
}

VectorXd marginal_x(const DiscreteEnv& env) { return env.p_x_given_x0.transpose() * env.p0; }

MatrixXd x0_given_x(const DiscreteEnv& env) {
  const VectorXd px = marginal_x(env);
  MatrixXd out(env.num_x(), env.num_x0());
  for (int x = 0; x < env.num_x(); ++x)
    for (int x0 = 0; x0 < env.num_x0(); ++x0)
      out(x, x0) = px[x] > 0.0 ? env.p0[x0] * env.p_x_given_x0(x0, x) / px[x] : 0.0;
  return out;
}

MatrixXd current_mean_reward(const DiscreteEnv& env) {
  const MatrixXd post = x0_given_x(env);
  MatrixXd q = MatrixXd::Zero(env.num_x(), env.num_actions());
  for (int x = 0; x < env.num_x(); ++x)
    for (int x0 = 0; x0 < env.num_x0(); ++x0)
      for (int a = 0; a < env.num_actions(); ++a) q(x, a) += post(x, x0) * env.q(x, x0, a);
  return q;
}

double exact_ips_expectation(const DiscreteEnv& env, const PolicyTable& pi) {
  double e = 0.0;
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x)
      for (int a = 0; a < env.num_actions(); ++a) {
        const double pr = joint(env, x0, x, a);
        if (env.pi0(x, a) > 0.0) e += pr * (pi(x, a) / env.pi0(x, a)) * env.q(x, x0, a);
      }
  return e;
}

double exact_bias_ips(const DiscreteEnv& env, const PolicyTable& pi) {
  const VectorXd px = marginal_x(env);
  const MatrixXd q = current_mean_reward(env);
  double bias = 0.0;
  for (int x = 0; x < env.num_x(); ++x)
    for (int a = 0; a < env.num_actions(); ++a)
      if (pi(x, a) > 0.0 && env.pi0(x, a) == 0.0) bias -= px[x] * pi(x, a) * q(x, a);
  return bias;
}

double exact_dr_expectation(const DiscreteEnv& env, const PolicyTable& pi, const MatrixXd& q_hat) {
  double e = 0.0;
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x) {
      double model_term = 0.0;
      for (int b = 0; b < env.num_actions(); ++b) model_term += pi(x, b) * q_hat(x, b);
      for (int a = 0; a < env.num_actions(); ++a) {
        if (env.pi0(x, a) == 0.0) continue;
        const double w = pi(x, a) / env.pi0(x, a);
        e += joint(env, x0, x, a) * (w * (env.q(x, x0, a) - q_hat(x, a)) + model_term);
      }
    }
  return e;
}

double exact_bias_dr(const DiscreteEnv& env, const PolicyTable& pi, const MatrixXd& q_hat) {
  const VectorXd px = marginal_x(env);
  const MatrixXd q = current_mean_reward(env);
  double bias = 0.0;
  for (int x = 0; x < env.num_x(); ++x)
    for (int a = 0; a < env.num_actions(); ++a)
      if (pi(x, a) > 0.0 && env.pi0(x, a) == 0.0) bias += px[x] * pi(x, a) * (q_hat(x, a) - q(x, a));
  return bias;
}

double exact_dolce_expectation(const DiscreteEnv& env, const PolicyTable& pi, const Table3& q_tilde, double clip) {
  const MatrixXd w = oracle_lag_weights(env, pi, clip);
  double e = 0.0;
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x) {
      double model_term = 0.0;
      for (int b = 0; b < env.num_actions(); ++b) model_term += pi(x, b) * q_tilde(x, x0, b);
      for (int a = 0; a < env.num_actions(); ++a) {
        const double pr = joint(env, x0, x, a);
        if (pr == 0.0) continue;
        e += pr * (w(x0, a) * (env.q(x, x0, a) - q_tilde(x, x0, a)) + model_term);
      }
    }
  return e;
}

double dolce_bias_formula(const DiscreteEnv& env, const PolicyTable& pi, const Table3& q_tilde, double clip) {
  const MatrixXd w = oracle_lag_weights(env, pi, clip);
  double bias = 0.0;
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x) {
      double inner = 0.0;
      for (int a = 0; a < env.num_actions(); ++a)
        inner += (env.pi0(x, a) * w(x0, a) - pi(x, a)) * (env.q(x, x0, a) - q_tilde(x, x0, a));
      bias += env.p0[x0] * env.p_x_given_x0(x0, x) * inner;
    }
  return bias;
}

double exact_dolce_variance(const DiscreteEnv& env, const PolicyTable& pi, const Table3& q_tilde, int n,
                            double clip) {
  if (n < 1) throw InvalidInput("n must be at least 1");
  const MatrixXd w = oracle_lag_weights(env, pi, clip);
  double noise = 0.0, first = 0.0, second = 0.0;
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x) {
      double model_term = 0.0;
      for (int b = 0; b < env.num_actions(); ++b) model_term += pi(x, b) * q_tilde(x, x0, b);
      for (int a = 0; a < env.num_actions(); ++a) {
        const double pr = joint(env, x0, x, a);
        if (pr == 0.0) continue;
        noise += pr * w(x0, a) * w(x0, a) * env.sigma2(x, x0, a);
        const double y = w(x0, a) * (env.q(x, x0, a) - q_tilde(x, x0, a)) + model_term;
        first += pr * y;
        second += pr * y * y;
      }
    }
  return (noise + (second - first * first)) / n;
}

double exact_dolce_variance_direct(const DiscreteEnv& env, const PolicyTable& pi, const Table3& q_tilde, int n,
                                   double clip) {
  if (n < 1) throw InvalidInput("n must be at least 1");
  const MatrixXd w = oracle_lag_weights(env, pi, clip);
  double first = 0.0, second = 0.0;
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x) {
      double model_term = 0.0;
      for (int b = 0; b < env.num_actions(); ++b) model_term += pi(x, b) * q_tilde(x, x0, b);
      for (int a = 0; a < env.num_actions(); ++a) {
        const double pr = joint(env, x0, x, a);
        if (pr == 0.0) continue;
        const double sd = std::sqrt(env.sigma2(x, x0, a));
        for (double r : {env.q(x, x0, a) - sd, env.q(x, x0, a) + sd}) {
          const double psi = w(x0, a) * (r - q_tilde(x, x0, a)) + model_term;
          first += 0.5 * pr * psi;
          second += 0.5 * pr * psi * psi;
        }
      }
    }
  return (second - first * first) / n;
}

VectorXd exact_gradient(const DiscreteEnv& env, const MatrixXd& theta) {
  const Policy policy = softmax_on_features(env, theta);
  const PolicyTable pi = tabulate(env, policy);
  VectorXd grad = VectorXd::Zero(theta.size());
  const VectorXd px = marginal_x(env);
  for (int x = 0; x < env.num_x(); ++x) {
    const VectorXd feat = env.features.row(x).transpose();
    for (int a = 0; a < env.num_actions(); ++a) {
      double qa = 0.0;
      for (int x0 = 0; x0 < env.num_x0(); ++x0) qa += env.p0[x0] * env.p_x_given_x0(x0, x) * env.q(x, x0, a);
      grad += qa * pi(x, a) * policy_score(policy, feat, a);
    }
  }
  return grad;
}

VectorXd finite_difference_gradient(const DiscreteEnv& env, const MatrixXd& theta, double step) {
  VectorXd grad(theta.size());
  const Eigen::Index width = theta.cols();
  for (Eigen::Index idx = 0; idx < theta.size(); ++idx) {
    MatrixXd plus = theta, minus = theta;
    plus(idx / width, idx % width) += step;
    minus(idx / width, idx % width) -= step;
    grad[idx] = (exact_value(env, tabulate(env, Policy::linear_softmax(plus))) -
                 exact_value(env, tabulate(env, Policy::linear_softmax(minus)))) /
                (2.0 * step);
  }
  return grad;
}

MatrixXd exact_lag_score(const DiscreteEnv& env, const MatrixXd& theta) {
  const Policy policy = softmax_on_features(env, theta);
  const PolicyTable pi = tabulate(env, policy);
  const MatrixXd bar = env.p_x_given_x0 * pi;
  const int na = env.num_actions();
  MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(env.num_x0()) * na, theta.size());
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x) {
      const VectorXd feat = env.features.row(x).transpose();
      for (int a = 0; a < na; ++a)
        out.row(x0 * na + a) +=
            (env.p_x_given_x0(x0, x) * pi(x, a)) * policy_score(policy, feat, a).transpose();
    }
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int a = 0; a < na; ++a) out.row(x0 * na + a) /= bar(x0, a);
  return out;
}

VectorXd exact_dolce_gradient_expectation(const DiscreteEnv& env, const MatrixXd& theta, const Table3& q_tilde) {
  const Policy policy = softmax_on_features(env, theta);
  const PolicyTable pi = tabulate(env, policy);
  const MatrixXd w = oracle_lag_weights(env, pi, std::numeric_limits<double>::infinity());
  const MatrixXd lag_score = exact_lag_score(env, theta);
  const int na = env.num_actions();
  VectorXd grad = VectorXd::Zero(theta.size());
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int x = 0; x < env.num_x(); ++x) {
      const VectorXd feat = env.features.row(x).transpose();
      const double px = env.p0[x0] * env.p_x_given_x0(x0, x);
      for (int a = 0; a < na; ++a) {
        const double pr = px * env.pi0(x, a);
        if (pr > 0.0)
          grad += pr * w(x0, a) * (env.q(x, x0, a) - q_tilde(x, x0, a)) * lag_score.row(x0 * na + a).transpose();
        grad += px * pi(x, a) * q_tilde(x, x0, a) * policy_score(policy, feat, a);
      }
    }
  return grad;
}

ValueIdentity lemma_value_identity(const DiscreteEnv& env, const PolicyTable& pi) {
  const VectorXd px = marginal_x(env);
  const MatrixXd q_bayes = current_mean_reward(env);
  ValueIdentity out{0.0, exact_value(env, pi), 0.0};
  for (int x = 0; x < env.num_x(); ++x)
    for (int a = 0; a < env.num_actions(); ++a) {
      out.via_current += px[x] * pi(x, a) * q_bayes(x, a);
      if (env.pi0(x, a) == 0.0) continue;
      // E[R | X = x, A = a] straight from the joint law of (x0, x, a).
      double num = 0.0, den = 0.0;
      for (int x0 = 0; x0 < env.num_x0(); ++x0) {
        num += joint(env, x0, x, a) * env.q(x, x0, a);
        den += joint(env, x0, x, a);
      }
      if (den > 0.0) out.max_reward_gap = std::max(out.max_reward_gap, std::abs(num / den - q_bayes(x, a)));
    }
  return out;
}

double max_orthogonality_residual(const DiscreteEnv& env, const Table3& q_tilde) {
  const int n0 = env.num_x0(), nx = env.num_x(), na = env.num_actions();
  double worst = 0.0;
  for (int x0s = 0; x0s < n0; ++x0s)
    for (int as = 0; as < na; ++as) {
      double p_cell = 0.0;  // P(x0*, a*)
      for (int x = 0; x < nx; ++x) p_cell += joint(env, x0s, x, as);
      if (p_cell == 0.0) continue;
      for (int xs = 0; xs < nx; ++xs) {
        // f = 1{x = xs, x0 = x0s, a = as}; E[f | x0s, as] = P(xs | x0s, as).
        const double cond = joint(env, x0s, xs, as) / p_cell;
        double moment = 0.0;
        for (int x = 0; x < nx; ++x) {
          const double f_tilde = (x == xs ? 1.0 : 0.0) - cond;
          moment += joint(env, x0s, x, as) * (env.q(x, x0s, as) - q_tilde(x, x0s, as)) * f_tilde;
        }
        worst = std::max(worst, std::abs(moment));
      }
    }
  return worst;
}

bool lag_overlap_holds(const DiscreteEnv& env, const PolicyTable& pi) {
  const LagMarginals m = exact_lag_marginals(env, pi);
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int a = 0; a < env.num_actions(); ++a)
      if (m.target(x0, a) > 0.0 && m.logging(x0, a) <= 0.0) return false;
  return true;
}

DiscreteEnv random_env(std::uint64_t seed, int num_x0, int num_x, int num_actions, int feature_dim, double zero_prob) {
  CounterRng rng(derive_seed(seed, 0x6f7261));
  DiscreteEnv env;
  auto positive_row = [&rng](int size) {
    VectorXd v(size);
    for (int i = 0; i < size; ++i) v[i] = 0.1 + rng.uniform();
    return VectorXd(v / v.sum());
  };
  env.p0 = positive_row(num_x0);
  env.p_x_given_x0.resize(num_x0, num_x);
  for (int x0 = 0; x0 < num_x0; ++x0) env.p_x_given_x0.row(x0) = positive_row(num_x).transpose();
  env.pi0.resize(num_x, num_actions);
  for (int x = 0; x < num_x; ++x) {
    VectorXd row(num_actions);
    for (int a = 0; a < num_actions; ++a) row[a] = rng.uniform() < zero_prob ? 0.0 : 0.1 + rng.uniform();
    if (row.sum() == 0.0) row[static_cast<int>(rng.uniform() * num_actions)] = 1.0;
    env.pi0.row(x) = (row / row.sum()).transpose();
  }
  // Every action must be loggable somewhere, which with dense p(x|x0) gives lag overlap.
  for (int a = 0; a < num_actions; ++a) {
    if (env.pi0.col(a).maxCoeff() > 0.0) continue;
    const int x = static_cast<int>(rng.uniform() * num_x);
    VectorXd row = env.pi0.row(x).transpose();
    row[a] = row.maxCoeff() > 0.0 ? row.maxCoeff() : 1.0;
    env.pi0.row(x) = (row / row.sum()).transpose();
  }
  env.q = Table3(num_x, num_x0, num_actions);
  env.sigma2 = Table3(num_x, num_x0, num_actions);
  for (int x = 0; x < num_x; ++x)
    for (int x0 = 0; x0 < num_x0; ++x0)
      for (int a = 0; a < num_actions; ++a) {
        env.q(x, x0, a) = rng.uniform(-1.0, 2.0);
        env.sigma2(x, x0, a) = rng.uniform(0.1, 1.0);
      }
  env.features.resize(num_x, feature_dim);
  for (int x = 0; x < num_x; ++x)
    for (int j = 0; j < feature_dim; ++j) env.features(x, j) = rng.normal();
  env.validate();
  return env;
}

Table3 residual_invariant_model(const DiscreteEnv& env, std::uint64_t seed, double scale) {
  CounterRng rng(derive_seed(seed, 0x7269));
  MatrixXd delta(env.num_x0(), env.num_actions());
  for (int x0 = 0; x0 < env.num_x0(); ++x0)
    for (int a = 0; a < env.num_actions(); ++a) delta(x0, a) = rng.uniform(-scale, scale);
  Table3 out = env.q;
  for (int x = 0; x < env.num_x(); ++x)
    for (int x0 = 0; x0 < env.num_x0(); ++x0)
      for (int a = 0; a < env.num_actions(); ++a) out(x, x0, a) -= delta(x0, a);
  return out;
}

Table3 misspecified_model(const DiscreteEnv& env, std::uint64_t seed, double scale) {
  CounterRng rng(derive_seed(seed, 0x6d6973));
  Table3 out = env.q;
  for (int x = 0; x < env.num_x(); ++x)
    for (int x0 = 0; x0 < env.num_x0(); ++x0)
      for (int a = 0; a < env.num_actions(); ++a) out(x, x0, a) -= rng.uniform(-scale, scale);
  return out;
}

PolicyTable random_policy(const DiscreteEnv& env, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, 0x706f6c));
  PolicyTable pi(env.num_x(), env.num_actions());
  for (int x = 0; x < env.num_x(); ++x) {
    for (int a = 0; a < env.num_actions(); ++a) pi(x, a) = 0.05 + rng.uniform();
    pi.row(x) /= pi.row(x).sum();
  }
  return pi;
}

namespace {

nlohmann::json matrix_json(const MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw InvalidInput("'" + name + "' must be a nonempty 2-D array");
  MatrixXd m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw InvalidInput("'" + name + "' rows differ in length");
    for (std::size_t c = 0; c < j[r].size(); ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json table_json(const Table3& t) {
  nlohmann::json out = nlohmann::json::array();
  for (int x = 0; x < t.num_x(); ++x) {
    nlohmann::json plane = nlohmann::json::array();
    for (int x0 = 0; x0 < t.num_x0(); ++x0) {
      nlohmann::json row = nlohmann::json::array();
      for (int a = 0; a < t.num_actions(); ++a) row.push_back(t(x, x0, a));
      plane.push_back(row);
    }
    out.push_back(plane);
  }
  return out;
}

Table3 table_from_json(const nlohmann::json& j, int nx, int n0, int na, const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != nx) throw InvalidInput("'" + name + "' must be nx x n0 x |A|");
  Table3 t(nx, n0, na);
  for (int x = 0; x < nx; ++x) {
    if (static_cast<int>(j[x].size()) != n0) throw InvalidInput("'" + name + "' must be nx x n0 x |A|");
    for (int x0 = 0; x0 < n0; ++x0) {
      if (static_cast<int>(j[x][x0].size()) != na) throw InvalidInput("'" + name + "' must be nx x n0 x |A|");
      for (int a = 0; a < na; ++a) t(x, x0, a) = j[x][x0][a].get<double>();
    }
  }
  return t;
}

}  // namespace

std::string env_to_json(const DiscreteEnv& env) {
  nlohmann::json doc;
  doc["p0"] = std::vector<double>(env.p0.data(), env.p0.data() + env.p0.size());
  doc["p_x_given_x0"] = matrix_json(env.p_x_given_x0);
  doc["pi0"] = matrix_json(env.pi0);
  doc["q"] = table_json(env.q);
  doc["sigma2"] = table_json(env.sigma2);
  doc["features"] = matrix_json(env.features);
  return doc.dump(2);
}

DiscreteEnv env_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed env file: ") + e.what());
  }
  try {
    DiscreteEnv env;
    const auto p0 = doc.at("p0").get<std::vector<double>>();
    env.p0 = Eigen::Map<const VectorXd>(p0.data(), static_cast<Eigen::Index>(p0.size()));
    env.p_x_given_x0 = matrix_from_json(doc.at("p_x_given_x0"), "p_x_given_x0");
    env.pi0 = matrix_from_json(doc.at("pi0"), "pi0");
    const int nx = static_cast<int>(env.pi0.rows()), n0 = static_cast<int>(env.p0.size());
    const int na = static_cast<int>(env.pi0.cols());
    env.q = table_from_json(doc.at("q"), nx, n0, na, "q");
    env.sigma2 = doc.contains("sigma2") ? table_from_json(doc.at("sigma2"), nx, n0, na, "sigma2")
                                        : Table3(nx, n0, na, 1.0);
    env.features = doc.contains("features") ? matrix_from_json(doc.at("features"), "features")
                                            : MatrixXd(MatrixXd::Identity(nx, nx));
    env.validate();
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("env file: ") + e.what());
  }
}

DiscreteEnv load_env(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return env_from_json(ss.str());
}

LaggedDataset sample_dataset(const DiscreteEnv& env, int n, std::uint64_t seed, std::vector<int>* x_ids,
                             std::vector<int>* x0_ids) {
  CounterRng rng(derive_seed(seed, 0x73616d));
  const int f = env.feature_dim(), n0 = env.num_x0();
  const int d = f + n0;
  std::vector<LaggedSample> samples;
  samples.reserve(n);
  if (x_ids) x_ids->assign(n, 0);
  if (x0_ids) x0_ids->assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const int x0 = rng.categorical(env.p0, n0);
    const VectorXd row = env.p_x_given_x0.row(x0).transpose();
    const int x = rng.categorical(row, env.num_x());
    const VectorXd pi0 = env.pi0.row(x).transpose();
    LaggedSample s;
    s.a = rng.categorical(pi0, env.num_actions());
    s.x = VectorXd::Zero(d);
    s.x.head(f) = env.features.row(x).transpose();
    VectorXd lag = VectorXd::Zero(d);
    lag[f + x0] = 1.0;
    s.x_lags = {lag};
    s.r = env.q(x, x0, s.a) + std::sqrt(env.sigma2(x, x0, s.a)) * rng.normal();
    s.logged_propensity = pi0[s.a];
    if (x_ids) (*x_ids)[i] = x;
    if (x0_ids) (*x0_ids)[i] = x0;
    samples.push_back(std::move(s));
  }
  return LaggedDataset(std::move(samples), d, env.num_actions(), {"1"});
}

MatrixXd embed_theta(const DiscreteEnv& env, const MatrixXd& theta) {
  const int f = env.feature_dim();
  MatrixXd out = MatrixXd::Zero(theta.rows(), f + env.num_x0() + 1);
  out.leftCols(f) = theta.leftCols(f);
  out.col(out.cols() - 1) = theta.col(f);
  return out;
}

std::vector<CheckResult> identity_suite(const DiscreteEnv& env, std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto add = [&out](std::string name, double residual, double tol, bool expected_fail = false) {
    out.push_back({std::move(name), residual, tol, residual < tol, expected_fail});
  };
  const PolicyTable pi = random_policy(env, seed);
  const double value = exact_value(env, pi);
  const bool overlap = lag_overlap_holds(env, pi);

  const Table3 invariant = residual_invariant_model(env, seed);
  add("dolce_unbiased_residual_invariant", std::abs(exact_dolce_expectation(env, pi, invariant) - value), 1e-10,
      !overlap);

  const Table3 broken = misspecified_model(env, seed);
  add("dolce_bias_formula",
      std::abs(exact_dolce_expectation(env, pi, broken) - value - dolce_bias_formula(env, pi, broken)), 1e-10);
  add("dolce_bias_formula_clipped",
      std::abs(exact_dolce_expectation(env, pi, broken, 1.5) - value - dolce_bias_formula(env, pi, broken, 1.5)),
      1e-10);
  add("dolce_variance_dual_path",
      std::abs(exact_dolce_variance(env, pi, broken, 1) - exact_dolce_variance_direct(env, pi, broken, 1)), 1e-10);

  add("ips_bias_formula", std::abs(exact_ips_expectation(env, pi) - value - exact_bias_ips(env, pi)), 1e-12);
  CounterRng rng(derive_seed(seed, 0x6472));
  MatrixXd q_hat(env.num_x(), env.num_actions());
  for (Eigen::Index i = 0; i < q_hat.size(); ++i) q_hat.data()[i] = rng.uniform(-1.0, 2.0);
  add("dr_bias_formula", std::abs(exact_dr_expectation(env, pi, q_hat) - value - exact_bias_dr(env, pi, q_hat)),
      1e-12);

  const ValueIdentity vi = lemma_value_identity(env, pi);
  add("value_identity", std::max(std::abs(vi.via_current - vi.via_lagged), vi.max_reward_gap), 1e-14);
  add("moment_orthogonality", max_orthogonality_residual(env, invariant), 1e-12);

  if (env.feature_dim() > 0) {
    MatrixXd theta(env.num_actions(), env.feature_dim() + 1);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = 0.5 * rng.normal();
    const VectorXd grad = exact_gradient(env, theta);
    const VectorXd fd = finite_difference_gradient(env, theta);
    add("gradient_finite_difference", (grad - fd).norm() / std::max(1.0, grad.norm()), 1e-6);
    add("dolce_gradient_unbiased",
        (exact_dolce_gradient_expectation(env, theta, invariant) - grad).cwiseAbs().maxCoeff(), 1e-10, !overlap);
  }
  return out;
}

}  // namespace dolce::oracle
