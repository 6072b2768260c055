#include "dolce/synthgen.hpp"

#include "dolce/error.hpp"
#include "dolce/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace dolce::synth {

void SynthConfig::validate() const {
  if (n < 2) throw InvalidConfig("n must be at least 2");
  if (d < 1) throw InvalidConfig("d must be at least 1");
  if (num_actions < 1) throw InvalidConfig("num_actions must be at least 1");
  if (!(violation_ratio >= 0.0 && violation_ratio < 1.0)) throw InvalidConfig("violation ratio r must lie in [0, 1)");
  if (!(mix_lambda >= 0.0 && mix_lambda <= 1.0)) throw InvalidConfig("mix_lambda must lie in [0, 1]");
  if (!(interaction_eta >= 0.0)) throw InvalidConfig("interaction_eta must be nonnegative");
  if (!std::isfinite(logging_beta)) throw InvalidConfig("logging_beta must be finite");
  if (!(lag_rho >= 0.0)) throw InvalidConfig("lag_rho must be nonnegative");
  if (!(target_epsilon >= 0.0 && target_epsilon <= 1.0)) throw InvalidConfig("target_epsilon must lie in [0, 1]");
  if (!(exploration_floor >= 0.0 && exploration_floor < 1.0))
    throw InvalidConfig("exploration_floor must lie in [0, 1)");
}

SynthEnv make_env(const SynthConfig& config) {
  SynthEnv env;
  env.d = config.d;
  env.num_actions = config.num_actions;
  const int features = std::max(config.d - 1, 0);
  env.g_coef.resize(config.num_actions, features);
  env.h_coef.resize(config.num_actions, features);
  env.u_coef.resize(config.num_actions, 3);
  CounterRng rng(derive_seed(config.env_seed, 0x656e76));
  // Baseline action: x > 0.5 gives -0.2, otherwise +0.2.
  env.g_coef.row(0).setConstant(-kBaselineContrast);
  env.h_coef.row(0).setConstant(-kBaselineContrast);
  for (int a = 1; a < config.num_actions; ++a)
    for (int j = 0; j < features; ++j) env.g_coef(a, j) = rng.uniform(-kCoefRange, kCoefRange);
  for (int a = 1; a < config.num_actions; ++a)
    for (int j = 0; j < features; ++j) env.h_coef(a, j) = rng.uniform(-kCoefRange, kCoefRange);
  for (int a = 0; a < config.num_actions; ++a)
    for (int j = 0; j < 3; ++j) env.u_coef(a, j) = rng.uniform(-kCoefRange, kCoefRange);
  return env;
}

double threshold_component(const Eigen::MatrixXd& coef, const Eigen::VectorXd& z, int a) {
  // Threshold features are z[1..d-1]; z[0] only drives support violations.
  double total = 0.0;
  for (Eigen::Index j = 0; j < coef.cols(); ++j) total += coef(a, j) * (z[j + 1] > kThreshold ? 1.0 : -1.0);
  // Count effect over z[2..d-1].
  int count = 0;
  for (Eigen::Index j = 2; j < z.size(); ++j) count += z[j] > kThreshold ? 1 : 0;
  if (count >= 2) total += a == 0 ? kCountPenaltyAction0 : kCountBonusOthers;
  return total;
}

double g_component(const SynthEnv& env, const Eigen::VectorXd& x, int a) { return threshold_component(env.g_coef, x, a); }

double h_component(const SynthEnv& env, const Eigen::VectorXd& x_lag, int a) {
  return threshold_component(env.h_coef, x_lag, a);
}

double u_component(const SynthEnv& env, const Eigen::VectorXd& x, const Eigen::VectorXd& x_lag, int a) {
  double total = 0.0;
  if (x.size() > 1) total += env.u_coef(a, 0) * x[1] * x_lag[1];
  if (x.size() > 2) total += env.u_coef(a, 1) * x[2] * x_lag[2];
  if (x.size() > 3) total += env.u_coef(a, 2) * std::sin(x[3] + x_lag[3]);
  return total;
}

double mean_reward(const SynthEnv& env, const Eigen::VectorXd& x, const Eigen::VectorXd& x_lag, int a,
                   double mix_lambda, double interaction_eta) {
  double q = mix_lambda * g_component(env, x, a) + (1.0 - mix_lambda) * h_component(env, x_lag, a);
  if (interaction_eta != 0.0) q += interaction_eta * u_component(env, x, x_lag, a);
  return q;
}

Eigen::VectorXd g_scores(const SynthEnv& env, const Eigen::VectorXd& x) {
  Eigen::VectorXd s(env.num_actions);
  for (int a = 0; a < env.num_actions; ++a) s[a] = g_component(env, x, a);
  return s;
}

Eigen::VectorXd logging_policy_probs(const SynthEnv& env, const Eigen::VectorXd& x, double beta, double c_r,
                                     double exploration_floor) {
  if (x[0] > c_r) {
    Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(env.num_actions);
    one_hot[0] = 1.0;
    return one_hot;
  }
  Eigen::VectorXd p = softmax(beta * g_scores(env, x));
  if (exploration_floor > 0.0)
    p = (1.0 - exploration_floor) * p.array() + exploration_floor / env.num_actions;
  return p;
}

Policy target_policy(const SynthEnv& env, double epsilon) {
  return Policy::eps_greedy([env](const Eigen::VectorXd& x) { return g_scores(env, x); }, env.num_actions, env.d,
                            epsilon);
}

double violation_threshold(const Eigen::VectorXd& first_coordinate, double r) {
  const auto n = first_coordinate.size();
  const auto forced = static_cast<Eigen::Index>(std::llround(r * static_cast<double>(n)));
  if (forced <= 0) return std::numeric_limits<double>::infinity();
  if (forced >= n) return -std::numeric_limits<double>::infinity();
  std::vector<double> sorted(first_coordinate.data(), first_coordinate.data() + n);
  std::sort(sorted.begin(), sorted.end());
  // Exactly `forced` values lie strictly above the (n - forced)-th order statistic.
  return sorted[n - forced - 1];
}

namespace {

void draw_context_pair(CounterRng& rng, int d, double rho, Eigen::Ref<Eigen::VectorXd> x,
                       Eigen::Ref<Eigen::VectorXd> x_lag) {
  for (int j = 0; j < d; ++j) x_lag[j] = rng.normal();
  for (int j = 0; j < d; ++j) x[j] = rho * x_lag[j] + kCurrentNoiseSd * rng.normal();
  x[0] = kCurrentNoiseSd * rng.normal();
}

}  // namespace

SynthData generate(const SynthConfig& config, const SynthEnv& env) {
  config.validate();
  if (env.d != config.d || env.num_actions != config.num_actions)
    throw InvalidInput("environment dimensions do not match the config");
  const int n = config.n;
  const int d = config.d;
  CounterRng rng(derive_seed(config.data_seed, 0x64617461));
  Eigen::MatrixXd xs(n, d), lags(n, d);
  Eigen::VectorXd x(d), x_lag(d);
  for (int i = 0; i < n; ++i) {
    draw_context_pair(rng, d, config.lag_rho, x, x_lag);
    xs.row(i) = x.transpose();
    lags.row(i) = x_lag.transpose();
  }
  const double c_r = violation_threshold(xs.col(0), config.violation_ratio);

  std::vector<LaggedSample> samples;
  samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    LaggedSample s;
    s.x = xs.row(i).transpose();
    s.x_lags = {lags.row(i).transpose()};
    const Eigen::VectorXd p = logging_policy_probs(env, s.x, config.logging_beta, c_r, config.exploration_floor);
    s.a = rng.categorical(p, config.num_actions);
    s.logged_propensity = p[s.a];
    s.r = mean_reward(env, s.x, s.x_lags[0], s.a, config.mix_lambda, config.interaction_eta) + rng.normal();
    samples.push_back(std::move(s));
  }
  return SynthData{LaggedDataset(std::move(samples), d, config.num_actions, {"1"}), c_r};
}

ContextSample draw_contexts(int m, int d, double rho, std::uint64_t seed) {
  ContextSample out{Eigen::MatrixXd(m, d), Eigen::MatrixXd(m, d)};
  CounterRng rng(derive_seed(seed, 0x637478));
  Eigen::VectorXd x(d), x_lag(d);
  for (int j = 0; j < m; ++j) {
    draw_context_pair(rng, d, rho, x, x_lag);
    out.x.row(j) = x.transpose();
    out.x_lag.row(j) = x_lag.transpose();
  }
  return out;
}

Eigen::MatrixXd mean_reward_table(const SynthEnv& env, const ContextSample& contexts, double mix_lambda,
                                  double interaction_eta) {
  const auto m = contexts.x.rows();
  Eigen::MatrixXd q(m, env.num_actions);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd x = contexts.x.row(j).transpose();
    const Eigen::VectorXd x_lag = contexts.x_lag.row(j).transpose();
    for (int a = 0; a < env.num_actions; ++a) q(j, a) = mean_reward(env, x, x_lag, a, mix_lambda, interaction_eta);
  }
  return q;
}

double true_value_mc(const SynthConfig& config, const SynthEnv& env, const Policy& policy, int m_samples,
                     std::uint64_t seed) {
  if (m_samples < 1) throw InvalidInput("m_samples must be at least 1");
  CounterRng rng(derive_seed(seed, 0x637478));
  Eigen::VectorXd x(config.d), x_lag(config.d);
  double total = 0.0;
  for (int j = 0; j < m_samples; ++j) {
    draw_context_pair(rng, config.d, config.lag_rho, x, x_lag);
    const Eigen::VectorXd pi = policy.probs(x);
    double v = 0.0;
    for (int a = 0; a < config.num_actions; ++a)
      if (pi[a] != 0.0) v += pi[a] * mean_reward(env, x, x_lag, a, config.mix_lambda, config.interaction_eta);
    total += v;
  }
  return total / m_samples;
}

double oracle_best_value(const Eigen::MatrixXd& q_table) { return q_table.rowwise().maxCoeff().mean(); }

double oracle_best_value(const SynthConfig& config, const SynthEnv& env, const ContextSample& test_set) {
  return oracle_best_value(mean_reward_table(env, test_set, config.mix_lambda, config.interaction_eta));
}

double policy_value_on(const Policy& policy, const ContextSample& test_set, const Eigen::MatrixXd& q_table) {
  const Eigen::MatrixXd pi = policy.prob_matrix(test_set.x);
  return (pi.array() * q_table.array()).rowwise().sum().mean();
}

std::string env_to_json(const SynthEnv& env) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
      out.push_back(row);
    }
    return out;
  };
  nlohmann::json doc{{"d", env.d},
                     {"num_actions", env.num_actions},
                     {"g_coef", rows(env.g_coef)},
                     {"h_coef", rows(env.h_coef)},
                     {"u_coef", rows(env.u_coef)}};
  return doc.dump(2);
}

}  // namespace dolce::synth
