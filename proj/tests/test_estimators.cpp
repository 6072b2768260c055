#include "dolce/error.hpp"
#include "dolce/estimators.hpp"
#include "dolce/oracle.hpp"
#include "dolce/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace dolce;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

struct Toy {
  MatrixXd pi;
  VectorXi actions;
  VectorXd rewards;
  VectorXd propensities;
  MatrixXd q_hat;
};

Toy toy(int n, std::uint64_t seed) {
  CounterRng rng(seed);
  Toy t{MatrixXd(n, 3), VectorXi(n), VectorXd(n), VectorXd(n), MatrixXd(n, 3)};
  for (int i = 0; i < n; ++i) {
    VectorXd p(3);
    for (int a = 0; a < 3; ++a) p[a] = 0.1 + rng.uniform();
    t.pi.row(i) = (p / p.sum()).transpose();
    t.actions[i] = static_cast<int>(rng() % 3);
    t.rewards[i] = rng.normal();
    t.propensities[i] = 0.2 + 0.6 * rng.uniform();
    for (int a = 0; a < 3; ++a) t.q_hat(i, a) = rng.normal();
  }
  return t;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("normal quantile") {
    CHECK(normal_quantile_two_sided(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK_THROWS_AS(normal_quantile_two_sided(1.0), InvalidConfig);
  }

  TEST_CASE("influence SE and ESS hand cases") {
    VectorXd phi(2);
    phi << 1.0, -1.0;
    const ConfidenceInterval ci = influence_ci(phi, 0.0, 0.95);
    CHECK(ci.se == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-15));
    CHECK(ci.high == doctest::Approx(1.959963984540054 * std::sqrt(2.0) / 2.0).epsilon(1e-14));
    VectorXd w(2);
    w << 1.0, 3.0;
    CHECK(ess(w) == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(ess(VectorXd::Ones(7)) == 7.0);
    CHECK_THROWS_AS(ess(VectorXd::Zero(3)), InvalidInput);
    w << 1.0, -1.0;
    CHECK_THROWS_AS(ess(w), InvalidInput);
  }

  TEST_CASE("DM: constant model and point-mass policy") {
    const Toy t = toy(50, 1);
    const EstimateReport c = dm_estimate(t.pi, MatrixXd::Constant(50, 3, 1.25));
    CHECK(c.value == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(c.se < 1e-14);
    MatrixXd point = MatrixXd::Zero(50, 3);
    point.col(2).setOnes();
    CHECK(dm_estimate(point, t.q_hat).value == doctest::Approx(t.q_hat.col(2).mean()).epsilon(1e-14));
  }

  TEST_CASE("IPS on-policy reduces to the sample mean with full ESS") {
    const Toy t = toy(40, 2);
    VectorXd props(40);
    for (int i = 0; i < 40; ++i) props[i] = t.pi(i, t.actions[i]);
    const EstimateReport r = ips_estimate(t.pi, t.actions, t.rewards, props);
    CHECK(r.value == doctest::Approx(t.rewards.mean()).epsilon(1e-14));
    CHECK(r.ess == doctest::Approx(40.0).epsilon(1e-14));
  }

  TEST_CASE("invalid propensities are reported with their sample") {
    Toy t = toy(10, 3);
    t.propensities[4] = 0.0;
    try {
      ips_estimate(t.pi, t.actions, t.rewards, t.propensities);
      FAIL("expected InvalidPropensity");
    } catch (const InvalidPropensity& e) {
      CHECK(e.sample() == 4);
    }
  }

  TEST_CASE("DR with a zero model is IPS bit for bit") {
    for (std::uint64_t s = 1; s <= 10; ++s) {
      const Toy t = toy(200, s);
      const EstimateReport ips = ips_estimate(t.pi, t.actions, t.rewards, t.propensities);
      const EstimateReport dr = dr_estimate(t.pi, t.actions, t.rewards, t.propensities, MatrixXd::Zero(200, 3));
      CHECK(same_bits(ips.value, dr.value));
      CHECK(same_bits(ips.se, dr.se));
    }
  }

  TEST_CASE("DOLCE limits: unit weights with a zero model, zero weights") {
    const Toy t = toy(60, 4);
    const EstimateReport mean_r = dolce_lag_estimate(t.pi, t.actions, t.rewards, VectorXd::Ones(60), MatrixXd::Zero(60, 3));
    CHECK(mean_r.value == doctest::Approx(t.rewards.mean()).epsilon(1e-14));
    const EstimateReport dm_like = dolce_lag_estimate(t.pi, t.actions, t.rewards, VectorXd::Zero(60), t.q_hat);
    CHECK(dm_like.value == doctest::Approx(dm_estimate(t.pi, t.q_hat).value).epsilon(1e-14));
  }

  TEST_CASE("softmin weights") {
    CHECK(softmin_weights(VectorXd::Constant(1, 3.0), 0.05)[0] == 1.0);
    const VectorXd eq = softmin_weights(VectorXd::Constant(4, 0.7), 0.05);
    CHECK((eq.array() - 0.25).abs().maxCoeff() < 1e-15);
    VectorXd alc(3);
    alc << 0.2, 0.1, 0.3;
    const VectorXd hot = softmin_weights(alc, 1e-9);
    CHECK(std::abs(hot[1] - 1.0) < 1e-12);
    CHECK(hot[0] < 1e-12);
    CHECK(hot[2] < 1e-12);
    CHECK_THROWS_AS(softmin_weights(alc, 0.0), InvalidConfig);
  }

  TEST_CASE("aggregation: single lag is the lag estimate; identical lags give that value") {
    const Toy t = toy(80, 5);
    const EstimateReport one = dolce_lag_estimate(t.pi, t.actions, t.rewards, VectorXd::Ones(80), t.q_hat);
    const EstimateReport agg = aggregate_lags({one}, VectorXd::Ones(1));
    CHECK(same_bits(agg.value, one.value));
    CHECK(same_bits(agg.se, one.se));
    VectorXd alpha(3);
    alpha << 0.2, 0.5, 0.3;
    const EstimateReport three = aggregate_lags({one, one, one}, alpha);
    CHECK(three.value == doctest::Approx(one.value).epsilon(1e-14));
    CHECK(three.per_lag_values.size() == 3);
  }

  TEST_CASE("clipping gap bound") {
    CounterRng rng(6);
    const int n = 300;
    const Toy t = toy(n, 6);
    VectorXd raw(n);
    for (int i = 0; i < n; ++i) raw[i] = 30.0 * rng.uniform();
    for (double d1 : {1.0, 5.0, 10.0}) {
      const double d2 = 2.0 * d1;
      const double v1 = dolce_lag_estimate(t.pi, t.actions, t.rewards, raw.cwiseMin(d1), t.q_hat).value;
      const double v2 = dolce_lag_estimate(t.pi, t.actions, t.rewards, raw.cwiseMin(d2), t.q_hat).value;
      CHECK(std::abs(v1 - v2) <= clipping_gap_bound(raw, t.actions, t.rewards, t.q_hat, d1, d2) + 1e-14);
    }
  }

  TEST_CASE("DM, DR and oracle DOLCE on a finite environment") {
    // Full support env for DR double robustness; a violating env for DOLCE against IPS.
    const oracle::DiscreteEnv full = oracle::random_env(31, 3, 4, 3, 2, 0.0);
    const oracle::PolicyTable pi = oracle::random_policy(full, 31);
    const double v = oracle::exact_value(full, pi);
    const int n = 10000;
    std::vector<int> xs, x0s;
    const LaggedDataset data = oracle::sample_dataset(full, n, 8, &xs, &x0s);
    MatrixXd pim(n, 3), q(n, 3), wrong(n, 3);
    const MatrixXd qx = oracle::current_mean_reward(full);
    for (int i = 0; i < n; ++i) {
      pim.row(i) = pi.row(xs[i]);
      q.row(i) = qx.row(xs[i]);
      wrong.row(i) = qx.row(xs[i]).array() + 1.0;
    }
    const EstimateReport dm = dm_estimate(pim, q);
    CHECK(std::abs(dm.value - v) < 3.0 * dm.se + 1e-12);
    const EstimateReport dr_wrong = dr_estimate(pim, data.actions(), data.rewards(), data.logged_propensities(), wrong);
    CHECK(std::abs(dr_wrong.value - v) < 3.0 * dr_wrong.se);
    VectorXd on_policy(n);
    for (int i = 0; i < n; ++i) on_policy[i] = full.pi0(xs[i], data.actions()[i]);
    const EstimateReport dr_on = dr_estimate(full.pi0(xs, Eigen::all), data.actions(), data.rewards(), on_policy, q);
    CHECK(std::abs(dr_on.value - oracle::exact_value(full, full.pi0)) < 3.0 * dr_on.se);
  }

  TEST_CASE("two lags: softmin follows the lag with the smaller ALC") {
    const oracle::DiscreteEnv env = oracle::random_env(17, 3, 4, 3, 2, 0.3);
    const oracle::PolicyTable pi = oracle::random_policy(env, 17);
    const int n = 20000;
    std::vector<int> xs, x0s;
    const LaggedDataset data = oracle::sample_dataset(env, n, 9, &xs, &x0s);
    const MatrixXd w = oracle::oracle_lag_weights(env, pi, std::numeric_limits<double>::infinity());
    const oracle::Table3 good = oracle::residual_invariant_model(env, 4);
    const oracle::Table3 bad = oracle::misspecified_model(env, 4, 2.0);
    MatrixXd pim(n, 3), q_good(n, 3), q_bad(n, 3);
    VectorXd w_i(n), res_good(n), res_bad(n);
    for (int i = 0; i < n; ++i) {
      pim.row(i) = pi.row(xs[i]);
      for (int a = 0; a < 3; ++a) {
        q_good(i, a) = good(xs[i], x0s[i], a);
        q_bad(i, a) = bad(xs[i], x0s[i], a);
      }
      const int a = data.actions()[i];
      w_i[i] = w(x0s[i], a);
      res_good[i] = data.rewards()[i] - q_good(i, a);
      res_bad[i] = data.rewards()[i] - q_bad(i, a);
    }
    const EstimateReport lag_good = dolce_lag_estimate(pim, data.actions(), data.rewards(), w_i, q_good);
    const EstimateReport lag_bad = dolce_lag_estimate(pim, data.actions(), data.rewards(), w_i, q_bad);
    // ALC on the sampled encodings: full features see x, lag features only the x0 one-hot.
    MatrixXd full(n, data.dim() * 2), lagf(n, data.dim());
    full << data.contexts(), data.lag_contexts(0);
    lagf << data.lag_contexts(0);
    const FoldAssignment folds = kfold_split(n, 2, 1);
    VectorXd alc(2);
    alc << estimate_alc(full, lagf, data.actions(), res_good, 3, folds, 1e-2),
        estimate_alc(full, lagf, data.actions(), res_bad, 3, folds, 1e-2);
    CHECK(alc[0] < alc[1]);
    const EstimateReport agg = aggregate_lags({lag_good, lag_bad}, softmin_weights(alc, 0.01));
    CHECK(std::abs(agg.value - lag_good.value) < 2.0 * lag_good.se);
    CHECK(std::abs(lag_good.value - oracle::exact_value(env, pi)) < 3.0 * lag_good.se);
  }
}
