#include "dolce/core.hpp"
#include "dolce/csv_io.hpp"
#include "dolce/error.hpp"
#include "dolce/rng.hpp"
#include "dolce/synthgen.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace dolce;

namespace {

MatrixXd random_theta(int num_actions, int d, std::uint64_t seed) {
  CounterRng rng(seed);
  MatrixXd theta(num_actions, d + 1);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = rng.normal();
  return theta;
}

VectorXd random_vector(int d, std::uint64_t seed) {
  CounterRng rng(seed);
  VectorXd x(d);
  for (int j = 0; j < d; ++j) x[j] = 2.0 * rng.normal();
  return x;
}

// log pi_theta(a|x) written out directly.
double log_prob(const MatrixXd& theta, const VectorXd& x, int a) {
  VectorXd logits = theta.leftCols(x.size()) * x + theta.col(x.size());
  const double m = logits.maxCoeff();
  return logits[a] - m - std::log((logits.array() - m).exp().sum());
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("uniform and zero-theta softmax give the uniform vector") {
    const VectorXd p = policy_prob(Policy::uniform(5), VectorXd::Zero(3));
    for (int a = 0; a < 5; ++a) CHECK(p[a] == doctest::Approx(0.2).epsilon(1e-15));
    const VectorXd q = policy_prob(Policy::linear_softmax(MatrixXd::Zero(4, 3)), VectorXd::Ones(2));
    for (int a = 0; a < 4; ++a) CHECK(q[a] == doctest::Approx(0.25).epsilon(1e-15));
  }

  TEST_CASE("epsilon-greedy puts 1 - eps + eps/|A| on the best action") {
    auto scores = [](const VectorXd&) {
      VectorXd s(5);
      s << 0.1, 0.3, 0.9, -1.0, 0.0;
      return s;
    };
    const VectorXd p = policy_prob(Policy::eps_greedy(scores, 5, 2, 0.1), VectorXd::Zero(2));
    CHECK(p[2] == doctest::Approx(0.92).epsilon(1e-14));
    for (int a : {0, 1, 3, 4}) CHECK(p[a] == doctest::Approx(0.02).epsilon(1e-14));
  }

  TEST_CASE("tabular policy reads the context id") {
    MatrixXd table(2, 3);
    table << 0.2, 0.3, 0.5, 1.0, 0.0, 0.0;
    const Policy pol = Policy::tabular(table);
    CHECK(policy_prob(pol, VectorXd::Constant(1, 1.0))[0] == 1.0);
    CHECK(policy_prob(pol, VectorXd::Constant(1, 0.0))[2] == 0.5);
    CHECK_THROWS_AS(policy_prob(pol, VectorXd::Constant(1, 2.0)), InvalidInput);
  }

  TEST_CASE("dimension mismatch is rejected") {
    const Policy pol = Policy::linear_softmax(MatrixXd::Zero(2, 4));
    CHECK_THROWS_AS(policy_prob(pol, VectorXd::Zero(2)), InvalidInput);
  }

  TEST_CASE("probabilities form a simplex vector") {
    for (std::uint64_t s = 1; s <= 50; ++s) {
      const Policy pol = Policy::linear_softmax(5.0 * random_theta(4, 3, s));
      const VectorXd p = policy_prob(pol, random_vector(3, s + 100));
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      CHECK(p.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("softmax survives large logits") {
    VectorXd l(3);
    l << 1000.0, 999.0, -1000.0;
    const VectorXd p = softmax(l);
    CHECK(p.allFinite());
    CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  }

  TEST_CASE("score at theta = 0 with two actions and no features") {
    const Policy pol = Policy::linear_softmax(MatrixXd::Zero(2, 1));
    const VectorXd s = policy_score(pol, VectorXd(0), 0);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(-0.5).epsilon(1e-15));
  }

  TEST_CASE("score has zero mean under the policy") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      const Policy pol = Policy::linear_softmax(random_theta(4, 3, seed));
      const VectorXd x = random_vector(3, seed + 7);
      const VectorXd p = policy_prob(pol, x);
      VectorXd total = VectorXd::Zero(4 * 4);
      for (int a = 0; a < 4; ++a) total += p[a] * policy_score(pol, x, a);
      CHECK(total.cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("score matches central finite differences of log pi") {
    const int A = 3, d = 2;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const MatrixXd theta = random_theta(A, d, seed);
      const VectorXd x = random_vector(d, seed + 11);
      for (int a = 0; a < A; ++a) {
        const VectorXd s = policy_score(Policy::linear_softmax(theta), x, a);
        for (int b = 0; b < A; ++b)
          for (int j = 0; j <= d; ++j) {
            MatrixXd tp = theta, tm = theta;
            tp(b, j) += 1e-6;
            tm(b, j) -= 1e-6;
            const double fd = (log_prob(tp, x, a) - log_prob(tm, x, a)) / 2e-6;
            CHECK(std::abs(fd - s[b * (d + 1) + j]) < 1e-4 * std::max(1.0, std::abs(fd)));
          }
      }
    }
  }

  TEST_CASE("score is refused for non-softmax policies") {
    CHECK_THROWS_AS(policy_score(Policy::uniform(3), VectorXd::Zero(2), 0), UnsupportedPolicy);
  }

  TEST_CASE("CSV round trip reproduces every value") {
    std::vector<LaggedSample> samples;
    for (int i = 0; i < 3; ++i) {
      LaggedSample s;
      s.x = VectorXd::LinSpaced(2, 0.1 * i, 1.0 / 3.0 + i);
      s.x_lags = {VectorXd::Constant(2, -std::sqrt(2.0) * i)};
      s.a = i % 2;
      s.r = std::exp(0.3 * i) - 1.0;
      s.logged_propensity = 1.0 / (3.0 + i);
      samples.push_back(s);
    }
    const LaggedDataset data(samples, 2, 2, {"1"});
    std::stringstream buf;
    write_csv(data, buf);
    const LaggedDataset back = parse_csv(buf);
    REQUIRE(back.size() == 3);
    CHECK(back.dim() == 2);
    CHECK(back.num_lags() == 1);
    CHECK(back.lag_labels()[0] == "1");
    CHECK(back.contexts() == data.contexts());
    CHECK(back.lag_contexts(0) == data.lag_contexts(0));
    CHECK(back.actions() == data.actions());
    CHECK(back.rewards() == data.rewards());
    REQUIRE(back.has_logged_propensities());
    CHECK(back.logged_propensities() == data.logged_propensities());
  }

  TEST_CASE("missing action column is a parse error naming it") {
    std::stringstream in("x_0,x_1,reward\n0.1,0.2,1\n");
    try {
      parse_csv(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("action") != std::string::npos);
      CHECK(e.row() == 1);
    }
  }

  TEST_CASE("non-numeric cell reports its row") {
    std::stringstream in("x_0,action,reward\n0.1,0,1\n0.2,zero,1\n");
    try {
      parse_csv(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
    }
  }

  TEST_CASE("dataset without lag columns loads with zero lags") {
    std::stringstream in("x_0,action,reward\n0.5,1,2\n");
    const LaggedDataset data = parse_csv(in);
    CHECK(data.num_lags() == 0);
    CHECK(data.num_actions() == 2);
    CHECK_FALSE(data.has_logged_propensities());
  }

  TEST_CASE("synthetic export reloads with matching dimensions") {
    synth::SynthConfig c;
    const synth::SynthData sd = synth::generate(c, synth::make_env(c));
    std::stringstream buf;
    write_csv(sd.data, buf);
    const LaggedDataset back = parse_csv(buf, c.num_actions);
    CHECK(back.size() == 1000);
    CHECK(back.dim() == 10);
    CHECK(back.num_lags() == 1);
    CHECK(back.contexts() == sd.data.contexts());
    CHECK(back.rewards() == sd.data.rewards());
  }

  TEST_CASE("samples inconsistent with the declared shape are rejected") {
    LaggedSample s;
    s.x = VectorXd::Zero(3);
    s.x_lags = {VectorXd::Zero(2)};
    s.a = 0;
    CHECK_THROWS_AS(LaggedDataset({s}, 3, 2, {"1"}), InvalidInput);
    s.x_lags = {VectorXd::Zero(3)};
    s.a = 2;
    CHECK_THROWS_AS(LaggedDataset({s}, 3, 2, {"1"}), InvalidInput);
  }

  TEST_CASE("counter rng is addressable and deterministic") {
    CounterRng a(42), b(42), c(43);
    for (int i = 0; i < 10; ++i) {
      const auto va = a(), vb = b();
      CHECK(va == vb);
      CHECK(va != c());
    }
    CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  }
}
