#include "dolce/config.hpp"
#include "dolce/core.hpp"
#include "dolce/error.hpp"
#include "dolce/estimators.hpp"
#include "dolce/experiment.hpp"
#include "dolce/oracle.hpp"
#include "dolce/rng.hpp"
#include "dolce/synthgen.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace dolce;

namespace {

RunConfig config_from(const std::vector<std::string>& overrides) {
  RunConfig c;
  apply_overrides(c, overrides);
  return c;
}

py::dict report_dict(const EstimateReport& r) {
  py::dict d;
  d["estimator"] = r.estimator_name;
  d["value"] = r.value;
  d["se"] = r.se;
  d["ci_low"] = r.ci_low;
  d["ci_high"] = r.ci_high;
  d["ess"] = r.ess;
  d["per_lag_values"] = r.per_lag_values;
  d["alpha"] = r.lag_weights_alpha;
  return d;
}

LaggedDataset make_dataset(const MatrixXd& x, const std::vector<MatrixXd>& lags, const VectorXi& actions,
                           const VectorXd& rewards, int num_actions, const std::optional<VectorXd>& propensities) {
  const Eigen::Index n = x.rows();
  if (actions.size() != n || rewards.size() != n) throw InvalidInput("x, actions and rewards differ in length");
  if (propensities && propensities->size() != n) throw InvalidInput("propensities differ in length");
  std::vector<LaggedSample> samples(static_cast<std::size_t>(n));
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < lags.size(); ++k) {
    if (lags[k].rows() != n || lags[k].cols() != x.cols()) throw InvalidInput("lag matrices must match x in shape");
    labels.push_back(std::to_string(k + 1));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    LaggedSample& s = samples[static_cast<std::size_t>(i)];
    s.x = x.row(i).transpose();
    for (const MatrixXd& lag : lags) s.x_lags.push_back(lag.row(i).transpose());
    s.a = actions[i];
    s.r = rewards[i];
    if (propensities) s.logged_propensity = (*propensities)[i];
  }
  return LaggedDataset(std::move(samples), static_cast<int>(x.cols()), num_actions, std::move(labels));
}

}  // namespace

PYBIND11_MODULE(_dolce, m) {
  m.doc() = "Lag-aware doubly robust off-policy evaluation and learning.";

  // Translators run newest first, so the base class is registered before its subclasses.
  const auto base = py::register_exception<Error>(m, "DolceError", PyExc_RuntimeError);
  py::register_exception<InvalidConfig>(m, "InvalidConfig", base);
  py::register_exception<InvalidInput>(m, "InvalidInput", base);

  m.def(
      "generate",
      [](const std::vector<std::string>& overrides) {
        const RunConfig c = config_from(overrides);
        c.synth.validate();
        const synth::SynthEnv env = synth::make_env(c.synth);
        const synth::SynthData sd = synth::generate(c.synth, env);
        const Policy target = synth::target_policy(env, c.synth.target_epsilon);
        py::dict d;
        d["x"] = sd.data.contexts();
        d["x_lag"] = sd.data.lag_contexts(0);
        d["actions"] = sd.data.actions();
        d["rewards"] = sd.data.rewards();
        d["propensities"] = sd.data.logged_propensities();
        d["target_probs"] = target.prob_matrix(sd.data.contexts());
        d["threshold"] = sd.c_r;
        return d;
      },
      py::arg("overrides") = std::vector<std::string>{},
      "One synthetic dataset; overrides are 'synth.key=value' strings.");

  m.def(
      "true_value",
      [](const std::vector<std::string>& overrides, int samples) {
        const RunConfig c = config_from(overrides);
        const synth::SynthEnv env = synth::make_env(c.synth);
        return synth::true_value_mc(c.synth, env, synth::target_policy(env, c.synth.target_epsilon), samples,
                                    derive_seed(c.synth.env_seed, 0x7472757468ULL));
      },
      py::arg("overrides") = std::vector<std::string>{}, py::arg("samples") = 200000,
      "Monte Carlo value of the synthetic target policy.");

  m.def(
      "estimate",
      [](const MatrixXd& x, const std::vector<MatrixXd>& lags, const VectorXi& actions, const VectorXd& rewards,
         const MatrixXd& target_probs, const std::optional<VectorXd>& propensities,
         const std::vector<std::string>& estimators, const std::vector<std::string>& overrides,
         std::uint64_t fold_seed) {
        const RunConfig c = config_from(overrides);
        const LaggedDataset data =
            make_dataset(x, lags, actions, rewards, static_cast<int>(target_probs.cols()), propensities);
        if (target_probs.rows() != x.rows()) throw InvalidInput("target_probs must have one row per sample");
        NuisanceOptions o = c.nuisance;
        o.fold_seed = fold_seed;
        const EstimateBundle b = estimate_all(data, target_probs, estimators, o, c.train.tau, c.level);
        py::list reports;
        for (const EstimateReport& r : b.reports) reports.append(report_dict(r));
        py::dict out;
        out["reports"] = reports;
        out["alc"] = b.alc;
        out["notes"] = b.notes;
        return out;
      },
      py::arg("x"), py::arg("lags"), py::arg("actions"), py::arg("rewards"), py::arg("target_probs"),
      py::arg("propensities") = py::none(),
      py::arg("estimators") = std::vector<std::string>{"DM", "IPS", "DR", "DOLCE"},
      py::arg("overrides") = std::vector<std::string>{}, py::arg("fold_seed") = 0,
      "Cross-fitted estimates; lags is a list of n x d arrays (most recent first).");

  m.def(
      "ope_sweep_csv",
      [](const std::vector<std::string>& overrides, int jobs) {
        const RunConfig c = config_from(overrides);
        py::gil_scoped_release release;
        return ope_results_csv(run_ope_sweep(c, jobs), c);
      },
      py::arg("overrides") = std::vector<std::string>{}, py::arg("jobs") = 1, "OPE sweep; returns results.csv text.");

  m.def(
      "opl_sweep_csv",
      [](const std::vector<std::string>& overrides, int jobs) {
        const RunConfig c = config_from(overrides);
        py::gil_scoped_release release;
        return opl_results_csv(run_opl_sweep(c, jobs), c);
      },
      py::arg("overrides") = std::vector<std::string>{}, py::arg("jobs") = 1, "OPL sweep; returns results.csv text.");

  m.def(
      "identity_suite",
      [](std::uint64_t seed, int num_x0, int num_x, int num_actions) {
        py::list out;
        for (const oracle::CheckResult& c :
             oracle::identity_suite(oracle::random_env(seed, num_x0, num_x, num_actions), seed)) {
          py::dict d;
          d["name"] = c.name;
          d["residual"] = c.residual;
          d["tolerance"] = c.tolerance;
          d["passed"] = c.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed"), py::arg("num_x0") = 3, py::arg("num_x") = 4, py::arg("num_actions") = 3,
      "Exact identity checks on one random finite environment.");

  m.def("softmin_weights", &softmin_weights, py::arg("alc"), py::arg("tau"));
  m.def("ess", &ess, py::arg("weights"));
  m.def(
      "config_hash", [](const std::vector<std::string>& overrides) { return config_hash(config_from(overrides)); },
      py::arg("overrides") = std::vector<std::string>{});
}
