#pragma once

#include "dolce/config.hpp"
#include "dolce/core.hpp"
#include "dolce/estimators.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dolce {

/// Runs fn(0..count-1) on up to `jobs` threads. Each index is independent; the
/// exception of the lowest failing index is rethrown.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

// ---------------------------------------------------------------------------
// Estimation on one dataset
// ---------------------------------------------------------------------------

/// Estimator tags: DM, IPS, DR, DOLCE (reward model from the config),
/// DOLCE_PLAIN, DOLCE_MTRI.
const std::vector<std::string>& ope_estimator_tags();

struct EstimateBundle {
  std::vector<EstimateReport> reports;  // in the requested order, skipped ones omitted
  std::vector<double> alc;              // per lag, from the last DOLCE fit
  std::vector<std::vector<double>> weight_quantiles;  // per lag: min, p10, p50, p90, p99, max
  std::vector<std::string> notes;
};

/// Cross-fitted estimates for every requested tag. DOLCE tags are skipped with
/// a note when the data has no lag columns.
EstimateBundle estimate_all(const LaggedDataset& data, const MatrixXd& pi, const std::vector<std::string>& estimators,
                            const NuisanceOptions& options, double tau, double level);

/// Policy specification (JSON):
///   {"type": "uniform"}
///   {"type": "linear_softmax", "theta": [[...], ...]}         |A| x (d+1)
///   {"type": "eps_greedy_linear", "weights": [[...]], "epsilon": 0.1}
///   {"type": "tabular", "table": [[...], ...]}
///   {"type": "synthetic_target", "env_seed": 1, "epsilon": 0.1}
Policy policy_from_spec(const std::string& json_text, int d, int num_actions);
Policy load_policy_spec(const std::string& path, int d, int num_actions);

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct OpeReplicate {
  double grid_value;
  int replication;
  std::string estimator;
  double estimate, se, ci_low, ci_high, ess;
  bool covered;
};

struct OpeRow {
  std::string sweep_var;
  double value;
  std::string estimator;
  double bias, variance, mse, coverage, mean_ess;
  double mean_estimate, true_value, mean_se, mc_se;
  int replications;
};

struct OpeSweepResult {
  std::vector<OpeRow> rows;
  std::vector<OpeReplicate> replicates;
  std::vector<double> true_values;  // per grid value
  std::vector<double> mean_alc;     // per grid value, DOLCE lag 1
};

OpeSweepResult run_ope_sweep(const RunConfig& config, int jobs);

struct OplReplicate {
  double grid_value;
  int replication;
  std::string estimator;
  double ni, osi, regret, v_learned, v_logging, v_star;
  std::vector<double> grad_norms;  // per training step
};

struct OplRow {
  std::string sweep_var;
  double value;
  std::string estimator;
  double mean_ni, se_ni, mean_osi, se_osi, mean_regret, se_regret;
  int replications;
  int ni_missing;
};

struct OplSweepResult {
  std::vector<OplRow> rows;
  std::vector<OplReplicate> replicates;
};

OplSweepResult run_opl_sweep(const RunConfig& config, int jobs);

/// Grid values of a config (the base value when the grid is empty).
std::vector<double> grid_values(const RunConfig& config);

std::string ope_results_csv(const OpeSweepResult& result, const RunConfig& config);
std::string ope_replicates_csv(const OpeSweepResult& result);
std::string opl_results_csv(const OplSweepResult& result, const RunConfig& config);
std::string opl_replicates_csv(const OplSweepResult& result);
/// Per-step gradient norms: value, replication, estimator, step, grad_norm.
std::string opl_trajectory_csv(const OplSweepResult& result);

// ---------------------------------------------------------------------------
// Commands. Each writes into out_dir and returns a process exit status.
// ---------------------------------------------------------------------------

int cmd_synth_ope(const RunConfig& config, const std::string& out_dir, int jobs, std::ostream& log);
int cmd_synth_opl(const RunConfig& config, const std::string& out_dir, int jobs, std::ostream& log);
int cmd_estimate(const RunConfig& config, const std::string& out_dir, std::ostream& log);
int cmd_oracle_check(const RunConfig& config, const std::string& out_dir, int jobs, std::ostream& log);
/// Writes one synthetic dataset (data.csv) and its environment (env.json).
int cmd_generate(const RunConfig& config, const std::string& out_dir, std::ostream& log);

}  // namespace dolce
