#pragma once

#include "dolce/nuisance.hpp"
#include "dolce/opl.hpp"
#include "dolce/synthgen.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dolce {

// Run configuration. The file format is INI with one section per module:
//
//   [synth]     n, d, num_actions, r, mix_lambda, eta, beta, rho, epsilon, env_seed, data_seed
//   [nuisance]  folds, reg, p_min, clip, mtri_penalty, gram_eps, alc_reg, reward_model, basis, knots,
//               tau, level
//   [train]     steps, step_size, exploration_floor, init_seed, init_scale, dolce_reward
//   [sweep]     var, grid, replications, estimators, truth_samples, test_size
//   [estimate]  data, policy
//   [oracle]    fixtures, seeds
//
// Overrides use the same dotted names: --set synth.r=0.7.
struct RunConfig {
  synth::SynthConfig synth;
  NuisanceOptions nuisance;
  TrainConfig train;
  double level = 0.95;

  std::string sweep_var = "r";
  std::vector<double> grid;  // empty: the single base value
  int replications = 100;
  std::vector<std::string> estimators;  // empty: command default
  int truth_samples = 200000;
  int test_size = 10000;

  std::string data_path;
  std::string policy_path;

  std::string fixture_dir = "fixtures/oracle";
  int oracle_seeds = 100;

  /// Throws InvalidConfig when a field is out of range.
  void validate() const;
};

/// Sets one dotted key. Throws InvalidConfig for an unknown key or a bad value.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses INI text; every unknown key is listed in one InvalidConfig message.
void apply_ini(RunConfig& config, const std::string& text);
RunConfig load_config(const std::string& path);

/// Applies "key=value" overrides in order.
void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides);

/// Canonical "key=value" lines (sorted) covering every setting.
std::string canonical_text(const RunConfig& config);
/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Sweep variable names accepted by sweep.var.
const std::vector<std::string>& sweep_variables();
/// Writes value into the synthetic config field named by var.
void set_sweep_value(synth::SynthConfig& config, const std::string& var, double value);
double get_sweep_value(const synth::SynthConfig& config, const std::string& var);

}  // namespace dolce
