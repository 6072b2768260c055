#include "dolce/config.hpp"

#include "dolce/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dolce {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw InvalidConfig("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw InvalidConfig("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw InvalidConfig("'" + key + "' expects an unsigned 64-bit integer, got '" + v + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string kind_name(RewardModelKind k) { return k == RewardModelKind::Mtri ? "mtri" : "plain"; }

RewardModelKind parse_kind(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "mtri") return RewardModelKind::Mtri;
  if (t == "plain") return RewardModelKind::Plain;
  throw InvalidConfig("'" + key + "' expects 'plain' or 'mtri', got '" + v + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field double_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_double(k, v); },
          [member](const RunConfig& c) { return fmt(member(c)); }};
}

template <typename Member>
Field int_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<int>(parse_int(k, v));
          },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Field u64_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_u64(k, v); },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Field string_field(Member member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { member(c) = trim(v); },
          [member](const RunConfig& c) { return member(c); }};
}

#define DOLCE_MEMBER(path) [](auto& c) -> auto& { return c.path; }

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["synth.n"] = int_field(DOLCE_MEMBER(synth.n));
    f["synth.d"] = int_field(DOLCE_MEMBER(synth.d));
    f["synth.num_actions"] = int_field(DOLCE_MEMBER(synth.num_actions));
    f["synth.r"] = double_field(DOLCE_MEMBER(synth.violation_ratio));
    f["synth.mix_lambda"] = double_field(DOLCE_MEMBER(synth.mix_lambda));
    f["synth.eta"] = double_field(DOLCE_MEMBER(synth.interaction_eta));
    f["synth.beta"] = double_field(DOLCE_MEMBER(synth.logging_beta));
    f["synth.rho"] = double_field(DOLCE_MEMBER(synth.lag_rho));
    f["synth.epsilon"] = double_field(DOLCE_MEMBER(synth.target_epsilon));
    f["synth.env_seed"] = u64_field(DOLCE_MEMBER(synth.env_seed));
    f["synth.data_seed"] = u64_field(DOLCE_MEMBER(synth.data_seed));

    f["nuisance.folds"] = int_field(DOLCE_MEMBER(nuisance.num_folds));
    f["nuisance.reg"] = double_field(DOLCE_MEMBER(nuisance.reg));
    f["nuisance.p_min"] = double_field(DOLCE_MEMBER(nuisance.p_min));
    f["nuisance.clip"] = double_field(DOLCE_MEMBER(nuisance.clip));
    f["nuisance.mtri_penalty"] = double_field(DOLCE_MEMBER(nuisance.mtri_penalty));
    f["nuisance.gram_eps"] = double_field(DOLCE_MEMBER(nuisance.gram_eps));
    f["nuisance.alc_reg"] = double_field(DOLCE_MEMBER(nuisance.alc_reg));
    f["nuisance.reward_model"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.nuisance.reward_kind = parse_kind(k, v); },
        [](const RunConfig& c) { return kind_name(c.nuisance.reward_kind); }};
    f["nuisance.basis"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                             const std::string t = trim(v);
                             if (t != "linear" && t != "step" && t != "linear+step")
                               throw InvalidConfig("'" + k + "' expects linear, step or linear+step, got '" + v + "'");
                             c.nuisance.basis.linear = t != "step";
                             if (t == "linear") c.nuisance.basis.knots.clear();
                             else if (c.nuisance.basis.knots.empty()) c.nuisance.basis.knots = {0.5};
                           },
                           [](const RunConfig& c) -> std::string {
                             if (c.nuisance.basis.knots.empty()) return "linear";
                             return c.nuisance.basis.linear ? "linear+step" : "step";
                           }};
    f["nuisance.knots"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                             c.nuisance.basis.knots.clear();
                             for (const std::string& item : split_list(v))
                               c.nuisance.basis.knots.push_back(parse_double(k, item));
                           },
                           [](const RunConfig& c) {
                             std::vector<std::string> items;
                             for (double t : c.nuisance.basis.knots) items.push_back(fmt(t));
                             return join(items);
                           }};
    f["nuisance.tau"] = double_field(DOLCE_MEMBER(train.tau));
    f["nuisance.level"] = double_field(DOLCE_MEMBER(level));

    f["train.steps"] = int_field(DOLCE_MEMBER(train.steps));
    f["train.step_size"] = double_field(DOLCE_MEMBER(train.step_size));
    f["train.exploration_floor"] = double_field(DOLCE_MEMBER(train.exploration_floor));
    f["train.init_seed"] = u64_field(DOLCE_MEMBER(train.init_seed));
    f["train.init_scale"] = double_field(DOLCE_MEMBER(train.init_scale));
    f["train.dolce_reward"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.train.dolce_reward = parse_kind(k, v); },
        [](const RunConfig& c) { return kind_name(c.train.dolce_reward); }};

    f["sweep.var"] = string_field(DOLCE_MEMBER(sweep_var));
    f["sweep.grid"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.grid.clear();
                         for (const std::string& item : split_list(v)) c.grid.push_back(parse_double(k, item));
                       },
                       [](const RunConfig& c) {
                         std::vector<std::string> items;
                         for (double g : c.grid) items.push_back(fmt(g));
                         return join(items);
                       }};
    f["sweep.replications"] = int_field(DOLCE_MEMBER(replications));
    f["sweep.estimators"] = {
        [](RunConfig& c, const std::string&, const std::string& v) { c.estimators = split_list(v); },
        [](const RunConfig& c) { return join(c.estimators); }};
    f["sweep.truth_samples"] = int_field(DOLCE_MEMBER(truth_samples));
    f["sweep.test_size"] = int_field(DOLCE_MEMBER(test_size));

    f["estimate.data"] = string_field(DOLCE_MEMBER(data_path));
    f["estimate.policy"] = string_field(DOLCE_MEMBER(policy_path));
    f["oracle.fixtures"] = string_field(DOLCE_MEMBER(fixture_dir));
    f["oracle.seeds"] = int_field(DOLCE_MEMBER(oracle_seeds));
    return f;
  }();
  return fields;
}

#undef DOLCE_MEMBER

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  nuisance.validate();
  train.validate();
  if (!(level > 0.0 && level < 1.0)) throw InvalidConfig("nuisance.level must lie in (0, 1)");
  const auto& vars = sweep_variables();
  if (std::find(vars.begin(), vars.end(), sweep_var) == vars.end())
    throw InvalidConfig("sweep.var must be one of r, mix_lambda, num_actions, n, interaction_eta");
  if (replications < 1) throw InvalidConfig("sweep.replications must be at least 1");
  if (truth_samples < 1) throw InvalidConfig("sweep.truth_samples must be at least 1");
  if (test_size < 1) throw InvalidConfig("sweep.test_size must be at least 1");
  if (oracle_seeds < 0) throw InvalidConfig("oracle.seeds must be nonnegative");
  for (double g : grid) {
    synth::SynthConfig probe = synth;
    set_sweep_value(probe, sweep_var, g);
    probe.validate();
  }
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = registry().find(trim(key));
  if (it == registry().end()) throw InvalidConfig("unknown config key: " + trim(key));
  it->second.set(config, trim(key), value);
}

void apply_ini(RunConfig& config, const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidConfig(std::string("malformed config: ") + e.what());
  }
  std::vector<std::string> unknown;
  std::vector<std::pair<std::string, std::string>> settings;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      unknown.push_back(section);  // top-level key outside any section
      continue;
    }
    for (const auto& [key, leaf] : body) {
      const std::string dotted = section + "." + key;
      if (registry().count(dotted)) settings.emplace_back(dotted, leaf.data());
      else unknown.push_back(dotted);
    }
  }
  if (!unknown.empty()) throw InvalidConfig("unknown config keys: " + join(unknown));
  for (const auto& [k, v] : settings) apply_setting(config, k, v);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig config;
  apply_ini(config, ss.str());
  return config;
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides) {
  std::vector<std::string> unknown;
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw InvalidConfig("override '" + o + "' is not key=value");
    if (!registry().count(trim(o.substr(0, eq)))) unknown.push_back(trim(o.substr(0, eq)));
  }
  if (!unknown.empty()) throw InvalidConfig("unknown config keys: " + join(unknown));
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    apply_setting(config, o.substr(0, eq), o.substr(eq + 1));
  }
}

std::string canonical_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : registry()) out += key + "=" + field.get(config) + "\n";
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_text(config)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<std::string>& sweep_variables() {
  static const std::vector<std::string> vars{"r", "mix_lambda", "num_actions", "n", "interaction_eta"};
  return vars;
}

void set_sweep_value(synth::SynthConfig& config, const std::string& var, double value) {
  if (var == "r") config.violation_ratio = value;
  else if (var == "mix_lambda") config.mix_lambda = value;
  else if (var == "num_actions") config.num_actions = static_cast<int>(std::lround(value));
  else if (var == "n") config.n = static_cast<int>(std::lround(value));
  else if (var == "interaction_eta") config.interaction_eta = value;
  else throw InvalidConfig("unknown sweep variable '" + var + "'");
}

double get_sweep_value(const synth::SynthConfig& config, const std::string& var) {
  if (var == "r") return config.violation_ratio;
  if (var == "mix_lambda") return config.mix_lambda;
  if (var == "num_actions") return config.num_actions;
  if (var == "n") return config.n;
  if (var == "interaction_eta") return config.interaction_eta;
  throw InvalidConfig("unknown sweep variable '" + var + "'");
}

}  // namespace dolce
